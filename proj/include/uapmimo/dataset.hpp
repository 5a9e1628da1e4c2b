#ifndef UAPMIMO_DATASET_HPP
#define UAPMIMO_DATASET_HPP

#include <cstdint>
#include <filesystem>
#include <string>

#include "uapmimo/scenario.hpp"
#include "uapmimo/types.hpp"

namespace uapmimo {

/// Normalized UE positions paired with normalized optimal powers.
///
/// targets has L*(K+1) columns; cell j occupies columns [j*(K+1), (j+1)*(K+1)),
/// the first K are rho_jk / p_max and the last is their sum.
struct Dataset {
  NetworkConfig config;
  std::uint64_t seed = 0;
  RowMatrix inputs;
  RowMatrix targets;
  int regenerated = 0;  // samples redrawn after solver non-convergence

  Eigen::Index size() const { return inputs.rows(); }
  std::uint64_t fingerprint() const { return config.fingerprint(); }

  RowMatrix cell_targets(int cell) const;

  /// Throws DataError if shapes disagree with the config or a per-cell sum
  /// column differs from the sum of its UE columns by more than 1e-9.
  void validate() const;

  /// Rows [first, first + count).
  Dataset slice(Eigen::Index first, Eigen::Index count) const;
};

/// Binary layout (little-endian): "UAPDS", version byte, u32 L, u32 K,
/// u32 input_dim, u64 n_samples, u64 seed, u64 config fingerprint,
/// u32 config text length + config text, then inputs and targets as
/// row-major f64.
std::string serialize_dataset(const Dataset& data);
Dataset deserialize_dataset(const std::string& bytes);
void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace uapmimo

#endif  // UAPMIMO_DATASET_HPP
