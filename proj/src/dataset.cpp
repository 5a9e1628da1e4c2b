#include "uapmimo/dataset.hpp"

#include <cmath>

#include "uapmimo/binary_io.hpp"
#include "uapmimo/error.hpp"

namespace uapmimo {

namespace {
constexpr std::string_view kMagic = "UAPDS";
constexpr std::uint8_t kVersion = 1;
}  // namespace

RowMatrix Dataset::cell_targets(int cell) const {
  const int K = config.n_ues_per_cell;
  if (cell < 0 || cell >= config.n_cells) throw DataError("cell index out of range");
  return targets.middleCols(static_cast<Eigen::Index>(cell) * (K + 1), K + 1);
}

void Dataset::validate() const {
  const int L = config.n_cells;
  const int K = config.n_ues_per_cell;
  if (inputs.cols() != config.input_dim() || targets.cols() != L * (K + 1) ||
      inputs.rows() != targets.rows()) {
    throw DimensionMismatch("dataset shape does not match its config");
  }
  for (Eigen::Index n = 0; n < targets.rows(); ++n) {
    for (int j = 0; j < L; ++j) {
      double s = 0.0;
      for (int k = 0; k < K; ++k) s += targets(n, j * (K + 1) + k);
      if (!(std::abs(targets(n, j * (K + 1) + K) - s) <= 1e-9)) {
        throw DataError("dataset row " + std::to_string(n) + " cell " + std::to_string(j) +
                        ": sum column does not match UE powers");
      }
    }
  }
}

Dataset Dataset::slice(Eigen::Index first, Eigen::Index count) const {
  if (first < 0 || count < 0 || first + count > size()) throw DataError("dataset slice out of range");
  Dataset out;
  out.config = config;
  out.seed = seed;
  out.regenerated = regenerated;
  out.inputs = inputs.middleRows(first, count);
  out.targets = targets.middleRows(first, count);
  return out;
}

std::string serialize_dataset(const Dataset& data) {
  ByteWriter w;
  w.raw(kMagic);
  w.u8(kVersion);
  w.u32(static_cast<std::uint32_t>(data.config.n_cells));
  w.u32(static_cast<std::uint32_t>(data.config.n_ues_per_cell));
  w.u32(static_cast<std::uint32_t>(data.inputs.cols()));
  w.u64(static_cast<std::uint64_t>(data.size()));
  w.u64(data.seed);
  w.u64(data.fingerprint());
  const std::string text = data.config.to_text();
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.raw(text);
  for (Eigen::Index i = 0; i < data.inputs.size(); ++i) w.f64(data.inputs.data()[i]);
  for (Eigen::Index i = 0; i < data.targets.size(); ++i) w.f64(data.targets.data()[i]);
  return w.bytes();
}

Dataset deserialize_dataset(const std::string& bytes) {
  ByteReader r(bytes);
  if (r.raw(kMagic.size()) != kMagic) throw DataError("not a dataset file (bad magic)");
  if (r.u8() != kVersion) throw DataError("unsupported dataset version");
  const auto L = r.u32();
  const auto K = r.u32();
  const auto dim = r.u32();
  const auto n = r.u64();
  Dataset data;
  data.seed = r.u64();
  const auto fingerprint = r.u64();
  const auto text_len = r.u32();
  data.config = parse_config(r.raw(text_len));
  if (static_cast<std::uint32_t>(data.config.n_cells) != L ||
      static_cast<std::uint32_t>(data.config.n_ues_per_cell) != K ||
      static_cast<std::uint32_t>(data.config.input_dim()) != dim) {
    throw DataError("dataset header disagrees with embedded config");
  }
  if (data.config.fingerprint() != fingerprint) throw DataError("dataset config fingerprint mismatch");
  const auto rows = static_cast<Eigen::Index>(n);
  data.inputs.resize(rows, dim);
  data.targets.resize(rows, static_cast<Eigen::Index>(L * (K + 1)));
  for (Eigen::Index i = 0; i < data.inputs.size(); ++i) data.inputs.data()[i] = r.f64();
  for (Eigen::Index i = 0; i < data.targets.size(); ++i) data.targets.data()[i] = r.f64();
  if (!r.at_end()) throw DataError("trailing bytes in dataset file");
  data.validate();
  return data;
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  write_file_atomic(path, serialize_dataset(data));
}

Dataset load_dataset(const std::filesystem::path& path) { return deserialize_dataset(read_file(path)); }

}  // namespace uapmimo
