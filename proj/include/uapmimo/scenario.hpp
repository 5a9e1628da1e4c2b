#ifndef UAPMIMO_SCENARIO_HPP
#define UAPMIMO_SCENARIO_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "uapmimo/types.hpp"

namespace uapmimo {

/// Scenario constants of the multicell downlink. All powers are linear mW.
struct NetworkConfig {
  int n_cells = 4;
  int n_ues_per_cell = 5;
  int n_antennas = 100;
  double cell_side = 250.0;                 // m
  double noise_power = 3.981071705534972507e-10;  // mW, -94 dBm
  double p_max = 500.0;                     // mW
  double pathloss_ref_db = 148.1;           // dB at 1 km
  double pathloss_exponent = 3.76;
  double min_bs_ue_distance = 35.0;         // m
  // Keep the (l,i) = (j,k) term of the interference sum.
  bool self_interference = true;

  /// Throws ConfigError on any violated constraint, including a cell count
  /// that is neither a perfect square nor 2.
  void validate() const;

  /// Grid layout of the cells: {columns, rows}.
  std::array<int, 2> grid() const;

  int input_dim() const { return 2 * n_ues_per_cell * n_cells; }

  /// Canonical key=value text. Parsing it back yields an identical config.
  std::string to_text() const;
  std::uint64_t fingerprint() const;
};

/// Parses the flat key=value format written by NetworkConfig::to_text().
/// Blank lines and '#' comments are ignored; unknown keys are an error.
NetworkConfig parse_config(const std::string& text);
NetworkConfig load_config(const std::filesystem::path& path);

struct Point {
  double x = 0.0;
  double y = 0.0;
};

double distance(const Point& a, const Point& b);

struct NetworkRealization {
  std::vector<Point> bs_positions;  // L
  std::vector<Point> ue_positions;  // L*K, cell-major
  std::uint64_t rng_seed = 0;

  const Point& ue(int cell, int k, int n_ues_per_cell) const {
    return ue_positions[static_cast<std::size_t>(cell * n_ues_per_cell + k)];
  }
};

std::vector<Point> bs_positions(const NetworkConfig& config);

/// Uniform drop of K UEs inside each square cell, rejecting points closer than
/// min_bs_ue_distance to the serving BS.
NetworkRealization drop_ues(const NetworkConfig& config, std::uint64_t seed);

/// Pathloss-only large-scale gain at distance d (m). Throws std::domain_error if d <= 0.
double large_scale_fading(double d, const NetworkConfig& config);

/// Average channel gains a[j][k] and interference gains b[l][i][j][k].
class GainProfile {
 public:
  GainProfile() = default;
  GainProfile(int n_cells, int n_ues_per_cell, double sigma2);

  int n_cells() const { return n_cells_; }
  int n_ues_per_cell() const { return n_ues_; }
  double sigma2() const { return sigma2_; }
  void set_sigma2(double s) { sigma2_ = s; }

  double& a(int j, int k) { return a_[static_cast<std::size_t>(j * n_ues_ + k)]; }
  double a(int j, int k) const { return a_[static_cast<std::size_t>(j * n_ues_ + k)]; }
  double& b(int l, int i, int j, int k) { return b_[b_index(l, i, j, k)]; }
  double b(int l, int i, int j, int k) const { return b_[b_index(l, i, j, k)]; }

  /// Entries finite; a and sigma2 strictly positive; b nonnegative.
  bool valid() const;

  /// Multiplies a, b and sigma2 by the same constant.
  GainProfile scaled(double factor) const;

 private:
  std::size_t b_index(int l, int i, int j, int k) const {
    return static_cast<std::size_t>(((l * n_ues_ + i) * n_cells_ + j) * n_ues_ + k);
  }

  int n_cells_ = 0;
  int n_ues_ = 0;
  double sigma2_ = 0.0;
  std::vector<double> a_;
  std::vector<double> b_;
};

/// MR precoding with perfect CSI: coherent gain a = M*beta on the serving link,
/// non-coherent interference b = beta of the interfering BS to the UE.
GainProfile mr_gain_profile(const NetworkRealization& real, const NetworkConfig& config);

/// Affine map from meters to [0, 1], identical for both axes.
struct PositionScaler {
  double min_coord = 0.0;
  double max_coord = 1.0;

  /// The full deployment box of the cell grid.
  static PositionScaler for_config(const NetworkConfig& config);

  double normalize(double coord) const;
  double denormalize(double value) const;
};

/// Flattened normalized positions, index 2*(j*K + k) + {0: x, 1: y}.
/// Throws DataError if a coordinate falls outside the scaler's box.
Vector normalize_positions(const NetworkRealization& real, const PositionScaler& scaler);

/// Inverse of normalize_positions for the UE coordinates.
std::vector<Point> denormalize_positions(const Vector& x, const PositionScaler& scaler);

}  // namespace uapmimo

#endif  // UAPMIMO_SCENARIO_HPP
