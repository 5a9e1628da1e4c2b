#include "uapmimo/scenario.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "uapmimo/binary_io.hpp"
#include "uapmimo/error.hpp"
#include "uapmimo/random.hpp"

namespace uapmimo {

namespace {

int integer_sqrt(int n) {
  int r = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  return r * r == n ? r : -1;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "'");
  }
  return out;
}

}  // namespace

void NetworkConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("invalid network config: ") + what);
  };
  require(n_cells >= 1, "n_cells must be >= 1");
  require(n_ues_per_cell >= 1, "n_ues_per_cell must be >= 1");
  require(n_antennas >= 1, "n_antennas must be >= 1");
  require(std::isfinite(cell_side) && cell_side > 0, "cell_side must be > 0");
  require(std::isfinite(p_max) && p_max > 0, "p_max must be > 0");
  require(std::isfinite(noise_power) && noise_power > 0, "noise_power must be > 0");
  require(std::isfinite(pathloss_ref_db), "pathloss_ref_db must be finite");
  require(std::isfinite(pathloss_exponent) && pathloss_exponent > 0,
          "pathloss_exponent must be > 0");
  require(std::isfinite(min_bs_ue_distance) && min_bs_ue_distance >= 0,
          "min_bs_ue_distance must be >= 0");
  require(min_bs_ue_distance < cell_side / 2, "min_bs_ue_distance must be < cell_side/2");
  require(n_cells == 2 || integer_sqrt(n_cells) > 0,
          "n_cells must be a perfect square or 2");
}

std::array<int, 2> NetworkConfig::grid() const {
  if (n_cells == 2) return {2, 1};
  const int side = integer_sqrt(n_cells);
  if (side < 0) throw ConfigError("n_cells must be a perfect square or 2");
  return {side, side};
}

std::string NetworkConfig::to_text() const {
  std::ostringstream os;
  os << "n_cells=" << n_cells << '\n'
     << "n_ues_per_cell=" << n_ues_per_cell << '\n'
     << "n_antennas=" << n_antennas << '\n'
     << "cell_side=" << format_double(cell_side) << '\n'
     << "noise_power=" << format_double(noise_power) << '\n'
     << "p_max=" << format_double(p_max) << '\n'
     << "pathloss_ref_db=" << format_double(pathloss_ref_db) << '\n'
     << "pathloss_exponent=" << format_double(pathloss_exponent) << '\n'
     << "min_bs_ue_distance=" << format_double(min_bs_ue_distance) << '\n'
     << "self_interference=" << (self_interference ? "true" : "false") << '\n';
  return os.str();
}

std::uint64_t NetworkConfig::fingerprint() const { return fnv1a(to_text()); }

NetworkConfig parse_config(const std::string& text) {
  NetworkConfig config;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "n_cells") {
      config.n_cells = parse_number<int>(key, value);
    } else if (key == "n_ues_per_cell") {
      config.n_ues_per_cell = parse_number<int>(key, value);
    } else if (key == "n_antennas") {
      config.n_antennas = parse_number<int>(key, value);
    } else if (key == "cell_side") {
      config.cell_side = parse_number<double>(key, value);
    } else if (key == "noise_power") {
      config.noise_power = parse_number<double>(key, value);
    } else if (key == "p_max") {
      config.p_max = parse_number<double>(key, value);
    } else if (key == "pathloss_ref_db") {
      config.pathloss_ref_db = parse_number<double>(key, value);
    } else if (key == "pathloss_exponent") {
      config.pathloss_exponent = parse_number<double>(key, value);
    } else if (key == "min_bs_ue_distance") {
      config.min_bs_ue_distance = parse_number<double>(key, value);
    } else if (key == "self_interference") {
      if (value == "true" || value == "1") {
        config.self_interference = true;
      } else if (value == "false" || value == "0") {
        config.self_interference = false;
      } else {
        throw ConfigError("config key 'self_interference': expected true or false");
      }
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  config.validate();
  return config;
}

NetworkConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::vector<Point> bs_positions(const NetworkConfig& config) {
  const auto [cols, rows] = config.grid();
  std::vector<Point> out;
  out.reserve(static_cast<std::size_t>(config.n_cells));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      out.push_back({(c + 0.5) * config.cell_side, (r + 0.5) * config.cell_side});
    }
  }
  return out;
}

NetworkRealization drop_ues(const NetworkConfig& config, std::uint64_t seed) {
  config.validate();
  NetworkRealization real;
  real.rng_seed = seed;
  real.bs_positions = bs_positions(config);
  real.ue_positions.reserve(static_cast<std::size_t>(config.n_cells * config.n_ues_per_cell));

  Rng rng(seed);
  const double half = config.cell_side / 2;
  for (const Point& bs : real.bs_positions) {
    for (int k = 0; k < config.n_ues_per_cell; ++k) {
      Point p;
      do {
        p = {bs.x + rng.uniform(-half, half), bs.y + rng.uniform(-half, half)};
      } while (distance(p, bs) < config.min_bs_ue_distance);
      real.ue_positions.push_back(p);
    }
  }
  return real;
}

double large_scale_fading(double d, const NetworkConfig& config) {
  if (!(d > 0)) throw std::domain_error("large_scale_fading: distance must be positive");
  const double db = -config.pathloss_ref_db - 10.0 * config.pathloss_exponent * std::log10(d / 1000.0);
  return std::pow(10.0, db / 10.0);
}

GainProfile::GainProfile(int n_cells, int n_ues_per_cell, double sigma2)
    : n_cells_(n_cells),
      n_ues_(n_ues_per_cell),
      sigma2_(sigma2),
      a_(static_cast<std::size_t>(n_cells * n_ues_per_cell), 0.0),
      b_(static_cast<std::size_t>(n_cells * n_ues_per_cell) *
             static_cast<std::size_t>(n_cells * n_ues_per_cell),
         0.0) {}

bool GainProfile::valid() const {
  if (!(std::isfinite(sigma2_) && sigma2_ > 0)) return false;
  for (double v : a_) {
    if (!(std::isfinite(v) && v > 0)) return false;
  }
  for (double v : b_) {
    if (!(std::isfinite(v) && v >= 0)) return false;
  }
  return true;
}

GainProfile GainProfile::scaled(double factor) const {
  GainProfile out = *this;
  for (double& v : out.a_) v *= factor;
  for (double& v : out.b_) v *= factor;
  out.sigma2_ *= factor;
  return out;
}

GainProfile mr_gain_profile(const NetworkRealization& real, const NetworkConfig& config) {
  const int L = config.n_cells;
  const int K = config.n_ues_per_cell;
  GainProfile gains(L, K, config.noise_power);
  for (int j = 0; j < L; ++j) {
    for (int k = 0; k < K; ++k) {
      const Point& ue = real.ue(j, k, K);
      gains.a(j, k) = config.n_antennas *
                      large_scale_fading(distance(real.bs_positions[static_cast<std::size_t>(j)], ue), config);
      for (int l = 0; l < L; ++l) {
        const double beta = large_scale_fading(distance(real.bs_positions[static_cast<std::size_t>(l)], ue), config);
        for (int i = 0; i < K; ++i) {
          const bool self = (l == j && i == k);
          gains.b(l, i, j, k) = (self && !config.self_interference) ? 0.0 : beta;
        }
      }
    }
  }
  return gains;
}

PositionScaler PositionScaler::for_config(const NetworkConfig& config) {
  const auto [cols, rows] = config.grid();
  return {0.0, config.cell_side * std::max(cols, rows)};
}

double PositionScaler::normalize(double coord) const {
  if (!(coord >= min_coord && coord <= max_coord)) {
    throw DataError("coordinate outside the position scaler box");
  }
  return (coord - min_coord) / (max_coord - min_coord);
}

double PositionScaler::denormalize(double value) const {
  return min_coord + value * (max_coord - min_coord);
}

Vector normalize_positions(const NetworkRealization& real, const PositionScaler& scaler) {
  if (!(scaler.max_coord > scaler.min_coord)) throw DataError("position scaler: max_coord <= min_coord");
  Vector x(static_cast<Eigen::Index>(2 * real.ue_positions.size()));
  for (std::size_t u = 0; u < real.ue_positions.size(); ++u) {
    x[static_cast<Eigen::Index>(2 * u)] = scaler.normalize(real.ue_positions[u].x);
    x[static_cast<Eigen::Index>(2 * u + 1)] = scaler.normalize(real.ue_positions[u].y);
  }
  return x;
}

std::vector<Point> denormalize_positions(const Vector& x, const PositionScaler& scaler) {
  if (x.size() % 2 != 0) throw DimensionMismatch("position vector length must be even");
  std::vector<Point> out(static_cast<std::size_t>(x.size() / 2));
  for (std::size_t u = 0; u < out.size(); ++u) {
    out[u] = {scaler.denormalize(x[static_cast<Eigen::Index>(2 * u)]),
              scaler.denormalize(x[static_cast<Eigen::Index>(2 * u + 1)])};
  }
  return out;
}

}  // namespace uapmimo
