#include "uapmimo/attacks.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "uapmimo/binary_io.hpp"
#include "uapmimo/error.hpp"
#include "uapmimo/linalg.hpp"
#include "uapmimo/random.hpp"

namespace uapmimo {

std::string to_string(AttackId id) { return "a" + std::to_string(static_cast<int>(id)); }

AttackId parse_attack_id(std::string_view text) {
  if (text.size() == 2 && std::tolower(static_cast<unsigned char>(text[0])) == 'a' && text[1] >= '1' &&
      text[1] <= '9') {
    return static_cast<AttackId>(text[1] - '0');
  }
  throw ConfigError("unknown attack id '" + std::string(text) + "' (expected a1..a9)");
}

bool is_universal(AttackId id) {
  return id == AttackId::kA3 || id == AttackId::kA4 || id == AttackId::kA5 || id == AttackId::kA6;
}

bool is_black_box(AttackId id) { return id == AttackId::kA4 || id == AttackId::kA6; }

CellPowerModel::CellPowerModel(Mlp net, OutputScaler scaler, int n_ues_per_cell)
    : net_(std::move(net)), scaler_(scaler), n_ues_(n_ues_per_cell) {
  net_.validate();
  if (net_.output_dim() != n_ues_ + 1) throw DimensionMismatch("model output must have K+1 entries");
  if (!(scaler_.scale > 0)) throw DataError("output scale must be positive");
  loss_weights_ = Vector::Zero(n_ues_ + 1);
  loss_weights_.head(n_ues_).setConstant(scaler_.scale);
}

Vector CellPowerModel::powers(const Vector& x) const {
  Vector y = net_.forward(x);
  return y.unaryExpr([this](double v) { return scaler_.denormalize(v); });
}

double CellPowerModel::loss(const Vector& x) const {
  const Vector y = net_.forward(x);
  double total = 0.0;
  for (int k = 0; k < n_ues_; ++k) total += scaler_.denormalize(y[k]);
  return total;
}

Vector CellPowerModel::loss_gradient(const Vector& x) const { return grad_input(net_, x, loss_weights_); }

double loss_j(const CellPowerModel& model, const Vector& x) { return model.loss(x); }

bool is_infeasible(const CellPowerModel& model, const Vector& x, double p_max) { return model.loss(x) > p_max; }

Vector clip(const Vector& v, double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi) throw BoundsInverted("clip: need finite bounds with lo <= hi");
  return v.cwiseMax(lo).cwiseMin(hi);
}

Vector clip(const Vector& v, const Vector& lo, const Vector& hi) {
  if (lo.size() != v.size() || hi.size() != v.size()) throw DimensionMismatch("clip: bound length mismatch");
  if (!lo.allFinite() || !hi.allFinite() || (lo.array() > hi.array()).any()) {
    throw BoundsInverted("clip: need finite bounds with lo <= hi");
  }
  return v.cwiseMax(lo).cwiseMin(hi);
}

Vector sign_of(const Vector& v) {
  return v.unaryExpr([](double g) { return g < 0 ? -1.0 : 1.0; });
}

Perturbation Perturbation::from(Vector eta) {
  Perturbation p;
  p.norm_inf = eta.size() ? eta.cwiseAbs().maxCoeff() : 0.0;
  p.eta = std::move(eta);
  return p;
}

void AttackSettings::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("invalid attack settings: ") + what);
  };
  require(std::isfinite(epsilon) && epsilon > 0, "epsilon must be > 0");
  require(std::isfinite(delta_max) && delta_max > 0, "delta_max must be > 0");
  require(eps_acc > 0 && eps_acc < delta_max, "eps_acc must lie in (0, delta_max)");
  require(min_perturbation_iters >= 1 && uap_passes >= 1 && optimized_iters >= 1, "iteration caps must be >= 1");
  require(pgd_steps >= 1 && pgd_step_size >= 0, "pgd_steps >= 1 and pgd_step_size >= 0");
  require(adam_lr > 0, "adam_lr must be > 0");
  require(n_craft >= 1, "n_craft must be >= 1");
}

Perturbation fgsm(const CellPowerModel& model, const Vector& x, double epsilon) {
  return Perturbation::from(epsilon * sign_of(model.loss_gradient(x)));
}

Perturbation pgd(const CellPowerModel& model, const Vector& x, double epsilon, int steps, double step_size) {
  Vector eta = Vector::Zero(x.size());
  for (int s = 0; s < steps; ++s) {
    const Vector g = model.loss_gradient(x + eta);
    eta = clip(eta + step_size * sign_of(g), -epsilon, epsilon);
  }
  return Perturbation::from(std::move(eta));
}

Perturbation min_perturbation(const CellPowerModel& model, const Vector& x, double p_max, double delta_max,
                              double eps_acc, int i_max) {
  if (!(eps_acc > 0 && eps_acc < delta_max)) throw ConfigError("min_perturbation: need 0 < eps_acc < delta_max");
  const Vector direction = sign_of(model.loss_gradient(x));
  double eps_max = delta_max;
  double eps_min = 0.0;
  for (int it = 0; eps_max - eps_min > eps_acc && it < i_max; ++it) {
    const double eps = (eps_max + eps_min) / 2;
    if (model.loss(x + eps * direction) < p_max) {
      eps_min = eps;
    } else {
      eps_max = eps;
    }
  }
  return Perturbation::from(eps_max * direction);
}

Perturbation uap_accumulative(const CellPowerModel& model, const RowMatrix& craft, double p_max, double epsilon,
                              int passes, double eps_acc, int min_perturbation_iters) {
  if (craft.rows() == 0) throw DataError("uap_accumulative: empty craft set");
  if (craft.cols() != model.input_dim()) throw DimensionMismatch("uap_accumulative: craft width != model input");
  Vector eta = Vector::Zero(craft.cols());
  // The inner search is capped at the UAP budget; a larger step would be clipped anyway.
  const double inner_acc = std::min(eps_acc, epsilon / 2);
  for (int pass = 0; pass < passes; ++pass) {
    for (Eigen::Index i = 0; i < craft.rows(); ++i) {
      const Vector x_adv = craft.row(i).transpose() + eta;
      if (is_infeasible(model, x_adv, p_max)) continue;
      const Perturbation delta = min_perturbation(model, x_adv, p_max, epsilon, inner_acc, min_perturbation_iters);
      eta = clip(eta + delta.eta, -epsilon, epsilon);
    }
  }
  return Perturbation::from(std::move(eta));
}

Perturbation uap_pca(const CellPowerModel& model, const RowMatrix& craft, double p_max, double epsilon) {
  if (craft.rows() == 0) throw DataError("uap_pca: empty craft set");
  if (craft.cols() != model.input_dim()) throw DimensionMismatch("uap_pca: craft width != model input");
  RowMatrix grads(craft.rows(), craft.cols());
  for (Eigen::Index i = 0; i < craft.rows(); ++i) {
    grads.row(i) = model.loss_gradient(craft.row(i).transpose()).transpose();
  }
  const PrincipalDirection pc = first_principal_direction(grads);
  const Vector eta = epsilon * sign_of(pc.direction);

  long plus = 0;
  long minus = 0;
  for (Eigen::Index i = 0; i < craft.rows(); ++i) {
    const Vector x = craft.row(i).transpose();
    plus += is_infeasible(model, x + eta, p_max);
    minus += is_infeasible(model, x - eta, p_max);
  }
  return Perturbation::from(minus > plus ? Vector(-eta) : eta);
}

Perturbation optimized_attack(const CellPowerModel& model, const Vector& x, double p_max, double epsilon,
                              int i_max, double adam_lr) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  Vector eta = Vector::Zero(x.size());
  if (is_infeasible(model, x, p_max)) return Perturbation::from(std::move(eta));

  Vector m = Vector::Zero(x.size());
  Vector v = Vector::Zero(x.size());
  for (int t = 1; t <= i_max; ++t) {
    // Descent on -loss_j.
    const Vector g = -model.loss_gradient(x + eta);
    m = kBeta1 * m + (1 - kBeta1) * g;
    v = kBeta2 * v + (1 - kBeta2) * g.cwiseAbs2();
    const double c1 = 1 - std::pow(kBeta1, t);
    const double c2 = 1 - std::pow(kBeta2, t);
    eta.array() -= adam_lr * (m.array() / c1) / ((v.array() / c2).sqrt() + kEps);
    eta = clip(eta, -epsilon, epsilon);
    if (is_infeasible(model, x + eta, p_max)) break;
  }
  return Perturbation::from(std::move(eta));
}

Perturbation random_perturbation(int dim, double epsilon, std::uint64_t seed) {
  Rng rng(seed);
  Vector eta(dim);
  for (int i = 0; i < dim; ++i) eta[i] = epsilon * rng.sign();
  return Perturbation::from(std::move(eta));
}

std::string serialize_perturbations(const PerturbationSet& set) {
  std::ostringstream os;
  os << "attack=" << to_string(set.attack) << " epsilon=" << format_double(set.epsilon) << " seed=" << set.seed
     << " cell=" << set.cell << " n_craft=" << set.n_craft << " rows=" << set.etas.rows() << '\n';
  for (Eigen::Index r = 0; r < set.etas.rows(); ++r) {
    for (Eigen::Index c = 0; c < set.etas.cols(); ++c) {
      if (c) os << ' ';
      os << format_double(set.etas(r, c));
    }
    os << '\n';
  }
  return os.str();
}

PerturbationSet parse_perturbations(const std::string& text) {
  std::istringstream is(text);
  std::string header;
  if (!std::getline(is, header)) throw DataError("perturbation file is empty");

  PerturbationSet set;
  long rows = -1;
  int seen = 0;
  std::istringstream hs(header);
  std::string field;
  while (hs >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw DataError("malformed perturbation metadata: " + field);
    const std::string key = field.substr(0, eq);
    const std::string value = field.substr(eq + 1);
    ++seen;
    if (key == "attack") {
      set.attack = parse_attack_id(value);
    } else if (key == "epsilon") {
      set.epsilon = parse_double(value);
    } else if (key == "seed") {
      set.seed = std::stoull(value);
    } else if (key == "cell") {
      set.cell = std::stoi(value);
    } else if (key == "n_craft") {
      set.n_craft = std::stoi(value);
    } else if (key == "rows") {
      rows = std::stol(value);
    } else {
      throw DataError("unknown perturbation metadata key '" + key + "'");
    }
  }
  if (seen != 6 || rows < 0) throw DataError("perturbation metadata is incomplete");

  std::vector<std::vector<double>> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<double> values;
    std::string token;
    while (ls >> token) values.push_back(parse_double(token));
    lines.push_back(std::move(values));
  }
  if (static_cast<long>(lines.size()) != rows) throw DataError("perturbation row count does not match metadata");
  const std::size_t dim = lines.empty() ? 0 : lines.front().size();
  set.etas.resize(rows, static_cast<Eigen::Index>(dim));
  for (std::size_t r = 0; r < lines.size(); ++r) {
    if (lines[r].size() != dim) throw DimensionMismatch("perturbation rows have different lengths");
    for (std::size_t c = 0; c < dim; ++c) {
      set.etas(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = lines[r][c];
    }
  }
  return set;
}

void save_perturbations(const std::filesystem::path& path, const PerturbationSet& set) {
  write_file_atomic(path, serialize_perturbations(set));
}

PerturbationSet load_perturbations(const std::filesystem::path& path) {
  return parse_perturbations(read_file(path));
}

}  // namespace uapmimo
