#include "uapmimo/maxprod.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "uapmimo/error.hpp"

namespace uapmimo {

double PowerAllocation::cell_sum(int j) const {
  double s = 0.0;
  for (int k = 0; k < n_ues_per_cell; ++k) s += (*this)(j, k);
  return s;
}

double sinr(const PowerAllocation& rho, const GainProfile& gains, int j, int k) {
  const int L = gains.n_cells();
  const int K = gains.n_ues_per_cell();
  double denom = gains.sigma2();
  for (int l = 0; l < L; ++l) {
    for (int i = 0; i < K; ++i) denom += rho(l, i) * gains.b(l, i, j, k);
  }
  return rho(j, k) * gains.a(j, k) / denom;
}

double log_product_sinr(const PowerAllocation& rho, const GainProfile& gains) {
  double total = 0.0;
  for (int j = 0; j < gains.n_cells(); ++j) {
    for (int k = 0; k < gains.n_ues_per_cell(); ++k) {
      const double g = sinr(rho, gains, j, k);
      if (!(g > 0)) return -std::numeric_limits<double>::infinity();
      total += std::log(g);
    }
  }
  return total;
}

namespace {

// Flat view of the problem with UE index p = j*K + k. The interference matrix
// is stored interferer-major: b[q*n + p] is the gain from UE q's stream onto UE p.
class LogPowerProblem {
 public:
  LogPowerProblem(const GainProfile& gains, double p_max)
      : L_(gains.n_cells()),
        K_(gains.n_ues_per_cell()),
        n_(static_cast<std::size_t>(L_ * K_)),
        p_max_(p_max),
        log_floor_(std::log(1e-9 * p_max)),
        sigma2_(gains.sigma2()),
        log_a_(n_),
        b_(n_ * n_),
        denom_(n_) {
    for (int j = 0; j < L_; ++j) {
      for (int k = 0; k < K_; ++k) {
        const std::size_t p = static_cast<std::size_t>(j * K_ + k);
        log_a_[p] = std::log(gains.a(j, k));
        for (int l = 0; l < L_; ++l) {
          for (int i = 0; i < K_; ++i) {
            b_[static_cast<std::size_t>(l * K_ + i) * n_ + p] = gains.b(l, i, j, k);
          }
        }
      }
    }
  }

  std::size_t size() const { return n_; }
  double log_floor() const { return log_floor_; }

  double objective(const std::vector<double>& u) {
    fill_denominators(u);
    double f = 0.0;
    for (std::size_t p = 0; p < n_; ++p) f += u[p] + log_a_[p] - std::log(denom_[p]);
    return f;
  }

  // Gradient at the point of the last objective() call.
  void gradient(const std::vector<double>& u, std::vector<double>& g) const {
    g.assign(n_, 0.0);
    for (std::size_t q = 0; q < n_; ++q) {
      double s = 0.0;
      const double* row = &b_[q * n_];
      for (std::size_t p = 0; p < n_; ++p) s += row[p] / denom_[p];
      g[q] = 1.0 - std::exp(u[q]) * s;
    }
  }

  // Removes ascent components that would leave the feasible set.
  void project_gradient(const std::vector<double>& u, std::vector<double>& g) const {
    for (int j = 0; j < L_; ++j) {
      const std::size_t base = static_cast<std::size_t>(j * K_);
      double sum = 0.0;
      for (int k = 0; k < K_; ++k) sum += std::exp(u[base + k]);
      if (sum >= p_max_ * (1.0 - 1e-12)) {
        double gn = 0.0;
        double nn = 0.0;
        for (int k = 0; k < K_; ++k) {
          const double nk = std::exp(u[base + k]);
          gn += g[base + k] * nk;
          nn += nk * nk;
        }
        if (gn > 0) {
          for (int k = 0; k < K_; ++k) g[base + k] -= gn / nn * std::exp(u[base + k]);
        }
      }
    }
    for (std::size_t q = 0; q < n_; ++q) {
      if (u[q] <= log_floor_ && g[q] < 0) g[q] = 0.0;
    }
  }

  // Floors each coordinate and scales over-budget cells back onto their budget.
  void retract(std::vector<double>& u) const {
    for (double& v : u) v = std::max(v, log_floor_);
    for (int j = 0; j < L_; ++j) {
      const std::size_t base = static_cast<std::size_t>(j * K_);
      for (int pass = 0; pass < 8; ++pass) {
        double floored = 0.0;
        double free = 0.0;
        for (int k = 0; k < K_; ++k) {
          const double v = std::exp(u[base + k]);
          (u[base + k] <= log_floor_ ? floored : free) += v;
        }
        if (floored + free <= p_max_ || free <= 0) break;
        const double shift = std::log((p_max_ - floored) / free);
        for (int k = 0; k < K_; ++k) {
          if (u[base + k] > log_floor_) u[base + k] = std::max(u[base + k] + shift, log_floor_);
        }
      }
    }
  }

 private:
  void fill_denominators(const std::vector<double>& u) {
    std::fill(denom_.begin(), denom_.end(), sigma2_);
    for (std::size_t q = 0; q < n_; ++q) {
      const double rho = std::exp(u[q]);
      const double* row = &b_[q * n_];
      for (std::size_t p = 0; p < n_; ++p) denom_[p] += rho * row[p];
    }
  }

  int L_;
  int K_;
  std::size_t n_;
  double p_max_;
  double log_floor_;
  double sigma2_;
  std::vector<double> log_a_;
  std::vector<double> b_;
  std::vector<double> denom_;
};

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

SolveResult solve_maxprod(const GainProfile& gains, double p_max, const SolverSettings& settings) {
  if (!gains.valid()) throw DataError("solve_maxprod: invalid gain profile");
  if (!(p_max > 0)) throw DataError("solve_maxprod: p_max must be positive");
  if (settings.max_iters < 1 || !(settings.step_size > 0) || !(settings.rel_tol > 0)) {
    throw ConfigError("solve_maxprod: invalid solver settings");
  }

  const int L = gains.n_cells();
  const int K = gains.n_ues_per_cell();
  LogPowerProblem problem(gains, p_max);
  const std::size_t n = problem.size();

  std::vector<double> u(n, std::log(p_max / K));
  std::vector<double> trial(n);
  std::vector<double> g;

  SolveResult result;
  double f = problem.objective(u);
  result.objective_trace.push_back(f);
  double step = settings.step_size;
  constexpr int kMaxHalvings = 30;

  int it = 0;
  for (; it < settings.max_iters; ++it) {
    // Denominators are current: the last objective() call was on u.
    problem.gradient(u, g);
    problem.project_gradient(u, g);
    const double pg_norm = max_abs(g);
    if (pg_norm <= settings.rel_tol) {
      result.converged = true;
      break;
    }

    bool accepted = false;
    int halvings = 0;
    double f_trial = f;
    for (; halvings <= kMaxHalvings; ++halvings) {
      for (std::size_t q = 0; q < n; ++q) trial[q] = u[q] + step * g[q];
      problem.retract(trial);
      f_trial = problem.objective(trial);
      if (f_trial >= f) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No representable ascent left along the projected gradient.
      result.converged = pg_norm <= std::sqrt(settings.rel_tol);
      break;
    }
    u.swap(trial);
    f = f_trial;
    result.objective_trace.push_back(f);
    if (halvings == 0) step = std::min(step * 2.0, 1e6);
  }

  result.iterations = it;
  result.objective = f;
  result.allocation = PowerAllocation(L, K);
  for (std::size_t q = 0; q < n; ++q) result.allocation.rho[q] = std::exp(u[q]);
  return result;
}

PowerAllocation brute_force_maxprod(const GainProfile& gains, double p_max, int grid_points) {
  const int L = gains.n_cells();
  const int K = gains.n_ues_per_cell();
  if (L * K > 4) throw InstanceTooLarge("brute_force_maxprod: L*K must be <= 4");
  if (grid_points < 1) throw DataError("brute_force_maxprod: grid_points must be >= 1");

  // Feasible per-cell index tuples, last UE varying fastest.
  std::vector<std::vector<int>> cell_tuples;
  {
    std::vector<int> idx(static_cast<std::size_t>(K), 0);
    while (true) {
      if (std::accumulate(idx.begin(), idx.end(), 0) <= grid_points) cell_tuples.push_back(idx);
      int pos = K - 1;
      while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == grid_points) {
        idx[static_cast<std::size_t>(pos)] = 0;
        --pos;
      }
      if (pos < 0) break;
      ++idx[static_cast<std::size_t>(pos)];
    }
  }

  const double unit = p_max / grid_points;
  PowerAllocation candidate(L, K);
  PowerAllocation best(L, K);
  double best_value = -std::numeric_limits<double>::infinity();
  bool have_best = false;

  std::vector<std::size_t> choice(static_cast<std::size_t>(L), 0);
  while (true) {
    for (int j = 0; j < L; ++j) {
      const auto& t = cell_tuples[choice[static_cast<std::size_t>(j)]];
      for (int k = 0; k < K; ++k) candidate(j, k) = unit * t[static_cast<std::size_t>(k)];
    }
    const double value = log_product_sinr(candidate, gains);
    if (!have_best || value > best_value) {
      best = candidate;
      best_value = value;
      have_best = true;
    }
    int pos = L - 1;
    while (pos >= 0 && choice[static_cast<std::size_t>(pos)] + 1 == cell_tuples.size()) {
      choice[static_cast<std::size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
    ++choice[static_cast<std::size_t>(pos)];
  }
  return best;
}

}  // namespace uapmimo
