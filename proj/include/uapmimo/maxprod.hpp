#ifndef UAPMIMO_MAXPROD_HPP
#define UAPMIMO_MAXPROD_HPP

#include <vector>

#include "uapmimo/scenario.hpp"

namespace uapmimo {

/// Downlink powers rho[j][k] in mW, cell-major.
struct PowerAllocation {
  int n_cells = 0;
  int n_ues_per_cell = 0;
  std::vector<double> rho;

  PowerAllocation() = default;
  PowerAllocation(int L, int K, double fill = 0.0)
      : n_cells(L), n_ues_per_cell(K), rho(static_cast<std::size_t>(L * K), fill) {}

  double& operator()(int j, int k) { return rho[static_cast<std::size_t>(j * n_ues_per_cell + k)]; }
  double operator()(int j, int k) const { return rho[static_cast<std::size_t>(j * n_ues_per_cell + k)]; }

  double cell_sum(int j) const;
};

struct SolverSettings {
  int max_iters = 20000;
  double step_size = 1.0;
  // Stationarity threshold on the projected log-power gradient (max-norm).
  double rel_tol = 1e-7;
};

struct SolveResult {
  PowerAllocation allocation;
  bool converged = false;
  int iterations = 0;
  double objective = 0.0;  // sum of log SINR
  std::vector<double> objective_trace;  // accepted iterates, first entry is the start point
};

/// SINR of UE k in cell j.
double sinr(const PowerAllocation& rho, const GainProfile& gains, int j, int k);

/// Sum over all UEs of log SINR; -inf if any SINR is zero.
double log_product_sinr(const PowerAllocation& rho, const GainProfile& gains);

/// Max-prod SINR allocation under per-cell sum-power budgets.
///
/// Works in log-power u = log(rho), where the objective is smooth and concave.
/// Each iteration takes a projected gradient step: on cells whose budget is
/// active the outward component along the budget normal is removed, and on
/// floored coordinates the downward component is removed. The trial point is
/// pulled back to feasibility by scaling each over-budget cell onto its
/// budget, and a backtracking line search keeps the objective nondecreasing.
/// Powers are floored at 1e-9 * p_max.
///
/// Does not throw on non-convergence; check SolveResult::converged.
SolveResult solve_maxprod(const GainProfile& gains, double p_max, const SolverSettings& settings = {});

/// Exhaustive search over {0, p_max/g, ..., p_max}^(LK) restricted to the
/// per-cell budgets. Throws InstanceTooLarge if L*K > 4. Ties keep the first
/// maximizer in lexicographic order.
PowerAllocation brute_force_maxprod(const GainProfile& gains, double p_max, int grid_points);

}  // namespace uapmimo

#endif  // UAPMIMO_MAXPROD_HPP
