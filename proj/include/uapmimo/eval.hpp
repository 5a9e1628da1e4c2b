#ifndef UAPMIMO_EVAL_HPP
#define UAPMIMO_EVAL_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uapmimo/attacks.hpp"
#include "uapmimo/dataset.hpp"
#include "uapmimo/maxprod.hpp"

namespace uapmimo {

/// Drops UEs, builds MR gains and solves max-prod for every sample. A sample
/// whose solve does not converge is redrawn from a fresh sub-seed; more than
/// 1% redraws aborts with NonConvergence.
Dataset generate_dataset(const NetworkConfig& config, Eigen::Index n_samples, std::uint64_t seed,
                         const SolverSettings& solver = {});

/// Fraction of rows x with x + eta infeasible on the victim.
double success_rate(const CellPowerModel& victim, const RowMatrix& inputs, const Vector& eta, double p_max);

/// Row i of etas is applied to row i of inputs.
double success_rate_per_sample(const CellPowerModel& victim, const RowMatrix& inputs, const RowMatrix& etas,
                               double p_max);

/// Success of the minimum-perturbation attack at budget epsilon: a sample
/// counts iff its minimal magnitude is <= epsilon.
double threshold_success_rate(std::span<const double> magnitudes, double epsilon);

/// Indices of rows whose clean prediction is feasible on every model, in
/// order, stopping after max_rows (<= 0 means no limit).
std::vector<Eigen::Index> feasible_rows(const RowMatrix& inputs, std::span<const CellPowerModel* const> models,
                                        double p_max, Eigen::Index max_rows = 0);

/// Keeps rows whose clean prediction is feasible on every model, in order,
/// stopping after max_rows (<= 0 means no limit).
RowMatrix select_feasible(const RowMatrix& inputs, std::span<const CellPowerModel* const> models, double p_max,
                          Eigen::Index max_rows = 0);

/// Draws n_craft rows of pool without replacement.
RowMatrix draw_craft_samples(const RowMatrix& pool, int n_craft, std::uint64_t seed);

using CraftFn = std::function<Perturbation(const RowMatrix& craft)>;

struct MonteCarloResult {
  Perturbation best;
  int best_trial = 0;
  std::vector<double> trial_rates;  // success on the pool, per trial
};

/// Runs `craft` on n_trials fresh draws of n_craft pool samples and keeps the
/// perturbation with the highest success on the pool under the crafting
/// model. Ties keep the lowest trial index.
MonteCarloResult monte_carlo_best_uap(const CraftFn& craft, const CellPowerModel& crafting_model,
                                      const RowMatrix& pool, int n_craft, int n_trials, double p_max,
                                      std::uint64_t seed);

/// Everything an attack may need. Crafting reads `victim` only for white-box
/// attacks and `surrogate` only for black-box ones.
struct AttackContext {
  const CellPowerModel* victim = nullptr;
  const CellPowerModel* surrogate = nullptr;
  const RowMatrix* pool = nullptr;     // training inputs for UAP crafting
  const RowMatrix* targets = nullptr;  // inputs attacked by per-sample attacks
  double p_max = 0.0;
};

struct CraftedAttack {
  AttackId attack = AttackId::kA1;
  double epsilon = 0.0;
  RowMatrix etas;  // one row (universal) or one per target
  double seconds = 0.0;
  std::vector<double> trial_rates;

  std::vector<double> magnitudes() const;  // infinity norm per row
};

/// Crafts one attack at settings.epsilon. UAPs go through monte_carlo_best_uap
/// with n_trials; a1 draws an independent random vector per target.
CraftedAttack craft_attack(AttackId attack, const AttackContext& ctx, const AttackSettings& settings, int n_trials);

/// Success rate of a crafted attack on the victim over `inputs` at `epsilon`.
/// For a2 this thresholds the per-sample minimal magnitudes.
double evaluate_attack(AttackId attack, const RowMatrix& etas, double epsilon, const CellPowerModel& victim,
                       const RowMatrix& inputs, double p_max);

struct ReportRow {
  std::string attack_id;
  std::string cell;  // cell index or "mean"
  double epsilon = 0.0;
  double success_rate = 0.0;
  std::optional<double> seconds;
  int n_craft = 0;
  std::uint64_t seed = 0;
};

inline constexpr const char* kReportHeader = "attack_id,cell,epsilon,success_rate,seconds,n_craft,seed";

struct EvalReport {
  std::vector<ReportRow> rows;

  /// Appends one "mean" row per (attack, epsilon) averaging the per-cell rows.
  void add_cell_means();
  std::string to_csv() const;
  static EvalReport from_csv(const std::string& text);
};

/// Vega-Lite bar chart description with one bar group per attack id. The
/// "groups" member lists the plotted values so they can be checked.
std::string plot_description(const EvalReport& report);

struct NSensitivityRow {
  int n_craft = 0;
  double rate_accumulative = 0.0;  // a3 (or a4 when crafting on a surrogate)
  double rate_pca = 0.0;           // a5 (or a6)
};

struct NSensitivity {
  std::vector<NSensitivityRow> rows;
  double spread_accumulative() const;
  double spread_pca() const;
};

/// Re-crafts the accumulative and PCA UAPs for each N and evaluates them on
/// the victim over `test`.
NSensitivity sweep_n_sensitivity(const CellPowerModel& crafting_model, const CellPowerModel& victim,
                                 const RowMatrix& pool, const RowMatrix& test, std::span<const int> n_values,
                                 const AttackSettings& settings, int n_trials, double p_max);

struct TimingRow {
  AttackId attack = AttackId::kA1;
  double seconds = 0.0;
};

/// Wall-clock crafting time of each attack on the same context and settings.
std::vector<TimingRow> benchmark_timing(std::span<const AttackId> attacks, const AttackContext& ctx,
                                        const AttackSettings& settings, int n_trials);

}  // namespace uapmimo

#endif  // UAPMIMO_EVAL_HPP
