#ifndef UAPMIMO_ATTACKS_HPP
#define UAPMIMO_ATTACKS_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "uapmimo/nnet.hpp"
#include "uapmimo/types.hpp"

namespace uapmimo {

/// The attack menu:
///   a1 random, a2 minimum perturbation, a3/a4 accumulative UAP white/black,
///   a5/a6 PCA UAP white/black, a7 optimized (Adam), a8 FGSM, a9 PGD.
enum class AttackId { kA1 = 1, kA2, kA3, kA4, kA5, kA6, kA7, kA8, kA9 };

std::string to_string(AttackId id);
/// Accepts "a1".."a9" (case-insensitive). Throws ConfigError otherwise.
AttackId parse_attack_id(std::string_view text);
/// Attacks producing a single input-agnostic perturbation.
bool is_universal(AttackId id);
/// Attacks crafted on a surrogate instead of the victim.
bool is_black_box(AttackId id);

/// One cell's power predictor: network plus output denormalization.
class CellPowerModel {
 public:
  CellPowerModel(Mlp net, OutputScaler scaler, int n_ues_per_cell);

  int input_dim() const { return net_.input_dim(); }
  int n_ues_per_cell() const { return n_ues_; }
  const Mlp& net() const { return net_; }
  const OutputScaler& scaler() const { return scaler_; }

  /// Denormalized power predictions (mW) for the K UEs and the sum head.
  Vector powers(const Vector& x) const;
  /// Sum of the K predicted UE powers in mW; the sum head is not used.
  double loss(const Vector& x) const;
  Vector loss_gradient(const Vector& x) const;

 private:
  Mlp net_;
  OutputScaler scaler_;
  int n_ues_;
  Vector loss_weights_;
};

double loss_j(const CellPowerModel& model, const Vector& x);

/// Predicted UE powers of the cell sum to strictly more than p_max.
bool is_infeasible(const CellPowerModel& model, const Vector& x, double p_max);

/// Elementwise clamp. Throws BoundsInverted if any lo > hi or a bound is not finite.
Vector clip(const Vector& v, double lo, double hi);
Vector clip(const Vector& v, const Vector& lo, const Vector& hi);

/// Elementwise sign with sign(0) = +1.
Vector sign_of(const Vector& v);

struct Perturbation {
  Vector eta;
  double norm_inf = 0.0;

  static Perturbation from(Vector eta);
};

struct AttackSettings {
  double epsilon = 0.5;
  double delta_max = 2.0;
  double eps_acc = 1e-4;
  int min_perturbation_iters = 30;
  int uap_passes = 10;
  int optimized_iters = 200;
  int pgd_steps = 10;
  double pgd_step_size = 0.0;  // 0 selects epsilon / 4
  double adam_lr = 0.01;
  int n_craft = 1500;
  std::uint64_t seed = 0;

  double effective_pgd_step() const { return pgd_step_size > 0 ? pgd_step_size : epsilon / 4; }
  /// Throws ConfigError on invalid values.
  void validate() const;
};

/// eta = epsilon * sign(grad loss_j(x)).
Perturbation fgsm(const CellPowerModel& model, const Vector& x, double epsilon);

/// Iterated signed-gradient ascent projected onto the epsilon ball, zero start.
Perturbation pgd(const CellPowerModel& model, const Vector& x, double epsilon, int steps, double step_size);

/// Bisection for the smallest magnitude along the FGSM direction at x that
/// drives the cell infeasible. The direction is computed once at x. Returns
/// eps_max * sign(grad), so the magnitude is delta_max if no probe succeeded.
Perturbation min_perturbation(const CellPowerModel& model, const Vector& x, double p_max, double delta_max,
                              double eps_acc, int i_max);

/// Accumulative UAP: for each craft sample still feasible under eta, add its
/// minimum perturbation (searched up to epsilon) and clip eta to the epsilon ball.
/// Repeats for `passes` sweeps over the craft set.
Perturbation uap_accumulative(const CellPowerModel& model, const RowMatrix& craft, double p_max, double epsilon,
                              int passes, double eps_acc, int min_perturbation_iters);

/// PCA UAP: epsilon * sign(v1) where v1 is the top right-singular vector of the
/// stacked craft gradients. Of +eta and -eta the one making more craft samples
/// infeasible is returned; ties keep +eta.
Perturbation uap_pca(const CellPowerModel& model, const RowMatrix& craft, double p_max, double epsilon);

/// Adam ascent on loss_j over eta with the iterate kept in the epsilon ball.
/// Stops as soon as x + eta is infeasible; returns zero if x already is.
Perturbation optimized_attack(const CellPowerModel& model, const Vector& x, double p_max, double epsilon,
                              int i_max, double adam_lr);

/// eta = epsilon * s with i.i.d. uniform +-1 entries.
Perturbation random_perturbation(int dim, double epsilon, std::uint64_t seed);

/// Perturbation file: a metadata line
///   attack=<id> epsilon=<e> seed=<s> cell=<j> n_craft=<N> rows=<n>
/// followed by n lines of space-separated floats. Universal attacks have one
/// row; per-sample attacks have one row per input of the attacked set.
struct PerturbationSet {
  AttackId attack = AttackId::kA1;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  int cell = 0;
  int n_craft = 0;  // 0 for per-sample attacks
  RowMatrix etas;
};

std::string serialize_perturbations(const PerturbationSet& set);
PerturbationSet parse_perturbations(const std::string& text);
void save_perturbations(const std::filesystem::path& path, const PerturbationSet& set);
PerturbationSet load_perturbations(const std::filesystem::path& path);

}  // namespace uapmimo

#endif  // UAPMIMO_ATTACKS_HPP
