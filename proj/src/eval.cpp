#include "uapmimo/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "uapmimo/binary_io.hpp"
#include "uapmimo/error.hpp"
#include "uapmimo/random.hpp"

namespace uapmimo {

Dataset generate_dataset(const NetworkConfig& config, Eigen::Index n_samples, std::uint64_t seed,
                         const SolverSettings& solver) {
  config.validate();
  if (n_samples < 0) throw DataError("n_samples must be >= 0");
  const int L = config.n_cells;
  const int K = config.n_ues_per_cell;
  const PositionScaler scaler = PositionScaler::for_config(config);

  Dataset data;
  data.config = config;
  data.seed = seed;
  data.inputs.resize(n_samples, config.input_dim());
  data.targets.resize(n_samples, L * (K + 1));

  const double max_redraws = 0.01 * static_cast<double>(n_samples);
  for (Eigen::Index n = 0; n < n_samples; ++n) {
    const std::uint64_t sample_seed = mix_seed(seed, static_cast<std::uint64_t>(n));
    for (std::uint64_t attempt = 0;; ++attempt) {
      const NetworkRealization real = drop_ues(config, mix_seed(sample_seed, attempt));
      const GainProfile gains = mr_gain_profile(real, config);
      const SolveResult sol = solve_maxprod(gains, config.p_max, solver);
      if (!sol.converged) {
        ++data.regenerated;
        if (data.regenerated > max_redraws) {
          throw NonConvergence("max-prod solver failed on " + std::to_string(data.regenerated) +
                               " samples (more than 1%)");
        }
        continue;
      }
      data.inputs.row(n) = normalize_positions(real, scaler).transpose();
      for (int j = 0; j < L; ++j) {
        double sum = 0.0;
        for (int k = 0; k < K; ++k) {
          const double v = sol.allocation(j, k) / config.p_max;
          data.targets(n, j * (K + 1) + k) = v;
          sum += v;
        }
        data.targets(n, j * (K + 1) + K) = sum;
      }
      break;
    }
  }
  return data;
}

double success_rate(const CellPowerModel& victim, const RowMatrix& inputs, const Vector& eta, double p_max) {
  if (inputs.rows() == 0) return 0.0;
  if (eta.size() != inputs.cols()) throw DimensionMismatch("perturbation length != input width");
  long hits = 0;
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    hits += is_infeasible(victim, inputs.row(i).transpose() + eta, p_max);
  }
  return static_cast<double>(hits) / static_cast<double>(inputs.rows());
}

double success_rate_per_sample(const CellPowerModel& victim, const RowMatrix& inputs, const RowMatrix& etas,
                               double p_max) {
  if (etas.rows() != inputs.rows() || etas.cols() != inputs.cols()) {
    throw DimensionMismatch("per-sample perturbations must match the input set shape");
  }
  if (inputs.rows() == 0) return 0.0;
  long hits = 0;
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    hits += is_infeasible(victim, (inputs.row(i) + etas.row(i)).transpose(), p_max);
  }
  return static_cast<double>(hits) / static_cast<double>(inputs.rows());
}

double threshold_success_rate(std::span<const double> magnitudes, double epsilon) {
  if (magnitudes.empty()) return 0.0;
  const auto hits = std::count_if(magnitudes.begin(), magnitudes.end(), [&](double m) { return m <= epsilon; });
  return static_cast<double>(hits) / static_cast<double>(magnitudes.size());
}

std::vector<Eigen::Index> feasible_rows(const RowMatrix& inputs, std::span<const CellPowerModel* const> models,
                                        double p_max, Eigen::Index max_rows) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    if (max_rows > 0 && static_cast<Eigen::Index>(keep.size()) >= max_rows) break;
    const Vector x = inputs.row(i).transpose();
    const bool ok = std::none_of(models.begin(), models.end(),
                                 [&](const CellPowerModel* m) { return is_infeasible(*m, x, p_max); });
    if (ok) keep.push_back(i);
  }
  return keep;
}

RowMatrix select_feasible(const RowMatrix& inputs, std::span<const CellPowerModel* const> models, double p_max,
                          Eigen::Index max_rows) {
  const auto keep = feasible_rows(inputs, models, p_max, max_rows);
  RowMatrix out(static_cast<Eigen::Index>(keep.size()), inputs.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = inputs.row(keep[r]);
  return out;
}

RowMatrix draw_craft_samples(const RowMatrix& pool, int n_craft, std::uint64_t seed) {
  if (n_craft < 1 || n_craft > pool.rows()) throw DataError("n_craft must lie in [1, pool size]");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(pool.rows()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  Rng rng(seed);
  RowMatrix out(n_craft, pool.cols());
  for (int i = 0; i < n_craft; ++i) {
    const std::size_t pick = static_cast<std::size_t>(i) + rng.index(idx.size() - static_cast<std::size_t>(i));
    std::swap(idx[static_cast<std::size_t>(i)], idx[pick]);
    out.row(i) = pool.row(idx[static_cast<std::size_t>(i)]);
  }
  return out;
}

MonteCarloResult monte_carlo_best_uap(const CraftFn& craft, const CellPowerModel& crafting_model,
                                      const RowMatrix& pool, int n_craft, int n_trials, double p_max,
                                      std::uint64_t seed) {
  if (n_trials < 1) throw ConfigError("n_trials must be >= 1");
  MonteCarloResult result;
  double best_rate = -1.0;
  for (int t = 0; t < n_trials; ++t) {
    const RowMatrix samples = draw_craft_samples(pool, n_craft, mix_seed(seed, static_cast<std::uint64_t>(t)));
    Perturbation eta = craft(samples);
    const double rate = success_rate(crafting_model, pool, eta.eta, p_max);
    result.trial_rates.push_back(rate);
    if (rate > best_rate) {
      best_rate = rate;
      result.best = std::move(eta);
      result.best_trial = t;
    }
  }
  return result;
}

std::vector<double> CraftedAttack::magnitudes() const {
  std::vector<double> out(static_cast<std::size_t>(etas.rows()));
  for (Eigen::Index r = 0; r < etas.rows(); ++r) {
    out[static_cast<std::size_t>(r)] = etas.row(r).cwiseAbs().maxCoeff();
  }
  return out;
}

CraftedAttack craft_attack(AttackId attack, const AttackContext& ctx, const AttackSettings& settings, int n_trials) {
  settings.validate();
  const CellPowerModel* model = is_black_box(attack) ? ctx.surrogate : ctx.victim;
  if (!model) {
    throw ConfigError(is_black_box(attack) ? "black-box attacks require a surrogate model"
                                           : "white-box attacks require the victim model");
  }
  const double eps = settings.epsilon;
  CraftedAttack out;
  out.attack = attack;
  out.epsilon = eps;

  const auto start = std::chrono::steady_clock::now();
  if (is_universal(attack)) {
    if (!ctx.pool) throw ConfigError("UAP attacks require a crafting pool");
    CraftFn fn;
    if (attack == AttackId::kA3 || attack == AttackId::kA4) {
      fn = [&](const RowMatrix& craft) {
        return uap_accumulative(*model, craft, ctx.p_max, eps, settings.uap_passes, settings.eps_acc,
                                settings.min_perturbation_iters);
      };
    } else {
      fn = [&](const RowMatrix& craft) { return uap_pca(*model, craft, ctx.p_max, eps); };
    }
    MonteCarloResult mc =
        monte_carlo_best_uap(fn, *model, *ctx.pool, settings.n_craft, n_trials, ctx.p_max, settings.seed);
    out.etas = mc.best.eta.transpose();
    out.trial_rates = std::move(mc.trial_rates);
  } else {
    if (!ctx.targets) throw ConfigError("per-sample attacks require target inputs");
    const RowMatrix& xs = *ctx.targets;
    out.etas.resize(xs.rows(), xs.cols());
    for (Eigen::Index i = 0; i < xs.rows(); ++i) {
      const Vector x = xs.row(i).transpose();
      Perturbation p;
      switch (attack) {
        case AttackId::kA1:
          p = random_perturbation(static_cast<int>(xs.cols()), eps,
                                  mix_seed(settings.seed, static_cast<std::uint64_t>(i)));
          break;
        case AttackId::kA2:
          p = min_perturbation(*model, x, ctx.p_max, settings.delta_max, settings.eps_acc,
                               settings.min_perturbation_iters);
          break;
        case AttackId::kA7:
          p = optimized_attack(*model, x, ctx.p_max, eps, settings.optimized_iters, settings.adam_lr);
          break;
        case AttackId::kA8:
          p = fgsm(*model, x, eps);
          break;
        case AttackId::kA9:
          p = pgd(*model, x, eps, settings.pgd_steps, settings.effective_pgd_step());
          break;
        default:
          throw ConfigError("unexpected attack id");
      }
      out.etas.row(i) = p.eta.transpose();
    }
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

double evaluate_attack(AttackId attack, const RowMatrix& etas, double epsilon, const CellPowerModel& victim,
                       const RowMatrix& inputs, double p_max) {
  if (attack == AttackId::kA2) {
    if (etas.rows() != inputs.rows()) throw DimensionMismatch("a2 needs one perturbation per input");
    std::vector<double> mags(static_cast<std::size_t>(etas.rows()));
    for (Eigen::Index r = 0; r < etas.rows(); ++r) mags[static_cast<std::size_t>(r)] = etas.row(r).cwiseAbs().maxCoeff();
    return threshold_success_rate(mags, epsilon);
  }
  if (is_universal(attack)) {
    if (etas.rows() != 1) throw DimensionMismatch("universal attacks carry exactly one perturbation");
    return success_rate(victim, inputs, etas.row(0).transpose(), p_max);
  }
  return success_rate_per_sample(victim, inputs, etas, p_max);
}

void EvalReport::add_cell_means() {
  std::map<std::pair<std::string, double>, std::vector<const ReportRow*>> groups;
  std::vector<std::pair<std::string, double>> order;
  for (const auto& row : rows) {
    if (row.cell == "mean") continue;
    auto key = std::make_pair(row.attack_id, row.epsilon);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&row);
  }
  std::vector<ReportRow> means;
  for (const auto& key : order) {
    const auto& members = groups[key];
    ReportRow mean = *members.front();
    mean.cell = "mean";
    double rate = 0.0;
    double secs = 0.0;
    bool timed = true;
    for (const ReportRow* r : members) {
      rate += r->success_rate;
      timed = timed && r->seconds.has_value();
      secs += r->seconds.value_or(0.0);
    }
    mean.success_rate = rate / static_cast<double>(members.size());
    mean.seconds = timed ? std::optional<double>(secs / static_cast<double>(members.size())) : std::nullopt;
    means.push_back(std::move(mean));
  }
  rows.insert(rows.end(), means.begin(), means.end());
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os << kReportHeader << '\n';
  for (const auto& r : rows) {
    os << r.attack_id << ',' << r.cell << ',' << format_double(r.epsilon) << ',' << format_double(r.success_rate)
       << ',' << (r.seconds ? format_double(*r.seconds) : std::string{}) << ',' << r.n_craft << ',' << r.seed
       << '\n';
  }
  return os.str();
}

EvalReport EvalReport::from_csv(const std::string& text) {
  EvalReport report;
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) return report;
  if (line != kReportHeader) throw DataError("unexpected CSV header: " + line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() == 6 && line.back() == ',') fields.emplace_back();
    if (fields.size() != 7) throw DataError("CSV row must have 7 fields: " + line);
    ReportRow row;
    row.attack_id = fields[0];
    row.cell = fields[1];
    row.epsilon = parse_double(fields[2]);
    row.success_rate = parse_double(fields[3]);
    if (!fields[4].empty()) row.seconds = parse_double(fields[4]);
    row.n_craft = std::stoi(fields[5]);
    row.seed = std::stoull(fields[6]);
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string plot_description(const EvalReport& report) {
  using nlohmann::json;
  json values = json::array();
  json groups = json::array();
  std::map<std::string, std::size_t> group_index;
  for (const auto& r : report.rows) {
    values.push_back({{"attack_id", r.attack_id}, {"cell", r.cell}, {"epsilon", r.epsilon},
                      {"success_rate", r.success_rate}});
    auto [it, inserted] = group_index.try_emplace(r.attack_id, groups.size());
    if (inserted) groups.push_back({{"attack_id", r.attack_id}, {"bars", json::array()}});
    groups[it->second]["bars"].push_back({{"cell", r.cell}, {"epsilon", r.epsilon}, {"height", r.success_rate}});
  }
  json spec = {
      {"$schema", "https://vega.github.io/schema/vega-lite/v5.json"},
      {"description", "Adversarial success rate per attack and perturbation budget"},
      {"data", {{"values", values}}},
      {"mark", "bar"},
      {"encoding",
       {{"x", {{"field", "attack_id"}, {"type", "nominal"}, {"title", "attack"}}},
        {"xOffset", {{"field", "epsilon"}, {"type", "nominal"}}},
        {"color", {{"field", "epsilon"}, {"type", "nominal"}}},
        {"y", {{"field", "success_rate"}, {"type", "quantitative"}, {"scale", {{"domain", {0, 1}}}}}}}},
      {"groups", groups}};
  return spec.dump(2) + "\n";
}

double NSensitivity::spread_accumulative() const {
  if (rows.empty()) return 0.0;
  auto [lo, hi] = std::minmax_element(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.rate_accumulative < b.rate_accumulative;
  });
  return hi->rate_accumulative - lo->rate_accumulative;
}

double NSensitivity::spread_pca() const {
  if (rows.empty()) return 0.0;
  auto [lo, hi] = std::minmax_element(rows.begin(), rows.end(),
                                      [](const auto& a, const auto& b) { return a.rate_pca < b.rate_pca; });
  return hi->rate_pca - lo->rate_pca;
}

NSensitivity sweep_n_sensitivity(const CellPowerModel& crafting_model, const CellPowerModel& victim,
                                 const RowMatrix& pool, const RowMatrix& test, std::span<const int> n_values,
                                 const AttackSettings& settings, int n_trials, double p_max) {
  // The crafting model stands in as "victim" in the white-box slot; evaluation
  // below is always on the real victim.
  AttackContext ctx;
  ctx.victim = &crafting_model;
  ctx.pool = &pool;
  ctx.p_max = p_max;
  NSensitivity out;
  for (int n : n_values) {
    AttackSettings s = settings;
    s.n_craft = n;
    const CraftedAttack acc = craft_attack(AttackId::kA3, ctx, s, n_trials);
    const CraftedAttack pca = craft_attack(AttackId::kA5, ctx, s, n_trials);
    NSensitivityRow row;
    row.n_craft = n;
    row.rate_accumulative = success_rate(victim, test, acc.etas.row(0).transpose(), p_max);
    row.rate_pca = success_rate(victim, test, pca.etas.row(0).transpose(), p_max);
    out.rows.push_back(row);
  }
  return out;
}

std::vector<TimingRow> benchmark_timing(std::span<const AttackId> attacks, const AttackContext& ctx,
                                        const AttackSettings& settings, int n_trials) {
  std::vector<TimingRow> out;
  for (AttackId a : attacks) out.push_back({a, craft_attack(a, ctx, settings, n_trials).seconds});
  return out;
}

}  // namespace uapmimo
