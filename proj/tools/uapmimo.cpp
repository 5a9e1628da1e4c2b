// uapmimo: staged command-line pipeline.
//
//   generate    -> dataset file
//   train       -> weights + .scaler sidecar + .loss.csv
//   select-test -> dataset restricted to rows every listed model predicts feasible
//   attack      -> perturbation file
//   evaluate    -> CSV report
//   report      -> Vega-Lite bar chart description
//
// Every stage writes <output>.manifest.json last.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "uapmimo/binary_io.hpp"
#include "uapmimo/error.hpp"
#include "uapmimo/eval.hpp"
#include "uapmimo/random.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace uapmimo;

namespace {

constexpr const char* kToolVersion = "0.1.0";

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

fs::path manifest_path(const fs::path& out) {
  fs::path p = out;
  p += ".manifest.json";
  return p;
}

std::vector<std::string> path_strings(const std::vector<fs::path>& paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) out.push_back(p.string());
  return out;
}

void write_manifest(const std::string& stage, const std::optional<fs::path>& config,
                    const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs, std::uint64_t seed,
                    json extra = json::object()) {
  for (const auto& p : outputs) {
    if (!fs::exists(p)) throw DataError("stage output missing: " + p.string());
  }
  json m = {{"stage", stage},
            {"config", config ? json(config->string()) : json(nullptr)},
            {"inputs", path_strings(inputs)},
            {"outputs", path_strings(outputs)},
            {"seed", seed},
            {"timestamp", utc_timestamp()},
            {"tool_version", kToolVersion},
            {"details", std::move(extra)}};
  write_file_atomic(manifest_path(outputs.front()), m.dump(2) + "\n");
}

struct LoadedModel {
  fs::path path;
  ModelSidecar meta;
  CellPowerModel model;
};

LoadedModel load_cell_model(const fs::path& weights) {
  ModelSidecar meta = load_sidecar(weights);
  Mlp net = load_model(weights);
  CellPowerModel model(std::move(net), meta.output, meta.n_ues_per_cell);
  return {weights, meta, std::move(model)};
}

void check_compatible(const LoadedModel& m, const Dataset& data, const std::string& what) {
  if (m.model.input_dim() != data.config.input_dim() || m.meta.n_ues_per_cell != data.config.n_ues_per_cell) {
    throw DimensionMismatch(what + ": model " + m.path.string() + " does not match the dataset shape");
  }
  if (m.meta.p_max != data.config.p_max) {
    throw DataError(what + ": model " + m.path.string() + " was trained for a different p_max");
  }
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  fs::path config;
  long samples = 0;
  std::uint64_t seed = 0;
  fs::path out;
};

void run_generate(const GenerateArgs& a) {
  const NetworkConfig config = load_config(a.config);
  if (a.samples < 0) throw ConfigError("--samples must be >= 0");
  const auto start = std::chrono::steady_clock::now();
  const Dataset data = generate_dataset(config, a.samples, a.seed);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  save_dataset(a.out, data);
  if (data.regenerated > 0) {
    std::cerr << "generate: " << data.regenerated << " samples redrawn after solver non-convergence\n";
  }
  write_manifest("generate", a.config, {}, {a.out}, a.seed,
                 {{"samples", a.samples}, {"regenerated", data.regenerated}, {"seconds", secs}});
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  fs::path data;
  std::string model = "m1";
  int cell = 0;
  int epochs = 50;
  std::uint64_t seed = 0;
  double lr = 1e-3;
  int batch = 128;
  fs::path out;
};

void run_train(const TrainArgs& a) {
  const Dataset data = load_dataset(a.data);
  const NetworkConfig& c = data.config;
  if (a.cell < 0 || a.cell >= c.n_cells) throw ConfigError("--cell must lie in [0, n_cells)");

  Mlp model = Mlp::glorot(architecture(a.model, c.input_dim(), c.n_ues_per_cell), mix_seed(a.seed, 0));
  TrainSettings s;
  s.learning_rate = a.lr;
  s.batch_size = a.batch;
  s.epochs = a.epochs;
  s.seed = mix_seed(a.seed, 1);
  const auto start = std::chrono::steady_clock::now();
  const TrainResult r = train(model, data, a.cell, s);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  save_model(a.out, model);
  ModelSidecar meta;
  meta.architecture = a.model;
  meta.cell = a.cell;
  meta.n_ues_per_cell = c.n_ues_per_cell;
  meta.p_max = c.p_max;
  meta.output = {c.p_max, 0.0};
  meta.positions = PositionScaler::for_config(c);
  save_sidecar(a.out, meta);

  fs::path loss_path = a.out;
  loss_path += ".loss.csv";
  std::ostringstream loss;
  loss << "epoch,loss\n";
  for (std::size_t e = 0; e < r.loss_history.size(); ++e) {
    loss << e + 1 << ',' << format_double(r.loss_history[e]) << '\n';
  }
  write_file_atomic(loss_path, loss.str());

  write_manifest("train", std::nullopt, {a.data}, {a.out, sidecar_path(a.out), loss_path}, a.seed,
                 {{"architecture", a.model},
                  {"layer_dims", model.layer_dims()},
                  {"cell", a.cell},
                  {"epochs", a.epochs},
                  {"final_loss", r.loss_history.empty() ? json(nullptr) : json(r.loss_history.back())},
                  {"seconds", secs}});
}

// ---------------------------------------------------------------- select-test

struct SelectArgs {
  fs::path data;
  std::vector<fs::path> models;
  long max_rows = 500;
  fs::path out;
};

void run_select(const SelectArgs& a) {
  const Dataset data = load_dataset(a.data);
  std::vector<LoadedModel> models;
  for (const auto& p : a.models) {
    models.push_back(load_cell_model(p));
    check_compatible(models.back(), data, "select-test");
  }
  std::vector<const CellPowerModel*> ptrs;
  for (const auto& m : models) ptrs.push_back(&m.model);
  const auto keep = feasible_rows(data.inputs, ptrs, data.config.p_max, a.max_rows);

  Dataset out;
  out.config = data.config;
  out.seed = data.seed;
  out.inputs.resize(static_cast<Eigen::Index>(keep.size()), data.inputs.cols());
  out.targets.resize(static_cast<Eigen::Index>(keep.size()), data.targets.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    out.inputs.row(static_cast<Eigen::Index>(r)) = data.inputs.row(keep[r]);
    out.targets.row(static_cast<Eigen::Index>(r)) = data.targets.row(keep[r]);
  }
  if (a.max_rows > 0 && out.size() < a.max_rows) {
    std::cerr << "select-test: only " << out.size() << " of " << data.size() << " rows are feasible on every model\n";
  }
  save_dataset(a.out, out);
  std::vector<fs::path> inputs{a.data};
  inputs.insert(inputs.end(), a.models.begin(), a.models.end());
  write_manifest("select-test", std::nullopt, inputs, {a.out}, data.seed,
                 {{"rows_in", data.size()}, {"rows_out", out.size()}});
}

// ---------------------------------------------------------------- attack

struct AttackArgs {
  fs::path victim;
  std::optional<fs::path> surrogate;
  std::string attack;
  std::optional<fs::path> pool;
  std::optional<fs::path> targets;
  int trials = 50;
  AttackSettings settings;
  fs::path out;
};

void run_attack(const AttackArgs& a) {
  const AttackId id = parse_attack_id(a.attack);
  a.settings.validate();
  if (is_black_box(id) && !a.surrogate) throw ConfigError("black-box attacks (a4, a6) require --surrogate");
  if (is_universal(id) && !a.pool) throw ConfigError(to_string(id) + " needs --pool (training dataset)");
  if (!is_universal(id) && !a.targets) throw ConfigError(to_string(id) + " needs --targets (attacked dataset)");

  // Crafting loads exactly one model: the victim for white-box, the surrogate for black-box.
  const fs::path crafting_path = is_black_box(id) ? *a.surrogate : a.victim;
  const LoadedModel crafting = load_cell_model(crafting_path);
  const ModelSidecar victim_meta = load_sidecar(a.victim);

  Dataset pool, targets;
  std::vector<fs::path> inputs{crafting_path};
  if (is_universal(id)) {
    pool = load_dataset(*a.pool);
    check_compatible(crafting, pool, "attack");
    inputs.push_back(*a.pool);
  } else {
    targets = load_dataset(*a.targets);
    check_compatible(crafting, targets, "attack");
    inputs.push_back(*a.targets);
  }

  AttackContext ctx;
  (is_black_box(id) ? ctx.surrogate : ctx.victim) = &crafting.model;
  ctx.pool = &pool.inputs;
  ctx.targets = &targets.inputs;
  ctx.p_max = crafting.meta.p_max;

  const CraftedAttack crafted = craft_attack(id, ctx, a.settings, a.trials);

  PerturbationSet set;
  set.attack = id;
  set.epsilon = a.settings.epsilon;
  set.seed = a.settings.seed;
  set.cell = victim_meta.cell;
  set.n_craft = is_universal(id) ? a.settings.n_craft : 0;
  set.etas = crafted.etas;
  save_perturbations(a.out, set);

  const auto mags = crafted.magnitudes();
  write_manifest("attack", std::nullopt, inputs, {a.out}, a.settings.seed,
                 {{"attack", to_string(id)},
                  {"victim", a.victim.string()},
                  {"crafting_model", crafting_path.string()},
                  {"epsilon", a.settings.epsilon},
                  {"trials", is_universal(id) ? a.trials : 0},
                  {"trial_rates", crafted.trial_rates},
                  {"max_norm_inf", mags.empty() ? 0.0 : *std::max_element(mags.begin(), mags.end())},
                  {"seconds", crafted.seconds}});
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::vector<fs::path> victims;
  fs::path test_data;
  std::vector<fs::path> perturbations;
  bool include_timing = false;
  bool cell_means = false;
  fs::path out;
};

std::optional<double> recorded_seconds(const fs::path& perturbation) {
  const fs::path m = manifest_path(perturbation);
  if (!fs::exists(m)) return std::nullopt;
  const json j = json::parse(read_file(m), nullptr, false);
  if (j.is_discarded() || !j.contains("details") || !j["details"].contains("seconds")) return std::nullopt;
  return j["details"]["seconds"].get<double>();
}

void run_evaluate(const EvaluateArgs& a) {
  const Dataset test = load_dataset(a.test_data);
  std::map<int, LoadedModel> victims;
  for (const auto& p : a.victims) {
    LoadedModel m = load_cell_model(p);
    check_compatible(m, test, "evaluate");
    const int cell = m.meta.cell;
    if (!victims.emplace(cell, std::move(m)).second) {
      throw ConfigError("two victims given for cell " + std::to_string(cell));
    }
  }

  EvalReport report;
  for (const auto& path : a.perturbations) {
    PerturbationSet set = load_perturbations(path);
    if (set.etas.rows() == 0) set.etas.resize(0, test.inputs.cols());
    const auto it = victims.find(set.cell);
    if (it == victims.end()) {
      throw DataError(path.string() + " targets cell " + std::to_string(set.cell) + " but no victim for that cell was given");
    }
    if (set.etas.cols() != test.inputs.cols()) throw DimensionMismatch(path.string() + ": perturbation width != input width");
    ReportRow row;
    row.attack_id = to_string(set.attack);
    row.cell = std::to_string(set.cell);
    row.epsilon = set.epsilon;
    row.success_rate = evaluate_attack(set.attack, set.etas, set.epsilon, it->second.model, test.inputs,
                                       it->second.meta.p_max);
    if (a.include_timing) row.seconds = recorded_seconds(path);
    row.n_craft = set.n_craft;
    row.seed = set.seed;
    report.rows.push_back(std::move(row));
  }
  if (a.cell_means) report.add_cell_means();
  write_file_atomic(a.out, report.to_csv());

  std::vector<fs::path> inputs{a.test_data};
  inputs.insert(inputs.end(), a.victims.begin(), a.victims.end());
  inputs.insert(inputs.end(), a.perturbations.begin(), a.perturbations.end());
  write_manifest("evaluate", std::nullopt, inputs, {a.out}, 0, {{"rows", report.rows.size()}});
}

// ---------------------------------------------------------------- report

struct ReportArgs {
  fs::path csv;
  fs::path out_plot;
};

void run_report(const ReportArgs& a) {
  const EvalReport report = EvalReport::from_csv(read_file(a.csv));
  if (report.rows.empty()) std::cerr << "report: " << a.csv.string() << " has no rows; writing an empty plot\n";
  write_file_atomic(a.out_plot, plot_description(report));
  write_manifest("report", std::nullopt, {a.csv}, {a.out_plot}, 0, {{"rows", report.rows.size()}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial attacks on DNN-based multicell massive MIMO power allocation"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Synthesize a dataset of UE positions and max-prod powers");
  g->add_option("--config", gen.config, "NetworkConfig file (key=value)")->required()->check(CLI::ExistingFile);
  g->add_option("--samples", gen.samples, "Number of samples")->required();
  g->add_option("--seed", gen.seed, "Base seed")->required();
  g->add_option("--out", gen.out, "Output dataset file")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train one cell's power regressor");
  t->add_option("--data", tr.data, "Training dataset")->required()->check(CLI::ExistingFile);
  t->add_option("--model", tr.model, "Architecture")->check(CLI::IsMember({"m1", "m2"}))->capture_default_str();
  t->add_option("--cell", tr.cell, "Cell whose powers are predicted")->capture_default_str();
  t->add_option("--epochs", tr.epochs, "Training epochs")->capture_default_str();
  t->add_option("--seed", tr.seed, "Seed for init and shuffling")->capture_default_str();
  t->add_option("--lr", tr.lr, "Adam learning rate")->capture_default_str();
  t->add_option("--batch", tr.batch, "Minibatch size")->capture_default_str();
  t->add_option("--out", tr.out, "Output weights file (sidecar and loss history are written next to it)")->required();

  SelectArgs sel;
  auto* s = app.add_subcommand("select-test", "Keep test rows whose clean prediction is feasible on every model");
  s->add_option("--data", sel.data, "Dataset to filter")->required()->check(CLI::ExistingFile);
  s->add_option("--model", sel.models, "Weights file (repeatable)")->required()->check(CLI::ExistingFile);
  s->add_option("--max-rows", sel.max_rows, "Stop after this many rows (0 = all)")->capture_default_str();
  s->add_option("--out", sel.out, "Output dataset file")->required();

  AttackArgs at;
  std::string surrogate, pool, targets;
  auto* a = app.add_subcommand("attack", "Craft adversarial perturbations (a1..a9)");
  a->add_option("--victim", at.victim, "Victim weights file")->required()->check(CLI::ExistingFile);
  a->add_option("--surrogate", surrogate, "Surrogate weights file (a4, a6)")->check(CLI::ExistingFile);
  a->add_option("--attack", at.attack, "Attack id a1..a9")->required();
  a->add_option("--eps", at.settings.epsilon, "Infinity-norm budget")->required();
  a->add_option("--pool", pool, "Training dataset used as the UAP crafting pool")->check(CLI::ExistingFile);
  a->add_option("--targets", targets, "Dataset attacked by per-sample attacks")->check(CLI::ExistingFile);
  a->add_option("--n-craft", at.settings.n_craft, "Craft samples per UAP trial")->capture_default_str();
  a->add_option("--trials", at.trials, "Monte Carlo trials for UAPs")->capture_default_str();
  a->add_option("--seed", at.settings.seed, "Seed")->capture_default_str();
  a->add_option("--delta-max", at.settings.delta_max, "Search range of the minimum perturbation")->capture_default_str();
  a->add_option("--eps-acc", at.settings.eps_acc, "Bisection accuracy")->capture_default_str();
  a->add_option("--min-pert-iters", at.settings.min_perturbation_iters, "Bisection iteration cap")->capture_default_str();
  a->add_option("--uap-passes", at.settings.uap_passes, "Passes of the accumulative UAP")->capture_default_str();
  a->add_option("--opt-iters", at.settings.optimized_iters, "Adam steps of the optimized attack")->capture_default_str();
  a->add_option("--adam-lr", at.settings.adam_lr, "Adam step of the optimized attack")->capture_default_str();
  a->add_option("--pgd-steps", at.settings.pgd_steps, "PGD iterations")->capture_default_str();
  a->add_option("--pgd-step", at.settings.pgd_step_size, "PGD step (0 = eps/4)")->capture_default_str();
  a->add_option("--out", at.out, "Output perturbation file")->required();

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Measure adversarial success rates");
  e->add_option("--victim", ev.victims, "Victim weights file, one per cell (repeatable)")->required()->check(CLI::ExistingFile);
  e->add_option("--test-data", ev.test_data, "Test dataset")->required()->check(CLI::ExistingFile);
  e->add_option("--perturbations", ev.perturbations, "Perturbation files")->required()->check(CLI::ExistingFile);
  e->add_flag("--include-timing", ev.include_timing, "Fill the seconds column from attack manifests");
  e->add_flag("--cell-means", ev.cell_means, "Append mean-over-cells rows");
  e->add_option("--out", ev.out, "Output CSV")->required();

  ReportArgs rep;
  auto* r = app.add_subcommand("report", "Write a bar-chart description of a CSV report");
  r->add_option("--csv", rep.csv, "Report CSV")->required()->check(CLI::ExistingFile);
  r->add_option("--out-plot", rep.out_plot, "Output Vega-Lite JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*g) run_generate(gen);
    if (*t) run_train(tr);
    if (*s) run_select(sel);
    if (*a) {
      if (!surrogate.empty()) at.surrogate = surrogate;
      if (!pool.empty()) at.pool = pool;
      if (!targets.empty()) at.targets = targets;
      run_attack(at);
    }
    if (*e) run_evaluate(ev);
    if (*r) run_report(rep);
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const DataError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 3;
  } catch (const NumericError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 4;
  } catch (const nlohmann::json::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 3;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
