// multic: generate synthetic data, run inference, score it, and drive
// experiment grids.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "multic/csv.hpp"
#include "multic/harness.hpp"
#include "multic/inference.hpp"
#include "multic/io.hpp"
#include "multic/metrics.hpp"
#include "multic/results_io.hpp"
#include "multic/synthgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using namespace multic;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitPartial = 3;

struct Globals {
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string out_dir;
};

fs::path out_path(const Globals& g, const std::string& file) {
  const fs::path dir = g.out_dir.empty() ? fs::path(".") : fs::path(g.out_dir);
  fs::create_directories(dir);
  return dir / file;
}

// ---- generate ------------------------------------------------------------

struct GenerateArgs {
  NetworkGenConfig net;
  CascadeGenConfig casc;
  std::optional<double> ce_ratio;
  std::size_t size_threshold = 1;
};

int run_generate(const Globals& g, GenerateArgs a) {
  const std::uint64_t seed = g.seed.value_or(0);
  a.net.seed = seed;
  a.casc.seed = seed;
  a.net.validate();
  const MultilayerNetwork net = generate_network(a.net);
  const AggregatedNetwork agg = aggregate(net);
  if (a.ce_ratio) a.casc.n_cascades = std::llround(*a.ce_ratio * static_cast<double>(agg.edges.size()));
  if (a.casc.n_cascades <= 0) throw std::invalid_argument("set --cascades or --ce-ratio to a positive value");
  a.casc.validate();

  const CascadeSet simulated = simulate_cascades(net, a.casc, g.threads);
  const CascadeSet informative = filter_cascades(simulated, 1);
  const CascadeSet kept = filter_cascades(informative, a.size_threshold);

  write_network(net, out_path(g, "network.tsv").string());
  write_cascades(kept, out_path(g, "cascades.jsonl").string());

  ordered_json layer_edges = ordered_json::array();
  for (int k = 0; k < net.n_layers(); ++k) layer_edges.push_back(net.n_edges(k));
  ordered_json manifest;
  manifest["config"] = {{"seed", seed},
                        {"n_nodes", a.net.n_nodes},
                        {"n_layers", a.net.n_layers},
                        {"overlap", a.net.overlap},
                        {"mu_in", a.net.mu_in},
                        {"sigma_in", a.net.sigma_in},
                        {"mu_out", a.net.mu_out},
                        {"sigma_out", a.net.sigma_out},
                        {"rate_low", a.net.rate_low},
                        {"rate_high", a.net.rate_high},
                        {"horizon", a.casc.horizon},
                        {"recovery_rate", a.casc.recovery_rate},
                        {"seed_prob", a.casc.seed_prob_for(a.net.n_nodes)},
                        {"eps_max", a.casc.eps_max},
                        {"n_cascades", a.casc.n_cascades},
                        {"ce_ratio", a.ce_ratio ? ordered_json(*a.ce_ratio) : ordered_json()},
                        {"size_threshold", a.size_threshold}};
  manifest["realized"] = {{"aggregated_edges", agg.edges.size()},
                          {"layer_edges", layer_edges},
                          {"overlap", layer_overlap(net)},
                          {"n_simulated", simulated.size()},
                          {"n_informative", informative.size()},
                          {"n_written", kept.size()}};
  write_file(out_path(g, "truth.json").string(), manifest.dump(2) + "\n");
  std::cerr << "network: " << agg.edges.size() << " aggregated edges; cascades: " << simulated.size()
            << " simulated, " << kept.size() << " written\n";
  return kExitOk;
}

// ---- infer ---------------------------------------------------------------

ordered_json optimizer_json(const OptimizerConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"max_iters", c.max_iters}, {"rel_tol", c.rel_tol},
          {"patience", c.patience},           {"beta1", c.beta1},         {"beta2", c.beta2},
          {"eps", c.eps},                     {"restarts", c.restarts}};
}

struct InferArgs {
  std::string cascades;
  std::string truth_network;
  int layers = 2;
  std::optional<std::size_t> budget;
  double budget_factor = 1.1;
  std::size_t size_threshold = 1;
  bool truth_aware = false;
  OptimizerConfig p1 = OptimizerConfig::phase_one();
  OptimizerConfig p2 = OptimizerConfig::phase_two();
};

int run_infer(const Globals& g, InferArgs a) {
  if (g.seed) a.p1.restarts = {*g.seed};
  const CascadeSet cascades = read_cascades(a.cascades);
  PipelineConfig pc;
  pc.n_layers = a.layers;
  pc.phase_one = a.p1;
  pc.phase_two = a.p2;
  pc.size_threshold = a.size_threshold;
  pc.truth_aware = a.truth_aware;
  pc.threads = g.threads;
  pc.budget = a.budget;
  if (!pc.budget) {
    if (a.truth_network.empty()) {
      throw std::invalid_argument("--budget is required unless --truth supplies the ground-truth network");
    }
    pc.budget = default_budget(aggregate(read_network(a.truth_network)).edges.size(), a.budget_factor);
  }
  const PipelineOutput out = run_pipeline(cascades, pc);
  ordered_json doc = result_to_json(out.result);
  doc["provenance"] = {{"cascades", a.cascades},
                       {"phase_one", optimizer_json(pc.phase_one)},
                       {"phase_two", optimizer_json(pc.phase_two)},
                       {"size_threshold", pc.size_threshold},
                       {"truth_aware", pc.truth_aware},
                       {"phase_one_stop", out.result.phase_one_stop},
                       {"phase_one_dropped_terms", out.result.phase_one_dropped_terms},
                       {"phase_two_dropped_terms", out.result.phase_two_dropped_terms},
                       {"phase_one_seconds", out.timings.phase_one_seconds},
                       {"phase_two_seconds", out.timings.phase_two_seconds},
                       {"total_seconds", out.timings.total_seconds},
                       {"memory_estimate_bytes", out.memory_estimate_bytes}};
  write_file(out_path(g, "result.json").string(), doc.dump(2) + "\n");
  std::ofstream scores(out_path(g, "edge_scores.tsv"));
  write_edge_scores(out.result, scores);
  std::cerr << "phase one " << out.timings.phase_one_seconds << " s, phase two " << out.timings.phase_two_seconds
            << " s; " << out.result.selected_edges.size() << " edges selected, restart seed "
            << out.result.restart_seed << "\n";
  return kExitOk;
}

// ---- evaluate ------------------------------------------------------------

struct EvaluateArgs {
  std::string result;
  std::string network;
  std::string cascades;
  std::string manifest;
};

void flatten(const json& j, const std::string& prefix, std::vector<std::string>& keys, std::vector<std::string>& values) {
  for (const auto& [k, v] : j.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (v.is_object()) {
      flatten(v, key, keys, values);
      continue;
    }
    keys.push_back(key);
    if (v.is_string()) {
      values.push_back(v.get<std::string>());
    } else if (v.is_number_float()) {
      values.push_back(format_double(v.get<double>()));
    } else if (v.is_null()) {
      values.emplace_back();
    } else {
      values.push_back(v.dump());
    }
  }
}

int run_evaluate(const Globals& g, const EvaluateArgs& a) {
  const InferenceResult r = result_from_json(json::parse(read_file(a.result)));
  const MultilayerNetwork truth = read_network(a.network);
  const CascadeSet cascades = read_cascades(a.cascades);
  std::map<std::int64_t, int> main_layer;
  for (const Cascade& c : cascades) {
    if (!c.truth()) throw std::invalid_argument("cascade " + std::to_string(c.id()) + " has no ground truth");
    main_layer[c.id()] = c.truth()->main_layer;
  }
  std::vector<int> labels;
  for (std::int64_t id : r.cascade_ids) {
    const auto it = main_layer.find(id);
    if (it == main_layer.end()) throw std::invalid_argument("result names unknown cascade " + std::to_string(id));
    labels.push_back(it->second);
  }
  const auto scored = scored_candidates(r);
  const LayeredRates inferred = layered_rates(r);
  const MetricsReport m = evaluate({scored, &inferred, &r.pi_hat, labels, &truth});

  std::vector<std::string> keys, values;
  if (!a.manifest.empty()) flatten(json::parse(read_file(a.manifest)), "", keys, values);
  std::string perm, per_layer;
  for (std::size_t k = 0; k < m.matched_permutation.size(); ++k) perm += (k ? ";" : "") + std::to_string(m.matched_permutation[k]);
  for (std::size_t k = 0; k < m.pr_auc_per_layer.size(); ++k) {
    per_layer += (k ? ";" : "") + (m.pr_auc_per_layer[k] ? format_double(*m.pr_auc_per_layer[k]) : std::string());
  }
  const std::vector<std::pair<std::string, std::string>> own{
      {"n_layers", std::to_string(r.n_layers)},
      {"candidate_edges", std::to_string(r.candidate_edges.size())},
      {"selected_edges", std::to_string(r.selected_edges.size())},
      {"budget", std::to_string(r.budget)},
      {"n_cascades_phase_one", std::to_string(r.n_cascades_phase_one)},
      {"n_cascades_phase_two", std::to_string(r.n_cascades_phase_two)},
      {"restart_seed", std::to_string(r.restart_seed)},
      {"auc", format_double(m.auc)},
      {"pi_accuracy", format_double(m.pi_accuracy)},
      {"alpha_spearman", format_double(m.alpha_spearman)},
      {"pr_auc_mean", format_double(m.pr_auc_mean)},
      {"pr_auc_per_layer", per_layer},
      {"edge_recovery", format_double(m.edge_recovery.rate)},
      {"edge_hits", std::to_string(m.edge_recovery.hits)},
      {"matched_permutation", perm}};
  for (const auto& [k, v] : own) {
    keys.push_back(k);
    values.push_back(v);
  }
  if (g.out_dir.empty()) {
    write_csv_row(std::cout, keys);
    write_csv_row(std::cout, values);
  } else {
    std::ofstream out(out_path(g, "metrics.csv"));
    write_csv_row(out, keys);
    write_csv_row(out, values);
  }
  return kExitOk;
}

// ---- experiment ----------------------------------------------------------

struct ExperimentArgs {
  std::string config;
  std::string preset;
  bool resume = false;
  bool dump_config = false;
  bool list_presets = false;
};

int run_experiment(const Globals& g, const ExperimentArgs& a) {
  if (a.list_presets) {
    for (const std::string& name : preset_names()) std::cout << name << "\n";
    return kExitOk;
  }
  if (a.config.empty() == a.preset.empty()) throw ConfigError("give exactly one of --config or --preset");
  ExperimentConfig cfg = a.config.empty() ? preset_config(a.preset) : read_experiment_config(a.config);
  if (g.seed) cfg.replicate_seeds = {*g.seed};
  cfg.validate();
  if (a.dump_config) {
    std::cout << experiment_config_to_json(cfg).dump(2) << "\n";
    return kExitOk;
  }
  GridOptions opts;
  opts.out_dir = g.out_dir.empty() ? fs::path(".") : fs::path(g.out_dir);
  opts.threads = g.threads;
  opts.resume = a.resume;
  opts.log = &std::cerr;
  const GridSummary s = run_grid(cfg, opts);
  std::cerr << s.cells << " cells (" << s.reused << " reused, " << s.failed << " failed) -> " << s.results_csv.string()
            << "\n";
  return s.failed ? kExitPartial : kExitOk;
}

// ---- figure-data ---------------------------------------------------------

struct FigureArgs {
  std::string input;
  std::string family;
};

int run_figure_data(const Globals& g, const FigureArgs& a) {
  const std::string csv = read_file(a.input);
  std::vector<std::string> families;
  if (a.family == "all") {
    families = figure_families();
  } else {
    families = {a.family};
  }
  for (const std::string& family : families) {
    if (g.out_dir.empty() && families.size() == 1) {
      emit_figure_data(csv, family, std::cout);
    } else {
      std::ofstream out(out_path(g, "figure_" + family + ".csv"));
      emit_figure_data(csv, family, out);
    }
  }
  return kExitOk;
}

void add_optimizer_flags(CLI::App* app, const std::string& prefix, OptimizerConfig& cfg, bool with_restarts) {
  app->add_option("--" + prefix + "-lr", cfg.learning_rate, "Adam learning rate")->capture_default_str();
  app->add_option("--" + prefix + "-iters", cfg.max_iters, "iteration cap")->capture_default_str();
  app->add_option("--" + prefix + "-tol", cfg.rel_tol, "relative-decrease stopping tolerance")->capture_default_str();
  app->add_option("--" + prefix + "-patience", cfg.patience, "stopping window in iterations")->capture_default_str();
  if (with_restarts) app->add_option("--restarts", cfg.restarts, "restart seeds")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilayer diffusion network inference from cascades"};
  app.require_subcommand(1);
  Globals globals;
  app.add_option("--seed", globals.seed, "random seed (generate; phase-one init for infer; replicate for experiment)");
  app.add_option("--threads", globals.threads, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--out-dir", globals.out_dir, "output directory");

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "generate a ground-truth network and cascades");
  generate->add_option("--nodes", gen.net.n_nodes)->capture_default_str();
  generate->add_option("--layers", gen.net.n_layers)->capture_default_str();
  generate->add_option("--overlap", gen.net.overlap, "layer overlap phi")->capture_default_str();
  generate->add_option("--mu-in", gen.net.mu_in)->capture_default_str();
  generate->add_option("--sigma-in", gen.net.sigma_in)->capture_default_str();
  generate->add_option("--mu-out", gen.net.mu_out)->capture_default_str();
  generate->add_option("--sigma-out", gen.net.sigma_out)->capture_default_str();
  generate->add_option("--recovery-rate", gen.casc.recovery_rate, "SIR recovery rate gamma")->capture_default_str();
  generate->add_option("--eps-max", gen.casc.eps_max, "layer mixing level")->capture_default_str();
  generate->add_option("--horizon", gen.casc.horizon)->capture_default_str();
  generate->add_option("--seed-prob", gen.casc.seed_prob, "per-node seeding probability (default 1/N)");
  auto* count = generate->add_option("--cascades", gen.casc.n_cascades, "number of cascades to simulate");
  generate->add_option("--ce-ratio", gen.ce_ratio, "cascades per aggregated edge")->excludes(count);
  generate->add_option("--size-threshold", gen.size_threshold, "write only cascades larger than this")
      ->capture_default_str();

  InferArgs inf;
  auto* infer = app.add_subcommand("infer", "infer a multilayer network from cascades");
  infer->add_option("--cascades", inf.cascades, "cascade JSON-lines file")->required()->check(CLI::ExistingFile);
  infer->add_option("--layers", inf.layers, "number of layers K")->capture_default_str();
  infer->add_option("--budget", inf.budget, "number of edges kept after phase one");
  infer->add_option("--truth", inf.truth_network, "ground-truth network, sets the default budget")
      ->check(CLI::ExistingFile);
  infer->add_option("--budget-factor", inf.budget_factor, "budget as a multiple of |E_A| with --truth")
      ->capture_default_str();
  infer->add_option("--size-threshold", inf.size_threshold, "multilayer phase keeps cascades larger than this")
      ->capture_default_str();
  infer->add_flag("--truth-aware", inf.truth_aware, "pick the restart with the best membership accuracy");
  add_optimizer_flags(infer, "p1", inf.p1, false);
  add_optimizer_flags(infer, "p2", inf.p2, true);

  EvaluateArgs ev;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "score an inference result against ground truth");
  evaluate_cmd->add_option("--result", ev.result, "result.json from infer")->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--network", ev.network, "ground-truth network TSV")->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--cascades", ev.cascades, "cascades with truth labels")->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--manifest", ev.manifest, "truth.json from generate, echoed into the row")
      ->check(CLI::ExistingFile);

  ExperimentArgs ex;
  auto* experiment = app.add_subcommand("experiment", "run an experiment grid");
  experiment->add_option("--config", ex.config, "experiment JSON config");
  experiment->add_option("--preset", ex.preset, "built-in grid (see --list-presets)");
  experiment->add_flag("--resume", ex.resume, "reuse finished cells in the output directory");
  experiment->add_flag("--dump-config", ex.dump_config, "print the resolved config and exit");
  experiment->add_flag("--list-presets", ex.list_presets, "list built-in grids and exit");

  FigureArgs fig;
  auto* figure = app.add_subcommand("figure-data", "long-format plot table from results.csv");
  figure->add_option("--input", fig.input, "results.csv from experiment")->required()->check(CLI::ExistingFile);
  figure->add_option("--family", fig.family, "figure family or \"all\"")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*generate) return run_generate(globals, gen);
    if (*infer) return run_infer(globals, inf);
    if (*evaluate_cmd) return run_evaluate(globals, ev);
    if (*experiment) return run_experiment(globals, ex);
    if (*figure) return run_figure_data(globals, fig);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitConfig;
  } catch (const json::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}
