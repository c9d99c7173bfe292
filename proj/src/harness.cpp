#include "multic/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>

#include "multic/csv.hpp"
#include "multic/inference.hpp"
#include "multic/io.hpp"
#include "multic/metrics.hpp"
#include "multic/parallel.hpp"

namespace multic {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// ---- strict JSON reading -------------------------------------------------

void check_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(std::string(where) + ": unknown key \"" + key + "\"");
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, std::string_view where, T& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  const std::string at = std::string(where) + "." + key;
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(at + ": expected a boolean");
    out = v.get<bool>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ConfigError(at + ": expected a string");
    out = v.get<std::string>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError(at + ": expected a number");
    out = v.get<T>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(at + ": expected an integer");
    if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
      throw ConfigError(at + ": expected a non-negative integer");
    }
    out = v.get<T>();
  } else {
    // list
    if (!v.is_array()) throw ConfigError(at + ": expected a list");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      typename T::value_type item{};
      read(json{{"item", v[i]}}, "item", at + "[" + std::to_string(i) + "]", item);
      out.push_back(item);
    }
  }
}

OptimizerConfig parse_optimizer(const json& obj, std::string_view where, OptimizerConfig cfg) {
  check_keys(obj, where,
             {"learning_rate", "max_iters", "rel_tol", "patience", "beta1", "beta2", "eps", "restarts"});
  read(obj, "learning_rate", where, cfg.learning_rate);
  read(obj, "max_iters", where, cfg.max_iters);
  read(obj, "rel_tol", where, cfg.rel_tol);
  read(obj, "patience", where, cfg.patience);
  read(obj, "beta1", where, cfg.beta1);
  read(obj, "beta2", where, cfg.beta2);
  read(obj, "eps", where, cfg.eps);
  read(obj, "restarts", where, cfg.restarts);
  return cfg;
}

ordered_json optimizer_json(const OptimizerConfig& cfg) {
  return {{"learning_rate", cfg.learning_rate}, {"max_iters", cfg.max_iters}, {"rel_tol", cfg.rel_tol},
          {"patience", cfg.patience},           {"beta1", cfg.beta1},         {"beta2", cfg.beta2},
          {"eps", cfg.eps},                     {"restarts", cfg.restarts}};
}

template <typename T>
void require_axis(const std::vector<T>& axis, const char* name) {
  if (axis.empty()) throw ConfigError(std::string(name) + " must not be empty");
  for (std::size_t i = 0; i < axis.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (axis[i] == axis[j]) throw ConfigError(std::string(name) + " lists a value twice");
    }
  }
}

// ---- cells ---------------------------------------------------------------

std::string optimizer_key(const OptimizerConfig& o) {
  std::string s = format_double(o.learning_rate) + "/" + std::to_string(o.max_iters) + "/" + format_double(o.rel_tol) +
                  "/" + std::to_string(o.patience) + "/" + format_double(o.beta1) + "/" + format_double(o.beta2) + "/" +
                  format_double(o.eps) + "/";
  for (std::uint64_t r : o.restarts) s += std::to_string(r) + ",";
  return s;
}

// Everything that fixes the generated data; cells sharing it share phase one.
std::string data_key(const ExperimentConfig& cfg, const ExperimentCell& c) {
  std::ostringstream s;
  s << "N=" << c.n_nodes << ";K=" << c.n_layers << ";phi=" << format_double(c.overlap)
    << ";mu_in=" << format_double(c.density.mu_in) << ";sigma_in=" << format_double(c.density.sigma_in)
    << ";mu_out=" << format_double(c.density.mu_out) << ";sigma_out=" << format_double(c.density.sigma_out)
    << ";rates=" << format_double(cfg.rate_low) << "," << format_double(cfg.rate_high)
    << ";T=" << format_double(cfg.horizon) << ";rho=" << (cfg.seed_prob ? format_double(*cfg.seed_prob) : "1/N")
    << ";gamma=" << format_double(c.recovery_rate) << ";eps_max=" << format_double(c.eps_max)
    << ";ce=" << format_double(c.ce_ratio) << ";seed=" << c.replicate_seed
    << ";p1=" << optimizer_key(cfg.phase_one);
  return s.str();
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::string join_optional(const std::vector<std::optional<double>>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ';';
    s += values[i] ? format_double(*values[i]) : "";
  }
  return s;
}

std::string join_restarts(const std::vector<std::uint64_t>& seeds) {
  std::string s;
  for (std::size_t i = 0; i < seeds.size(); ++i) s += (i ? ";" : "") + std::to_string(seeds[i]);
  return s;
}

void fail_row(ResultRow& row, const std::string& message) {
  row.status = "failed";
  row.message = message;
}

// ---- figure data ---------------------------------------------------------

struct Family {
  const char* name;
  const char* x;
  const char* series;
};

constexpr Family kFamilies[] = {
    {"cascade-size", "ce_ratio", "recovery_rate"}, {"filtering", "size_threshold", "recovery_rate"},
    {"density", "ce_ratio", "mu_in"},              {"size", "ce_ratio", "n_nodes"},
    {"layers", "ce_ratio", "n_layers"},            {"overlap", "ce_ratio", "overlap"},
    {"mixing", "ce_ratio", "eps_max"},
};

constexpr const char* kFigureMetrics[] = {"auc", "pi_accuracy", "alpha_spearman"};

double to_number(const std::string& s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    return used == s.size() ? v : std::numeric_limits<double>::quiet_NaN();
  } catch (const std::exception&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace

// ---- config --------------------------------------------------------------

void ExperimentConfig::validate() const {
  require_axis(node_counts, "node_counts");
  require_axis(layer_counts, "layer_counts");
  require_axis(overlaps, "overlaps");
  require_axis(densities, "densities");
  require_axis(recovery_rates, "recovery_rates");
  require_axis(eps_max_values, "eps_max_values");
  require_axis(ce_ratios, "ce_ratios");
  require_axis(size_thresholds, "size_thresholds");
  require_axis(replicate_seeds, "replicate_seeds");
  if (!(budget_factor > 0.0) || !std::isfinite(budget_factor)) throw ConfigError("budget_factor must be positive");
  for (double r : ce_ratios) {
    if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("ce_ratios must be positive");
  }
  for (int k : layer_counts) {
    if (k < 1 || k > 8) throw ConfigError("layer_counts must lie in [1, 8]");
  }
  try {
    for (int n : node_counts) {
      for (int k : layer_counts) {
        for (double phi : overlaps) {
          for (const DensitySetting& d : densities) {
            NetworkGenConfig net{n, k, phi, d.mu_in, d.sigma_in, d.mu_out, d.sigma_out, rate_low, rate_high, 0};
            net.validate();
          }
        }
      }
    }
    for (double gamma : recovery_rates) {
      for (double eps : eps_max_values) {
        CascadeGenConfig c;
        c.horizon = horizon;
        c.recovery_rate = gamma;
        c.seed_prob = seed_prob;
        c.eps_max = eps;
        c.validate();
      }
    }
    phase_one.validate();
    phase_two.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig parse_experiment_config(const json& doc) {
  ExperimentConfig cfg;
  try {
    check_keys(doc, "config",
               {"$schema", "name", "network", "cascades", "ce_ratios", "size_thresholds", "inference",
                "replicate_seeds"});
    read(doc, "name", "config", cfg.name);
    if (doc.contains("network")) {
      const json& net = doc["network"];
      check_keys(net, "network", {"n_nodes", "n_layers", "overlap", "density", "rate_low", "rate_high"});
      read(net, "n_nodes", "network", cfg.node_counts);
      read(net, "n_layers", "network", cfg.layer_counts);
      read(net, "overlap", "network", cfg.overlaps);
      read(net, "rate_low", "network", cfg.rate_low);
      read(net, "rate_high", "network", cfg.rate_high);
      if (net.contains("density")) {
        if (!net["density"].is_array()) throw ConfigError("network.density: expected a list");
        cfg.densities.clear();
        for (const json& d : net["density"]) {
          DensitySetting s;
          check_keys(d, "network.density[]", {"mu_in", "sigma_in", "mu_out", "sigma_out"});
          read(d, "mu_in", "network.density[]", s.mu_in);
          read(d, "sigma_in", "network.density[]", s.sigma_in);
          read(d, "mu_out", "network.density[]", s.mu_out);
          read(d, "sigma_out", "network.density[]", s.sigma_out);
          cfg.densities.push_back(s);
        }
      }
    }
    if (doc.contains("cascades")) {
      const json& c = doc["cascades"];
      check_keys(c, "cascades", {"horizon", "seed_prob", "recovery_rate", "eps_max"});
      read(c, "horizon", "cascades", cfg.horizon);
      if (c.contains("seed_prob") && !c["seed_prob"].is_null()) {
        double rho = 0.0;
        read(c, "seed_prob", "cascades", rho);
        cfg.seed_prob = rho;
      }
      read(c, "recovery_rate", "cascades", cfg.recovery_rates);
      read(c, "eps_max", "cascades", cfg.eps_max_values);
    }
    read(doc, "ce_ratios", "config", cfg.ce_ratios);
    read(doc, "size_thresholds", "config", cfg.size_thresholds);
    if (doc.contains("inference")) {
      const json& inf = doc["inference"];
      check_keys(inf, "inference", {"phase_one", "phase_two", "budget_factor", "truth_aware"});
      if (inf.contains("phase_one")) cfg.phase_one = parse_optimizer(inf["phase_one"], "inference.phase_one", cfg.phase_one);
      if (inf.contains("phase_two")) cfg.phase_two = parse_optimizer(inf["phase_two"], "inference.phase_two", cfg.phase_two);
      read(inf, "budget_factor", "inference", cfg.budget_factor);
      read(inf, "truth_aware", "inference", cfg.truth_aware);
    }
    read(doc, "replicate_seeds", "config", cfg.replicate_seeds);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig read_experiment_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_experiment_config(doc);
}

ordered_json experiment_config_to_json(const ExperimentConfig& cfg) {
  ordered_json densities = ordered_json::array();
  for (const DensitySetting& d : cfg.densities) {
    densities.push_back(
        {{"mu_in", d.mu_in}, {"sigma_in", d.sigma_in}, {"mu_out", d.mu_out}, {"sigma_out", d.sigma_out}});
  }
  ordered_json doc;
  doc["name"] = cfg.name;
  doc["network"] = {{"n_nodes", cfg.node_counts}, {"n_layers", cfg.layer_counts}, {"overlap", cfg.overlaps},
                    {"density", densities},       {"rate_low", cfg.rate_low},    {"rate_high", cfg.rate_high}};
  doc["cascades"] = {{"horizon", cfg.horizon},
                     {"seed_prob", cfg.seed_prob ? ordered_json(*cfg.seed_prob) : ordered_json()},
                     {"recovery_rate", cfg.recovery_rates},
                     {"eps_max", cfg.eps_max_values}};
  doc["ce_ratios"] = cfg.ce_ratios;
  doc["size_thresholds"] = cfg.size_thresholds;
  doc["inference"] = {{"phase_one", optimizer_json(cfg.phase_one)},
                      {"phase_two", optimizer_json(cfg.phase_two)},
                      {"budget_factor", cfg.budget_factor},
                      {"truth_aware", cfg.truth_aware}};
  doc["replicate_seeds"] = cfg.replicate_seeds;
  return doc;
}

// ---- grid ----------------------------------------------------------------

std::vector<ExperimentCell> expand_grid(const ExperimentConfig& cfg) {
  std::vector<ExperimentCell> cells;
  for (int n : cfg.node_counts)
    for (const DensitySetting& d : cfg.densities)
      for (int k : cfg.layer_counts)
        for (double phi : cfg.overlaps)
          for (double gamma : cfg.recovery_rates)
            for (double eps : cfg.eps_max_values)
              for (double ce : cfg.ce_ratios)
                for (std::size_t sc : cfg.size_thresholds)
                  for (std::uint64_t seed : cfg.replicate_seeds) cells.push_back({n, k, phi, d, gamma, eps, ce, sc, seed});
  return cells;
}

std::string cell_hash(const ExperimentConfig& cfg, const ExperimentCell& cell) {
  const std::string key = data_key(cfg, cell) + ";sc=" + std::to_string(cell.size_threshold) +
                          ";p2=" + optimizer_key(cfg.phase_two) + ";budget=" + format_double(cfg.budget_factor) +
                          ";truth_aware=" + (cfg.truth_aware ? "1" : "0");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(key)));
  return buf;
}

NetworkGenConfig network_config(const ExperimentConfig& cfg, const ExperimentCell& cell) {
  NetworkGenConfig net;
  net.n_nodes = cell.n_nodes;
  net.n_layers = cell.n_layers;
  net.overlap = cell.overlap;
  net.mu_in = cell.density.mu_in;
  net.sigma_in = cell.density.sigma_in;
  net.mu_out = cell.density.mu_out;
  net.sigma_out = cell.density.sigma_out;
  net.rate_low = cfg.rate_low;
  net.rate_high = cfg.rate_high;
  net.seed = cell.replicate_seed;
  return net;
}

CascadeGenConfig cascade_config(const ExperimentConfig& cfg, const ExperimentCell& cell, std::size_t realized_edges) {
  CascadeGenConfig c;
  c.horizon = cfg.horizon;
  c.recovery_rate = cell.recovery_rate;
  c.seed_prob = cfg.seed_prob;
  c.eps_max = cell.eps_max;
  c.n_cascades = std::llround(cell.ce_ratio * static_cast<double>(realized_edges));
  c.seed = cell.replicate_seed;
  return c;
}

const std::vector<std::string>& result_columns() {
  static const std::vector<std::string> columns{
      "cell_hash",       "status",          "message",          "n_nodes",          "n_layers",
      "overlap",         "mu_in",           "sigma_in",         "mu_out",           "sigma_out",
      "rate_low",        "rate_high",       "horizon",          "seed_prob",        "recovery_rate",
      "eps_max",         "ce_ratio",        "size_threshold",   "replicate_seed",   "budget_factor",
      "truth_aware",     "p1_learning_rate", "p1_max_iters",    "p1_rel_tol",       "p2_learning_rate",
      "p2_max_iters",    "p2_rel_tol",      "p2_restarts",      "realized_edges",   "realized_overlap",
      "n_simulated",     "n_informative",   "n_phase_two",      "candidate_edges",  "selected_edges",
      "budget",          "auc",             "pi_accuracy",      "alpha_spearman",   "pr_auc_mean",
      "pr_auc_per_layer", "edge_recovery",  "edge_hits",        "matched_permutation", "phase_one_iterations",
      "phase_one_stop",  "phase_two_iterations", "restart_seed", "dropped_terms",   "memory_estimate_bytes"};
  return columns;
}

std::vector<std::string> result_fields(const ExperimentConfig& cfg, const ResultRow& row) {
  const ExperimentCell& c = row.cell;
  const auto u = [](auto v) { return std::to_string(v); };
  const auto d = [](double v) { return format_double(v); };
  std::vector<std::string> f{row.hash,
                             row.status,
                             row.message,
                             u(c.n_nodes),
                             u(c.n_layers),
                             d(c.overlap),
                             d(c.density.mu_in),
                             d(c.density.sigma_in),
                             d(c.density.mu_out),
                             d(c.density.sigma_out),
                             d(cfg.rate_low),
                             d(cfg.rate_high),
                             d(cfg.horizon),
                             cfg.seed_prob ? d(*cfg.seed_prob) : d(1.0 / c.n_nodes),
                             d(c.recovery_rate),
                             d(c.eps_max),
                             d(c.ce_ratio),
                             u(c.size_threshold),
                             u(c.replicate_seed),
                             d(cfg.budget_factor),
                             cfg.truth_aware ? "1" : "0",
                             d(cfg.phase_one.learning_rate),
                             u(cfg.phase_one.max_iters),
                             d(cfg.phase_one.rel_tol),
                             d(cfg.phase_two.learning_rate),
                             u(cfg.phase_two.max_iters),
                             d(cfg.phase_two.rel_tol),
                             join_restarts(cfg.phase_two.restarts)};
  const bool ok = row.ok();
  const auto metric = [&](double v) { return ok ? d(v) : std::string(); };
  const auto count = [&](std::size_t v) { return ok ? u(v) : std::string(); };
  // Generation counts are meaningful even when inference failed.
  f.push_back(row.realized_edges ? u(row.realized_edges) : "");
  f.push_back(row.realized_edges ? d(row.realized_overlap) : "");
  f.push_back(row.realized_edges ? u(row.n_simulated) : "");
  f.push_back(row.realized_edges ? u(row.n_informative) : "");
  f.push_back(count(row.n_phase_two));
  f.push_back(count(row.candidate_edges));
  f.push_back(count(row.selected_edges));
  f.push_back(count(row.budget));
  f.push_back(metric(row.auc));
  f.push_back(metric(row.pi_accuracy));
  f.push_back(metric(row.alpha_spearman));
  f.push_back(metric(row.pr_auc_mean));
  f.push_back(ok ? join_optional(row.pr_auc_per_layer) : "");
  f.push_back(metric(row.edge_recovery));
  f.push_back(count(row.edge_hits));
  f.push_back(ok ? row.matched_permutation : "");
  f.push_back(count(row.phase_one_iterations));
  f.push_back(ok ? row.phase_one_stop : "");
  f.push_back(count(row.phase_two_iterations));
  f.push_back(ok ? u(row.restart_seed) : "");
  f.push_back(count(row.dropped_terms));
  f.push_back(count(row.memory_estimate_bytes));
  return f;
}

const std::vector<std::string>& timing_columns() {
  static const std::vector<std::string> columns{"cell_hash",         "generate_seconds", "phase_one_seconds",
                                                "phase_two_seconds", "evaluate_seconds", "total_seconds"};
  return columns;
}

std::vector<std::string> timing_fields(const ResultRow& row) {
  const CellTimings& t = row.timings;
  return {row.hash,
          format_double(t.generate_seconds),
          format_double(t.phase_one_seconds),
          format_double(t.phase_two_seconds),
          format_double(t.evaluate_seconds),
          format_double(t.total_seconds)};
}

std::vector<ResultRow> run_cell_group(const ExperimentConfig& cfg, std::span<const ExperimentCell> cells, int threads) {
  std::vector<ResultRow> rows(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    rows[i].cell = cells[i];
    rows[i].hash = cell_hash(cfg, cells[i]);
  }
  if (cells.empty()) return rows;
  const std::string key = data_key(cfg, cells.front());
  for (const ExperimentCell& c : cells) {
    if (data_key(cfg, c) != key) throw std::invalid_argument("cells of a group must share their generated data");
  }

  const auto group_start = Clock::now();
  MultilayerNetwork net;
  CascadeSet informative;
  std::size_t realized_edges = 0;
  double realized_overlap = 0.0;
  std::size_t n_simulated = 0;
  try {
    net = generate_network(network_config(cfg, cells.front()));
    realized_edges = aggregate(net).edges.size();
    realized_overlap = layer_overlap(net);
    if (realized_edges == 0) throw std::runtime_error("generated network has no edges");
    const CascadeGenConfig ccfg = cascade_config(cfg, cells.front(), realized_edges);
    const CascadeSet simulated = simulate_cascades(net, ccfg, threads);
    n_simulated = simulated.size();
    informative = filter_cascades(simulated, 1);
  } catch (const std::exception& e) {
    for (ResultRow& r : rows) {
      r.realized_edges = realized_edges;
      r.realized_overlap = realized_overlap;
      fail_row(r, std::string("generate: ") + e.what());
    }
    return rows;
  }
  const double generate_seconds = seconds_since(group_start);
  for (ResultRow& r : rows) {
    r.realized_edges = realized_edges;
    r.realized_overlap = realized_overlap;
    r.n_simulated = n_simulated;
    r.n_informative = informative.size();
    r.timings.generate_seconds = generate_seconds;
  }

  PipelineConfig pc;
  pc.n_layers = cells.front().n_layers;
  pc.phase_one = cfg.phase_one;
  pc.phase_two = cfg.phase_two;
  pc.truth_aware = cfg.truth_aware;
  pc.threads = threads;
  pc.budget = default_budget(realized_edges, cfg.budget_factor);

  PhaseOneStage stage;
  try {
    stage = run_phase_one_stage(informative, pc);
  } catch (const std::exception& e) {
    for (ResultRow& r : rows) fail_row(r, std::string("phase one: ") + e.what());
    return rows;
  }
  std::map<std::int64_t, int> main_layer;
  for (const Cascade& c : stage.cascades) main_layer[c.id()] = c.truth() ? c.truth()->main_layer : -1;

  for (std::size_t i = 0; i < cells.size(); ++i) {
    ResultRow& row = rows[i];
    try {
      pc.size_threshold = cells[i].size_threshold;
      const PipelineOutput out = complete_pipeline(stage, pc);
      const InferenceResult& r = out.result;
      const auto eval_start = Clock::now();
      std::vector<int> labels;
      labels.reserve(r.cascade_ids.size());
      for (std::int64_t id : r.cascade_ids) labels.push_back(main_layer.at(id));
      const auto scored = scored_candidates(r);
      const LayeredRates inferred = layered_rates(r);
      const MetricsReport m = evaluate({scored, &inferred, &r.pi_hat, labels, &net});

      row.n_phase_two = r.n_cascades_phase_two;
      row.candidate_edges = r.candidate_edges.size();
      row.selected_edges = r.selected_edges.size();
      row.budget = r.budget;
      row.auc = m.auc;
      row.pi_accuracy = m.pi_accuracy;
      row.alpha_spearman = m.alpha_spearman;
      row.pr_auc_mean = m.pr_auc_mean;
      row.pr_auc_per_layer = m.pr_auc_per_layer;
      row.edge_recovery = m.edge_recovery.rate;
      row.edge_hits = m.edge_recovery.hits;
      for (std::size_t k = 0; k < m.matched_permutation.size(); ++k) {
        row.matched_permutation += (k ? ";" : "") + std::to_string(m.matched_permutation[k]);
      }
      row.phase_one_iterations = r.phase_one_trace.empty() ? 0 : static_cast<std::size_t>(r.phase_one_trace.back().iteration);
      row.phase_one_stop = r.phase_one_stop;
      row.phase_two_iterations = r.phase_two_trace.empty() ? 0 : static_cast<std::size_t>(r.phase_two_trace.back().iteration);
      row.restart_seed = r.restart_seed;
      row.dropped_terms = r.phase_one_dropped_terms + r.phase_two_dropped_terms;
      row.memory_estimate_bytes = out.memory_estimate_bytes;
      row.timings.phase_one_seconds = out.timings.phase_one_seconds;
      row.timings.phase_two_seconds = out.timings.phase_two_seconds;
      row.timings.evaluate_seconds = seconds_since(eval_start);
    } catch (const std::exception& e) {
      fail_row(row, e.what());
    }
    row.timings.total_seconds = row.timings.generate_seconds + row.timings.phase_one_seconds +
                                row.timings.phase_two_seconds + row.timings.evaluate_seconds;
  }
  return rows;
}

ResultRow run_cell(const ExperimentConfig& cfg, const ExperimentCell& cell, int threads) {
  return run_cell_group(cfg, std::span<const ExperimentCell>(&cell, 1), threads).front();
}

namespace {

std::string csv_line(const std::vector<std::string>& fields) {
  std::ostringstream s;
  write_csv_row(s, fields);
  return s.str();
}

// Fields of a finished cell file, or nothing when it is absent, stale or failed.
std::optional<std::vector<std::string>> load_cell(const std::filesystem::path& path, const std::vector<std::string>& header) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  try {
    const auto rows = parse_csv(read_file(path.string()));
    if (rows.size() != 2 || rows[0] != header || rows[1].size() != header.size()) return std::nullopt;
    if (header[1] == "status" && rows[1][1] != "ok") return std::nullopt;
    return rows[1];
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void write_atomically(const std::filesystem::path& path, const std::string& contents) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  write_file(tmp.string(), contents);
  std::filesystem::rename(tmp, path);
}

}  // namespace

GridSummary run_grid(const ExperimentConfig& cfg, const GridOptions& options) {
  cfg.validate();
  namespace fs = std::filesystem;
  const fs::path cell_dir = options.out_dir / "cells";
  fs::create_directories(cell_dir);
  write_atomically(options.out_dir / "config.json", experiment_config_to_json(cfg).dump(2) + "\n");

  const std::vector<ExperimentCell> cells = expand_grid(cfg);
  std::vector<std::vector<std::string>> result_rows(cells.size());
  std::vector<std::vector<std::string>> timing_rows(cells.size());
  std::vector<bool> done(cells.size(), false);
  std::vector<bool> failed(cells.size(), false);
  GridSummary summary;
  summary.cells = cells.size();

  std::vector<std::string> hashes;
  for (const ExperimentCell& c : cells) hashes.push_back(cell_hash(cfg, c));
  if (options.resume) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      auto fields = load_cell(cell_dir / (hashes[i] + ".csv"), result_columns());
      if (!fields) continue;
      result_rows[i] = std::move(*fields);
      auto timing = load_cell(cell_dir / (hashes[i] + ".timing.csv"), timing_columns());
      timing_rows[i] = timing ? std::move(*timing) : std::vector<std::string>{hashes[i], "", "", "", "", ""};
      done[i] = true;
      ++summary.reused;
    }
  }

  // Pending cells grouped by shared data, in order of first appearance.
  std::vector<std::vector<std::size_t>> groups;
  std::map<std::string, std::size_t> group_of;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (done[i]) continue;
    const std::string key = data_key(cfg, cells[i]);
    auto [it, inserted] = group_of.try_emplace(key, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }

  std::mutex log_mutex;
  std::size_t finished = summary.reused;
  const int inner_threads = groups.size() == 1 ? options.threads : 1;
  parallel_for(groups.size(), options.threads, [&](std::size_t g) {
    std::vector<ExperimentCell> members;
    for (std::size_t i : groups[g]) members.push_back(cells[i]);
    const std::vector<ResultRow> rows = run_cell_group(cfg, members, inner_threads);
    for (std::size_t m = 0; m < rows.size(); ++m) {
      const std::size_t i = groups[g][m];
      result_rows[i] = result_fields(cfg, rows[m]);
      timing_rows[i] = timing_fields(rows[m]);
      failed[i] = !rows[m].ok();
      if (rows[m].ok()) {
        write_atomically(cell_dir / (hashes[i] + ".csv"), csv_line(result_columns()) + csv_line(result_rows[i]));
        write_atomically(cell_dir / (hashes[i] + ".timing.csv"), csv_line(timing_columns()) + csv_line(timing_rows[i]));
      }
    }
    if (options.log) {
      std::lock_guard lock(log_mutex);
      finished += rows.size();
      *options.log << "[" << finished << "/" << cells.size() << "] " << rows.front().hash.substr(0, 8) << "..";
      for (const ResultRow& r : rows) {
        *options.log << " " << r.hash.substr(0, 8) << (r.ok() ? " ok" : " failed: " + r.message);
      }
      *options.log << "\n" << std::flush;
    }
  });

  std::string results = csv_line(result_columns());
  std::string timings = csv_line(timing_columns());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    results += csv_line(result_rows[i]);
    timings += csv_line(timing_rows[i]);
    if (failed[i]) ++summary.failed;
  }
  summary.results_csv = options.out_dir / "results.csv";
  summary.timings_csv = options.out_dir / "timings.csv";
  write_atomically(summary.results_csv, results);
  write_atomically(summary.timings_csv, timings);
  return summary;
}

// ---- figure data ---------------------------------------------------------

const std::vector<std::string>& figure_families() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const Family& f : kFamilies) v.emplace_back(f.name);
    return v;
  }();
  return names;
}

void emit_figure_data(std::string_view results_csv, std::string_view family, std::ostream& out) {
  const Family* fam = nullptr;
  for (const Family& f : kFamilies) {
    if (family == f.name) fam = &f;
  }
  if (!fam) throw std::invalid_argument("unknown figure family \"" + std::string(family) + "\"");
  write_csv_row(out, {"family", "metric", "x_name", "x", "series_name", "series", "n", "mean", "min", "max"});

  const auto rows = parse_csv(results_csv);
  if (rows.size() < 2) return;
  const auto& header = rows.front();
  const auto column = [&](std::string_view name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::invalid_argument("results CSV lacks column " + std::string(name));
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t status = column("status");
  const std::size_t x_col = column(fam->x);
  const std::size_t series_col = column(fam->series);

  struct Stats {
    std::string x, series;
    std::size_t n = 0;
    double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -std::numeric_limits<double>::infinity();
  };
  for (const char* metric : kFigureMetrics) {
    const std::size_t m_col = column(metric);
    // (series, x) sorted numerically.
    std::map<std::pair<double, double>, Stats> cells;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& row = rows[r];
      if (row.size() != header.size() || row[status] != "ok") continue;
      Stats& s = cells[{to_number(row[series_col]), to_number(row[x_col])}];
      s.x = row[x_col];
      s.series = row[series_col];
      const double v = to_number(row[m_col]);
      if (std::isnan(v)) continue;
      ++s.n;
      s.sum += v;
      s.lo = std::min(s.lo, v);
      s.hi = std::max(s.hi, v);
    }
    for (const auto& [key, s] : cells) {
      const bool any = s.n > 0;
      write_csv_row(out, {fam->name, metric, fam->x, s.x, fam->series, s.series, std::to_string(s.n),
                          any ? format_double(s.sum / static_cast<double>(s.n)) : "",
                          any ? format_double(s.lo) : "", any ? format_double(s.hi) : ""});
    }
  }
}

// ---- presets -------------------------------------------------------------

std::vector<std::string> preset_names() {
  std::vector<std::string> names{"desk"};
  for (const Family& f : kFamilies) names.push_back(std::string("desk-") + f.name);
  for (const Family& f : kFamilies) names.push_back(std::string("full-") + f.name);
  return names;
}

ExperimentConfig preset_config(std::string_view name) {
  ExperimentConfig cfg;
  cfg.name = std::string(name);
  if (name == "desk") return cfg;

  bool full = false;
  std::string_view family;
  if (name.starts_with("desk-")) {
    family = name.substr(5);
  } else if (name.starts_with("full-")) {
    family = name.substr(5);
    full = true;
  } else {
    throw ConfigError("unknown preset \"" + std::string(name) + "\"");
  }
  if (full) {
    cfg.node_counts = {1000};
    cfg.replicate_seeds = {0};
  }
  // The later families all filter at s_c = 8 with gamma = 2.
  cfg.size_thresholds = {8};
  if (family == "cascade-size") {
    cfg.recovery_rates = {1, 2, 4, 8};
    cfg.size_thresholds = {1};
  } else if (family == "filtering") {
    cfg.recovery_rates = {1, 2, 4, 8};
    cfg.ce_ratios = {16};
    cfg.size_thresholds = {1, 2, 4, 8, 16};
  } else if (family == "density") {
    cfg.densities = {{0.0, 1.0, 0.0, 1.0}, {0.5, 1.0, 0.0, std::sqrt(2.0)}, {1.0, 1.0, 0.0, std::sqrt(3.0)}};
  } else if (family == "size") {
    cfg.node_counts = full ? std::vector<int>{1000, 2000, 4000} : std::vector<int>{125, 250, 500};
    cfg.ce_ratios = {1, 2, 4, 8};
  } else if (family == "layers") {
    cfg.layer_counts = {2, 3, 4, 5};
  } else if (family == "overlap") {
    cfg.overlaps = {0.0, 0.5, 1.0};
  } else if (family == "mixing") {
    cfg.eps_max_values = {0.0, 0.2, 0.4};
  } else {
    throw ConfigError("unknown preset \"" + std::string(name) + "\"");
  }
  return cfg;
}

}  // namespace multic
