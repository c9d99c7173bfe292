#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "multic/optimizer.hpp"
#include "multic/synthgen.hpp"

namespace multic {

/// Bad experiment configuration (unknown key, empty axis, out-of-range value).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Log-normal degree parameters of one network density setting.
struct DensitySetting {
  double mu_in = 0.5;
  double sigma_in = 1.0;
  double mu_out = 0.0;
  double sigma_out = 1.4142135623730951;

  friend bool operator==(const DensitySetting&, const DensitySetting&) = default;
};

/// One experiment grid. Every list is an axis of the Cartesian product.
struct ExperimentConfig {
  std::string name = "experiment";

  std::vector<int> node_counts{250};
  std::vector<int> layer_counts{2};
  std::vector<double> overlaps{0.0};
  std::vector<DensitySetting> densities{DensitySetting{}};
  double rate_low = 0.01;
  double rate_high = 1.0;

  double horizon = 10.0;
  std::optional<double> seed_prob;  // unset: 1/N
  std::vector<double> recovery_rates{2.0};
  std::vector<double> eps_max_values{0.0};

  std::vector<double> ce_ratios{1, 2, 4, 8, 16};
  std::vector<std::size_t> size_thresholds{1};

  OptimizerConfig phase_one = OptimizerConfig::phase_one();
  OptimizerConfig phase_two = OptimizerConfig::phase_two();
  double budget_factor = 1.1;
  bool truth_aware = false;

  std::vector<std::uint64_t> replicate_seeds{0, 1, 2};

  /// Throws ConfigError.
  void validate() const;
};

/// Strict parse: unknown keys and wrong types are errors, missing keys take
/// the defaults above. Throws ConfigError.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc);
ExperimentConfig read_experiment_config(const std::string& path);
nlohmann::ordered_json experiment_config_to_json(const ExperimentConfig& cfg);

/// One point of the grid.
struct ExperimentCell {
  int n_nodes = 250;
  int n_layers = 2;
  double overlap = 0.0;
  DensitySetting density;
  double recovery_rate = 2.0;
  double eps_max = 0.0;
  double ce_ratio = 1.0;
  std::size_t size_threshold = 1;
  std::uint64_t replicate_seed = 0;
};

/// Cells in output order: node count, density, layers, overlap, recovery
/// rate, eps_max, C-E ratio, s_c, replicate (last varies fastest).
std::vector<ExperimentCell> expand_grid(const ExperimentConfig& cfg);

/// 16 hex digits identifying the cell together with every setting of `cfg`
/// that affects its result.
std::string cell_hash(const ExperimentConfig& cfg, const ExperimentCell& cell);

NetworkGenConfig network_config(const ExperimentConfig& cfg, const ExperimentCell& cell);
/// n_cascades is round(ce_ratio * realized_edges).
CascadeGenConfig cascade_config(const ExperimentConfig& cfg, const ExperimentCell& cell, std::size_t realized_edges);

struct CellTimings {
  double generate_seconds = 0.0;
  double phase_one_seconds = 0.0;
  double phase_two_seconds = 0.0;
  double evaluate_seconds = 0.0;
  double total_seconds = 0.0;
};

/// Outcome of one cell. Everything except `timings` is a deterministic
/// function of the config and seeds.
struct ResultRow {
  ExperimentCell cell;
  std::string hash;
  std::string status = "ok";  // "ok" or "failed"
  std::string message;

  std::size_t realized_edges = 0;  // |E_A|
  double realized_overlap = 0.0;
  std::size_t n_simulated = 0;
  std::size_t n_informative = 0;  // size >= 2, used by phase one
  std::size_t n_phase_two = 0;    // size > s_c
  std::size_t candidate_edges = 0;
  std::size_t selected_edges = 0;
  std::size_t budget = 0;

  double auc = 0.0;
  double pi_accuracy = 0.0;
  double alpha_spearman = 0.0;
  double pr_auc_mean = 0.0;
  std::vector<std::optional<double>> pr_auc_per_layer;
  double edge_recovery = 0.0;
  std::size_t edge_hits = 0;
  std::string matched_permutation;

  std::size_t phase_one_iterations = 0;
  std::string phase_one_stop;
  std::size_t phase_two_iterations = 0;
  std::uint64_t restart_seed = 0;
  std::size_t dropped_terms = 0;
  std::size_t memory_estimate_bytes = 0;

  CellTimings timings;

  bool ok() const { return status == "ok"; }
};

const std::vector<std::string>& result_columns();
std::vector<std::string> result_fields(const ExperimentConfig& cfg, const ResultRow& row);
const std::vector<std::string>& timing_columns();
std::vector<std::string> timing_fields(const ResultRow& row);

/// Runs every cell of `cells` that shares one network and cascade set
/// (they may differ only in s_c). Phase one is fitted once. Failures are
/// reported per row, never thrown.
std::vector<ResultRow> run_cell_group(const ExperimentConfig& cfg, std::span<const ExperimentCell> cells,
                                      int threads = 1);

/// A single cell.
ResultRow run_cell(const ExperimentConfig& cfg, const ExperimentCell& cell, int threads = 1);

struct GridOptions {
  std::filesystem::path out_dir;
  int threads = 1;
  /// Reuse finished cells found under out_dir/cells.
  bool resume = false;
  /// Progress lines; may be null.
  std::ostream* log = nullptr;
};

struct GridSummary {
  std::size_t cells = 0;
  std::size_t failed = 0;
  std::size_t reused = 0;
  std::filesystem::path results_csv;
  std::filesystem::path timings_csv;
};

/// Runs the full grid and writes out_dir/results.csv (deterministic),
/// out_dir/timings.csv, out_dir/config.json and one file per finished cell
/// under out_dir/cells. Rows follow expand_grid order whatever the thread
/// count.
GridSummary run_grid(const ExperimentConfig& cfg, const GridOptions& options);

/// Figure families and the axis each one plots against.
const std::vector<std::string>& figure_families();

/// Long-format table with columns family, metric, x_name, x, series_name,
/// series, n, mean, min, max. Failed rows are skipped. Throws
/// std::invalid_argument for an unknown family.
void emit_figure_data(std::string_view results_csv, std::string_view family, std::ostream& out);

/// Ready-made grids: "desk" and "desk-<family>" at N=250, "full-<family>"
/// at N=1000. Throws ConfigError for an unknown name.
ExperimentConfig preset_config(std::string_view name);
std::vector<std::string> preset_names();

}  // namespace multic
