#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "multic/core.hpp"
#include "multic/metrics.hpp"
#include "multic/objective.hpp"
#include "multic/optimizer.hpp"

namespace multic {

/// Raised when a pipeline stage cannot proceed (empty edge set, all restarts
/// diverged, missing budget). `traces` carries any optimizer traces gathered.
class InferenceError : public std::runtime_error {
 public:
  explicit InferenceError(const std::string& what, std::vector<std::vector<TracePoint>> traces = {})
      : std::runtime_error(what), traces_(std::move(traces)) {}
  const std::vector<std::vector<TracePoint>>& traces() const { return traces_; }

 private:
  std::vector<std::vector<TracePoint>> traces_;
};

/// Ordered pairs (i, j), i != j, with t_i < t_j in at least one cascade. Sorted.
std::vector<NodePair> candidate_edges(std::span<const Cascade> cascades);

struct PhaseOneResult {
  std::vector<NodePair> candidates;  // E_P, sorted
  Eigen::VectorXd scores;            // alpha' over E_P
  std::vector<NodePair> selected;    // E_S, sorted (filled by select_edges)
  std::vector<TracePoint> trace;
  StopReason stop = StopReason::kIterationCap;
  double initial_value = 0.0;
  double final_value = 0.0;
  std::size_t dropped_terms = 0;
  std::size_t memory_bytes = 0;
};

/// Minimizes the aggregated single-layer objective over sigmoid-transformed
/// scores. Uses opt.restarts.front() as the initialization seed.
PhaseOneResult phase1_single_layer(std::span<const Cascade> cascades, std::span<const NodePair> candidates,
                                   const OptimizerConfig& opt);

struct EdgeSelection {
  std::vector<NodePair> edges;  // sorted
  bool truncated_budget = false;  // budget exceeded |E_P|
};

/// Top `budget` candidates by descending score, ties broken by (src, dst).
EdgeSelection select_edges(std::span<const NodePair> candidates, const Eigen::VectorXd& scores, std::size_t budget);

/// round(factor * |E_A|).
std::size_t default_budget(std::size_t truth_edges, double factor = 1.1);

struct RestartSummary {
  std::uint64_t seed = 0;
  double final_value = 0.0;
  int iterations = 0;
  StopReason stop = StopReason::kIterationCap;
  std::optional<double> pi_accuracy;  // truth-aware selection only
};

struct PhaseTwoResult {
  Eigen::MatrixXd alpha;  // K x |E_S|
  Eigen::MatrixXd pi;     // C x K
  std::vector<TracePoint> trace;
  std::uint64_t seed = 0;
  double final_value = 0.0;
  std::vector<RestartSummary> restarts;
  std::size_t dropped_terms = 0;
  std::size_t memory_bytes = 0;
};

/// Joint fit of alpha and pi over E_S from every restart seed. The lowest
/// final objective wins unless `truth_layers` is given, in which case the
/// highest best-relabeling pi accuracy wins (ties: lower objective).
PhaseTwoResult phase2_multilayer(std::span<const Cascade> cascades, std::span<const NodePair> selected, int n_layers,
                                 const OptimizerConfig& opt, std::span<const int> truth_layers = {}, int threads = 1);

struct PipelineConfig {
  int n_layers = 2;
  OptimizerConfig phase_one = OptimizerConfig::phase_one();
  OptimizerConfig phase_two = OptimizerConfig::phase_two();
  std::optional<std::size_t> budget;
  /// Cascades of size <= this are left out of the multilayer phase.
  std::size_t size_threshold = 1;
  bool truth_aware = false;
  int threads = 1;
};

struct InferenceResult {
  int n_layers = 1;
  std::vector<NodePair> candidate_edges;  // E_P
  Eigen::VectorXd edge_scores;            // over E_P
  std::vector<NodePair> selected_edges;   // E_S
  Eigen::MatrixXd alpha_hat;              // K x |E_S|
  std::vector<std::int64_t> cascade_ids;  // rows of pi_hat
  Eigen::MatrixXd pi_hat;                 // C' x K
  std::vector<TracePoint> phase_one_trace;
  std::vector<TracePoint> phase_two_trace;
  std::uint64_t restart_seed = 0;
  std::vector<RestartSummary> restarts;
  std::string phase_one_stop;
  std::size_t budget = 0;
  bool budget_truncated = false;
  std::size_t phase_one_dropped_terms = 0;
  std::size_t phase_two_dropped_terms = 0;
  std::size_t n_cascades_phase_one = 0;
  std::size_t n_cascades_phase_two = 0;
};

struct PipelineTimings {
  double phase_one_seconds = 0.0;
  double phase_two_seconds = 0.0;
  double total_seconds = 0.0;
};

struct PipelineOutput {
  InferenceResult result;
  PipelineTimings timings;
  std::size_t memory_estimate_bytes = 0;
};

/// Phase one over the id-sorted cascades; reusable across budgets and size
/// thresholds.
struct PhaseOneStage {
  std::vector<Cascade> cascades;  // ascending id
  PhaseOneResult result;
  double seconds = 0.0;
};

PhaseOneStage run_phase_one_stage(std::span<const Cascade> cascades, const PipelineConfig& cfg);

/// Edge selection and the multilayer phase on top of a finished phase one.
PipelineOutput complete_pipeline(const PhaseOneStage& stage, const PipelineConfig& cfg);

/// candidate_edges -> phase one -> select_edges -> phase two. Cascades are
/// processed in ascending id order so the result does not depend on input
/// order. Ids must be unique.
PipelineOutput run_pipeline(std::span<const Cascade> cascades, const PipelineConfig& cfg);

/// The multilayer rates of a result in the metric module's layout.
LayeredRates layered_rates(const InferenceResult& result);
std::vector<ScoredPair> scored_candidates(const InferenceResult& result);

}  // namespace multic
