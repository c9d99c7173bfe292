#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "multic/core.hpp"

namespace multic {

struct ScoredPair {
  NodePair pair;
  double score = 0.0;
};

/// A block of items sharing one score: `positives` true and `negatives` false.
struct ScoreGroup {
  double score = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

/// Mann-Whitney AUC with ties counted one half. Throws std::domain_error when
/// either class is empty.
double roc_auc(std::vector<ScoreGroup> groups);

/// Step-wise average precision: sum over distinct thresholds (descending) of
/// recall increment times precision. Throws std::domain_error without positives.
double average_precision(std::vector<ScoreGroup> groups);

/// Collapses scored pairs over the universe of all N(N-1) ordered non-self
/// pairs; pairs without a score count as score 0. `truth` must be sorted.
std::vector<ScoreGroup> pair_universe_groups(std::span<const ScoredPair> scores, std::span<const NodePair> truth,
                                             int n_nodes);

/// AUC of edge scores against the true aggregated edge set over all ordered
/// node pairs.
double roc_auc(std::span<const ScoredPair> scores, std::span<const NodePair> truth, int n_nodes);

/// Spearman rank correlation with average ranks for ties; NaN when either
/// side is constant. Throws std::domain_error for fewer than 2 entries.
double spearman(std::span<const double> x, std::span<const double> y);

/// perm[inferred layer] = ground-truth layer.
using LayerPermutation = std::vector<int>;

/// Index of the largest entry, lowest index on ties.
Eigen::Index argmax_layer(const Eigen::Ref<const Eigen::RowVectorXd>& row);

double pi_accuracy(const Eigen::MatrixXd& pi_hat, std::span<const int> truth_layers, const LayerPermutation& perm);

/// Inferred multilayer rates: alpha(k, e) for selected edge e.
struct LayeredRates {
  std::vector<NodePair> edges;  // sorted
  Eigen::MatrixXd alpha;        // K x |edges|
};

double alpha_spearman(const LayeredRates& inferred, const MultilayerNetwork& truth, const LayerPermutation& perm);

struct LayerMatch {
  LayerPermutation perm;
  double pi_accuracy = 0.0;
  double alpha_spearman = 0.0;
};

/// Exhaustive search over the K! relabelings (K <= 8): maximal pi accuracy,
/// then higher alpha Spearman, then the lexicographically first permutation.
LayerMatch match_layers(const LayeredRates& inferred, const Eigen::MatrixXd& pi_hat, std::span<const int> truth_layers,
                        const MultilayerNetwork& truth);

/// Highest pi accuracy over all relabelings (no alpha needed).
double best_pi_accuracy(const Eigen::MatrixXd& pi_hat, std::span<const int> truth_layers);

struct PrAucReport {
  std::vector<std::optional<double>> per_layer;  // nullopt for an empty truth layer
  double mean = 0.0;                             // over defined layers
};

PrAucReport pr_auc_layers(const LayeredRates& inferred, const MultilayerNetwork& truth, const LayerPermutation& perm);

struct EdgeRecovery {
  std::size_t hits = 0;
  std::size_t total = 0;
  double rate = 0.0;
};

/// Both inputs sorted.
EdgeRecovery edge_recovery(std::span<const NodePair> selected, std::span<const NodePair> truth);

struct MetricsReport {
  double auc = 0.0;
  double pi_accuracy = 0.0;
  double alpha_spearman = 0.0;
  std::vector<std::optional<double>> pr_auc_per_layer;
  double pr_auc_mean = 0.0;
  EdgeRecovery edge_recovery;
  LayerPermutation matched_permutation;
};

struct EvaluationInput {
  std::span<const ScoredPair> edge_scores;  // phase-one scores over candidate edges
  const LayeredRates* inferred = nullptr;
  const Eigen::MatrixXd* pi_hat = nullptr;  // rows aligned with truth_layers
  std::span<const int> truth_layers;
  const MultilayerNetwork* truth = nullptr;
};

MetricsReport evaluate(const EvaluationInput& input);

}  // namespace multic
