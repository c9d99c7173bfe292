#include "multic/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace multic {
namespace {

std::vector<ScoreGroup> merge_ties(std::vector<ScoreGroup> groups) {
  std::sort(groups.begin(), groups.end(), [](const ScoreGroup& a, const ScoreGroup& b) { return a.score < b.score; });
  std::vector<ScoreGroup> merged;
  for (const ScoreGroup& g : groups) {
    if (g.positives == 0 && g.negatives == 0) continue;
    if (!merged.empty() && merged.back().score == g.score) {
      merged.back().positives += g.positives;
      merged.back().negatives += g.negatives;
    } else {
      merged.push_back(g);
    }
  }
  return merged;
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t m = i; m <= j; ++m) ranks[order[m]] = rank;
    i = j + 1;
  }
  return ranks;
}

LayerPermutation inverse(const LayerPermutation& perm) {
  LayerPermutation inv(perm.size());
  for (std::size_t l = 0; l < perm.size(); ++l) inv[static_cast<std::size_t>(perm[l])] = static_cast<int>(l);
  return inv;
}

// Inferred rate of (truth layer k, pair) under perm; 0 when unselected.
double inferred_rate(const LayeredRates& inferred, const LayerPermutation& inv, int k, const NodePair& p) {
  auto it = std::lower_bound(inferred.edges.begin(), inferred.edges.end(), p);
  if (it == inferred.edges.end() || *it != p) return 0.0;
  return inferred.alpha(inv[static_cast<std::size_t>(k)], it - inferred.edges.begin());
}

void check_layers(const LayeredRates& inferred, const MultilayerNetwork& truth, const LayerPermutation& perm) {
  if (inferred.alpha.rows() != truth.n_layers() || static_cast<int>(perm.size()) != truth.n_layers()) {
    throw std::invalid_argument("inferred and ground-truth layer counts differ");
  }
  if (inferred.alpha.cols() != static_cast<Eigen::Index>(inferred.edges.size())) {
    throw std::invalid_argument("inferred rates do not match the selected edges");
  }
}

}  // namespace

double roc_auc(std::vector<ScoreGroup> groups) {
  groups = merge_ties(std::move(groups));
  double positives = 0.0;
  double negatives = 0.0;
  for (const ScoreGroup& g : groups) {
    positives += static_cast<double>(g.positives);
    negatives += static_cast<double>(g.negatives);
  }
  if (positives == 0.0 || negatives == 0.0) throw std::domain_error("AUC needs both positives and negatives");
  double wins = 0.0;
  double negatives_below = 0.0;
  for (const ScoreGroup& g : groups) {
    wins += static_cast<double>(g.positives) * (negatives_below + 0.5 * static_cast<double>(g.negatives));
    negatives_below += static_cast<double>(g.negatives);
  }
  return wins / (positives * negatives);
}

double average_precision(std::vector<ScoreGroup> groups) {
  groups = merge_ties(std::move(groups));
  double positives = 0.0;
  for (const ScoreGroup& g : groups) positives += static_cast<double>(g.positives);
  if (positives == 0.0) throw std::domain_error("average precision needs positives");
  double tp = 0.0;
  double fp = 0.0;
  double ap = 0.0;
  for (auto it = groups.rbegin(); it != groups.rend(); ++it) {
    tp += static_cast<double>(it->positives);
    fp += static_cast<double>(it->negatives);
    ap += static_cast<double>(it->positives) / positives * (tp / (tp + fp));
  }
  return ap;
}

std::vector<ScoreGroup> pair_universe_groups(std::span<const ScoredPair> scores, std::span<const NodePair> truth,
                                             int n_nodes) {
  const auto n = static_cast<std::size_t>(n_nodes);
  const std::size_t universe = n * (n - (n > 0 ? 1 : 0));
  std::vector<ScoreGroup> groups;
  groups.reserve(scores.size() + 1);
  std::size_t explicit_pos = 0;
  std::size_t explicit_neg = 0;
  for (const ScoredPair& s : scores) {
    if (s.pair.src == s.pair.dst || s.pair.src < 0 || s.pair.dst < 0 || s.pair.src >= n_nodes ||
        s.pair.dst >= n_nodes) {
      throw std::invalid_argument("scored pair outside the node-pair universe");
    }
    const bool positive = std::binary_search(truth.begin(), truth.end(), s.pair);
    groups.push_back({s.score, positive ? 1u : 0u, positive ? 0u : 1u});
    (positive ? explicit_pos : explicit_neg) += 1;
  }
  if (explicit_pos > truth.size() || explicit_neg + truth.size() > universe) {
    throw std::invalid_argument("duplicate scored pairs");
  }
  groups.push_back({0.0, truth.size() - explicit_pos, universe - truth.size() - explicit_neg});
  return groups;
}

double roc_auc(std::span<const ScoredPair> scores, std::span<const NodePair> truth, int n_nodes) {
  return roc_auc(pair_universe_groups(scores, truth, n_nodes));
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman inputs differ in length");
  if (x.size() < 2) throw std::domain_error("spearman needs at least two entries");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double mean = 0.5 * static_cast<double>(x.size() + 1);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

Eigen::Index argmax_layer(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < row.size(); ++k) {
    if (row(k) > row(best)) best = k;
  }
  return best;
}

double pi_accuracy(const Eigen::MatrixXd& pi_hat, std::span<const int> truth_layers, const LayerPermutation& perm) {
  if (pi_hat.rows() != static_cast<Eigen::Index>(truth_layers.size())) {
    throw std::invalid_argument("pi_hat rows do not match truth labels");
  }
  if (pi_hat.rows() == 0) throw std::domain_error("pi accuracy of an empty cascade set");
  std::size_t hits = 0;
  for (Eigen::Index c = 0; c < pi_hat.rows(); ++c) {
    const auto label = perm[static_cast<std::size_t>(argmax_layer(pi_hat.row(c)))];
    if (label == truth_layers[static_cast<std::size_t>(c)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(pi_hat.rows());
}

double alpha_spearman(const LayeredRates& inferred, const MultilayerNetwork& truth, const LayerPermutation& perm) {
  check_layers(inferred, truth, perm);
  const LayerPermutation inv = inverse(perm);
  std::vector<double> true_rates;
  std::vector<double> inferred_rates;
  for (int k = 0; k < truth.n_layers(); ++k) {
    for (const Edge& e : truth.layer(k)) {
      true_rates.push_back(e.rate);
      inferred_rates.push_back(inferred_rate(inferred, inv, k, {e.src, e.dst}));
    }
  }
  return spearman(true_rates, inferred_rates);
}

LayerMatch match_layers(const LayeredRates& inferred, const Eigen::MatrixXd& pi_hat, std::span<const int> truth_layers,
                        const MultilayerNetwork& truth) {
  const int k = truth.n_layers();
  if (k > 8) throw std::invalid_argument("layer matching supports at most 8 layers");
  if (pi_hat.cols() != k) throw std::invalid_argument("pi_hat layer count differs from ground truth");
  LayerPermutation perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  LayerMatch best;
  bool first = true;
  auto key = [](double v) { return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v; };
  do {
    const double acc = pi_accuracy(pi_hat, truth_layers, perm);
    const double rho = alpha_spearman(inferred, truth, perm);
    if (first || acc > best.pi_accuracy || (acc == best.pi_accuracy && key(rho) > key(best.alpha_spearman))) {
      best = {perm, acc, rho};
      first = false;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double best_pi_accuracy(const Eigen::MatrixXd& pi_hat, std::span<const int> truth_layers) {
  LayerPermutation perm(static_cast<std::size_t>(pi_hat.cols()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    best = std::max(best, pi_accuracy(pi_hat, truth_layers, perm));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

PrAucReport pr_auc_layers(const LayeredRates& inferred, const MultilayerNetwork& truth, const LayerPermutation& perm) {
  check_layers(inferred, truth, perm);
  const LayerPermutation inv = inverse(perm);
  PrAucReport report;
  double sum = 0.0;
  int defined = 0;
  for (int k = 0; k < truth.n_layers(); ++k) {
    const auto truth_pairs = layer_pairs(truth, k);
    if (truth_pairs.empty()) {
      report.per_layer.push_back(std::nullopt);
      continue;
    }
    std::vector<ScoredPair> scores;
    scores.reserve(inferred.edges.size());
    const Eigen::Index row = inv[static_cast<std::size_t>(k)];
    for (std::size_t e = 0; e < inferred.edges.size(); ++e) {
      scores.push_back({inferred.edges[e], inferred.alpha(row, static_cast<Eigen::Index>(e))});
    }
    const double ap = average_precision(pair_universe_groups(scores, truth_pairs, truth.n_nodes()));
    report.per_layer.push_back(ap);
    sum += ap;
    ++defined;
  }
  report.mean = defined ? sum / defined : std::numeric_limits<double>::quiet_NaN();
  return report;
}

EdgeRecovery edge_recovery(std::span<const NodePair> selected, std::span<const NodePair> truth) {
  EdgeRecovery r;
  r.total = truth.size();
  for (const NodePair& p : selected) {
    if (std::binary_search(truth.begin(), truth.end(), p)) ++r.hits;
  }
  r.rate = r.total ? static_cast<double>(r.hits) / static_cast<double>(r.total) : 0.0;
  return r;
}

MetricsReport evaluate(const EvaluationInput& input) {
  if (!input.truth || !input.inferred || !input.pi_hat) throw std::invalid_argument("evaluation needs ground truth");
  MetricsReport report;
  const AggregatedNetwork agg = aggregate(*input.truth);
  report.auc = roc_auc(input.edge_scores, agg.edges, input.truth->n_nodes());
  const LayerMatch match = match_layers(*input.inferred, *input.pi_hat, input.truth_layers, *input.truth);
  report.matched_permutation = match.perm;
  report.pi_accuracy = match.pi_accuracy;
  report.alpha_spearman = match.alpha_spearman;
  const PrAucReport pr = pr_auc_layers(*input.inferred, *input.truth, match.perm);
  report.pr_auc_per_layer = pr.per_layer;
  report.pr_auc_mean = pr.mean;
  report.edge_recovery = edge_recovery(input.inferred->edges, agg.edges);
  return report;
}

}  // namespace multic
