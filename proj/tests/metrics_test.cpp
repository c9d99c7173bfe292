#include <algorithm>
#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "multic/inference.hpp"
#include "multic/metrics.hpp"
#include "multic/rng.hpp"
#include "multic/synthgen.hpp"

namespace multic {
namespace {

std::vector<ScoreGroup> items(std::vector<double> pos, std::vector<double> neg) {
  std::vector<ScoreGroup> out;
  for (double s : pos) out.push_back({s, 1, 0});
  for (double s : neg) out.push_back({s, 0, 1});
  return out;
}

double brute_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0.0;
  for (double p : pos) {
    for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  }
  return wins / static_cast<double>(pos.size() * neg.size());
}

// Precision at each distinct threshold times the recall gained there.
double brute_ap(const std::vector<double>& pos, const std::vector<double>& neg) {
  std::vector<double> thresholds = pos;
  thresholds.insert(thresholds.end(), neg.begin(), neg.end());
  std::ranges::sort(thresholds, std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double ap = 0.0, prev_recall = 0.0;
  for (double t : thresholds) {
    const auto tp = std::ranges::count_if(pos, [t](double s) { return s >= t; });
    const auto fp = std::ranges::count_if(neg, [t](double s) { return s >= t; });
    const double recall = static_cast<double>(tp) / static_cast<double>(pos.size());
    ap += (recall - prev_recall) * static_cast<double>(tp) / static_cast<double>(tp + fp);
    prev_recall = recall;
  }
  return ap;
}

TEST(Auc, Examples) {
  EXPECT_EQ(roc_auc(items({0.9, 0.8}, {0.1})), 1.0);
  EXPECT_EQ(roc_auc(items({0.4, 0.4}, {0.4, 0.4, 0.4})), 0.5);
  EXPECT_EQ(roc_auc(items({0.6, 0.8}, {0.7, 0.2})), 0.75);
  EXPECT_THROW(roc_auc(items({0.3}, {})), std::domain_error);
  EXPECT_THROW(roc_auc(items({}, {0.3})), std::domain_error);
}

TEST(Auc, PairUniverseScoresMissingPairsZero) {
  // 3 nodes, 6 ordered pairs; truth {(0,1),(1,2)} both scored above the rest.
  const std::vector<ScoredPair> scores{{{0, 1}, 0.9}, {{1, 2}, 0.8}, {{2, 0}, 0.1}};
  const std::vector<NodePair> truth{{0, 1}, {1, 2}};
  EXPECT_EQ(roc_auc(scores, truth, 3), 1.0);
  const std::vector<ScoredPair> one{{{0, 1}, 0.5}};
  // (1,2) ties with the four unscored negatives at 0.
  EXPECT_DOUBLE_EQ(roc_auc(one, truth, 3), (4.0 + 2.0) / 8.0);
  const std::vector<ScoredPair> outside{{{0, 3}, 0.5}};
  EXPECT_THROW(roc_auc(outside, truth, 3), std::invalid_argument);
}

TEST(Auc, MatchesBruteForceAndInvariances) {
  Rng rng(1, RngDomain::kTest, 0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> pos, neg;
    const auto np = 1 + rng.Below(8), nn = 1 + rng.Below(8);
    // Coarse values so ties occur.
    for (std::uint64_t i = 0; i < np; ++i) pos.push_back(static_cast<double>(rng.Below(6)) / 5.0);
    for (std::uint64_t i = 0; i < nn; ++i) neg.push_back(static_cast<double>(rng.Below(6)) / 5.0);
    const double auc = roc_auc(items(pos, neg));
    EXPECT_NEAR(auc, brute_auc(pos, neg), 1e-15);
    EXPECT_NEAR(average_precision(items(pos, neg)), brute_ap(pos, neg), 1e-12);

    auto transform = [](std::vector<double> v) {
      for (double& x : v) x = std::exp(3.0 * x) - 7.0;
      return v;
    };
    EXPECT_NEAR(roc_auc(items(transform(pos), transform(neg))), auc, 1e-15);
  }
}

TEST(Auc, NegatedScoresComplementWithoutTies) {
  Rng rng(2, RngDomain::kTest, 0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> pos, neg;
    for (int i = 0; i < 5; ++i) pos.push_back(rng.Uniform());
    for (int i = 0; i < 7; ++i) neg.push_back(rng.Uniform());
    std::vector<double> npos, nneg;
    for (double v : pos) npos.push_back(-v);
    for (double v : neg) nneg.push_back(-v);
    EXPECT_NEAR(roc_auc(items(pos, neg)) + roc_auc(items(npos, nneg)), 1.0, 1e-15);
  }
}

TEST(AveragePrecision, InterleavedExample) {
  // Ranking P N P N: 1/2 * 1 + 1/2 * 2/3.
  EXPECT_NEAR(average_precision(items({0.6, 0.8}, {0.7, 0.2})), 0.5 + 1.0 / 3.0, 1e-15);
  EXPECT_EQ(average_precision(items({0.9, 0.8}, {0.1, 0.0})), 1.0);
  EXPECT_DOUBLE_EQ(average_precision(items({0.0, 0.0}, {0.0, 0.0, 0.0})), 0.4);
  EXPECT_THROW(average_precision(items({}, {0.1})), std::domain_error);
}

TEST(Spearman, Examples) {
  const std::vector<double> t{0.1, 0.2, 0.3};
  EXPECT_DOUBLE_EQ(spearman(t, t), 1.0);
  const std::vector<double> rev{0.9, 0.8, 0.7};
  EXPECT_DOUBLE_EQ(spearman(t, rev), -1.0);
  const std::vector<double> inferred{5, 6, 4};
  // Ranks (1,2,3) vs (2,3,1): 1 - 6 * 6 / (3 * 8).
  EXPECT_DOUBLE_EQ(spearman(t, inferred), -0.5);
  const std::vector<double> flat{2, 2, 2};
  EXPECT_TRUE(std::isnan(spearman(t, flat)));
  EXPECT_THROW(spearman(std::vector<double>{1.0}, std::vector<double>{2.0}), std::domain_error);
}

TEST(Spearman, AverageRanksForTies) {
  // Ranks (1.5,1.5,3,4) vs (1,2,3,4): Pearson on ranks.
  const std::vector<double> x{1, 1, 2, 3}, y{1, 2, 3, 4};
  const double mx = 2.5;
  const std::vector<double> rx{1.5, 1.5, 3, 4}, ry{1, 2, 3, 4};
  double sxy = 0, sxx = 0, syy = 0;
  for (int i = 0; i < 4; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - mx);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - mx) * (ry[i] - mx);
  }
  EXPECT_NEAR(spearman(x, y), sxy / std::sqrt(sxx * syy), 1e-15);
}

TEST(PiAccuracy, ArgmaxTieRuleAndOneHot) {
  Eigen::MatrixXd one_hot(3, 2);
  one_hot << 1, 0, 0, 1, 1, 0;
  const std::vector<int> truth{0, 1, 0};
  EXPECT_EQ(argmax_layer(Eigen::RowVectorXd::Constant(3, 0.2)), 0);
  EXPECT_EQ(pi_accuracy(one_hot, truth, {0, 1}), 1.0);
  EXPECT_EQ(pi_accuracy(one_hot, truth, {1, 0}), 0.0);
  const Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(4, 2, 0.5);
  const std::vector<int> labels{0, 1, 1, 1};
  EXPECT_EQ(pi_accuracy(uniform, labels, {0, 1}), 0.25);
}

TEST(PiAccuracy, RandomMembershipsSitAtBaseline) {
  Rng rng(3, RngDomain::kTest, 0);
  const Eigen::Index c = 20000;
  Eigen::MatrixXd pi(c, 2);
  std::vector<int> labels;
  for (Eigen::Index i = 0; i < c; ++i) {
    const double u = rng.Uniform();
    pi(i, 0) = u;
    pi(i, 1) = 1 - u;
    labels.push_back(static_cast<int>(rng.Below(2)));
  }
  EXPECT_NEAR(pi_accuracy(pi, labels, {0, 1}), 0.5, 0.02);
}

// Two small layers on 4 nodes.
MultilayerNetwork two_layers() {
  return MultilayerNetwork(4, 2, {{{0, 1, 0.2}, {1, 2, 0.5}, {2, 3, 0.9}}, {{3, 0, 0.3}, {0, 2, 0.6}, {1, 3, 0.1}}});
}

LayeredRates exact_rates(const MultilayerNetwork& net) {
  LayeredRates r;
  r.edges = aggregate(net).edges;
  r.alpha = Eigen::MatrixXd::Zero(net.n_layers(), static_cast<Eigen::Index>(r.edges.size()));
  for (int k = 0; k < net.n_layers(); ++k) {
    for (std::size_t e = 0; e < r.edges.size(); ++e) r.alpha(k, static_cast<Eigen::Index>(e)) = net.rate(k, r.edges[e].src, r.edges[e].dst);
  }
  return r;
}

TEST(MatchLayers, SwappedLabelsAreAbsorbed) {
  const auto net = two_layers();
  auto rates = exact_rates(net);
  rates.alpha.row(0).swap(rates.alpha.row(1));
  Eigen::MatrixXd pi(3, 2);
  pi << 0.9, 0.1, 0.8, 0.2, 0.3, 0.7;  // labels 0,0,1
  const std::vector<int> truth{1, 1, 0};
  const auto m = match_layers(rates, pi, truth, net);
  EXPECT_EQ(m.perm, (LayerPermutation{1, 0}));
  EXPECT_EQ(m.pi_accuracy, 1.0);
  EXPECT_DOUBLE_EQ(m.alpha_spearman, 1.0);
}

TEST(MatchLayers, TieOnAccuracyFallsToSpearman) {
  const auto net = two_layers();
  auto rates = exact_rates(net);
  rates.alpha.row(0).swap(rates.alpha.row(1));
  const Eigen::MatrixXd pi = Eigen::MatrixXd::Constant(2, 2, 0.5);
  const std::vector<int> truth{0, 1};  // accuracy 0.5 either way
  EXPECT_EQ(match_layers(rates, pi, truth, net).perm, (LayerPermutation{1, 0}));
}

TEST(MatchLayers, SingleLayerIsIdentity) {
  const MultilayerNetwork net(3, 1, {{{0, 1, 0.2}, {1, 2, 0.4}}});
  const auto rates = exact_rates(net);
  const Eigen::MatrixXd pi = Eigen::MatrixXd::Ones(2, 1);
  const std::vector<int> truth{0, 0};
  const auto m = match_layers(rates, pi, truth, net);
  EXPECT_EQ(m.perm, (LayerPermutation{0}));
  EXPECT_EQ(m.pi_accuracy, 1.0);
}

TEST(MatchLayers, JointRelabelingLeavesMetricsUnchanged) {
  NetworkGenConfig cfg;
  cfg.n_nodes = 30;
  cfg.n_layers = 3;
  cfg.seed = 2;
  const auto net = generate_network(cfg);
  auto rates = exact_rates(net);
  Rng rng(4, RngDomain::kTest, 0);
  for (Eigen::Index i = 0; i < rates.alpha.size(); ++i) rates.alpha.data()[i] += 0.3 * rng.Uniform();
  Eigen::MatrixXd pi(50, 3);
  std::vector<int> truth;
  for (Eigen::Index c = 0; c < 50; ++c) {
    for (Eigen::Index k = 0; k < 3; ++k) pi(c, k) = rng.Uniform();
    pi.row(c) /= pi.row(c).sum();
    truth.push_back(static_cast<int>(rng.Below(3)));
  }
  const auto base = match_layers(rates, pi, truth, net);
  const std::vector<int> perm{2, 0, 1};
  LayeredRates moved = rates;
  Eigen::MatrixXd moved_pi = pi;
  for (int k = 0; k < 3; ++k) {
    moved.alpha.row(perm[k]) = rates.alpha.row(k);
    moved_pi.col(perm[k]) = pi.col(k);
  }
  const auto again = match_layers(moved, moved_pi, truth, net);
  EXPECT_EQ(again.pi_accuracy, base.pi_accuracy);
  EXPECT_DOUBLE_EQ(again.alpha_spearman, base.alpha_spearman);
  EXPECT_EQ(best_pi_accuracy(moved_pi, truth), base.pi_accuracy);
}

TEST(AlphaSpearman, UnselectedEdgesCountAsZero) {
  const auto net = two_layers();
  auto rates = exact_rates(net);
  EXPECT_DOUBLE_EQ(alpha_spearman(rates, net, {0, 1}), 1.0);
  // Keep only two edges: the others are scored 0.
  LayeredRates few;
  few.edges = {{1, 2}, {2, 3}};
  few.alpha.resize(2, 2);
  few.alpha << 0.5, 0.9, 0.0, 0.0;
  std::vector<double> truth_vals, inferred;
  for (int k = 0; k < 2; ++k) {
    for (const Edge& e : net.layer(k)) {
      truth_vals.push_back(e.rate);
      const auto it = std::ranges::find(few.edges, NodePair{e.src, e.dst});
      inferred.push_back(it == few.edges.end() ? 0.0 : few.alpha(k, it - few.edges.begin()));
    }
  }
  EXPECT_DOUBLE_EQ(alpha_spearman(few, net, {0, 1}), spearman(truth_vals, inferred));
}

TEST(PrAuc, PerfectAndConstantScores) {
  const auto net = two_layers();
  const auto exact = exact_rates(net);
  const auto perfect = pr_auc_layers(exact, net, {0, 1});
  ASSERT_EQ(perfect.per_layer.size(), 2u);
  EXPECT_EQ(*perfect.per_layer[0], 1.0);
  EXPECT_EQ(*perfect.per_layer[1], 1.0);
  EXPECT_EQ(perfect.mean, 1.0);

  LayeredRates zero = exact;
  zero.alpha.setZero();
  const auto flat = pr_auc_layers(zero, net, {0, 1});
  EXPECT_DOUBLE_EQ(*flat.per_layer[0], 3.0 / 12.0);
  EXPECT_DOUBLE_EQ(flat.mean, 3.0 / 12.0);
}

TEST(PrAuc, EmptyLayerIsUndefined) {
  const MultilayerNetwork net(3, 2, {{{0, 1, 0.2}}, {}});
  LayeredRates r;
  r.edges = {{0, 1}};
  r.alpha = Eigen::MatrixXd::Constant(2, 1, 0.4);
  const auto rep = pr_auc_layers(r, net, {0, 1});
  EXPECT_EQ(*rep.per_layer[0], 1.0);
  EXPECT_FALSE(rep.per_layer[1].has_value());
  EXPECT_EQ(rep.mean, 1.0);
}

TEST(EdgeRecovery, Counts) {
  std::vector<NodePair> truth, selected;
  for (int i = 0; i < 4422; ++i) truth.push_back({i, i + 1});
  for (int i = 0; i < 2989; ++i) selected.push_back({i, i + 1});
  for (int i = 0; i < 4864 - 2989; ++i) selected.push_back({i + 10000, i});
  std::ranges::sort(selected);
  const auto r = edge_recovery(selected, truth);
  EXPECT_EQ(r.hits, 2989u);
  EXPECT_EQ(r.total, 4422u);
  EXPECT_NEAR(r.rate, 0.676, 5e-4);
  EXPECT_EQ(edge_recovery(truth, truth).rate, 1.0);
  const std::vector<NodePair> other{{0, 5}};
  EXPECT_EQ(edge_recovery(other, truth).rate, 0.0);
}

TEST(EdgeRecovery, MonotoneInBudget) {
  Rng rng(5, RngDomain::kTest, 0);
  std::vector<NodePair> cand;
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 20; ++j) {
      if (i != j) cand.push_back({i, j});
    }
  }
  Eigen::VectorXd scores(static_cast<Eigen::Index>(cand.size()));
  for (Eigen::Index e = 0; e < scores.size(); ++e) scores(e) = static_cast<double>(rng.Below(50)) / 50.0;
  std::vector<NodePair> truth;
  for (const NodePair& p : cand) {
    if (rng.Bernoulli(0.1)) truth.push_back(p);
  }
  double prev = 0.0;
  for (std::size_t budget = 1; budget <= cand.size(); budget += 7) {
    const double rate = edge_recovery(select_edges(cand, scores, budget).edges, truth).rate;
    EXPECT_GE(rate, prev);
    prev = rate;
  }
}

TEST(Evaluate, RequiresGroundTruth) {
  EvaluationInput input;
  EXPECT_THROW(evaluate(input), std::invalid_argument);
}

TEST(Evaluate, FullReport) {
  const auto net = two_layers();
  const auto rates = exact_rates(net);
  std::vector<ScoredPair> scores;
  for (std::size_t e = 0; e < rates.edges.size(); ++e) scores.push_back({rates.edges[e], 0.9});
  Eigen::MatrixXd pi(2, 2);
  pi << 0.1, 0.9, 0.8, 0.2;
  const std::vector<int> labels{1, 0};
  EvaluationInput input{scores, &rates, &pi, labels, &net};
  const auto r = evaluate(input);
  EXPECT_EQ(r.auc, 1.0);
  EXPECT_EQ(r.pi_accuracy, 1.0);
  EXPECT_DOUBLE_EQ(r.alpha_spearman, 1.0);
  EXPECT_EQ(r.pr_auc_mean, 1.0);
  EXPECT_EQ(r.edge_recovery.rate, 1.0);
  EXPECT_EQ(r.matched_permutation, (LayerPermutation{0, 1}));
}

}  // namespace
}  // namespace multic
