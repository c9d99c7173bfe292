#include "multic/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "multic/parallel.hpp"
#include "multic/transforms.hpp"

namespace multic {
namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::uint64_t pack(const NodePair& p) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(p.src)) << 32) | static_cast<std::uint32_t>(p.dst);
}

NodePair unpack(std::uint64_t key) {
  return {static_cast<NodeId>(key >> 32), static_cast<NodeId>(key & 0xffffffffULL)};
}

}  // namespace

std::vector<NodePair> candidate_edges(std::span<const Cascade> cascades) {
  std::vector<std::uint64_t> keys;
  for (const Cascade& c : cascades) {
    const auto events = c.events();
    for (std::size_t a = 0; a < events.size(); ++a) {
      for (std::size_t b = a + 1; b < events.size(); ++b) {
        if (events[a].time < events[b].time) keys.push_back(pack({events[a].node, events[b].node}));
      }
    }
    if (keys.size() > (1u << 22)) {
      std::sort(keys.begin(), keys.end());
      keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    }
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  std::vector<NodePair> pairs(keys.size());
  std::transform(keys.begin(), keys.end(), pairs.begin(), unpack);
  return pairs;
}

PhaseOneResult phase1_single_layer(std::span<const Cascade> cascades, std::span<const NodePair> candidates,
                                   const OptimizerConfig& opt) {
  if (candidates.empty()) throw InferenceError("no candidate edges: every cascade has a single activation time");
  PhaseOneResult out;
  out.candidates.assign(candidates.begin(), candidates.end());
  const ExposureTensors tensors = build_tensors(cascades, candidates);
  out.dropped_terms = tensors.dropped.size();
  out.memory_bytes = estimate_memory_bytes(tensors, 1);

  const RawParams start =
      initial_params(1, tensors.n_edges(), tensors.n_cascades, opt.restarts.empty() ? 0 : opt.restarts.front());
  const Objective objective = [&](const RawParams& raw) {
    return nll_value_and_gradient(tensors, raw, ObjectiveMode::kSingleLayer);
  };
  OptimizeResult fit;
  try {
    fit = adam_minimize(objective, start, opt);
  } catch (const std::runtime_error& e) {
    throw InferenceError(std::string("phase one: ") + e.what());
  }
  out.scores = sigmoid(fit.best.alpha_raw.row(0).transpose().array()).matrix();
  out.trace = std::move(fit.trace);
  out.stop = fit.stop;
  out.initial_value = out.trace.front().value;
  out.final_value = fit.best_value;
  return out;
}

EdgeSelection select_edges(std::span<const NodePair> candidates, const Eigen::VectorXd& scores, std::size_t budget) {
  if (budget < 1) throw std::invalid_argument("edge budget must be at least 1");
  if (scores.size() != static_cast<Eigen::Index>(candidates.size())) {
    throw std::invalid_argument("scores do not match candidate edges");
  }
  EdgeSelection sel;
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (budget >= candidates.size()) {
    sel.truncated_budget = budget > candidates.size();
  } else {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double sa = scores(static_cast<Eigen::Index>(a));
      const double sb = scores(static_cast<Eigen::Index>(b));
      if (sa != sb) return sa > sb;
      return candidates[a] < candidates[b];
    });
    order.resize(budget);
  }
  sel.edges.reserve(order.size());
  for (std::size_t i : order) sel.edges.push_back(candidates[i]);
  std::sort(sel.edges.begin(), sel.edges.end());
  return sel;
}

std::size_t default_budget(std::size_t truth_edges, double factor) {
  return static_cast<std::size_t>(std::llround(factor * static_cast<double>(truth_edges)));
}

PhaseTwoResult phase2_multilayer(std::span<const Cascade> cascades, std::span<const NodePair> selected, int n_layers,
                                 const OptimizerConfig& opt, std::span<const int> truth_layers, int threads) {
  if (n_layers < 2) throw std::invalid_argument("multilayer phase needs at least two layers");
  if (selected.empty()) throw InferenceError("multilayer phase: no selected edges");
  if (cascades.empty()) throw InferenceError("multilayer phase: no cascades");
  if (!truth_layers.empty() && truth_layers.size() != cascades.size()) {
    throw std::invalid_argument("truth labels do not match cascades");
  }
  opt.validate();
  const ExposureTensors tensors = build_tensors(cascades, selected);
  const Objective objective = [&](const RawParams& raw) {
    return nll_value_and_gradient(tensors, raw, ObjectiveMode::kMultilayer);
  };

  struct Run {
    std::optional<OptimizeResult> fit;
  };
  std::vector<Run> runs(opt.restarts.size());
  parallel_for(runs.size(), threads, [&](std::size_t r) {
    const RawParams start = initial_params(n_layers, tensors.n_edges(), tensors.n_cascades, opt.restarts[r]);
    try {
      runs[r].fit = adam_minimize(objective, start, opt);
    } catch (const std::runtime_error&) {
      runs[r].fit.reset();
    }
  });

  PhaseTwoResult out;
  out.dropped_terms = tensors.dropped.size();
  out.memory_bytes = estimate_memory_bytes(tensors, n_layers);
  std::optional<std::size_t> best;
  double best_acc = -1.0;
  std::vector<std::vector<TracePoint>> traces;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    RestartSummary summary;
    summary.seed = opt.restarts[r];
    if (!runs[r].fit) {
      summary.final_value = std::numeric_limits<double>::infinity();
      summary.stop = StopReason::kDiverged;
      out.restarts.push_back(summary);
      traces.emplace_back();
      continue;
    }
    const OptimizeResult& fit = *runs[r].fit;
    traces.push_back(fit.trace);
    summary.final_value = fit.best_value;
    summary.iterations = static_cast<int>(fit.trace.size());
    summary.stop = fit.stop;
    double acc = 0.0;
    if (!truth_layers.empty()) {
      acc = best_pi_accuracy(stick_breaking(fit.best.pi_raw), truth_layers);
      summary.pi_accuracy = acc;
    }
    out.restarts.push_back(summary);
    const bool better = !best || (truth_layers.empty() ? fit.best_value < runs[*best].fit->best_value
                                                       : (acc > best_acc || (acc == best_acc && fit.best_value <
                                                                                                   runs[*best].fit->best_value)));
    if (better) {
      best = r;
      best_acc = acc;
    }
  }
  if (!best) throw InferenceError("multilayer phase: every restart diverged", std::move(traces));

  OptimizeResult& fit = *runs[*best].fit;
  const Params p = transform_params(fit.best);
  out.alpha = p.alpha;
  out.pi = p.pi;
  out.trace = std::move(fit.trace);
  out.seed = opt.restarts[*best];
  out.final_value = fit.best_value;
  return out;
}

PhaseOneStage run_phase_one_stage(std::span<const Cascade> input, const PipelineConfig& cfg) {
  if (cfg.n_layers < 1) throw std::invalid_argument("n_layers must be at least 1");
  cfg.phase_one.validate();
  cfg.phase_two.validate();
  const auto start = std::chrono::steady_clock::now();

  PhaseOneStage stage;
  stage.cascades.assign(input.begin(), input.end());
  auto& cascades = stage.cascades;
  std::sort(cascades.begin(), cascades.end(), [](const Cascade& a, const Cascade& b) { return a.id() < b.id(); });
  for (std::size_t c = 1; c < cascades.size(); ++c) {
    if (cascades[c].id() == cascades[c - 1].id()) {
      throw std::invalid_argument("duplicate cascade id " + std::to_string(cascades[c].id()));
    }
  }
  if (cascades.empty()) throw InferenceError("empty cascade set");
  stage.result = phase1_single_layer(cascades, candidate_edges(cascades), cfg.phase_one);
  stage.seconds = seconds_since(start);
  return stage;
}

PipelineOutput complete_pipeline(const PhaseOneStage& stage, const PipelineConfig& cfg) {
  if (!cfg.budget) throw InferenceError("an edge budget is required when no ground truth is supplied");
  const auto start = std::chrono::steady_clock::now();
  const PhaseOneResult& one = stage.result;

  PipelineOutput output;
  InferenceResult& result = output.result;
  result.n_layers = cfg.n_layers;
  result.n_cascades_phase_one = stage.cascades.size();

  const EdgeSelection sel = select_edges(one.candidates, one.scores, *cfg.budget);
  output.timings.phase_one_seconds = stage.seconds + seconds_since(start);

  result.candidate_edges = one.candidates;
  result.edge_scores = one.scores;
  result.selected_edges = sel.edges;
  result.budget = *cfg.budget;
  result.budget_truncated = sel.truncated_budget;
  result.phase_one_trace = one.trace;
  result.phase_one_stop = to_string(one.stop);
  result.phase_one_dropped_terms = one.dropped_terms;
  output.memory_estimate_bytes = one.memory_bytes;

  std::vector<Cascade> kept;
  for (const Cascade& c : stage.cascades) {
    if (c.size() > cfg.size_threshold) kept.push_back(c);
  }
  if (kept.empty()) throw InferenceError("no cascades left for the multilayer phase after size filtering");
  result.n_cascades_phase_two = kept.size();
  for (const Cascade& c : kept) result.cascade_ids.push_back(c.id());

  const auto phase_two_start = std::chrono::steady_clock::now();
  if (cfg.n_layers == 1) {
    result.alpha_hat.resize(1, static_cast<Eigen::Index>(sel.edges.size()));
    for (std::size_t e = 0; e < sel.edges.size(); ++e) {
      const auto it = std::lower_bound(result.candidate_edges.begin(), result.candidate_edges.end(), sel.edges[e]);
      result.alpha_hat(0, static_cast<Eigen::Index>(e)) = result.edge_scores(it - result.candidate_edges.begin());
    }
    result.pi_hat = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(kept.size()), 1);
  } else {
    std::vector<int> truth_layers;
    if (cfg.truth_aware) {
      for (const Cascade& c : kept) {
        if (!c.truth()) throw InferenceError("truth-aware restart selection needs ground-truth layers");
        truth_layers.push_back(c.truth()->main_layer);
      }
    }
    PhaseTwoResult two = phase2_multilayer(kept, sel.edges, cfg.n_layers, cfg.phase_two, truth_layers, cfg.threads);
    result.alpha_hat = std::move(two.alpha);
    result.pi_hat = std::move(two.pi);
    result.phase_two_trace = std::move(two.trace);
    result.restart_seed = two.seed;
    result.restarts = std::move(two.restarts);
    result.phase_two_dropped_terms = two.dropped_terms;
    output.memory_estimate_bytes = std::max(output.memory_estimate_bytes, two.memory_bytes);
  }
  output.timings.phase_two_seconds = seconds_since(phase_two_start);
  output.timings.total_seconds = output.timings.phase_one_seconds + output.timings.phase_two_seconds;
  return output;
}

PipelineOutput run_pipeline(std::span<const Cascade> cascades, const PipelineConfig& cfg) {
  if (!cfg.budget) throw InferenceError("an edge budget is required when no ground truth is supplied");
  return complete_pipeline(run_phase_one_stage(cascades, cfg), cfg);
}

LayeredRates layered_rates(const InferenceResult& result) { return {result.selected_edges, result.alpha_hat}; }

std::vector<ScoredPair> scored_candidates(const InferenceResult& result) {
  std::vector<ScoredPair> scored(result.candidate_edges.size());
  for (std::size_t e = 0; e < scored.size(); ++e) {
    scored[e] = {result.candidate_edges[e], result.edge_scores(static_cast<Eigen::Index>(e))};
  }
  return scored;
}

}  // namespace multic
