#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "multic/objective.hpp"

namespace multic {

struct OptimizerConfig {
  double learning_rate = 0.1;
  int max_iters = 3000;
  /// Stop once the objective's mean relative decrease per iteration over the
  /// last `patience` iterations is non-negative and below rel_tol.
  double rel_tol = 1e-6;
  int patience = 20;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<std::uint64_t> restarts{0, 1, 2};

  /// Single-layer phase: learning rate 0.5, 500 iterations, 0.01 %.
  static OptimizerConfig phase_one();
  /// Multilayer phase: learning rate 0.1, 3000 iterations, 0.0001 %.
  static OptimizerConfig phase_two();

  void validate() const;  // throws std::invalid_argument
};

enum class StopReason { kTolerance, kIterationCap, kDiverged };

std::string to_string(StopReason reason);

struct TracePoint {
  int iteration = 0;
  double value = 0.0;
};

struct OptimizeResult {
  RawParams best;  // lowest objective seen
  double best_value = 0.0;
  std::vector<TracePoint> trace;
  StopReason stop = StopReason::kIterationCap;
};

using Objective = std::function<NllWithGradient(const RawParams&)>;

/// Adam with bias-corrected moments on both parameter blocks. Throws
/// std::runtime_error when the objective is not finite at the start point.
OptimizeResult adam_minimize(const Objective& objective, RawParams start, const OptimizerConfig& cfg);

}  // namespace multic
