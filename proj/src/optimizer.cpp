#include "multic/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace multic {
namespace {

struct Moments {
  Eigen::MatrixXd m;
  Eigen::MatrixXd v;
};

void adam_update(Eigen::MatrixXd& x, const Eigen::MatrixXd& g, Moments& s, const OptimizerConfig& cfg,
                 double correction1, double correction2) {
  if (x.size() == 0) return;
  s.m = cfg.beta1 * s.m + (1.0 - cfg.beta1) * g;
  s.v = cfg.beta2 * s.v + (1.0 - cfg.beta2) * g.cwiseAbs2();
  x.array() -= cfg.learning_rate * (s.m.array() / correction1) /
               ((s.v.array() / correction2).sqrt() + cfg.eps);
}

}  // namespace

OptimizerConfig OptimizerConfig::phase_one() {
  OptimizerConfig cfg;
  cfg.learning_rate = 0.5;
  cfg.max_iters = 500;
  cfg.rel_tol = 1e-4;
  cfg.restarts = {0};
  return cfg;
}

OptimizerConfig OptimizerConfig::phase_two() {
  OptimizerConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.max_iters = 3000;
  cfg.rel_tol = 1e-6;
  cfg.restarts = {0, 1, 2};
  return cfg;
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (max_iters < 1) throw std::invalid_argument("max_iters must be at least 1");
  if (!(rel_tol >= 0.0)) throw std::invalid_argument("rel_tol must be non-negative");
  if (patience < 1) throw std::invalid_argument("patience must be at least 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("Adam betas must lie in [0,1)");
  }
  if (!(eps > 0.0)) throw std::invalid_argument("Adam eps must be positive");
  if (restarts.empty()) throw std::invalid_argument("at least one restart seed is required");
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::kTolerance: return "tolerance";
    case StopReason::kIterationCap: return "iteration_cap";
    case StopReason::kDiverged: return "diverged";
  }
  return "unknown";
}

OptimizeResult adam_minimize(const Objective& objective, RawParams start, const OptimizerConfig& cfg) {
  cfg.validate();
  OptimizeResult result;
  RawParams x = std::move(start);
  Moments alpha{Eigen::MatrixXd::Zero(x.alpha_raw.rows(), x.alpha_raw.cols()),
                Eigen::MatrixXd::Zero(x.alpha_raw.rows(), x.alpha_raw.cols())};
  Moments pi{Eigen::MatrixXd::Zero(x.pi_raw.rows(), x.pi_raw.cols()),
             Eigen::MatrixXd::Zero(x.pi_raw.rows(), x.pi_raw.cols())};
  double power1 = 1.0;
  double power2 = 1.0;
  result.trace.reserve(static_cast<std::size_t>(cfg.max_iters));

  for (int it = 0; it < cfg.max_iters; ++it) {
    NllWithGradient eval = objective(x);
    if (!std::isfinite(eval.value) || !eval.gradient.alpha_raw.allFinite() || !eval.gradient.pi_raw.allFinite()) {
      if (it == 0) throw std::runtime_error("objective is not finite at the initial point");
      result.stop = StopReason::kDiverged;
      return result;
    }
    result.trace.push_back({it, eval.value});
    if (it == 0 || eval.value < result.best_value) {
      result.best_value = eval.value;
      result.best = x;
    }
    if (it >= cfg.patience) {
      const double before = result.trace[static_cast<std::size_t>(it - cfg.patience)].value;
      const double mean_decrease = (before - eval.value) / std::abs(before) / cfg.patience;
      if (mean_decrease >= 0.0 && mean_decrease < cfg.rel_tol) {
        result.stop = StopReason::kTolerance;
        return result;
      }
    }
    if (it + 1 == cfg.max_iters) break;
    power1 *= cfg.beta1;
    power2 *= cfg.beta2;
    adam_update(x.alpha_raw, eval.gradient.alpha_raw, alpha, cfg, 1.0 - power1, 1.0 - power2);
    adam_update(x.pi_raw, eval.gradient.pi_raw, pi, cfg, 1.0 - power1, 1.0 - power2);
  }
  result.stop = StopReason::kIterationCap;
  return result;
}

}  // namespace multic
