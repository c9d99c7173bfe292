#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "multic/core.hpp"

namespace multic {

// Exponential transmission-time model.
double exp_pdf(double t, double lambda);  // throws std::domain_error for lambda <= 0
double survival(double t, double lambda);
double hazard(double t, double lambda);

template <typename DerivedPi, typename DerivedAlpha>
double mix_rates(const Eigen::MatrixBase<DerivedPi>& pi, const Eigen::MatrixBase<DerivedAlpha>& alpha) {
  return pi.cwiseProduct(alpha).sum();
}

enum class ObjectiveMode {
  kSingleLayer,  // one aggregated layer, memberships fixed at 1
  kMultilayer,
};

/// (cascade id, node) of an activated non-seed node with no candidate in-edge.
using ZeroHazardSite = std::pair<std::int64_t, NodeId>;

/// Sparse form of the cascade likelihood restricted to an edge set E.
///
/// exposure(c, e) for e = (i, j) holds t_j - t_i when t_i < t_j < T and
/// T - t_i when i is activated and j is not; every other entry is zero. Each
/// activated non-seed node j of cascade c owns one group: the row of `groups`
/// marking the edges (i, j) in E with t_i < t_j. Nodes at the minimum
/// activation time of a cascade are seeds and own no group.
struct ExposureTensors {
  std::vector<NodePair> edges;  // sorted, defines the column order
  Eigen::Index n_cascades = 0;
  Eigen::SparseMatrix<double, Eigen::RowMajor> exposure;  // C x |E|
  Eigen::SparseMatrix<double, Eigen::RowMajor> groups;    // G x |E|
  std::vector<Eigen::Index> group_cascade;                // G entries, row into the cascade list
  Eigen::RowVectorXd exposure_totals;                      // column sums of `exposure`
  std::vector<ZeroHazardSite> dropped;                     // non-seeds without any group edge

  Eigen::Index n_edges() const { return static_cast<Eigen::Index>(edges.size()); }
  Eigen::Index n_groups() const { return groups.rows(); }
};

/// `edges` must be sorted and free of duplicates.
ExposureTensors build_tensors(std::span<const Cascade> cascades, std::span<const NodePair> edges);

/// Constrained parameters: alpha is K x |E| (row k = layer k), pi is C x K.
/// In single-layer mode alpha has one row and pi is ignored.
struct Params {
  Eigen::MatrixXd alpha;
  Eigen::MatrixXd pi;
};

/// Unconstrained parameters: alpha = sigmoid(alpha_raw), pi = stick_breaking(pi_raw).
struct RawParams {
  Eigen::MatrixXd alpha_raw;  // K x |E|
  Eigen::MatrixXd pi_raw;     // C x (K - 1)
};

Params transform_params(const RawParams& raw);

enum class ZeroHazardPolicy {
  kDrop,    // skip the log term of nodes without candidate in-edges
  kReport,  // such nodes make the value +inf; hazard sums floored at 1e-300
};

struct NllResult {
  double value = 0.0;
  std::size_t dropped_terms = 0;
  std::vector<ZeroHazardSite> zero_hazard;
};

NllResult nll_fast(const ExposureTensors& tensors, const Params& params, ObjectiveMode mode,
                   ZeroHazardPolicy policy = ZeroHazardPolicy::kDrop);

struct NllWithGradient {
  double value = 0.0;
  RawParams gradient;
};

/// Value and exact gradient of nll_fast(transform_params(raw)) with the drop
/// policy. In single-layer mode the pi gradient has zero columns.
NllWithGradient nll_value_and_gradient(const ExposureTensors& tensors, const RawParams& raw, ObjectiveMode mode);

RawParams nll_gradient(const ExposureTensors& tensors, const RawParams& raw, ObjectiveMode mode);

/// Literal nested-loop evaluation of the negative log-likelihood over the
/// full node-pair space. alpha[k] is the dense N x N rate matrix of layer k
/// (row = source), pi is C x K. Any activated non-seed node whose incoming
/// hazard is zero makes the value +inf and is listed.
NllResult nll_oracle(std::span<const Cascade> cascades, std::span<const Eigen::MatrixXd> alpha,
                     const Eigen::MatrixXd& pi);

/// Initial raw point: alpha_raw ~ U(-2.2, -2.0), pi_raw at the uniform
/// membership plus U(-0.01, 0.01) jitter, drawn from restart stream `seed`.
RawParams initial_params(Eigen::Index n_layers, Eigen::Index n_edges, Eigen::Index n_cascades, std::uint64_t seed);

/// Analytic memory estimate in bytes of the sparse objective state.
std::size_t estimate_memory_bytes(const ExposureTensors& tensors, Eigen::Index n_layers);

}  // namespace multic
