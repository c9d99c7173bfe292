#include "multic/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "multic/rng.hpp"
#include "multic/transforms.hpp"

namespace multic {
namespace {

constexpr double kHazardFloor = 1e-300;

using Triplet = Eigen::Triplet<double, Eigen::Index>;

}  // namespace

double exp_pdf(double t, double lambda) {
  if (!(lambda > 0.0)) throw std::domain_error("exp_pdf requires a positive rate");
  return lambda * std::exp(-lambda * t);
}

double survival(double t, double lambda) { return lambda == 0.0 ? 1.0 : std::exp(-lambda * t); }

double hazard(double /*t*/, double lambda) { return lambda; }

ExposureTensors build_tensors(std::span<const Cascade> cascades, std::span<const NodePair> edges) {
  if (!std::is_sorted(edges.begin(), edges.end()) ||
      std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
    throw std::invalid_argument("edge set must be sorted and unique");
  }
  ExposureTensors out;
  out.edges.assign(edges.begin(), edges.end());
  out.n_cascades = static_cast<Eigen::Index>(cascades.size());

  NodeId n_nodes = node_count(cascades);
  for (const NodePair& e : edges) n_nodes = std::max({n_nodes, e.src + 1, e.dst + 1});
  std::vector<std::size_t> offsets(static_cast<std::size_t>(n_nodes) + 1, 0);
  for (const NodePair& e : edges) ++offsets[static_cast<std::size_t>(e.src) + 1];
  for (std::size_t v = 1; v < offsets.size(); ++v) offsets[v] += offsets[v - 1];

  std::vector<Triplet> exposure;
  std::vector<Triplet> groups;
  std::vector<int> local(static_cast<std::size_t>(n_nodes), -1);
  std::vector<std::pair<int, Eigen::Index>> members;  // (local index of j, edge)
  Eigen::Index group_row = 0;

  for (std::size_t c = 0; c < cascades.size(); ++c) {
    const auto events = cascades[c].events();
    const double horizon = cascades[c].horizon();
    for (std::size_t a = 0; a < events.size(); ++a) local[static_cast<std::size_t>(events[a].node)] = static_cast<int>(a);
    members.clear();
    for (const Activation& src : events) {
      const auto i = static_cast<std::size_t>(src.node);
      for (std::size_t e = offsets[i]; e < offsets[i + 1]; ++e) {
        const int j = local[static_cast<std::size_t>(edges[e].dst)];
        if (j < 0) {
          exposure.emplace_back(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(e), horizon - src.time);
        } else if (events[static_cast<std::size_t>(j)].time > src.time) {
          exposure.emplace_back(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(e),
                                events[static_cast<std::size_t>(j)].time - src.time);
          members.emplace_back(j, static_cast<Eigen::Index>(e));
        }
      }
    }
    std::sort(members.begin(), members.end());
    auto it = members.begin();
    const double seed_time = cascades[c].seed_time();
    for (std::size_t j = 0; j < events.size(); ++j) {
      if (events[j].time == seed_time) continue;
      if (it == members.end() || it->first != static_cast<int>(j)) {
        out.dropped.emplace_back(cascades[c].id(), events[j].node);
        continue;
      }
      for (; it != members.end() && it->first == static_cast<int>(j); ++it) groups.emplace_back(group_row, it->second, 1.0);
      out.group_cascade.push_back(static_cast<Eigen::Index>(c));
      ++group_row;
    }
    for (const Activation& a : events) local[static_cast<std::size_t>(a.node)] = -1;
  }

  out.exposure.resize(out.n_cascades, out.n_edges());
  out.exposure.setFromTriplets(exposure.begin(), exposure.end());
  out.groups.resize(group_row, out.n_edges());
  out.groups.setFromTriplets(groups.begin(), groups.end());
  out.exposure_totals = Eigen::RowVectorXd::Ones(out.n_cascades) * out.exposure;
  return out;
}

Params transform_params(const RawParams& raw) {
  Params p;
  p.alpha = sigmoid(raw.alpha_raw.array()).matrix();
  p.pi = stick_breaking(raw.pi_raw);
  return p;
}

NllResult nll_fast(const ExposureTensors& tensors, const Params& params, ObjectiveMode mode,
                   ZeroHazardPolicy policy) {
  NllResult result;
  result.dropped_terms = tensors.dropped.size();
  if (tensors.n_cascades == 0) return result;
  if (params.alpha.cols() != tensors.n_edges()) throw std::invalid_argument("alpha has wrong edge count");

  double linear = 0.0;
  Eigen::VectorXd hazards;
  if (mode == ObjectiveMode::kSingleLayer) {
    if (params.alpha.rows() != 1) throw std::invalid_argument("single-layer mode needs one alpha row");
    linear = tensors.exposure_totals.dot(params.alpha.row(0));
    hazards = tensors.groups * params.alpha.row(0).transpose();
  } else {
    const Eigen::Index k = params.alpha.rows();
    if (params.pi.rows() != tensors.n_cascades || params.pi.cols() != k) {
      throw std::invalid_argument("pi shape does not match cascades x layers");
    }
    const Eigen::MatrixXd exposed = tensors.exposure * params.alpha.transpose();  // C x K
    linear = exposed.cwiseProduct(params.pi).sum();
    const Eigen::MatrixXd per_layer = tensors.groups * params.alpha.transpose();  // G x K
    hazards = per_layer.cwiseProduct(params.pi(tensors.group_cascade, Eigen::all)).rowwise().sum();
  }

  double log_sum = 0.0;
  for (Eigen::Index g = 0; g < hazards.size(); ++g) {
    const double h = policy == ZeroHazardPolicy::kReport ? std::max(hazards(g), kHazardFloor) : hazards(g);
    log_sum += std::log(h);
  }
  result.value = linear - log_sum;
  if (policy == ZeroHazardPolicy::kReport && !tensors.dropped.empty()) {
    result.zero_hazard = tensors.dropped;
    result.value = std::numeric_limits<double>::infinity();
  }
  return result;
}

NllWithGradient nll_value_and_gradient(const ExposureTensors& tensors, const RawParams& raw, ObjectiveMode mode) {
  const Params p = transform_params(raw);
  NllWithGradient out;
  Eigen::MatrixXd grad_alpha;
  Eigen::MatrixXd grad_pi;

  if (mode == ObjectiveMode::kSingleLayer) {
    if (p.alpha.rows() != 1) throw std::invalid_argument("single-layer mode needs one alpha row");
    const Eigen::VectorXd hazards = tensors.groups * p.alpha.row(0).transpose();
    out.value = tensors.exposure_totals.dot(p.alpha.row(0)) - hazards.array().log().sum();
    const Eigen::VectorXd inv = hazards.cwiseInverse();
    grad_alpha = tensors.exposure_totals - (tensors.groups.transpose() * inv).transpose();
    grad_pi.resize(tensors.n_cascades, 0);
  } else {
    const Eigen::MatrixXd exposed = tensors.exposure * p.alpha.transpose();          // C x K
    const Eigen::MatrixXd per_layer = tensors.groups * p.alpha.transpose();          // G x K
    const Eigen::MatrixXd group_pi = p.pi(tensors.group_cascade, Eigen::all);        // G x K
    const Eigen::VectorXd hazards = per_layer.cwiseProduct(group_pi).rowwise().sum();
    out.value = exposed.cwiseProduct(p.pi).sum() - hazards.array().log().sum();

    const Eigen::VectorXd inv = hazards.cwiseInverse();
    const Eigen::MatrixXd weighted_pi = group_pi.array().colwise() * inv.array();  // G x K
    grad_alpha = (tensors.exposure.transpose() * p.pi - tensors.groups.transpose() * weighted_pi).transpose();

    grad_pi = exposed;
    const Eigen::MatrixXd weighted_layer = per_layer.array().colwise() * inv.array();
    for (Eigen::Index g = 0; g < weighted_layer.rows(); ++g) {
      grad_pi.row(tensors.group_cascade[static_cast<std::size_t>(g)]) -= weighted_layer.row(g);
    }
  }

  out.gradient.alpha_raw = grad_alpha.cwiseProduct((p.alpha.array() * (1.0 - p.alpha.array())).matrix());
  out.gradient.pi_raw = mode == ObjectiveMode::kMultilayer ? stick_breaking_vjp(raw.pi_raw, grad_pi)
                                                           : Eigen::MatrixXd(tensors.n_cascades, 0);
  return out;
}

RawParams nll_gradient(const ExposureTensors& tensors, const RawParams& raw, ObjectiveMode mode) {
  return nll_value_and_gradient(tensors, raw, mode).gradient;
}

NllResult nll_oracle(std::span<const Cascade> cascades, std::span<const Eigen::MatrixXd> alpha,
                     const Eigen::MatrixXd& pi) {
  NllResult result;
  if (cascades.empty()) return result;
  const auto n_layers = static_cast<Eigen::Index>(alpha.size());
  if (pi.rows() != static_cast<Eigen::Index>(cascades.size()) || pi.cols() != n_layers) {
    throw std::invalid_argument("pi shape does not match cascades x layers");
  }
  const Eigen::Index n = alpha.empty() ? 0 : alpha[0].rows();

  for (std::size_t c = 0; c < cascades.size(); ++c) {
    const Cascade& cascade = cascades[c];
    const double horizon = cascade.horizon();
    std::vector<double> t(static_cast<std::size_t>(n), horizon);
    for (const Activation& a : cascade.events()) t[static_cast<std::size_t>(a.node)] = a.time;
    const double t_min = cascade.seed_time();

    auto lambda = [&](Eigen::Index i, Eigen::Index j) {
      double sum = 0.0;
      for (Eigen::Index k = 0; k < n_layers; ++k) sum += pi(static_cast<Eigen::Index>(c), k) * alpha[static_cast<std::size_t>(k)](i, j);
      return sum;
    };

    for (Eigen::Index j = 0; j < n; ++j) {
      const double tj = t[static_cast<std::size_t>(j)];
      if (!(tj < horizon)) continue;
      // survival of j against every earlier activation
      for (Eigen::Index u = 0; u < n; ++u) {
        const double tu = t[static_cast<std::size_t>(u)];
        if (tu < tj) result.value += (tj - tu) * lambda(u, j);
      }
      // hazard of the successful activation; seeds are exogenous
      if (tj > t_min) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (t[static_cast<std::size_t>(i)] < tj) total += lambda(i, j);
        }
        if (total > 0.0) {
          result.value -= std::log(total);
        } else {
          result.zero_hazard.emplace_back(cascade.id(), static_cast<NodeId>(j));
        }
      }
      // j fails to reach every node that never activates
      for (Eigen::Index m = 0; m < n; ++m) {
        if (!(t[static_cast<std::size_t>(m)] < horizon)) result.value += (horizon - tj) * lambda(j, m);
      }
    }
  }
  if (!result.zero_hazard.empty()) result.value = std::numeric_limits<double>::infinity();
  return result;
}

RawParams initial_params(Eigen::Index n_layers, Eigen::Index n_edges, Eigen::Index n_cascades, std::uint64_t seed) {
  Rng rng(seed, RngDomain::kRestart, seed);
  RawParams raw;
  raw.alpha_raw.resize(n_layers, n_edges);
  for (Eigen::Index e = 0; e < n_edges; ++e) {
    for (Eigen::Index k = 0; k < n_layers; ++k) raw.alpha_raw(k, e) = rng.Uniform(-2.2, -2.0);
  }
  const Eigen::RowVectorXd uniform = uniform_stick_raw(n_layers);
  raw.pi_raw.resize(n_cascades, n_layers - 1);
  for (Eigen::Index c = 0; c < n_cascades; ++c) {
    for (Eigen::Index k = 0; k + 1 < n_layers; ++k) raw.pi_raw(c, k) = uniform(k) + rng.Uniform(-0.01, 0.01);
  }
  return raw;
}

std::size_t estimate_memory_bytes(const ExposureTensors& tensors, Eigen::Index n_layers) {
  const auto k = static_cast<std::size_t>(n_layers);
  const auto nnz = static_cast<std::size_t>(tensors.exposure.nonZeros() + tensors.groups.nonZeros());
  const auto edges = static_cast<std::size_t>(tensors.n_edges());
  const auto cascades = static_cast<std::size_t>(tensors.n_cascades);
  const auto groups = static_cast<std::size_t>(tensors.n_groups());
  // sparse entries (value + column index), dense alpha/pi state with Adam
  // moments and gradient, and the per-group hazard workspace
  return nnz * (sizeof(double) + sizeof(int)) + 4 * sizeof(double) * (k * edges + k * cascades) +
         sizeof(double) * groups * (k + 1);
}

}  // namespace multic
