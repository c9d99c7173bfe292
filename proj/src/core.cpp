#include "multic/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace multic {

MultilayerNetwork::MultilayerNetwork(int n_nodes, int n_layers, std::vector<std::vector<Edge>> layers)
    : n_nodes_(n_nodes), n_layers_(n_layers), layers_(std::move(layers)) {
  if (n_nodes < 0) throw std::invalid_argument("negative node count");
  if (n_layers < 1) throw std::invalid_argument("network needs at least one layer");
  if (layers_.size() != static_cast<std::size_t>(n_layers)) {
    throw std::invalid_argument("layer count does not match edge lists");
  }
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    auto& edges = layers_[k];
    for (const Edge& e : edges) {
      if (e.src < 0 || e.src >= n_nodes || e.dst < 0 || e.dst >= n_nodes) {
        throw std::invalid_argument("node id out of range in layer " + std::to_string(k));
      }
      if (e.src == e.dst) {
        throw std::invalid_argument("self-loop on node " + std::to_string(e.src));
      }
      if (!(e.rate > 0.0 && e.rate <= 1.0)) {
        throw std::invalid_argument("rate outside (0,1] on layer " + std::to_string(k));
      }
    }
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
      return std::tie(a.src, a.dst) < std::tie(b.src, b.dst);
    });
    auto dup = std::adjacent_find(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
      return a.src == b.src && a.dst == b.dst;
    });
    if (dup != edges.end()) {
      throw std::invalid_argument("duplicate edge (" + std::to_string(dup->src) + "," +
                                  std::to_string(dup->dst) + ") on layer " + std::to_string(k));
    }
  }
}

std::size_t MultilayerNetwork::total_edges() const {
  std::size_t total = 0;
  for (const auto& l : layers_) total += l.size();
  return total;
}

double MultilayerNetwork::rate(int k, NodeId src, NodeId dst) const {
  const auto edges = layer(k);
  auto it = std::lower_bound(edges.begin(), edges.end(), NodePair{src, dst},
                             [](const Edge& e, const NodePair& p) {
                               return NodePair{e.src, e.dst} < p;
                             });
  if (it != edges.end() && it->src == src && it->dst == dst) return it->rate;
  return 0.0;
}

std::vector<NodePair> layer_pairs(const MultilayerNetwork& net, int layer) {
  std::vector<NodePair> pairs;
  pairs.reserve(net.n_edges(layer));
  for (const Edge& e : net.layer(layer)) pairs.push_back({e.src, e.dst});
  return pairs;
}

AggregatedNetwork aggregate(const MultilayerNetwork& net) {
  AggregatedNetwork agg;
  agg.n_nodes = net.n_nodes();
  agg.edges.reserve(net.total_edges());
  for (int k = 0; k < net.n_layers(); ++k) {
    for (const Edge& e : net.layer(k)) agg.edges.push_back({e.src, e.dst});
  }
  std::sort(agg.edges.begin(), agg.edges.end());
  agg.edges.erase(std::unique(agg.edges.begin(), agg.edges.end()), agg.edges.end());
  return agg;
}

Cascade::Cascade(std::int64_t id, double horizon, std::vector<Activation> events,
                 std::optional<CascadeTruth> truth)
    : id_(id), horizon_(horizon), events_(std::move(events)), truth_(std::move(truth)) {
  if (!(horizon_ > 0.0) || !std::isfinite(horizon_)) {
    throw std::invalid_argument("cascade horizon must be positive and finite");
  }
  if (events_.empty()) throw std::invalid_argument("cascade has no activated node");
  for (const Activation& a : events_) {
    if (a.node < 0) throw std::invalid_argument("negative node id");
    if (!(a.time >= 0.0)) throw std::invalid_argument("negative activation time");
    if (!(a.time < horizon_)) throw std::invalid_argument("activation time not below horizon");
  }
  std::sort(events_.begin(), events_.end(), [](const Activation& a, const Activation& b) {
    return std::tie(a.time, a.node) < std::tie(b.time, b.node);
  });
  std::vector<NodeId> nodes(events_.size());
  std::transform(events_.begin(), events_.end(), nodes.begin(), [](const Activation& a) { return a.node; });
  std::sort(nodes.begin(), nodes.end());
  if (std::adjacent_find(nodes.begin(), nodes.end()) != nodes.end()) {
    throw std::invalid_argument("node activated twice in one cascade");
  }
  if (truth_) {
    const auto& pi = truth_->pi;
    if (pi.empty()) throw std::invalid_argument("empty truth membership vector");
    for (double p : pi) {
      if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("truth membership outside [0,1]");
    }
    const double sum = std::accumulate(pi.begin(), pi.end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("truth membership does not sum to 1");
    if (truth_->main_layer < 0 || truth_->main_layer >= static_cast<int>(pi.size())) {
      throw std::invalid_argument("truth main layer out of range");
    }
  }
}

int node_count(std::span<const Cascade> cascades) {
  NodeId max_id = -1;
  for (const Cascade& c : cascades) {
    for (const Activation& a : c.events()) max_id = std::max(max_id, a.node);
  }
  return max_id + 1;
}

}  // namespace multic
