#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace multic {

using NodeId = std::int32_t;

/// Ordered node pair (a directed edge without a weight).
struct NodePair {
  NodeId src = 0;
  NodeId dst = 0;
  auto operator<=>(const NodePair&) const = default;
};

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;
  double rate = 0.0;
  bool operator==(const Edge&) const = default;
};

/// K-layer directed weighted graph over nodes [0, N). Edges within a layer are
/// kept sorted by (src, dst). Rates lie in (0, 1]; absent edges have rate 0.
class MultilayerNetwork {
 public:
  MultilayerNetwork() = default;
  /// Throws std::invalid_argument on any invariant violation.
  MultilayerNetwork(int n_nodes, int n_layers, std::vector<std::vector<Edge>> layers);

  int n_nodes() const { return n_nodes_; }
  int n_layers() const { return n_layers_; }
  std::span<const Edge> layer(int k) const { return layers_.at(static_cast<std::size_t>(k)); }
  std::size_t n_edges(int k) const { return layer(k).size(); }
  std::size_t total_edges() const;

  /// alpha^k_{src,dst}; 0 when the edge is absent.
  double rate(int k, NodeId src, NodeId dst) const;

  bool operator==(const MultilayerNetwork&) const = default;

 private:
  int n_nodes_ = 0;
  int n_layers_ = 0;
  std::vector<std::vector<Edge>> layers_;
};

/// Union of all layer edge sets, sorted and deduplicated.
struct AggregatedNetwork {
  int n_nodes = 0;
  std::vector<NodePair> edges;
};

AggregatedNetwork aggregate(const MultilayerNetwork& net);

/// Pairs of `layer` as a sorted vector.
std::vector<NodePair> layer_pairs(const MultilayerNetwork& net, int layer);

struct CascadeTruth {
  int main_layer = 0;
  double eps = 0.0;
  std::vector<double> pi;
  bool operator==(const CascadeTruth&) const = default;
};

struct Activation {
  NodeId node = 0;
  double time = 0.0;
  bool operator==(const Activation&) const = default;
};

/// One spreading trace. Activated nodes are stored sorted by (time, node);
/// nodes never activated before the horizon are implicit.
class Cascade {
 public:
  Cascade() = default;
  /// Throws std::invalid_argument when a time is outside [0, horizon), a node
  /// repeats, the event list is empty, or truth.pi is not on the simplex.
  Cascade(std::int64_t id, double horizon, std::vector<Activation> events,
          std::optional<CascadeTruth> truth = std::nullopt);

  std::int64_t id() const { return id_; }
  double horizon() const { return horizon_; }
  std::span<const Activation> events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  double seed_time() const { return events_.front().time; }
  const std::optional<CascadeTruth>& truth() const { return truth_; }

  bool operator==(const Cascade&) const = default;

 private:
  std::int64_t id_ = 0;
  double horizon_ = 0.0;
  std::vector<Activation> events_;
  std::optional<CascadeTruth> truth_;
};

using CascadeSet = std::vector<Cascade>;

/// 1 + the largest node id referenced by any cascade (0 for an empty set).
int node_count(std::span<const Cascade> cascades);

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : std::runtime_error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace multic
