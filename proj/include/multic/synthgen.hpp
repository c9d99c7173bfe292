#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "multic/core.hpp"
#include "multic/rng.hpp"

namespace multic {

/// Ground-truth network parameters. Degrees of every layer are drawn from
/// rounded log-normals; `overlap` controls how much of layer 0's edge
/// structure later layers share (0: independent, 1: copied, otherwise a
/// copy rewired by ceil((1 - overlap) * |E|) edge draws with replacement).
struct NetworkGenConfig {
  int n_nodes = 1000;
  int n_layers = 2;
  double overlap = 0.0;
  double mu_in = 0.5;
  double sigma_in = 1.0;
  double mu_out = 0.0;
  double sigma_out = 1.4142135623730951;
  double rate_low = 0.01;
  double rate_high = 1.0;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument.
  void validate() const;
};

struct CascadeGenConfig {
  double horizon = 10.0;
  double recovery_rate = 2.0;
  /// Per-node seeding probability; unset means 1/N.
  std::optional<double> seed_prob;
  double eps_max = 0.0;
  std::int64_t n_cascades = 0;
  std::uint64_t seed = 0;

  void validate() const;
  double seed_prob_for(int n_nodes) const { return seed_prob.value_or(1.0 / n_nodes); }
};

struct DegreeSequences {
  std::vector<int> in;
  std::vector<int> out;
};

DegreeSequences sample_degree_sequences(const NetworkGenConfig& cfg, Rng& rng);

/// Stub matching followed by removal of self-loops and parallel edges.
/// Returned pairs are sorted. Degree sums must match.
std::vector<NodePair> directed_configuration_model(std::span<const int> in_degrees,
                                                   std::span<const int> out_degrees, Rng& rng);

MultilayerNetwork generate_network(const NetworkGenConfig& cfg);

/// Mean over layers k >= 1 of |E^0 ∩ E^k| / |E^k|; 1 for a single layer.
double layer_overlap(const MultilayerNetwork& net);

CascadeTruth sample_membership(int n_layers, double eps_max, Rng& rng);

/// Exact continuous-time SIR simulation (Gillespie direct method) on a fixed
/// network. The effective rate of edge (i, j) for a cascade with membership
/// pi is sum_k pi_k alpha^k_ij.
class CascadeSimulator {
 public:
  explicit CascadeSimulator(const MultilayerNetwork& net);

  int n_nodes() const { return n_nodes_; }
  int n_layers() const { return n_layers_; }

  /// Draws Bernoulli(rho) seeds (redrawn while empty) and simulates.
  Cascade simulate(std::int64_t id, const CascadeTruth& truth, const CascadeGenConfig& cfg, Rng& rng) const;

  /// Activations of a run started from `seeds` at t = 0, sorted by time.
  std::vector<Activation> run(std::span<const NodeId> seeds, std::span<const double> pi,
                              const CascadeGenConfig& cfg, Rng& rng) const;

 private:
  int n_nodes_;
  int n_layers_;
  std::vector<std::size_t> offsets_;  // CSR over sources
  std::vector<NodeId> targets_;
  std::vector<double> rates_;  // n_layers_ per edge
};

Cascade simulate_cascade(const MultilayerNetwork& net, std::int64_t id, const CascadeTruth& truth,
                         const CascadeGenConfig& cfg, Rng& rng);

/// Keeps cascades with more than `min_size_exclusive` activated nodes.
CascadeSet filter_cascades(const CascadeSet& cascades, std::size_t min_size_exclusive);

/// Simulates cfg.n_cascades cascades; cascade c uses stream c of the cascade
/// domain, so the output does not depend on `threads`.
CascadeSet simulate_cascades(const MultilayerNetwork& net, const CascadeGenConfig& cfg, int threads = 1);

struct Dataset {
  MultilayerNetwork network;
  CascadeSet cascades;
  std::size_t n_simulated = 0;
  std::size_t n_informative = 0;  // size >= 2
};

/// Network, then cascades with size-1 traces removed, then the s_c filter.
Dataset generate_dataset(const NetworkGenConfig& netcfg, const CascadeGenConfig& casccfg,
                         std::size_t size_threshold, int threads = 1);

}  // namespace multic
