#include "multic/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "multic/parallel.hpp"

namespace multic {
namespace {

std::vector<NodePair> simplify(std::vector<NodePair> pairs) {
  std::erase_if(pairs, [](const NodePair& p) { return p.src == p.dst; });
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  return pairs;
}

// Performs `count` rewiring draws, each picking an edge uniformly with
// replacement, then re-matches the target stubs of the picked edges. Edges hit
// more than once are rewired once, so about 1 - exp(-count/|E|) of the edges
// move. Self-loops and parallels created on the way are removed once the
// whole batch is rewired.
std::vector<NodePair> rewire(std::vector<NodePair> pairs, std::size_t count, Rng& rng) {
  if (pairs.empty()) return pairs;
  std::vector<bool> picked(pairs.size(), false);
  for (std::size_t n = 0; n < count; ++n) picked[rng.Below(pairs.size())] = true;
  std::vector<std::size_t> index;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (picked[i]) index.push_back(i);
  }
  std::vector<NodeId> targets;
  targets.reserve(index.size());
  for (std::size_t i : index) targets.push_back(pairs[i].dst);
  rng.Shuffle(std::span(targets));
  for (std::size_t n = 0; n < index.size(); ++n) pairs[index[n]].dst = targets[n];
  return simplify(std::move(pairs));
}

std::vector<NodePair> random_layer(const NetworkGenConfig& cfg, Rng& rng) {
  const DegreeSequences deg = sample_degree_sequences(cfg, rng);
  return directed_configuration_model(deg.in, deg.out, rng);
}

std::vector<Edge> with_rates(const std::vector<NodePair>& pairs, const NetworkGenConfig& cfg, Rng& rng) {
  std::vector<Edge> edges;
  edges.reserve(pairs.size());
  for (const NodePair& p : pairs) edges.push_back({p.src, p.dst, rng.Uniform(cfg.rate_low, cfg.rate_high)});
  return edges;
}

}  // namespace

void NetworkGenConfig::validate() const {
  if (n_nodes < 2) throw std::invalid_argument("n_nodes must be at least 2");
  if (n_layers < 1) throw std::invalid_argument("n_layers must be at least 1");
  if (!(overlap >= 0.0 && overlap <= 1.0)) throw std::invalid_argument("overlap must lie in [0,1]");
  if (!(sigma_in > 0.0) || !(sigma_out > 0.0)) throw std::invalid_argument("log-normal sigmas must be positive");
  if (!std::isfinite(mu_in) || !std::isfinite(mu_out)) throw std::invalid_argument("log-normal mu must be finite");
  if (!(rate_low > 0.0 && rate_low < rate_high && rate_high <= 1.0)) {
    throw std::invalid_argument("rates must satisfy 0 < rate_low < rate_high <= 1");
  }
}

void CascadeGenConfig::validate() const {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("horizon must be positive");
  if (!(recovery_rate >= 0.0) || !std::isfinite(recovery_rate)) {
    throw std::invalid_argument("recovery rate must be non-negative");
  }
  if (seed_prob && !(*seed_prob > 0.0 && *seed_prob <= 1.0)) {
    throw std::invalid_argument("seed probability must lie in (0,1]");
  }
  if (!(eps_max >= 0.0 && eps_max < 1.0)) throw std::invalid_argument("eps_max must lie in [0,1)");
  if (n_cascades < 0) throw std::invalid_argument("n_cascades must be non-negative");
}

DegreeSequences sample_degree_sequences(const NetworkGenConfig& cfg, Rng& rng) {
  const int n = cfg.n_nodes;
  const int cap = n - 1;
  auto draw = [&](double mu, double sigma) {
    std::vector<int> deg(static_cast<std::size_t>(n));
    for (int& d : deg) {
      const double x = std::round(std::exp(mu + sigma * rng.Normal()));
      d = static_cast<int>(std::clamp(x, 0.0, static_cast<double>(cap)));
    }
    return deg;
  };
  DegreeSequences seq{draw(cfg.mu_in, cfg.sigma_in), draw(cfg.mu_out, cfg.sigma_out)};

  long long sum_in = std::accumulate(seq.in.begin(), seq.in.end(), 0LL);
  long long sum_out = std::accumulate(seq.out.begin(), seq.out.end(), 0LL);
  while (sum_in != sum_out) {
    auto& smaller = sum_in < sum_out ? seq.in : seq.out;
    long long& smaller_sum = sum_in < sum_out ? sum_in : sum_out;
    const auto i = rng.Below(static_cast<std::uint64_t>(n));
    if (smaller[i] >= cap) continue;
    ++smaller[i];
    ++smaller_sum;
  }
  return seq;
}

std::vector<NodePair> directed_configuration_model(std::span<const int> in_degrees,
                                                   std::span<const int> out_degrees, Rng& rng) {
  if (in_degrees.size() != out_degrees.size()) throw std::invalid_argument("degree sequences differ in length");
  std::vector<NodeId> sources;
  std::vector<NodeId> targets;
  for (std::size_t v = 0; v < in_degrees.size(); ++v) {
    if (in_degrees[v] < 0 || out_degrees[v] < 0) throw std::invalid_argument("negative degree");
    sources.insert(sources.end(), static_cast<std::size_t>(out_degrees[v]), static_cast<NodeId>(v));
    targets.insert(targets.end(), static_cast<std::size_t>(in_degrees[v]), static_cast<NodeId>(v));
  }
  if (sources.size() != targets.size()) throw std::invalid_argument("degree sums differ");
  rng.Shuffle(std::span(targets));
  std::vector<NodePair> pairs(sources.size());
  for (std::size_t s = 0; s < sources.size(); ++s) pairs[s] = {sources[s], targets[s]};
  return simplify(std::move(pairs));
}

MultilayerNetwork generate_network(const NetworkGenConfig& cfg) {
  cfg.validate();
  std::vector<std::vector<Edge>> layers;
  Rng base(cfg.seed, RngDomain::kNetwork, 0);
  const std::vector<NodePair> first = random_layer(cfg, base);
  layers.push_back(with_rates(first, cfg, base));
  for (int k = 1; k < cfg.n_layers; ++k) {
    Rng rng(cfg.seed, RngDomain::kNetwork, static_cast<std::uint64_t>(k));
    std::vector<NodePair> pairs;
    if (cfg.overlap <= 0.0) {
      pairs = random_layer(cfg, rng);
    } else if (cfg.overlap >= 1.0) {
      pairs = first;
    } else {
      const auto count = static_cast<std::size_t>(std::ceil((1.0 - cfg.overlap) * static_cast<double>(first.size())));
      pairs = rewire(first, count, rng);
    }
    layers.push_back(with_rates(pairs, cfg, rng));
  }
  return MultilayerNetwork(cfg.n_nodes, cfg.n_layers, std::move(layers));
}

double layer_overlap(const MultilayerNetwork& net) {
  if (net.n_layers() < 2) return 1.0;
  const auto base = layer_pairs(net, 0);
  double total = 0.0;
  for (int k = 1; k < net.n_layers(); ++k) {
    const auto other = layer_pairs(net, k);
    std::vector<NodePair> common;
    std::set_intersection(base.begin(), base.end(), other.begin(), other.end(), std::back_inserter(common));
    total += other.empty() ? 0.0 : static_cast<double>(common.size()) / static_cast<double>(other.size());
  }
  return total / (net.n_layers() - 1);
}

CascadeTruth sample_membership(int n_layers, double eps_max, Rng& rng) {
  if (n_layers < 1) throw std::invalid_argument("n_layers must be at least 1");
  if (!(eps_max >= 0.0 && eps_max < 1.0)) throw std::invalid_argument("eps_max must lie in [0,1)");
  CascadeTruth truth;
  truth.main_layer = static_cast<int>(rng.Below(static_cast<std::uint64_t>(n_layers)));
  truth.pi.assign(static_cast<std::size_t>(n_layers), 0.0);
  if (n_layers == 1) {
    truth.pi[0] = 1.0;
    return truth;
  }
  // The noise share is snapped to a multiple of 2^-50 (a change of at most
  // 1e-15). Every entry and partial sum is then exactly representable, so the
  // row sums to 1 in any order.
  const double raw_eps = eps_max > 0.0 ? rng.Uniform(0.0, eps_max) : 0.0;
  const double grid = 0x1p50;
  const double share = std::round(raw_eps / (n_layers - 1) * grid) / grid;
  truth.eps = share * (n_layers - 1);
  for (int k = 0; k < n_layers; ++k) truth.pi[static_cast<std::size_t>(k)] = share;
  truth.pi[static_cast<std::size_t>(truth.main_layer)] = 1.0 - truth.eps;
  return truth;
}

CascadeSimulator::CascadeSimulator(const MultilayerNetwork& net)
    : n_nodes_(net.n_nodes()), n_layers_(net.n_layers()) {
  const AggregatedNetwork agg = aggregate(net);
  offsets_.assign(static_cast<std::size_t>(n_nodes_) + 1, 0);
  targets_.reserve(agg.edges.size());
  rates_.reserve(agg.edges.size() * static_cast<std::size_t>(n_layers_));
  for (const NodePair& p : agg.edges) {
    ++offsets_[static_cast<std::size_t>(p.src) + 1];
    targets_.push_back(p.dst);
    for (int k = 0; k < n_layers_; ++k) rates_.push_back(net.rate(k, p.src, p.dst));
  }
  std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
}

std::vector<Activation> CascadeSimulator::run(std::span<const NodeId> seeds, std::span<const double> pi,
                                              const CascadeGenConfig& cfg, Rng& rng) const {
  if (pi.size() != static_cast<std::size_t>(n_layers_)) throw std::invalid_argument("membership size mismatch");
  enum : char { kSusceptible = 0, kInfectious = 1, kRemoved = 2 };
  std::vector<char> state(static_cast<std::size_t>(n_nodes_), kSusceptible);
  std::vector<Activation> activations;
  std::vector<NodeId> infectious;
  for (NodeId s : seeds) {
    if (state[static_cast<std::size_t>(s)] != kSusceptible) continue;
    state[static_cast<std::size_t>(s)] = kInfectious;
    infectious.push_back(s);
    activations.push_back({s, 0.0});
  }

  auto edge_rate = [&](std::size_t e) {
    double lambda = 0.0;
    for (int k = 0; k < n_layers_; ++k) lambda += pi[static_cast<std::size_t>(k)] * rates_[e * n_layers_ + k];
    return lambda;
  };

  const double gamma = cfg.recovery_rate;
  std::vector<double> pressure;
  double t = 0.0;
  while (!infectious.empty()) {
    pressure.assign(infectious.size(), 0.0);
    double total = gamma * static_cast<double>(infectious.size());
    for (std::size_t m = 0; m < infectious.size(); ++m) {
      const auto i = static_cast<std::size_t>(infectious[m]);
      for (std::size_t e = offsets_[i]; e < offsets_[i + 1]; ++e) {
        if (state[static_cast<std::size_t>(targets_[e])] == kSusceptible) pressure[m] += edge_rate(e);
      }
      total += pressure[m];
    }
    if (!(total > 0.0)) break;
    t += rng.Exponential(total);
    if (!(t < cfg.horizon)) break;

    double u = rng.Uniform() * total;
    std::size_t chosen = infectious.size() - 1;
    bool recover = false;
    for (std::size_t m = 0; m < infectious.size(); ++m) {
      if (u < gamma) {
        chosen = m;
        recover = true;
        break;
      }
      u -= gamma;
      if (u < pressure[m] || m + 1 == infectious.size()) {
        chosen = m;
        break;
      }
      u -= pressure[m];
    }
    if (!recover && pressure[chosen] <= 0.0) recover = true;  // rounding spill-over
    const NodeId i = infectious[chosen];
    if (recover) {
      state[static_cast<std::size_t>(i)] = kRemoved;
      infectious.erase(infectious.begin() + static_cast<std::ptrdiff_t>(chosen));
      continue;
    }
    std::size_t last = offsets_[static_cast<std::size_t>(i) + 1];
    std::size_t pick = last;
    for (std::size_t e = offsets_[static_cast<std::size_t>(i)]; e < last; ++e) {
      if (state[static_cast<std::size_t>(targets_[e])] != kSusceptible) continue;
      pick = e;
      const double lambda = edge_rate(e);
      if (u < lambda) break;
      u -= lambda;
    }
    const NodeId j = targets_[pick];
    state[static_cast<std::size_t>(j)] = kInfectious;
    infectious.push_back(j);
    activations.push_back({j, t});
  }
  return activations;
}

Cascade CascadeSimulator::simulate(std::int64_t id, const CascadeTruth& truth, const CascadeGenConfig& cfg,
                                   Rng& rng) const {
  const double rho = cfg.seed_prob_for(n_nodes_);
  std::vector<NodeId> seeds;
  while (seeds.empty()) {
    for (NodeId v = 0; v < n_nodes_; ++v) {
      if (rng.Bernoulli(rho)) seeds.push_back(v);
    }
  }
  return Cascade(id, cfg.horizon, run(seeds, truth.pi, cfg, rng), truth);
}

Cascade simulate_cascade(const MultilayerNetwork& net, std::int64_t id, const CascadeTruth& truth,
                         const CascadeGenConfig& cfg, Rng& rng) {
  return CascadeSimulator(net).simulate(id, truth, cfg, rng);
}

CascadeSet filter_cascades(const CascadeSet& cascades, std::size_t min_size_exclusive) {
  CascadeSet kept;
  for (const Cascade& c : cascades) {
    if (c.size() > min_size_exclusive) kept.push_back(c);
  }
  return kept;
}

CascadeSet simulate_cascades(const MultilayerNetwork& net, const CascadeGenConfig& cfg, int threads) {
  cfg.validate();
  const CascadeSimulator sim(net);
  std::vector<Cascade> out(static_cast<std::size_t>(cfg.n_cascades));
  parallel_for(out.size(), threads, [&](std::size_t c) {
    Rng rng(cfg.seed, RngDomain::kCascade, c);
    const CascadeTruth truth = sample_membership(net.n_layers(), cfg.eps_max, rng);
    out[c] = sim.simulate(static_cast<std::int64_t>(c), truth, cfg, rng);
  });
  return out;
}

Dataset generate_dataset(const NetworkGenConfig& netcfg, const CascadeGenConfig& casccfg,
                         std::size_t size_threshold, int threads) {
  Dataset data;
  data.network = generate_network(netcfg);
  CascadeSet all = simulate_cascades(data.network, casccfg, threads);
  data.n_simulated = all.size();
  CascadeSet informative = filter_cascades(all, 1);
  data.n_informative = informative.size();
  data.cascades = size_threshold > 1 ? filter_cascades(informative, size_threshold) : std::move(informative);
  return data;
}

}  // namespace multic
