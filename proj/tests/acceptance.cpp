// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "multic/csv.hpp"
#include "multic/harness.hpp"
#include "multic/objective.hpp"
#include "multic/rng.hpp"
#include "multic/synthgen.hpp"
#include "multic/transforms.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace multic;

namespace {

// Tolerances.
constexpr double kOracleRelTol = 1e-8;
constexpr double kGradRelTol = 1e-4;
constexpr double kGradAbsFloor = 1e-8;
constexpr double kFdStep = 1e-5;
constexpr double kSimplexTol = 1e-12;
constexpr double kKsCritical001 = 1.628;  // asymptotic, alpha = 0.01
constexpr double kSecondaryMax = 1e-3;
constexpr double kAucInversion = 0.005;
constexpr double kAucAtSixteen = 0.95;
constexpr double kFilterGain = 0.10;
constexpr double kSpearmanSlack = 0.05;
constexpr double kOverlapCeiling = 0.65;
constexpr double kOverlapGap = 0.15;
constexpr double kMixingAucGap = 0.02;
constexpr double kRecoveryInversion = 0.01;

// Runtime limits in seconds.
constexpr double kOracleSeconds = 10;
constexpr double kGradientSeconds = 30;
constexpr double kSimplexSeconds = 5;
constexpr double kSimulatorSeconds = 60;
constexpr double kTrendSeconds = 20 * 60;
constexpr double kFilterSeconds = 30 * 60;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o) {
  std::cout << "criterion " << id << " " << (o.pass ? "PASS" : "FAIL") << "  " << name << ": " << o.detail
            << std::endl;
  if (!o.pass) ++failures;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << std::fixed << v;
  return s.str();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

double rel_diff(double a, double b) {
  if (a == b) return 0.0;
  return std::abs(a - b) / std::max(std::abs(a), std::abs(b));
}

// Decreases along `v`: pass when none, or a single one no larger than `slack`.
bool monotone_with_one_inversion(const std::vector<double>& v, double slack) {
  int drops = 0;
  bool small = true;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] < v[i - 1]) {
      ++drops;
      small = small && v[i - 1] - v[i] <= slack;
    }
  }
  return drops == 0 || (drops == 1 && small);
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (double x : v) out += (out.empty() ? "" : " ") + fmt(x);
  return out;
}

Outcome oracle_equivalence() {
  Stopwatch clock;
  double worst = 0.0;
  int mismatches = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto inst = testing::random_instance(seed + 10000);
    const auto tensors = build_tensors(inst.cascades, inst.support);
    const double fast = nll_fast(tensors, {testing::edge_alpha(inst, inst.support), inst.pi},
                                 ObjectiveMode::kMultilayer, ZeroHazardPolicy::kReport)
                            .value;
    const double oracle = nll_oracle(inst.cascades, inst.alpha, inst.pi).value;
    if (std::isinf(oracle) || std::isinf(fast)) {
      mismatches += std::isinf(oracle) != std::isinf(fast);
      continue;
    }
    worst = std::max(worst, rel_diff(fast, oracle));
  }
  const double t = clock.seconds();
  return {worst < kOracleRelTol && mismatches == 0 && t < kOracleSeconds,
          "200 instances, max rel diff " + sci(worst) + ", " + fmt(t, 2) + " s"};
}

Outcome gradient_check() {
  Stopwatch clock;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto inst = testing::random_instance(seed + 20000);
    const auto t = build_tensors(inst.cascades, inst.support);
    Rng rng(seed, RngDomain::kTest, 7);
    RawParams raw;
    raw.alpha_raw.resize(inst.n_layers, t.n_edges());
    raw.pi_raw.resize(t.n_cascades, inst.n_layers - 1);
    for (Eigen::Index i = 0; i < raw.alpha_raw.size(); ++i) raw.alpha_raw.data()[i] = rng.Normal() - 1.0;
    for (Eigen::Index i = 0; i < raw.pi_raw.size(); ++i) raw.pi_raw.data()[i] = rng.Normal();
    const auto g = nll_value_and_gradient(t, raw, ObjectiveMode::kMultilayer);
    auto value = [&](const RawParams& r) { return nll_fast(t, transform_params(r), ObjectiveMode::kMultilayer).value; };
    auto check = [&](Eigen::MatrixXd& x, const Eigen::MatrixXd& analytic) {
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double x0 = x.data()[i];
        x.data()[i] = x0 + kFdStep;
        const double up = value(raw);
        x.data()[i] = x0 - kFdStep;
        const double down = value(raw);
        x.data()[i] = x0;
        const double fd = (up - down) / (2 * kFdStep);
        const double a = analytic.data()[i];
        const double err = std::max(std::abs(a), std::abs(fd)) < kGradAbsFloor ? std::abs(a - fd) : rel_diff(a, fd);
        worst = std::max(worst, err);
      }
    };
    check(raw.alpha_raw, g.gradient.alpha_raw);
    check(raw.pi_raw, g.gradient.pi_raw);
  }
  const double t = clock.seconds();
  return {worst < kGradRelTol && t < kGradientSeconds,
          "50 instances, max component error " + sci(worst) + ", " + fmt(t, 2) + " s"};
}

Outcome simplex_invariants() {
  Stopwatch clock;
  Rng rng(1, RngDomain::kTest, 3);
  double worst_sum = 0.0;
  bool in_box = true;
  for (int draw = 0; draw < 100000; ++draw) {
    const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng.Below(7));
    const double scale = draw % 3 == 0 ? 50.0 : 4.0;
    RawParams raw;
    raw.alpha_raw.resize(k, 1);
    raw.pi_raw.resize(1, k - 1);
    for (Eigen::Index i = 0; i < k; ++i) raw.alpha_raw(i, 0) = scale * rng.Normal();
    for (Eigen::Index i = 0; i + 1 < k; ++i) raw.pi_raw(0, i) = scale * rng.Normal();
    const auto p = transform_params(raw);
    in_box = in_box && (p.alpha.array() > 0.0).all() && (p.alpha.array() < 1.0).all() && (p.pi.array() >= 0.0).all();
    worst_sum = std::max(worst_sum, std::abs(p.pi.sum() - 1.0));
  }
  const double t = clock.seconds();
  return {worst_sum <= kSimplexTol && in_box && t < kSimplexSeconds,
          "1e5 draws, max |row sum - 1| " + sci(worst_sum) + (in_box ? ", alpha in (0,1)" : ", BOX VIOLATED") +
              ", " + fmt(t, 2) + " s"};
}

double ks_exponential(std::vector<double> x, double rate) {
  std::ranges::sort(x);
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double cdf = 1.0 - std::exp(-rate * x[i]);
    d = std::max({d, cdf - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - cdf});
  }
  return d;
}

Outcome simulator_law() {
  Stopwatch clock;
  constexpr int kRuns = 10000;
  bool ok = true;
  std::string detail;
  std::uint64_t seed = 4;
  for (double rate : {0.2, 0.7}) {
    ++seed;
    const MultilayerNetwork net(2, 1, {{{0, 1, rate}}});
    const CascadeSimulator sim(net);
    CascadeGenConfig cfg;
    cfg.recovery_rate = 0.0;
    cfg.horizon = 1e9;
    const std::vector<NodeId> seeds{0};
    const std::vector<double> pi{1.0};
    std::vector<double> times;
    for (int c = 0; c < kRuns; ++c) {
      Rng rng(seed, RngDomain::kCascade, static_cast<std::uint64_t>(c));
      const auto acts = sim.run(seeds, pi, cfg, rng);
      if (acts.size() == 2) times.push_back(acts[1].time);
    }
    const double d = ks_exponential(times, rate);
    const double crit = kKsCritical001 / std::sqrt(static_cast<double>(times.size()));
    ok = ok && times.size() == kRuns && d < crit;
    detail += "KS(lambda=" + fmt(rate, 1) + ") " + fmt(d) + " < " + fmt(crit) + "; ";
  }
  NetworkGenConfig net_cfg;
  net_cfg.n_nodes = 250;
  const auto net = generate_network(net_cfg);
  CascadeGenConfig cfg;
  cfg.recovery_rate = 1e6;
  cfg.n_cascades = kRuns;
  std::size_t secondary = 0, total = 0;
  for (const Cascade& c : simulate_cascades(net, cfg)) {
    for (const Activation& a : c.events()) {
      ++total;
      secondary += a.time > c.seed_time();
    }
  }
  const double frac = static_cast<double>(secondary) / static_cast<double>(total);
  const double t = clock.seconds();
  ok = ok && frac < kSecondaryMax && t < kSimulatorSeconds;
  detail += "secondary fraction at recovery 1e6: " + sci(frac) + ", " + fmt(t, 2) + " s";
  return {ok, detail};
}

// Metric means over the ok replicates of each cell, keyed by the columns
// that define the cell.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    return static_cast<std::size_t>(std::ranges::find(header, name) - header.begin());
  }

  /// Mean of `metric` over ok rows matching every (column, value) filter.
  double mean(const std::string& metric, const std::vector<std::pair<std::string, double>>& where,
              std::size_t* count = nullptr) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : rows) {
      if (r[col("status")] != "ok") continue;
      bool match = true;
      for (const auto& [name, value] : where) match = match && std::stod(r[col(name)]) == value;
      if (!match) continue;
      sum += std::stod(r[col(metric)]);
      ++n;
    }
    if (count) *count = n;
    return n ? sum / static_cast<double>(n) : std::nan("");
  }

  std::size_t failed() const {
    return static_cast<std::size_t>(std::ranges::count_if(rows, [&](const auto& r) { return r[col("status")] != "ok"; }));
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Table load(const fs::path& csv) {
  auto rows = parse_csv(slurp(csv));
  Table t;
  t.header = rows.front();
  t.rows.assign(rows.begin() + 1, rows.end());
  return t;
}

ExperimentConfig desk_base(const std::string& name) {
  ExperimentConfig cfg;
  cfg.name = name;
  cfg.node_counts = {250};
  cfg.layer_counts = {2};
  cfg.recovery_rates = {2.0};
  cfg.replicate_seeds = {0, 1, 2};
  return cfg;
}

struct GridRun {
  Table table;
  double seconds = 0.0;
};

GridRun run(const ExperimentConfig& cfg, const fs::path& dir, int threads) {
  Stopwatch clock;
  const auto summary = run_grid(cfg, {dir, threads, false, nullptr});
  GridRun out{load(summary.results_csv), clock.seconds()};
  std::cout << "  grid " << cfg.name << ": " << summary.cells << " cells, " << summary.failed << " failed, "
            << fmt(out.seconds, 1) << " s" << std::endl;
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MULTIC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::string work_dir = (fs::temp_directory_path() / "multic_acceptance").string();
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("--work-dir", work_dir, "scratch directory for grid outputs");
  app.add_option("--threads", threads, "worker threads for the grids")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);
  const fs::path work(work_dir);
  fs::remove_all(work);
  fs::create_directories(work);

  report(1, "oracle equivalence", oracle_equivalence());
  report(2, "gradient correctness", gradient_check());
  report(3, "simplex and box invariants", simplex_invariants());
  report(4, "simulator law", simulator_law());

  // Desk scale: N=250, K=2, gamma=2. One grid covers the C-E and filtering
  // trends and the edge recovery table; two more supply the overlap and
  // mixing cells at C-E ratio 16 with s_c=8.
  auto trend_cfg = desk_base("trend");
  trend_cfg.ce_ratios = {1, 2, 4, 8, 16};
  trend_cfg.size_thresholds = {1, 8};
  const auto trend = run(trend_cfg, work / "trend", threads);

  auto overlap_cfg = desk_base("overlap");
  overlap_cfg.overlaps = {1.0};
  overlap_cfg.ce_ratios = {16};
  overlap_cfg.size_thresholds = {8};
  const auto overlap = run(overlap_cfg, work / "overlap", threads);

  auto mixing_cfg = desk_base("mixing");
  mixing_cfg.eps_max_values = {0.4};
  mixing_cfg.ce_ratios = {16};
  mixing_cfg.size_thresholds = {8};
  const auto mixing = run(mixing_cfg, work / "mixing", threads);

  const auto& T = trend.table;
  {
    std::vector<double> auc;
    for (double ce : {1.0, 4.0, 16.0}) auc.push_back(T.mean("auc", {{"ce_ratio", ce}, {"size_threshold", 1}}));
    const bool ok = monotone_with_one_inversion(auc, kAucInversion) && auc.back() >= kAucAtSixteen &&
                    trend.seconds < kTrendSeconds;
    report(5, "AUC grows with cascades",
           {ok, "mean AUC at C-E {1,4,16}: " + join(auc) + " (need >= " + fmt(kAucAtSixteen, 2) + " at 16)"});
  }
  double pi_filtered = 0.0;
  {
    const double pi1 = T.mean("pi_accuracy", {{"ce_ratio", 16}, {"size_threshold", 1}});
    pi_filtered = T.mean("pi_accuracy", {{"ce_ratio", 16}, {"size_threshold", 8}});
    const double rho1 = T.mean("alpha_spearman", {{"ce_ratio", 16}, {"size_threshold", 1}});
    const double rho8 = T.mean("alpha_spearman", {{"ce_ratio", 16}, {"size_threshold", 8}});
    const bool ok = pi_filtered - pi1 >= kFilterGain && rho8 >= rho1 - kSpearmanSlack && trend.seconds < kFilterSeconds;
    report(6, "filtering improves memberships",
           {ok, "pi accuracy s_c=1 " + fmt(pi1) + " -> s_c=8 " + fmt(pi_filtered) + "; alpha Spearman " + fmt(rho1) +
                    " -> " + fmt(rho8)});
  }
  {
    const double full = overlap.table.mean("pi_accuracy", {});
    const bool ok = overlap.table.failed() == 0 && full <= kOverlapCeiling && pi_filtered >= full + kOverlapGap;
    report(7, "full overlap breaks memberships",
           {ok, "pi accuracy phi=1 " + fmt(full) + ", phi=0 " + fmt(pi_filtered)});
  }
  {
    const double pi_mixed = mixing.table.mean("pi_accuracy", {});
    const double auc_mixed = mixing.table.mean("auc", {});
    const double auc_clean = T.mean("auc", {{"ce_ratio", 16}, {"size_threshold", 8}});
    const bool ok = mixing.table.failed() == 0 && pi_mixed <= pi_filtered && std::abs(auc_mixed - auc_clean) < kMixingAucGap;
    report(8, "mixing degrades memberships only",
           {ok, "pi accuracy eps=0 " + fmt(pi_filtered) + ", eps=0.4 " + fmt(pi_mixed) + "; AUC " + fmt(auc_clean) +
                    " vs " + fmt(auc_mixed)});
  }
  {
    std::vector<double> rec;
    for (double ce : {1.0, 2.0, 4.0, 8.0, 16.0}) {
      rec.push_back(T.mean("edge_recovery", {{"ce_ratio", ce}, {"size_threshold", 1}}));
    }
    report(9, "edge recovery grows with cascades",
           {monotone_with_one_inversion(rec, kRecoveryInversion), "mean recovery at C-E {1,2,4,8,16}: " + join(rec)});
  }
  {
    // The same config twice through the command-line tool, once with more
    // threads.
    auto cfg = desk_base("determinism");
    cfg.ce_ratios = {1, 2};
    cfg.size_thresholds = {1, 4};
    cfg.replicate_seeds = {0, 1};
    std::ofstream(work / "determinism.json") << experiment_config_to_json(cfg).dump(2);
    const std::string config = (work / "determinism.json").string();
    const int a = run_cli("--threads 1 --out-dir " + (work / "det_a").string() + " experiment --config " + config);
    const int b = run_cli("--threads 3 --out-dir " + (work / "det_b").string() + " experiment --config " + config);
    const std::string csv_a = slurp(work / "det_a" / "results.csv");
    const std::string csv_b = slurp(work / "det_b" / "results.csv");
    const bool ok = a == 0 && b == 0 && !csv_a.empty() && csv_a == csv_b;
    report(10, "determinism",
           {ok, "exit codes " + std::to_string(a) + "/" + std::to_string(b) + ", results.csv " +
                    std::to_string(csv_a.size()) + " bytes, " + (csv_a == csv_b ? "identical" : "DIFFERENT")});
  }

  // Reported, not asserted.
  std::cout << "reported: mean pi accuracy at C-E 16, s_c 1: "
            << fmt(T.mean("pi_accuracy", {{"ce_ratio", 16}, {"size_threshold", 1}})) << std::endl;
  std::cout << failures << " criteria failed" << std::endl;
  return failures == 0 ? 0 : 1;
}
