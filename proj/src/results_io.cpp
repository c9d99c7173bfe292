#include "multic/results_io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "multic/io.hpp"

namespace multic {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json trace_json(const std::vector<TracePoint>& trace) {
  auto arr = ordered_json::array();
  for (const TracePoint& p : trace) arr.push_back({p.iteration, p.value});
  return arr;
}

std::vector<TracePoint> trace_from(const json& arr) {
  std::vector<TracePoint> trace;
  for (const auto& p : arr) trace.push_back({p.at(0).get<int>(), p.at(1).get<double>()});
  return trace;
}

StopReason stop_from(const std::string& s) {
  if (s == "tolerance") return StopReason::kTolerance;
  if (s == "diverged") return StopReason::kDiverged;
  return StopReason::kIterationCap;
}

}  // namespace

ordered_json result_to_json(const InferenceResult& r) {
  ordered_json doc;
  doc["n_layers"] = r.n_layers;
  doc["budget"] = r.budget;
  doc["budget_truncated"] = r.budget_truncated;
  doc["restart_seed"] = r.restart_seed;
  doc["n_cascades_phase_one"] = r.n_cascades_phase_one;
  doc["n_cascades_phase_two"] = r.n_cascades_phase_two;
  doc["dropped_terms"] = {{"phase_one", r.phase_one_dropped_terms}, {"phase_two", r.phase_two_dropped_terms}};

  auto scores = ordered_json::array();
  for (std::size_t e = 0; e < r.candidate_edges.size(); ++e) {
    scores.push_back({r.candidate_edges[e].src, r.candidate_edges[e].dst, r.edge_scores(static_cast<Eigen::Index>(e))});
  }
  doc["edge_scores"] = std::move(scores);

  auto selected = ordered_json::array();
  for (const NodePair& p : r.selected_edges) selected.push_back({p.src, p.dst});
  doc["selected_edges"] = std::move(selected);

  auto alpha = ordered_json::array();
  for (Eigen::Index k = 0; k < r.alpha_hat.rows(); ++k) {
    auto row = ordered_json::array();
    for (Eigen::Index e = 0; e < r.alpha_hat.cols(); ++e) row.push_back(r.alpha_hat(k, e));
    alpha.push_back(std::move(row));
  }
  doc["alpha_hat"] = std::move(alpha);

  auto pi = ordered_json::array();
  for (Eigen::Index c = 0; c < r.pi_hat.rows(); ++c) {
    auto row = ordered_json::array();
    for (Eigen::Index k = 0; k < r.pi_hat.cols(); ++k) row.push_back(r.pi_hat(c, k));
    pi.push_back({{"id", r.cascade_ids[static_cast<std::size_t>(c)]}, {"pi", std::move(row)}});
  }
  doc["pi_hat"] = std::move(pi);

  auto restarts = ordered_json::array();
  for (const RestartSummary& s : r.restarts) {
    ordered_json entry{{"seed", s.seed},
                       {"final_value", std::isfinite(s.final_value) ? ordered_json(s.final_value) : ordered_json()},
                       {"iterations", s.iterations},
                       {"stop", to_string(s.stop)}};
    if (s.pi_accuracy) entry["pi_accuracy"] = *s.pi_accuracy;
    restarts.push_back(std::move(entry));
  }
  doc["restarts"] = std::move(restarts);
  doc["objective_trace"] = {{"phase_one", trace_json(r.phase_one_trace)},
                            {"phase_one_stop", r.phase_one_stop},
                            {"phase_two", trace_json(r.phase_two_trace)}};
  return doc;
}

InferenceResult result_from_json(const json& doc) {
  try {
    InferenceResult r;
    r.n_layers = doc.at("n_layers").get<int>();
    r.budget = doc.at("budget").get<std::size_t>();
    r.budget_truncated = doc.value("budget_truncated", false);
    r.restart_seed = doc.at("restart_seed").get<std::uint64_t>();
    r.n_cascades_phase_one = doc.value("n_cascades_phase_one", std::size_t{0});
    r.n_cascades_phase_two = doc.value("n_cascades_phase_two", std::size_t{0});
    if (doc.contains("dropped_terms")) {
      r.phase_one_dropped_terms = doc["dropped_terms"].value("phase_one", std::size_t{0});
      r.phase_two_dropped_terms = doc["dropped_terms"].value("phase_two", std::size_t{0});
    }
    const auto& scores = doc.at("edge_scores");
    r.edge_scores.resize(static_cast<Eigen::Index>(scores.size()));
    for (std::size_t e = 0; e < scores.size(); ++e) {
      r.candidate_edges.push_back({scores[e].at(0).get<NodeId>(), scores[e].at(1).get<NodeId>()});
      r.edge_scores(static_cast<Eigen::Index>(e)) = scores[e].at(2).get<double>();
    }
    for (const auto& p : doc.at("selected_edges")) r.selected_edges.push_back({p.at(0).get<NodeId>(), p.at(1).get<NodeId>()});
    if (!std::is_sorted(r.candidate_edges.begin(), r.candidate_edges.end()) ||
        !std::is_sorted(r.selected_edges.begin(), r.selected_edges.end())) {
      throw std::runtime_error("edge lists must be sorted");
    }
    const auto& alpha = doc.at("alpha_hat");
    r.alpha_hat.resize(static_cast<Eigen::Index>(alpha.size()), static_cast<Eigen::Index>(r.selected_edges.size()));
    for (std::size_t k = 0; k < alpha.size(); ++k) {
      if (alpha[k].size() != r.selected_edges.size()) throw std::runtime_error("alpha_hat row length mismatch");
      for (std::size_t e = 0; e < alpha[k].size(); ++e) {
        r.alpha_hat(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(e)) = alpha[k][e].get<double>();
      }
    }
    const auto& pi = doc.at("pi_hat");
    r.pi_hat.resize(static_cast<Eigen::Index>(pi.size()), r.n_layers);
    for (std::size_t c = 0; c < pi.size(); ++c) {
      r.cascade_ids.push_back(pi[c].at("id").get<std::int64_t>());
      const auto& row = pi[c].at("pi");
      if (row.size() != static_cast<std::size_t>(r.n_layers)) throw std::runtime_error("pi_hat row length mismatch");
      for (std::size_t k = 0; k < row.size(); ++k) {
        r.pi_hat(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k)) = row[k].get<double>();
      }
    }
    for (const auto& s : doc.value("restarts", json::array())) {
      RestartSummary summary;
      summary.seed = s.at("seed").get<std::uint64_t>();
      summary.final_value = s.at("final_value").is_null() ? std::numeric_limits<double>::infinity()
                                                          : s.at("final_value").get<double>();
      summary.iterations = s.at("iterations").get<int>();
      summary.stop = stop_from(s.at("stop").get<std::string>());
      if (s.contains("pi_accuracy")) summary.pi_accuracy = s["pi_accuracy"].get<double>();
      r.restarts.push_back(summary);
    }
    if (doc.contains("objective_trace")) {
      const auto& t = doc["objective_trace"];
      r.phase_one_trace = trace_from(t.value("phase_one", json::array()));
      r.phase_two_trace = trace_from(t.value("phase_two", json::array()));
      r.phase_one_stop = t.value("phase_one_stop", std::string());
    }
    return r;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed inference result: ") + e.what());
  }
}

void write_edge_scores(const InferenceResult& result, std::ostream& out) {
  out << "src\tdst\tscore\tselected\n";
  for (std::size_t e = 0; e < result.candidate_edges.size(); ++e) {
    const NodePair& p = result.candidate_edges[e];
    const bool selected = std::binary_search(result.selected_edges.begin(), result.selected_edges.end(), p);
    out << p.src << '\t' << p.dst << '\t' << format_double(result.edge_scores(static_cast<Eigen::Index>(e))) << '\t'
        << (selected ? 1 : 0) << '\n';
  }
}

}  // namespace multic
