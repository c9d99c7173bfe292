#pragma once

#include <iosfwd>
#include <string>

#include "json.hpp"
#include "multic/inference.hpp"

namespace multic {

/// JSON document of an InferenceResult. Contains no wall-clock data, so
/// identical inputs give byte-identical output.
nlohmann::ordered_json result_to_json(const InferenceResult& result);

/// Throws std::runtime_error on a malformed document.
InferenceResult result_from_json(const nlohmann::json& doc);

/// Tab-separated phase-one scores: src, dst, score, selected (0/1).
void write_edge_scores(const InferenceResult& result, std::ostream& out);

}  // namespace multic
