#pragma once

#include "scholar/engine.hpp"

#include "json.hpp"

namespace scholar::api {

/// Version of the JSON response layout; bumped on incompatible changes.
inline constexpr int kSchemaVersion = 1;

nlohmann::json to_json(const answer::Answer& a);
nlohmann::json to_json(const answer::EvidenceItem& item);
nlohmann::json to_json(const answer::EvidenceSet& evidence);
nlohmann::json to_json(const graph::Subgraph& g);
nlohmann::json to_json(const QueryOutcome& outcome);
nlohmann::json to_json(const corpus::Paragraph& p);
nlohmann::json to_json(const kg::KgTuple& t);
nlohmann::json to_json(const EvidenceDetail& detail);
nlohmann::json to_json(const StoreStats& stats);
nlohmann::json to_json(const corpus::IngestSummary& s);
nlohmann::json to_json(const kg::BuildSummary& s);
nlohmann::json to_json(const canon::CanonicalizeSummary& s);

/// Adds "schema_version" to an object.
nlohmann::json versioned(nlohmann::json body);

}  // namespace scholar::api
