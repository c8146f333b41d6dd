#pragma once

#include <json.hpp>

#include "log2ns/cluster.hpp"
#include "log2ns/error.hpp"
#include "log2ns/policy.hpp"
#include "log2ns/query.hpp"

namespace log2ns {

using Json = nlohmann::json;

Json to_json(const FlowRecord& record);
Json to_json(const Packet& packet);
Json to_json(const Verdict& verdict);
Json to_json(const ClusterSummary& summary);
Json to_json(const WitnessReport& report);
Json to_json(const Neighbor& neighbor);
Json to_json(const KSelection& selection);

// {rule, shadowed, boxes: [{from_zone: "...", ...}]} with each field
// rendered by FirewallModel::describe_field.
Json region_json(const FirewallModel& model, const EffectiveRegion& region);

// Rule listing: name, index, action, and the fields as written.
Json rule_json(const FirewallModel& model, std::size_t index);

// Exactly one payload key per provenance: "matches" (log search),
// "neighbors" (correlation) or "sat"/"verdict" (formal). UNSAT answers
// carry the constraint text and, when an action was requested, the first
// conflicting field.
Json query_result_json(const Query& query, const QueryResult& result,
                       const Artifacts& artifacts);

Json parse_error_json(const ParseError& error);

}  // namespace log2ns
