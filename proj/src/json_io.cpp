#include "log2ns/json_io.hpp"

#include "log2ns/ipv4.hpp"

namespace log2ns {

Json to_json(const FlowRecord& record) {
  Json out = Json::object();
  for (Field f : all_fields()) {
    if (!record.has(f)) continue;
    const std::string key(field_name(f));
    switch (f) {
      case Field::kSrcPort:
        out[key] = *record.src_port;
        break;
      case Field::kDstPort:
        out[key] = *record.dst_port;
        break;
      case Field::kBytesSent:
        out[key] = *record.bytes_sent;
        break;
      case Field::kTimestamp:
        out[key] = *record.timestamp;
        break;
      default:
        out[key] = *record.text(f);
    }
  }
  return out;
}

Json to_json(const Packet& p) {
  return {
      {"from_zone", p.from_zone},
      {"to_zone", p.to_zone},
      {"src_ip", ipv4::format(p.src_ip)},
      {"dst_ip", ipv4::format(p.dst_ip)},
      {"application", p.application},
      {"protocol", p.protocol},
      {"dst_port", p.dst_port},
  };
}

Json to_json(const Verdict& v) {
  return {
      {"action", action_name(v.action)},
      {"matched_rule", v.matched_rule},
      {"filter", v.filter},
      {"trace_lines", v.trace_lines},
      {"witness", to_json(v.witness)},
  };
}

namespace {

Json counted(const std::vector<CountedValue>& values) {
  Json out = Json::array();
  for (const auto& v : values) {
    out.push_back({{"value", v.value}, {"count", v.count}});
  }
  return out;
}

}  // namespace

Json to_json(const ClusterSummary& s) {
  return {
      {"cluster", s.cluster},
      {"members", s.members},
      {"top_sources", counted(s.top_sources)},
      {"top_destinations", counted(s.top_destinations)},
      {"top_applications", counted(s.top_applications)},
      {"top_zone_pairs", counted(s.top_zone_pairs)},
  };
}

Json to_json(const WitnessReport& r) {
  Json failures = Json::array();
  for (const auto& f : r.failures) {
    failures.push_back(
        {{"row", f.row}, {"constraints", f.constraints}, {"reason", f.reason}});
  }
  return {{"sampled", r.sampled}, {"passed", r.passed}, {"failures", failures}};
}

Json to_json(const Neighbor& n) {
  return {{"token", n.token.render()}, {"cosine", n.cosine}};
}

Json to_json(const KSelection& s) {
  Json scores = Json::array();
  for (const auto& k : s.scores) {
    scores.push_back(
        {{"k", k.k}, {"sse", k.sse}, {"silhouette", k.silhouette}});
  }
  return {{"best_k", s.best_k}, {"scores", scores}};
}

Json region_json(const FirewallModel& model, const EffectiveRegion& region) {
  Json boxes = Json::array();
  for (const auto& box : region.boxes) {
    Json b = Json::object();
    for (std::size_t f = 0; f < kPacketFieldCount; ++f) {
      const auto field = static_cast<PacketField>(f);
      b[std::string(packet_field_name(field))] =
          model.describe_field(field, box[f]);
    }
    boxes.push_back(std::move(b));
  }
  return {{"rule", region.rule},
          {"shadowed", region.shadowed},
          {"boxes", boxes}};
}

Json rule_json(const FirewallModel& model, std::size_t index) {
  const auto& r = model.rule(index);
  auto names = [](const std::optional<std::set<std::string>>& s) -> Json {
    if (!s) return "any";
    return Json(std::vector<std::string>(s->begin(), s->end()));
  };
  auto addrs = [](const std::vector<std::string>& written) -> Json {
    if (written.empty()) return "any";
    return Json(written);
  };
  Json services;
  switch (r.services) {
    case ServiceMatch::kAny:
      services = "any";
      break;
    case ServiceMatch::kApplicationDefault:
      services = "application-default";
      break;
    case ServiceMatch::kList:
      services = r.service_names;
      break;
  }
  return {
      {"index", index},
      {"name", r.name},
      {"from_zones", names(r.from_zones)},
      {"to_zones", names(r.to_zones)},
      {"src_addrs", addrs(r.src_names)},
      {"dst_addrs", addrs(r.dst_names)},
      {"applications", names(r.applications)},
      {"services", services},
      {"action", action_name(r.action)},
  };
}

Json query_result_json(const Query& query, const QueryResult& result,
                       const Artifacts& artifacts) {
  Json out = {
      {"mode", query_mode_name(query.mode)},
      {"query", format_query(query)},
      {"provenance", provenance_name(result.provenance)},
      {"escalated", result.escalated},
      {"elapsed_ms",
       static_cast<double>(result.elapsed.count()) / 1'000'000.0},
  };
  switch (result.provenance) {
    case Provenance::kLogSearch: {
      Json matches = Json::array();
      for (auto row : result.matches) {
        Json m = {{"row", row}};
        if (artifacts.corpus) {
          m["record"] = to_json(artifacts.corpus->records[row]);
        }
        matches.push_back(std::move(m));
      }
      out["matches"] = std::move(matches);
      out["total_matches"] = result.total_matches;
      break;
    }
    case Provenance::kCorrelation: {
      Json neighbors = Json::array();
      for (const auto& n : result.neighbors) neighbors.push_back(to_json(n));
      out["anchor"] = query.anchor ? query.anchor->render() : "";
      out["neighbors"] = std::move(neighbors);
      break;
    }
    case Provenance::kFormal: {
      const auto& formal = *result.formal;
      out["sat"] = formal.sat;
      if (formal.sat) {
        out["verdict"] = to_json(*formal.verdict);
        break;
      }
      out["verdict"] = nullptr;
      Query constraints_only = query;
      constraints_only.mode = QueryMode::kFormal;
      constraints_only.limit.reset();
      out["constraints"] = format_query(constraints_only);
      if (query.desired_action && artifacts.policy) {
        const auto sp =
            ConstraintSet::from(query.constraints).to_symbolic();
        if (auto f = artifacts.policy->first_conflicting_field(
                sp, *query.desired_action)) {
          out["conflicting_field"] = packet_field_name(*f);
        }
      }
      break;
    }
  }
  return out;
}

Json parse_error_json(const ParseError& e) {
  return {{"error", e.message()}, {"position", e.position()}};
}

}  // namespace log2ns
