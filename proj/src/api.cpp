#include "log2ns/api.hpp"

#include <charconv>

#include "log2ns/error.hpp"
#include "log2ns/strings.hpp"

namespace log2ns {

namespace {

ApiResponse error(int status, const std::string& message) {
  return {status, {{"error", message}}};
}

std::optional<std::uint64_t> to_uint(std::string_view text) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    return std::nullopt;
  }
  return v;
}

std::vector<std::string_view> segments(std::string_view path) {
  std::vector<std::string_view> out;
  for (auto part : split(path, '/')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

std::optional<Json> parse_body(std::string_view body) {
  try {
    auto doc = Json::parse(body);
    if (!doc.is_object()) return std::nullopt;
    return doc;
  } catch (const Json::parse_error&) {
    return std::nullopt;
  }
}

}  // namespace

Api::Api(const Workspace& ws, Parallelism par) : ws_(ws), par_(par) {
  std::string missing;
  auto need = [&](bool present, const char* name) {
    if (present) return;
    if (!missing.empty()) missing += ", ";
    missing += name;
  };
  need(ws.corpus.has_value(), "ingest");
  need(ws.embedding.has_value(), "train");
  need(ws.vectors.has_value(), "vectorize");
  need(ws.clusters.has_value(), "cluster");
  need(ws.policy.has_value(), "compile");
  if (!missing.empty()) {
    throw NotFoundError("cannot serve; missing artifacts: " + missing);
  }
  for (std::size_t c = 0; c < ws.clusters->k; ++c) {
    summaries_.push_back(to_json(summarize_cluster(c, *ws.clusters, *ws.corpus)));
  }
  Json points = Json::array();
  if (ws.vectors->size() >= 2) {
    for (const auto& p : project_2d(ws.vectors->values)) {
      points.push_back({{"row", p.row},
                        {"x", p.x},
                        {"y", p.y},
                        {"cluster", ws.clusters->assignments[p.row]}});
    }
  }
  projection_ = {{"k", ws.clusters->k}, {"points", std::move(points)}};
}

ApiResponse Api::handle(std::string_view method, std::string_view path,
                        const std::map<std::string, std::string>& params,
                        std::string_view body) const {
  const auto parts = segments(path);
  if (parts.empty() || parts[0] != "api") return error(404, "not found");
  const bool get = method == "GET";
  const bool post = method == "POST";
  try {
    if (parts.size() == 2 && parts[1] == "clusters") {
      return get ? clusters() : error(405, "method not allowed");
    }
    if (parts.size() == 3 && parts[1] == "clusters") {
      return get ? cluster(parts[2]) : error(405, "method not allowed");
    }
    if (parts.size() == 2 && parts[1] == "projection") {
      return get ? projection() : error(405, "method not allowed");
    }
    if (parts.size() == 2 && parts[1] == "neighbors") {
      return get ? neighbors(params) : error(405, "method not allowed");
    }
    if (parts.size() == 2 && parts[1] == "query") {
      return post ? query(body) : error(405, "method not allowed");
    }
    if (parts.size() == 2 && parts[1] == "witness-check") {
      return post ? witness_check(body) : error(405, "method not allowed");
    }
    if (parts.size() == 2 && parts[1] == "rules") {
      return get ? rules() : error(405, "method not allowed");
    }
    if (parts.size() == 4 && parts[1] == "rules" &&
        parts[3] == "effective-region") {
      return get ? effective_region(parts[2]) : error(405, "method not allowed");
    }
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
  return error(404, "not found");
}

ApiResponse Api::clusters() const { return {200, Json(summaries_)}; }

ApiResponse Api::cluster(std::string_view id) const {
  auto c = to_uint(id);
  if (!c || *c >= summaries_.size()) {
    return error(404, "no cluster '" + std::string(id) + "'");
  }
  return {200, summaries_[*c]};
}

ApiResponse Api::projection() const { return {200, projection_}; }

ApiResponse Api::neighbors(
    const std::map<std::string, std::string>& params) const {
  auto t = params.find("token");
  if (t == params.end()) return error(400, "missing token parameter");
  auto token = Token::parse(t->second);
  if (!token) return error(400, "malformed token '" + t->second + "'");
  std::size_t k = 10;
  if (auto kp = params.find("k"); kp != params.end()) {
    auto v = to_uint(kp->second);
    if (!v || *v < 1) return error(400, "k must be a positive integer");
    k = *v;
  }
  try {
    Json out = Json::array();
    for (const auto& n : nearest_neighbors(*ws_.embedding, *token, k, par_)) {
      out.push_back(to_json(n));
    }
    return {200, {{"token", token->render()}, {"k", k}, {"neighbors", out}}};
  } catch (const NotFoundError& e) {
    return error(404, e.what());
  }
}

ApiResponse Api::query(std::string_view body) const {
  auto doc = parse_body(body);
  if (!doc || !doc->contains("text") || !doc->at("text").is_string()) {
    return error(400, "body must be {\"text\": \"<query>\"}");
  }
  const auto text = doc->at("text").get<std::string>();
  try {
    const Query q = parse_query(text);
    const auto artifacts = ws_.artifacts();
    const auto result = execute(q, artifacts, par_);
    return {200, query_result_json(q, result, artifacts)};
  } catch (const ParseError& e) {
    return {400, parse_error_json(e)};
  } catch (const NotFoundError& e) {
    return error(404, e.what());
  } catch (const InvalidArgument& e) {
    return error(400, e.what());
  }
}

ApiResponse Api::witness_check(std::string_view body) const {
  auto doc = parse_body(body);
  if (!doc) return error(400, "body must be {\"n\": N, \"seed\": S}");
  const auto& n = (*doc)["n"];
  if (!n.is_number_unsigned()) return error(400, "n must be an integer >= 0");
  std::uint64_t seed = 1;
  if (doc->contains("seed")) {
    if (!doc->at("seed").is_number_unsigned()) {
      return error(400, "seed must be an integer >= 0");
    }
    seed = doc->at("seed").get<std::uint64_t>();
  }
  const auto report = log2ns::witness_check(
      *ws_.corpus, *ws_.policy, n.get<std::size_t>(), seed, par_);
  return {200, to_json(report)};
}

ApiResponse Api::rules() const {
  Json out = Json::array();
  const auto& model = *ws_.policy;
  for (std::size_t i = 0; i < model.config().rules.size(); ++i) {
    Json r = rule_json(model, i);
    r["shadowed"] = model.effective_region(i).shadowed;
    out.push_back(std::move(r));
  }
  return {200, out};
}

ApiResponse Api::effective_region(std::string_view rule) const {
  try {
    return {200, region_json(*ws_.policy, ws_.policy->effective_region(rule))};
  } catch (const NotFoundError& e) {
    return error(404, e.what());
  }
}

}  // namespace log2ns
