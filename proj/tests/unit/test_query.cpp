#include <doctest.h>

#include <algorithm>
#include <array>
#include <set>

#include <json.hpp>

#include "log2ns/error.hpp"
#include "log2ns/fixtures.hpp"
#include "log2ns/ipv4.hpp"
#include "log2ns/json_io.hpp"
#include "log2ns/query.hpp"
#include "oracles.hpp"

using namespace log2ns;
using oracle::SmallDomain;
using oracle::SmallOracle;

namespace {

std::size_t error_position(const std::string& text) {
  try {
    parse_query(text);
  } catch (const ParseError& e) {
    return e.position();
  }
  FAIL("expected a parse error for: " << text);
  return 0;
}

bool same_query(const Query& a, const Query& b) {
  if (a.mode != b.mode || a.desired_action != b.desired_action ||
      a.anchor != b.anchor || a.k != b.k || a.limit != b.limit ||
      a.constraints.size() != b.constraints.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.constraints.size(); ++i) {
    const auto& x = a.constraints[i];
    const auto& y = b.constraints[i];
    if (x.field != y.field || x.op != y.op || x.values != y.values) return false;
  }
  return true;
}

// Text-level matcher: compares the CSV rendering of each field.
struct TextClause {
  std::string field;
  std::string op;  // "=", "!=", "in", "not-in", ".."
  std::vector<std::string> values;
};

std::optional<std::string> field_text(const FlowRecord& r,
                                      const std::string& name) {
  return r.text(*field_from_name(name));
}

bool text_matches(const FlowRecord& r, const std::vector<TextClause>& clauses) {
  for (const auto& c : clauses) {
    auto v = field_text(r, c.field);
    if (!v) return false;
    std::string value = *v;
    if (c.field == "protocol") {
      std::transform(value.begin(), value.end(), value.begin(), ::toupper);
    }
    const bool in = std::find(c.values.begin(), c.values.end(), value) !=
                    c.values.end();
    if ((c.op == "=" || c.op == "in") && !in) return false;
    if ((c.op == "!=" || c.op == "not-in") && in) return false;
    if (c.op == "..") {
      std::uint64_t x, lo, hi;
      if (c.field == "dst_port") {
        x = std::stoul(value);
        lo = std::stoul(c.values[0]);
        hi = std::stoul(c.values[1]);
      } else {
        x = *ipv4::parse(value);
        lo = *ipv4::parse(c.values[0]);
        hi = *ipv4::parse(c.values[1]);
      }
      if (x < lo || x > hi) return false;
    }
  }
  return true;
}

std::string render(const std::vector<TextClause>& clauses) {
  std::string out = "logs:";
  for (const auto& c : clauses) {
    out += " " + c.field;
    if (c.op == "=" || c.op == "!=") {
      out += c.op + c.values[0];
    } else if (c.op == "..") {
      out += "=" + c.values[0] + ".." + c.values[1];
    } else {
      out += " " + c.op + " {";
      for (std::size_t i = 0; i < c.values.size(); ++i) {
        out += (i ? ", " : "") + c.values[i];
      }
      out += "}";
    }
  }
  return out;
}

std::vector<TextClause> random_clauses(Rng& rng, const LogCorpus& corpus) {
  const std::vector<std::string> fields = {
      "src_ip",   "dst_ip",   "from_zone",  "to_zone",   "application",
      "protocol", "dst_port", "src_region", "dst_region"};
  std::vector<TextClause> out;
  const auto n = 1 + rng.below(3);
  for (std::size_t i = 0; i < n; ++i) {
    TextClause c;
    c.field = fields[rng.below(fields.size())];
    auto sample = [&] {
      for (int tries = 0; tries < 20; ++tries) {
        const auto& r = corpus.records[rng.below(corpus.records.size())];
        if (auto v = field_text(r, c.field)) return *v;
      }
      return std::string(c.field == "dst_port" ? "1" : "1.1.1.1");
    };
    const bool numeric = c.field == "dst_port" || c.field.ends_with("_ip");
    switch (rng.below(numeric ? 5 : 4)) {
      case 0:
        c.op = "=";
        c.values = {sample()};
        break;
      case 1:
        c.op = "!=";
        c.values = {sample()};
        break;
      case 2:
        c.op = "in";
        c.values = {sample(), sample()};
        break;
      case 3:
        c.op = "not-in";
        c.values = {sample(), sample()};
        break;
      default: {
        c.op = "..";
        auto a = sample(), b = sample();
        auto key = [&](const std::string& s) -> std::uint64_t {
          return c.field == "dst_port" ? std::stoul(s) : *ipv4::parse(s);
        };
        if (key(a) > key(b)) std::swap(a, b);
        c.values = {a, b};
      }
    }
    std::sort(c.values.begin(), c.values.end());
    if (c.op == "in" || c.op == "not-in") {
      c.values.erase(std::unique(c.values.begin(), c.values.end()),
                     c.values.end());
    }
    if (c.op == "..") {
      auto key = [&](const std::string& s) -> std::uint64_t {
        return c.field == "dst_port" ? std::stoul(s) : *ipv4::parse(s);
      };
      if (key(c.values[0]) > key(c.values[1])) std::swap(c.values[0], c.values[1]);
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace

TEST_CASE("parse the documented examples") {
  auto f = parse_query(
      "formal: from_zone=Trust to_zone=Untrust dst_ip=42.62.94.2 action=permit");
  CHECK(f.mode == QueryMode::kFormal);
  REQUIRE(f.constraints.size() == 3);
  CHECK(f.constraints[0].field == QueryField::kFromZone);
  CHECK(f.constraints[0].values == std::vector<std::string>{"Trust"});
  CHECK(f.constraints[2].field == QueryField::kDstIp);
  CHECK(f.constraints[2].position == 40);
  CHECK(f.desired_action == Action::kPermit);

  auto l = parse_query("logs: dst_ip in {4.4.4.4, 8.8.8.8} application=dns");
  CHECK(l.mode == QueryMode::kLogs);
  REQUIRE(l.constraints.size() == 2);
  CHECK(l.constraints[0].op == ConstraintOp::kIn);
  CHECK(l.constraints[0].values ==
        std::vector<std::string>{"4.4.4.4", "8.8.8.8"});

  auto c = parse_query("corr: neighbors(ip:10.11.29.5, k=10)");
  CHECK(c.mode == QueryMode::kCorr);
  CHECK(c.anchor->render() == "ip:10.11.29.5");
  CHECK(c.k == 10u);
  CHECK(format_query(c) == "corr: neighbors(ip:10.11.29.5, k=10)");

  auto r = parse_query(
      "auto: src_ip=10.0.0.0..10.0.0.255 dst_port!=53 protocol not-in {icmp} "
      "limit=5");
  CHECK(r.constraints[0].op == ConstraintOp::kRange);
  CHECK(r.constraints[0].values ==
        std::vector<std::string>{"10.0.0.0", "10.0.0.255"});
  CHECK(r.constraints[1].op == ConstraintOp::kNe);
  CHECK(r.constraints[2].op == ConstraintOp::kNotIn);
  CHECK(r.limit == 5u);
}

TEST_CASE("parse errors carry positions") {
  CHECK(error_position("bogus: src_ip=1.1.1.1") == 0);
  CHECK(error_position("logs src_ip=1.1.1.1") == 5);
  CHECK(error_position("logs: colour=red") == 6);
  CHECK(error_position("logs: src_ip=1.2.3") == 6);
  CHECK(error_position("logs: dst_port=70000") == 6);
  CHECK(error_position("logs: application=dns..ssl") == 6);
  CHECK(error_position("logs: src_ip=9.9.9.9..1.1.1.1") == 6);
  CHECK(error_position("formal: action=maybe") == 15);
  CHECK(error_position("logs: src_ip in {1.1.1.1") == 24);
  CHECK(error_position("logs: src_ip ~ 1") == 13);
  CHECK(error_position("corr:") == 5);
  CHECK(error_position("corr: neighbors(10.0.0.1, k=3)") == 16);
  CHECK(error_position("corr: neighbors(ip:10.0.0.1, k=0)") == 31);
  CHECK(error_position("corr: neighbors(ip:10.0.0.1, k=3) src_ip=1.1.1.1") == 34);
  CHECK(error_position("logs: neighbors(ip:10.0.0.1, k=3)") == 6);
  CHECK(error_position("logs: src_ip=1.1.1.1 action=deny") == 21);
  CHECK(error_position("formal: src_region=us") == 8);

  try {
    parse_query(
        "formal: from_zone=Trust to_zone=Untrust dst_ip=42.62.94.2 action=maybe");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()) ==
          "action must be permit or deny at position 65");
    auto j = parse_error_json(e);
    CHECK(j["position"] == 65);
  }
}

TEST_CASE("format and parse round-trip") {
  Rng rng(17);
  auto corpus = demo_logs(500, 1);
  for (int i = 0; i < 300; ++i) {
    auto text = render(random_clauses(rng, corpus));
    auto q = parse_query(text);
    auto again = parse_query(format_query(q));
    CHECK(same_query(q, again));
    CHECK(format_query(again) == format_query(q));
  }
  for (const char* t :
       {"formal: from_zone=Trust dst_ip=42.62.94.2 action=deny",
        "corr: neighbors(app:dns, k=4)",
        "auto: application in {dns, ssl} limit=3"}) {
    auto q = parse_query(t);
    CHECK(same_query(q, parse_query(format_query(q))));
  }
}

TEST_CASE("log scan equals an independent full-scan filter") {
  auto corpus = demo_logs(4000, 21);
  Rng rng(23);
  std::size_t nonempty = 0;
  for (int i = 0; i < 300; ++i) {
    auto clauses = random_clauses(rng, corpus);
    auto q = parse_query(render(clauses));
    auto cs = ConstraintSet::from(q.constraints);
    std::vector<std::size_t> want;
    for (std::size_t r = 0; r < corpus.records.size(); ++r) {
      if (text_matches(corpus.records[r], clauses)) want.push_back(r);
    }
    auto serial = scan_logs_serial(corpus, cs);
    auto par = scan_logs(corpus, cs, {4});
    CHECK(serial == want);
    CHECK(par == want);
    nonempty += !want.empty();
  }
  CHECK(nonempty > 50);
}

TEST_CASE("dns log query") {
  auto corpus = demo_logs(3000, 2);
  auto q = parse_query("logs: dst_ip in {4.4.4.4, 8.8.8.8} application=dns");
  Artifacts a;
  a.corpus = &corpus;
  auto r = execute(q, a);
  CHECK(r.provenance == Provenance::kLogSearch);
  CHECK_FALSE(r.escalated);
  CHECK(r.total_matches > 0);
  std::set<std::string> sources;
  for (auto row : r.matches) {
    const auto& rec = corpus.records[row];
    CHECK(rec.application == "dns");
    sources.insert(ipv4::format(rec.src_ip));
  }
  CHECK(sources.count("192.168.1.254"));
  CHECK(sources.count("10.11.29.222"));
  CHECK(sources.count("10.11.29.6"));

  auto limited = execute(
      parse_query("logs: dst_ip in {4.4.4.4, 8.8.8.8} application=dns limit=3"),
      a);
  CHECK(limited.matches.size() == 3);
  CHECK(limited.total_matches == r.total_matches);
  CHECK(std::equal(limited.matches.begin(), limited.matches.end(),
                   r.matches.begin()));
}

TEST_CASE("auto mode escalates only on empty log results") {
  auto corpus = demo_logs(1000, 3);
  auto model = FirewallModel::compile(parse_config(demo_policy_json()));
  Artifacts a;
  a.corpus = &corpus;
  a.policy = &model;

  auto hit = execute(parse_query("auto: application=dns"), a);
  CHECK_FALSE(hit.escalated);
  CHECK(hit.provenance == Provenance::kLogSearch);
  CHECK_FALSE(hit.formal.has_value());

  auto miss = execute(
      parse_query("auto: from_zone=Trust to_zone=Untrust dst_ip=42.62.94.200 "
                  "application=ssh action=permit"),
      a);
  CHECK(miss.escalated);
  CHECK(miss.provenance == Provenance::kFormal);
  CHECK(miss.total_matches == 0);
  REQUIRE(miss.formal.has_value());
  CHECK(miss.formal->sat);
  CHECK(miss.formal->verdict->matched_rule == "BypassFW");

  auto json = query_result_json(parse_query("auto: application=ssh"), miss, a);
  CHECK(json["escalated"] == true);
  CHECK(json["provenance"] == "formal");

  auto empty_logs = execute(parse_query("logs: src_ip=1.2.3.4"), a);
  CHECK(empty_logs.matches.empty());
  CHECK_FALSE(empty_logs.escalated);
}

TEST_CASE("missing artifacts are named") {
  Artifacts none;
  CHECK_THROWS_WITH_AS(execute(parse_query("logs: application=dns"), none),
                       "query needs the log corpus (ingest)", InvalidArgument);
  CHECK_THROWS_WITH_AS(execute(parse_query("formal: application=dns"), none),
                       "query needs the formal model (compile)",
                       InvalidArgument);
  CHECK_THROWS_WITH_AS(execute(parse_query("corr: neighbors(app:dns, k=2)"),
                               none),
                       "query needs the embedding model (train)",
                       InvalidArgument);
  auto corpus = demo_logs(100, 3);
  auto model = FirewallModel::compile(parse_config(demo_policy_json()));
  Artifacts a;
  a.corpus = &corpus;
  a.policy = &model;
  CHECK_THROWS_AS(execute(parse_query("auto: src_region=nowhere"), a),
                  InvalidArgument);
}

TEST_CASE("formal query of the bypass scenario") {
  auto model = FirewallModel::compile(parse_config(demo_policy_json()));
  Artifacts a;
  a.policy = &model;
  auto q = parse_query(
      "formal: from_zone=Trust to_zone=Untrust dst_ip=42.62.94.2 action=permit");
  auto r = execute(q, a);
  CHECK(r.provenance == Provenance::kFormal);
  REQUIRE(r.formal->sat);
  CHECK(r.formal->verdict->matched_rule == "BypassFW");
  CHECK(r.matches.empty());
  CHECK(r.neighbors.empty());

  auto unsat = execute(
      parse_query("formal: from_zone=Guest to_zone=Trust action=permit"), a);
  CHECK_FALSE(unsat.formal->sat);
  auto j = query_result_json(
      parse_query("formal: from_zone=Guest to_zone=Trust action=permit"),
      unsat, a);
  CHECK(j["sat"] == false);
  CHECK(j["verdict"].is_null());
  // Guest may still browse out; only Guest to Trust is closed.
  CHECK(j["conflicting_field"] == "to_zone");
}

TEST_CASE("correlation query") {
  auto corpus = similarity_corpus(400, 5);
  auto vocab = build_vocabulary(corpus, TokenScheme::defaults());
  auto pairs = generate_pairs(corpus, PairSchema::standard(), vocab);
  auto model = train_skipgram_hs(pairs, vocab, {});
  Artifacts a;
  a.embedding = &model;
  auto r = execute(parse_query("corr: neighbors(ip:10.0.0.1, k=4)"), a);
  CHECK(r.provenance == Provenance::kCorrelation);
  CHECK(r.neighbors.size() == 4);
  auto direct = nearest_neighbors(model, Token{TokenCategory::kIp, "10.0.0.1"}, 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(r.neighbors[i].id == direct[i].id);
  CHECK_THROWS_AS(execute(parse_query("corr: neighbors(ip:9.9.9.9, k=4)"), a),
                  NotFoundError);
}

TEST_CASE("witness check basics") {
  auto model = FirewallModel::compile(parse_config(demo_policy_json()));
  auto corpus = demo_logs(300, 4);
  auto none = witness_check(corpus, model, 0, 1);
  CHECK(none.sampled == 0);
  CHECK(none.passed == 0);
  CHECK(none.failures.empty());

  auto all = witness_check(corpus, model, 10000, 1);
  CHECK(all.sampled == corpus.row_count());
  CHECK(all.passed + all.failures.size() == all.sampled);

  auto a = witness_check(corpus, model, 50, 9, {4});
  auto b = witness_check(corpus, model, 50, 9, Parallelism::serial());
  CHECK(a.passed == b.passed);
  REQUIRE(a.failures.size() == b.failures.size());
  for (std::size_t i = 0; i < a.failures.size(); ++i) {
    CHECK(a.failures[i].row == b.failures[i].row);
  }

  FlowRecord r;
  r.src_ip = *ipv4::parse("10.0.0.1");
  r.dst_ip = *ipv4::parse("8.8.8.8");
  r.from_zone = "Trust";
  r.application = "dns";
  CHECK(witness_clauses(r) ==
        "from_zone=Trust src_ip=10.0.0.1 dst_ip=8.8.8.8 application=dns");
  CHECK_NOTHROW(parse_query("formal: " + witness_clauses(r)));
}

TEST_CASE("witness check agrees with enumeration on small domains") {
  Rng rng(31);
  std::size_t total_passed = 0, total_failed = 0;
  for (int cfg_i = 0; cfg_i < 10; ++cfg_i) {
    auto cfg = parse_config(oracle::random_small_config(rng, 8));
    auto model = FirewallModel::compile(cfg);
    SmallOracle oracle(cfg);

    LogCorpus corpus;
    corpus.schema = {Field::kSrcIp, Field::kDstIp, Field::kFromZone,
                     Field::kToZone, Field::kApplication};
    for (int i = 0; i < 200; ++i) {
      FlowRecord rec;
      rec.from_zone = SmallDomain::zones[rng.below(4)];
      rec.to_zone = SmallDomain::zones[rng.below(4)];
      rec.src_ip = SmallDomain::base + static_cast<std::uint32_t>(rng.below(16));
      rec.dst_ip = SmallDomain::base + static_cast<std::uint32_t>(rng.below(16));
      rec.application = SmallDomain::apps[rng.below(4)];
      corpus.records.push_back(rec);
    }
    auto report = witness_check(corpus, model, 200, 5);
    total_passed += report.passed;
    total_failed += report.failures.size();
    std::set<std::size_t> failed;
    for (const auto& f : report.failures) {
      failed.insert(f.row);
      const bool known = f.reason.rfind("no PERMIT packet once ", 0) == 0 ||
                         f.reason == "policy permits no traffic";
      CHECK(known);
    }
    // Permitted (zones, addresses, application) tuples by enumeration.
    std::set<std::array<std::size_t, 5>> permitted_tuples;
    for (std::size_t code = 0; code < SmallOracle::kPackets; ++code) {
      if (oracle.outcome(code).action != Action::kPermit) continue;
      const auto f = SmallOracle::fields(code);
      permitted_tuples.insert({f[0], f[1], f[2], f[3], f[4]});
    }
    auto index = [](const auto& arr, const std::string& v) {
      return static_cast<std::size_t>(
          std::find(arr.begin(), arr.end(), v) - arr.begin());
    };
    for (std::size_t row = 0; row < corpus.records.size(); ++row) {
      const auto& rec = corpus.records[row];
      const bool permitted = permitted_tuples.count(
          {index(SmallDomain::zones, *rec.from_zone),
           index(SmallDomain::zones, *rec.to_zone),
           rec.src_ip - SmallDomain::base, rec.dst_ip - SmallDomain::base,
           index(SmallDomain::apps, *rec.application)});
      CHECK(permitted == !failed.count(row));
      if (permitted) {
        auto sat = model.solve(witness_constraints(rec), Action::kPermit);
        REQUIRE(sat.sat);
        CHECK(model.evaluate(sat.verdict->witness).action == Action::kPermit);
      }
    }
  }
  CHECK(total_passed > 0);
  CHECK(total_failed > 0);
}
