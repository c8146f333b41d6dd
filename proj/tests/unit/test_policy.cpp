#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "log2ns/error.hpp"
#include "log2ns/fixtures.hpp"
#include "log2ns/ipv4.hpp"
#include "log2ns/json_io.hpp"
#include "log2ns/policy.hpp"
#include "oracles.hpp"

using namespace log2ns;
using oracle::SmallDomain;
using oracle::SmallOracle;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

FirewallModel demo_model() {
  return FirewallModel::compile(parse_config(demo_policy_json()));
}

std::string policy_with_rules(const nlohmann::json& rules) {
  nlohmann::json doc = {
      {"zones", {"Trust", "Untrust", "Internal"}},
      {"address_objects", {{"lan", {"10.0.0.0/24"}}}},
      {"applications", {{"dns", {{"default_service", {"dns"}}}}, {"ssl", {}}}},
      {"service_objects", {{"dns", {{"protocol", "udp"}, {"port", 53}}}}},
      {"rules", rules}};
  return doc.dump();
}

bool in_region(const FirewallModel& m, const std::vector<Box>& boxes,
               const Packet& p) {
  for (const auto& b : boxes) {
    if (m.box_contains(b, p)) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("single rule parses") {
  auto cfg = parse_config(demo_policy_json());
  const SecurityRule* sr1 = nullptr;
  for (const auto& r : cfg.rules) {
    if (r.name == "SR1") sr1 = &r;
  }
  REQUIRE(sr1);
  CHECK(sr1->from_zones == std::set<std::string>{"Trust"});
  CHECK(sr1->to_zones == std::set<std::string>{"Internal"});
  CHECK_FALSE(sr1->applications.has_value());
  CHECK_FALSE(sr1->src_addrs.has_value());
  CHECK(sr1->action == Action::kPermit);

  auto model = FirewallModel::compile(cfg);
  Packet p{"Trust", "Internal", *ipv4::parse("10.11.29.5"),
           *ipv4::parse("10.20.0.7"), "smb", "TCP", 445};
  auto v = model.evaluate(p);
  CHECK(v.action == Action::kPermit);
  CHECK(v.matched_rule == "SR1");
}

TEST_CASE("config errors") {
  using nlohmann::json;
  CHECK_THROWS_WITH_AS(
      parse_config(policy_with_rules(json::array(
          {{{"name", "r"}, {"from_zones", {"DMZ"}}, {"action", "allow"}}}))),
      "rule 'r': unresolved zone 'DMZ'", ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_config(policy_with_rules(json::array(
          {{{"name", "r"}, {"action", "allow"}},
           {{"name", "r"}, {"action", "deny"}}}))),
      "duplicate rule name 'r'", ConfigError);
  CHECK_THROWS_AS(
      parse_config(policy_with_rules(json::array(
          {{{"name", "r"}, {"dst_addrs", {"nowhere"}}, {"action", "deny"}}}))),
      ConfigError);
  CHECK_THROWS_AS(
      parse_config(policy_with_rules(json::array(
          {{{"name", "r"}, {"applications", {"ftp"}}, {"action", "deny"}}}))),
      ConfigError);
  CHECK_THROWS_AS(
      parse_config(policy_with_rules(json::array(
          {{{"name", "r"}, {"services", {"smtp"}}, {"action", "deny"}}}))),
      ConfigError);
  CHECK_THROWS_AS(
      parse_config(policy_with_rules(
          json::array({{{"name", "r"}, {"action", "maybe"}}}))),
      ConfigError);
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);

  json cyclic = json::parse(policy_with_rules(json::array()));
  cyclic["address_groups"] = {{"g1", {"g2"}}, {"g2", {"g1"}}};
  cyclic["rules"] = json::array(
      {{{"name", "r"}, {"src_addrs", {"g1"}}, {"action", "deny"}}});
  CHECK_THROWS_AS(parse_config(cyclic.dump()), ConfigError);
}

TEST_CASE("empty rule list is default deny") {
  auto model = FirewallModel::compile(parse_config(policy_with_rules(
      nlohmann::json::array())));
  CHECK(model.rules().empty());
  Packet p{"Trust", "Untrust", 1, 2, "dns", "UDP", 53};
  auto v = model.evaluate(p);
  CHECK(v.action == Action::kDeny);
  CHECK(v.matched_rule == "DEFAULT");
  CHECK_FALSE(v.rule_index.has_value());
  CHECK_FALSE(model.solve({}, Action::kPermit).sat);
  auto deny = model.solve({}, Action::kDeny);
  CHECK(deny.sat);
  CHECK(deny.verdict->matched_rule == "DEFAULT");
}

TEST_CASE("identical rules shadow the second") {
  using nlohmann::json;
  json r = {{"from_zones", {"Trust"}}, {"applications", {"dns"}},
            {"action", "allow"}};
  json a = r, b = r;
  a["name"] = "first";
  b["name"] = "second";
  auto model = FirewallModel::compile(
      parse_config(policy_with_rules(json::array({a, b}))));
  auto second = model.effective_region("second");
  CHECK(second.shadowed);
  CHECK(second.boxes.empty());
  auto first = model.effective_region("first");
  CHECK_FALSE(first.shadowed);
  // A lone rule's region is its guard.
  REQUIRE(first.boxes.size() == model.rules()[0].guard.size());
  for (std::size_t i = 0; i < first.boxes.size(); ++i) {
    CHECK(first.boxes[i] == model.rules()[0].guard[i]);
  }
  CHECK_THROWS_AS(model.effective_region("third"), NotFoundError);
}

TEST_CASE("out-of-domain packets are rejected") {
  auto model = demo_model();
  Packet p{"Mars", "Untrust", 1, 2, "dns", "UDP", 53};
  CHECK_THROWS_AS(model.evaluate(p), InvalidArgument);
  p.from_zone = "Trust";
  p.application = "quake";
  CHECK_THROWS_AS(model.evaluate(p), InvalidArgument);
}

TEST_CASE("evaluate agrees with a rule-by-rule interpreter") {
  Rng rng(101);
  for (int cfg_i = 0; cfg_i < 20; ++cfg_i) {
    auto cfg = parse_config(oracle::random_small_config(rng, 10));
    auto model = FirewallModel::compile(cfg);
    SmallOracle oracle(cfg);
    for (int i = 0; i < 1000; ++i) {
      const auto code = rng.below(SmallOracle::kPackets);
      const auto p = SmallOracle::packet(code);
      const auto v = model.evaluate(p);
      const auto& want = oracle.outcome(code);
      CHECK(v.action == want.action);
      if (want.rule < 0) {
        CHECK(v.matched_rule == "DEFAULT");
      } else {
        CHECK(v.matched_rule == cfg.rules[want.rule].name);
        CHECK(v.trace_lines.front() ==
              "Matched security rule " + cfg.rules[want.rule].name);
      }
      CHECK(v.witness == p);
    }
  }
}

TEST_CASE("solve agrees with enumeration and witnesses replay") {
  Rng rng(202);
  for (int cfg_i = 0; cfg_i < 15; ++cfg_i) {
    auto cfg = parse_config(oracle::random_small_config(rng, 10));
    auto model = FirewallModel::compile(cfg);
    SmallOracle oracle(cfg);
    for (int q = 0; q < 40; ++q) {
      auto sp = oracle::random_small_query(rng);
      std::optional<Action> desired;
      if (rng.below(3)) desired = rng.below(2) ? Action::kPermit : Action::kDeny;
      auto got = model.solve(sp, desired);
      auto want = oracle.solve(sp, desired);
      REQUIRE(got.sat == want.has_value());
      CHECK(got.verdict.has_value() == got.sat);
      if (!got.sat) {
        if (!desired) continue;
        auto field = model.first_conflicting_field(sp, *desired);
        CHECK(field.has_value() == model.solve({}, *desired).sat);
        if (field) {
          const auto f = static_cast<std::size_t>(*field);
          CHECK(model.solve(sp.prefix(f), *desired).sat);
          CHECK_FALSE(model.solve(sp.prefix(f + 1), *desired).sat);
        }
        continue;
      }
      const auto& v = *got.verdict;
      CHECK(SmallOracle::code_of(v.witness) == want);
      CHECK(sp.contains(v.witness));
      auto replay = model.evaluate(v.witness);
      CHECK(replay.action == v.action);
      CHECK(replay.matched_rule == v.matched_rule);
      CHECK(replay.trace_lines == v.trace_lines);
      if (desired) {
        CHECK(v.action == *desired);
        CHECK_FALSE(model.first_conflicting_field(sp, *desired).has_value());
      }
    }
  }
}

TEST_CASE("effective regions partition the packet space") {
  Rng rng(303);
  for (int cfg_i = 0; cfg_i < 6; ++cfg_i) {
    auto cfg = parse_config(oracle::random_small_config(rng, 8));
    auto model = FirewallModel::compile(cfg);
    SmallOracle oracle(cfg);
    std::vector<EffectiveRegion> regions;
    for (std::size_t i = 0; i < cfg.rules.size(); ++i) {
      regions.push_back(model.effective_region(i));
    }
    auto fallback = model.default_region();
    std::vector<bool> hit(cfg.rules.size(), false);
    for (std::size_t code = 0; code < SmallOracle::kPackets; code += 7) {
      const auto p = SmallOracle::packet(code);
      int owner = -2;
      int owners = 0;
      for (std::size_t i = 0; i < regions.size(); ++i) {
        if (in_region(model, regions[i].boxes, p)) {
          owner = static_cast<int>(i);
          ++owners;
          hit[i] = true;
        }
      }
      if (in_region(model, fallback, p)) {
        owner = -1;
        ++owners;
      }
      CHECK(owners == 1);
      CHECK(owner == oracle.outcome(code).rule);
    }
    for (std::size_t i = 0; i < regions.size(); ++i) {
      // Sampled codes can miss small regions; only the implication holds.
      if (hit[i]) CHECK_FALSE(regions[i].shadowed);
      CHECK(regions[i].shadowed == regions[i].boxes.empty());
    }
  }
}

TEST_CASE("box subtraction yields disjoint covering pieces") {
  auto model = demo_model();
  Rng rng(7);
  auto random_box = [&] {
    Box b = model.full_box();
    for (std::size_t f = 0; f < kPacketFieldCount; ++f) {
      const auto hi = b[f].empty() ? 0u : b[f].intervals().back().hi;
      auto lo_v = static_cast<std::uint32_t>(rng.below(std::min<std::uint64_t>(hi, 20) + 1));
      auto hi_v = lo_v + static_cast<std::uint32_t>(rng.below(5));
      b[f] = b[f].intersect(IntervalSet::range(lo_v, hi_v));
    }
    return b;
  };
  for (int t = 0; t < 200; ++t) {
    Box a = random_box(), b = random_box();
    auto pieces = box_subtract(a, b);
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      CHECK_FALSE(box_empty(pieces[i]));
      CHECK(box_empty(box_intersect(pieces[i], b)));
      CHECK(box_intersect(pieces[i], a) == pieces[i]);
      for (std::size_t j = i + 1; j < pieces.size(); ++j) {
        CHECK(box_empty(box_intersect(pieces[i], pieces[j])));
      }
    }
  }
}

TEST_CASE("bypass verdict matches the golden file") {
  auto model = demo_model();
  SymbolicPacket sp;
  sp.from_zone.require_in({"Trust"});
  sp.to_zone.require_in({"Untrust"});
  sp.dst_ip = IntervalSet::range(*ipv4::parse("42.62.94.2"), *ipv4::parse("42.62.94.2"));
  auto result = model.solve(sp, Action::kPermit);
  REQUIRE(result.sat);
  const auto& v = *result.verdict;
  CHECK(v.action == Action::kPermit);
  CHECK(v.matched_rule == "BypassFW");
  CHECK(v.filter == "zone Trust vsys1 to zone Untrust vsys1");
  const std::vector<std::string> trace = {
      "Matched security rule BypassFW", "Matched source address",
      "Matched address any",            "Matched destination address",
      "Matched service application-default", "Matched application any"};
  CHECK(v.trace_lines == trace);

  auto golden = nlohmann::json::parse(
      read_file(std::string(LOG2NS_GOLDEN_DIR) + "/bypass_verdict.json"));
  CHECK(to_json(v) == golden);
  CHECK(to_json(v).dump(2) + "\n" ==
        read_file(std::string(LOG2NS_GOLDEN_DIR) + "/bypass_verdict.json"));
}

TEST_CASE("dns remediation flips the verdict") {
  SymbolicPacket sp;
  sp.dst_ip = IntervalSet({{*ipv4::parse("4.4.4.4"), *ipv4::parse("4.4.4.4")},
                           {*ipv4::parse("8.8.8.8"), *ipv4::parse("8.8.8.8")}});
  sp.application.require_in({"dns"});

  auto before = demo_model();
  auto permit = before.solve(sp, Action::kPermit);
  REQUIRE(permit.sat);
  CHECK(permit.verdict->matched_rule == "AllowDNS");

  auto after = FirewallModel::compile(parse_config(remediated_policy_json()));
  CHECK(*after.rule_index("BlockPublicDNS") < *after.rule_index("AllowDNS"));
  CHECK_FALSE(after.solve(sp, Action::kPermit).sat);
  auto deny = after.solve(sp, Action::kDeny);
  REQUIRE(deny.sat);
  CHECK(deny.verdict->matched_rule == "BlockPublicDNS");
  CHECK(deny.verdict->action == Action::kDeny);
  // Other applications still reach those resolvers.
  CHECK(after.first_conflicting_field(sp, Action::kPermit) ==
        PacketField::kApplication);
}

TEST_CASE("contradictory constraints are unsat, not errors") {
  auto model = demo_model();
  SymbolicPacket sp;
  sp.from_zone.require_in({"Trust"});
  sp.from_zone.exclude({"Trust"});
  auto r = model.solve(sp);
  CHECK_FALSE(r.sat);
  CHECK_FALSE(r.verdict.has_value());
  CHECK(model.first_conflicting_field(sp, Action::kPermit) ==
        PacketField::kFromZone);

  SymbolicPacket ports;
  ports.dst_port = IntervalSet();
  CHECK_FALSE(model.solve(ports).sat);
}
