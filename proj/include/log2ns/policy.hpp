#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "log2ns/interval_set.hpp"

namespace log2ns {

enum class Action : std::uint8_t { kDeny = 0, kPermit = 1 };

std::string_view action_name(Action a);  // "PERMIT" / "DENY"
std::optional<Action> action_from_name(std::string_view name);

// ---------------------------------------------------------------------------
// Declarative configuration

struct ServiceObject {
  std::string protocol;  // upper case
  IntervalSet ports;
};

enum class ServiceMatch { kAny, kApplicationDefault, kList };

// A rule with every name resolved. nullopt members mean "any".
struct SecurityRule {
  std::string name;
  std::optional<std::set<std::string>> from_zones;
  std::optional<std::set<std::string>> to_zones;
  std::optional<IntervalSet> src_addrs;
  std::optional<IntervalSet> dst_addrs;
  std::vector<std::string> src_names;  // as written in the config
  std::vector<std::string> dst_names;
  std::optional<std::set<std::string>> applications;  // groups expanded
  ServiceMatch services = ServiceMatch::kAny;
  std::vector<std::string> service_names;  // kList only
  Action action = Action::kDeny;
};

struct FirewallConfig {
  std::string vsys = "vsys1";
  std::vector<std::string> zones;  // declaration order
  std::map<std::string, IntervalSet> address_objects;
  std::map<std::string, std::vector<std::string>> address_groups;
  // Application -> default services (empty when the app has none).
  std::map<std::string, std::vector<std::string>> applications;
  std::map<std::string, std::vector<std::string>> application_groups;
  std::map<std::string, ServiceObject> service_objects;
  std::vector<SecurityRule> rules;
  Action default_action = Action::kDeny;
};

// Parses the JSON policy document. Unresolved names, cyclic groups and
// duplicate rule names throw ConfigError.
FirewallConfig parse_config(std::string_view source);

// ---------------------------------------------------------------------------
// Packets

// Variables of the packet space, in witness (lexicographic) order.
enum class PacketField : std::uint8_t {
  kFromZone,
  kToZone,
  kSrcIp,
  kDstIp,
  kApplication,
  kProtocol,
  kDstPort,
};
inline constexpr std::size_t kPacketFieldCount = 7;

std::string_view packet_field_name(PacketField f);
std::optional<PacketField> packet_field_from_name(std::string_view name);

struct Packet {
  std::string from_zone;
  std::string to_zone;
  std::uint32_t src_ip = 0;
  std::uint32_t dst_ip = 0;
  std::string application;
  std::string protocol;
  std::uint16_t dst_port = 0;

  bool operator==(const Packet&) const = default;
};

// Constraint on a named (discrete) field: optional allow-list minus a
// deny-list. Default-constructed admits everything.
struct NameConstraint {
  std::optional<std::set<std::string>> allow;
  std::set<std::string> deny;

  void require_in(const std::set<std::string>& values);
  void exclude(const std::set<std::string>& values);
  bool admits(const std::string& value) const;
  bool unconstrained() const { return !allow && deny.empty(); }
};

// Partially specified packet. Unset members are ANY.
struct SymbolicPacket {
  NameConstraint from_zone;
  NameConstraint to_zone;
  std::optional<IntervalSet> src_ip;
  std::optional<IntervalSet> dst_ip;
  NameConstraint application;
  NameConstraint protocol;
  std::optional<IntervalSet> dst_port;

  bool contains(const Packet& p) const;
  // Keeps only the constraints on fields [0, upto).
  SymbolicPacket prefix(std::size_t upto) const;
};

// ---------------------------------------------------------------------------
// Compiled model

// One product box of the packet space. Discrete fields hold indices into
// the model's sorted domains.
using Box = std::array<IntervalSet, kPacketFieldCount>;

bool box_empty(const Box& b);
Box box_intersect(const Box& a, const Box& b);
// a \ b as pairwise-disjoint boxes.
std::vector<Box> box_subtract(const Box& a, const Box& b);

struct Verdict {
  Action action = Action::kDeny;
  std::string matched_rule;  // rule name or "DEFAULT"
  std::optional<std::size_t> rule_index;
  std::vector<std::string> trace_lines;
  std::string filter;  // "zone Trust vsys1 to zone Untrust vsys1"
  Packet witness;
};

struct SolveResult {
  bool sat = false;
  std::optional<Verdict> verdict;  // present iff sat
};

struct EffectiveRegion {
  std::string rule;
  std::vector<Box> boxes;  // pairwise disjoint
  bool shadowed = true;
};

struct RuleInfo {
  std::size_t index = 0;  // into config().rules
  std::vector<Box> guard;  // pairwise disjoint
};

class FirewallModel {
 public:
  static FirewallModel compile(FirewallConfig config);

  const FirewallConfig& config() const { return config_; }
  const std::vector<RuleInfo>& rules() const { return rules_; }
  const SecurityRule& rule(std::size_t index) const {
    return config_.rules[index];
  }
  std::optional<std::size_t> rule_index(std::string_view name) const;

  // Sorted discrete domains.
  const std::vector<std::string>& zones() const { return zones_; }
  const std::vector<std::string>& applications() const { return apps_; }
  const std::vector<std::string>& protocols() const { return protocols_; }
  const std::vector<std::string>& domain(PacketField f) const;

  Box full_box() const;
  // Box of packets admitted by `sp`; names outside a domain are dropped.
  Box to_box(const SymbolicPacket& sp) const;
  bool box_contains(const Box& b, const Packet& p) const;

  // First-match evaluation. Out-of-domain zone/app/protocol throws.
  Verdict evaluate(const Packet& packet) const;

  // SAT iff some packet admitted by `constraints` gets `desired` (or any
  // action when unset). The witness is the lexicographically smallest such
  // packet in PacketField order.
  SolveResult solve(const SymbolicPacket& constraints,
                    std::optional<Action> desired = std::nullopt) const;

  // First field (in PacketField order) whose constraint empties the region
  // of packets receiving `desired`; nullopt when `constraints` is SAT.
  std::optional<PacketField> first_conflicting_field(
      const SymbolicPacket& constraints, Action desired) const;

  // Packets matched by the rule and by no earlier rule.
  EffectiveRegion effective_region(std::string_view rule) const;
  EffectiveRegion effective_region(std::size_t index) const;
  // Packets matched by no rule.
  std::vector<Box> default_region() const;

  Packet packet_at(const Box& b) const;  // per-field minimum of a box
  std::string describe_field(PacketField f, const IntervalSet& s) const;

 private:
  std::vector<Box> region_of(std::size_t index, const Box& within) const;
  std::vector<Box> default_region_within(const Box& within) const;
  std::vector<std::string> trace(const SecurityRule& rule,
                                 const Packet& packet) const;
  std::uint32_t index_of(PacketField f, const std::string& value) const;
  using Point = std::array<std::uint32_t, kPacketFieldCount>;
  Point point_of(const Packet& p) const;

  FirewallConfig config_;
  std::vector<RuleInfo> rules_;
  std::vector<std::string> zones_;
  std::vector<std::string> apps_;
  std::vector<std::string> protocols_;
};

}  // namespace log2ns
