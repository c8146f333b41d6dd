#include <algorithm>
#include <array>

#include "log2ns/error.hpp"
#include "log2ns/ipv4.hpp"
#include "log2ns/policy.hpp"

namespace log2ns {

namespace {

constexpr std::array<std::string_view, kPacketFieldCount> kPacketFieldNames = {
    "from_zone", "to_zone", "src_ip", "dst_ip",
    "application", "protocol", "dst_port",
};

constexpr std::size_t idx(PacketField f) { return static_cast<std::size_t>(f); }

IntervalSet index_set(const std::vector<std::string>& domain,
                      const std::set<std::string>& names) {
  std::vector<Interval> parts;
  for (const auto& n : names) {
    auto it = std::lower_bound(domain.begin(), domain.end(), n);
    if (it != domain.end() && *it == n) {
      const auto i = static_cast<std::uint32_t>(it - domain.begin());
      parts.push_back({i, i});
    }
  }
  return IntervalSet(std::move(parts));
}

IntervalSet full_index_set(std::size_t n) {
  if (n == 0) return {};
  return IntervalSet::range(0, static_cast<std::uint32_t>(n - 1));
}

std::vector<Box> subtract_all(std::vector<Box> pieces, const Box& cut) {
  std::vector<Box> out;
  for (const auto& p : pieces) {
    auto parts = box_subtract(p, cut);
    out.insert(out.end(), std::make_move_iterator(parts.begin()),
               std::make_move_iterator(parts.end()));
  }
  return out;
}

using Point = std::array<std::uint32_t, kPacketFieldCount>;

Point box_min(const Box& b) {
  Point p{};
  for (std::size_t f = 0; f < kPacketFieldCount; ++f) p[f] = *b[f].min();
  return p;
}

}  // namespace

std::string_view packet_field_name(PacketField f) {
  return kPacketFieldNames[idx(f)];
}

std::optional<PacketField> packet_field_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kPacketFieldNames.size(); ++i) {
    if (kPacketFieldNames[i] == name) return static_cast<PacketField>(i);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

void NameConstraint::require_in(const std::set<std::string>& values) {
  if (!allow) {
    allow = values;
    return;
  }
  std::set<std::string> both;
  std::set_intersection(allow->begin(), allow->end(), values.begin(),
                        values.end(), std::inserter(both, both.begin()));
  allow = std::move(both);
}

void NameConstraint::exclude(const std::set<std::string>& values) {
  deny.insert(values.begin(), values.end());
}

bool NameConstraint::admits(const std::string& value) const {
  if (allow && !allow->contains(value)) return false;
  return !deny.contains(value);
}

bool SymbolicPacket::contains(const Packet& p) const {
  return from_zone.admits(p.from_zone) && to_zone.admits(p.to_zone) &&
         (!src_ip || src_ip->contains(p.src_ip)) &&
         (!dst_ip || dst_ip->contains(p.dst_ip)) &&
         application.admits(p.application) && protocol.admits(p.protocol) &&
         (!dst_port || dst_port->contains(p.dst_port));
}

SymbolicPacket SymbolicPacket::prefix(std::size_t upto) const {
  SymbolicPacket out;
  if (upto > idx(PacketField::kFromZone)) out.from_zone = from_zone;
  if (upto > idx(PacketField::kToZone)) out.to_zone = to_zone;
  if (upto > idx(PacketField::kSrcIp)) out.src_ip = src_ip;
  if (upto > idx(PacketField::kDstIp)) out.dst_ip = dst_ip;
  if (upto > idx(PacketField::kApplication)) out.application = application;
  if (upto > idx(PacketField::kProtocol)) out.protocol = protocol;
  if (upto > idx(PacketField::kDstPort)) out.dst_port = dst_port;
  return out;
}

// ---------------------------------------------------------------------------

bool box_empty(const Box& b) {
  return std::any_of(b.begin(), b.end(),
                     [](const IntervalSet& s) { return s.empty(); });
}

Box box_intersect(const Box& a, const Box& b) {
  Box out;
  for (std::size_t f = 0; f < kPacketFieldCount; ++f) {
    out[f] = a[f].intersect(b[f]);
  }
  return out;
}

std::vector<Box> box_subtract(const Box& a, const Box& b) {
  if (box_empty(a)) return {};
  if (box_empty(box_intersect(a, b))) return {a};
  std::vector<Box> out;
  Box rest = a;
  for (std::size_t f = 0; f < kPacketFieldCount; ++f) {
    auto outside = rest[f].subtract(b[f]);
    if (!outside.empty()) {
      Box piece = rest;
      piece[f] = std::move(outside);
      out.push_back(std::move(piece));
    }
    rest[f] = rest[f].intersect(b[f]);
  }
  return out;
}

// ---------------------------------------------------------------------------

FirewallModel FirewallModel::compile(FirewallConfig config) {
  FirewallModel m;
  m.config_ = std::move(config);
  const auto& cfg = m.config_;

  m.zones_ = cfg.zones;
  std::sort(m.zones_.begin(), m.zones_.end());
  for (const auto& [name, defaults] : cfg.applications) m.apps_.push_back(name);
  std::set<std::string> protocols = {"ICMP", "TCP", "UDP"};
  for (const auto& [name, svc] : cfg.service_objects) {
    protocols.insert(svc.protocol);
  }
  m.protocols_.assign(protocols.begin(), protocols.end());

  const Box full = m.full_box();
  auto proto_index = [&](const std::string& p) {
    return IntervalSet::single(static_cast<std::uint32_t>(
        std::lower_bound(m.protocols_.begin(), m.protocols_.end(), p) -
        m.protocols_.begin()));
  };
  // protocol -> ports for a list of service objects
  auto by_protocol = [&](const std::vector<std::string>& services) {
    std::map<std::string, IntervalSet> out;
    for (const auto& s : services) {
      const auto& svc = cfg.service_objects.at(s);
      out[svc.protocol] = out[svc.protocol].unite(svc.ports);
    }
    return out;
  };

  for (std::size_t i = 0; i < cfg.rules.size(); ++i) {
    const auto& rule = cfg.rules[i];
    Box base = full;
    if (rule.from_zones) {
      base[idx(PacketField::kFromZone)] = index_set(m.zones_, *rule.from_zones);
    }
    if (rule.to_zones) {
      base[idx(PacketField::kToZone)] = index_set(m.zones_, *rule.to_zones);
    }
    if (rule.src_addrs) base[idx(PacketField::kSrcIp)] = *rule.src_addrs;
    if (rule.dst_addrs) base[idx(PacketField::kDstIp)] = *rule.dst_addrs;
    if (rule.applications) {
      base[idx(PacketField::kApplication)] =
          index_set(m.apps_, *rule.applications);
    }

    RuleInfo info;
    info.index = i;
    auto add = [&](const IntervalSet& apps, const IntervalSet& protos,
                   const IntervalSet& ports) {
      Box b = base;
      b[idx(PacketField::kApplication)] = apps;
      b[idx(PacketField::kProtocol)] = protos;
      b[idx(PacketField::kDstPort)] = ports;
      if (!box_empty(b)) info.guard.push_back(std::move(b));
    };
    const auto& rule_apps = base[idx(PacketField::kApplication)];
    const auto& all_protos = full[idx(PacketField::kProtocol)];
    const auto& all_ports = full[idx(PacketField::kDstPort)];

    switch (rule.services) {
      case ServiceMatch::kAny:
        add(rule_apps, all_protos, all_ports);
        break;
      case ServiceMatch::kList:
        for (const auto& [proto, ports] : by_protocol(rule.service_names)) {
          add(rule_apps, proto_index(proto), ports);
        }
        break;
      case ServiceMatch::kApplicationDefault: {
        // Group the rule's applications by their default-service signature
        // so each signature yields one box per protocol.
        auto less_sig = [](const std::map<std::string, IntervalSet>& a,
                           const std::map<std::string, IntervalSet>& b) {
          return std::lexicographical_compare(
              a.begin(), a.end(), b.begin(), b.end(),
              [](const auto& x, const auto& y) {
                if (x.first != y.first) return x.first < y.first;
                return x.second.intervals() < y.second.intervals();
              });
        };
        std::vector<std::pair<std::map<std::string, IntervalSet>,
                              std::vector<Interval>>>
            sigs;
        for (const auto& iv : rule_apps.intervals()) {
          for (std::uint64_t a = iv.lo; a <= iv.hi; ++a) {
            const auto sig =
                by_protocol(cfg.applications.at(m.apps_[a]));
            auto it = std::find_if(sigs.begin(), sigs.end(), [&](auto& s) {
              return !less_sig(s.first, sig) && !less_sig(sig, s.first);
            });
            const auto ai = static_cast<std::uint32_t>(a);
            if (it == sigs.end()) {
              sigs.push_back({sig, {{ai, ai}}});
            } else {
              it->second.push_back({ai, ai});
            }
          }
        }
        for (auto& [sig, apps] : sigs) {
          const IntervalSet app_set(apps);
          if (sig.empty()) {
            add(app_set, all_protos, all_ports);
            continue;
          }
          for (const auto& [proto, ports] : sig) {
            add(app_set, proto_index(proto), ports);
          }
        }
        break;
      }
    }
    m.rules_.push_back(std::move(info));
  }
  return m;
}

std::optional<std::size_t> FirewallModel::rule_index(
    std::string_view name) const {
  for (std::size_t i = 0; i < config_.rules.size(); ++i) {
    if (config_.rules[i].name == name) return i;
  }
  return std::nullopt;
}

const std::vector<std::string>& FirewallModel::domain(PacketField f) const {
  switch (f) {
    case PacketField::kFromZone:
    case PacketField::kToZone:
      return zones_;
    case PacketField::kApplication:
      return apps_;
    case PacketField::kProtocol:
      return protocols_;
    default:
      throw InvalidArgument("field '" + std::string(packet_field_name(f)) +
                            "' has no named domain");
  }
}

Box FirewallModel::full_box() const {
  Box b;
  b[idx(PacketField::kFromZone)] = full_index_set(zones_.size());
  b[idx(PacketField::kToZone)] = full_index_set(zones_.size());
  b[idx(PacketField::kSrcIp)] = IntervalSet::range(0, ipv4::kMax);
  b[idx(PacketField::kDstIp)] = IntervalSet::range(0, ipv4::kMax);
  b[idx(PacketField::kApplication)] = full_index_set(apps_.size());
  b[idx(PacketField::kProtocol)] = full_index_set(protocols_.size());
  b[idx(PacketField::kDstPort)] = IntervalSet::range(0, 65535);
  return b;
}

Box FirewallModel::to_box(const SymbolicPacket& sp) const {
  Box b = full_box();
  auto named = [&](PacketField f, const NameConstraint& c) {
    const auto& dom = domain(f);
    auto& slot = b[idx(f)];
    if (c.allow) slot = slot.intersect(index_set(dom, *c.allow));
    slot = slot.subtract(index_set(dom, c.deny));
  };
  named(PacketField::kFromZone, sp.from_zone);
  named(PacketField::kToZone, sp.to_zone);
  named(PacketField::kApplication, sp.application);
  named(PacketField::kProtocol, sp.protocol);
  auto interval = [&](PacketField f, const std::optional<IntervalSet>& c) {
    if (c) b[idx(f)] = b[idx(f)].intersect(*c);
  };
  interval(PacketField::kSrcIp, sp.src_ip);
  interval(PacketField::kDstIp, sp.dst_ip);
  interval(PacketField::kDstPort, sp.dst_port);
  return b;
}

std::uint32_t FirewallModel::index_of(PacketField f,
                                      const std::string& value) const {
  const auto& dom = domain(f);
  auto it = std::lower_bound(dom.begin(), dom.end(), value);
  if (it == dom.end() || *it != value) {
    throw InvalidArgument(std::string(packet_field_name(f)) + " '" + value +
                          "' is outside the model's domain");
  }
  return static_cast<std::uint32_t>(it - dom.begin());
}

FirewallModel::Point FirewallModel::point_of(const Packet& p) const {
  Point pt{};
  pt[idx(PacketField::kFromZone)] = index_of(PacketField::kFromZone, p.from_zone);
  pt[idx(PacketField::kToZone)] = index_of(PacketField::kToZone, p.to_zone);
  pt[idx(PacketField::kSrcIp)] = p.src_ip;
  pt[idx(PacketField::kDstIp)] = p.dst_ip;
  pt[idx(PacketField::kApplication)] =
      index_of(PacketField::kApplication, p.application);
  pt[idx(PacketField::kProtocol)] = index_of(PacketField::kProtocol, p.protocol);
  pt[idx(PacketField::kDstPort)] = p.dst_port;
  return pt;
}

bool FirewallModel::box_contains(const Box& b, const Packet& p) const {
  const auto pt = point_of(p);
  for (std::size_t f = 0; f < kPacketFieldCount; ++f) {
    if (!b[f].contains(pt[f])) return false;
  }
  return true;
}

Packet FirewallModel::packet_at(const Box& b) const {
  const auto pt = box_min(b);
  Packet p;
  p.from_zone = zones_[pt[idx(PacketField::kFromZone)]];
  p.to_zone = zones_[pt[idx(PacketField::kToZone)]];
  p.src_ip = pt[idx(PacketField::kSrcIp)];
  p.dst_ip = pt[idx(PacketField::kDstIp)];
  p.application = apps_[pt[idx(PacketField::kApplication)]];
  p.protocol = protocols_[pt[idx(PacketField::kProtocol)]];
  p.dst_port = static_cast<std::uint16_t>(pt[idx(PacketField::kDstPort)]);
  return p;
}

std::vector<std::string> FirewallModel::trace(const SecurityRule& rule,
                                              const Packet& packet) const {
  std::vector<std::string> lines;
  lines.push_back("Matched security rule " + rule.name);
  lines.push_back("Matched source address");
  if (!rule.src_addrs) lines.push_back("Matched address any");
  lines.push_back("Matched destination address");
  if (!rule.dst_addrs) lines.push_back("Matched address any");
  switch (rule.services) {
    case ServiceMatch::kAny:
      lines.push_back("Matched service any");
      break;
    case ServiceMatch::kApplicationDefault:
      lines.push_back("Matched service application-default");
      break;
    case ServiceMatch::kList:
      for (const auto& name : rule.service_names) {
        const auto& svc = config_.service_objects.at(name);
        if (svc.protocol == packet.protocol &&
            svc.ports.contains(packet.dst_port)) {
          lines.push_back("Matched service " + name);
          break;
        }
      }
      break;
  }
  lines.push_back(rule.applications
                      ? "Matched application " + packet.application
                      : std::string("Matched application any"));
  return lines;
}

Verdict FirewallModel::evaluate(const Packet& packet) const {
  const auto pt = point_of(packet);
  Verdict v;
  v.witness = packet;
  v.filter = "zone " + packet.from_zone + " " + config_.vsys + " to zone " +
             packet.to_zone + " " + config_.vsys;
  for (const auto& info : rules_) {
    for (const auto& b : info.guard) {
      bool inside = true;
      for (std::size_t f = 0; f < kPacketFieldCount && inside; ++f) {
        inside = b[f].contains(pt[f]);
      }
      if (!inside) continue;
      const auto& rule = config_.rules[info.index];
      v.action = rule.action;
      v.matched_rule = rule.name;
      v.rule_index = info.index;
      v.trace_lines = trace(rule, packet);
      return v;
    }
  }
  v.action = config_.default_action;
  v.matched_rule = "DEFAULT";
  v.trace_lines = {"No security rule matched",
                   "Applied default action " +
                       std::string(action_name(config_.default_action))};
  return v;
}

std::vector<Box> FirewallModel::region_of(std::size_t index,
                                          const Box& within) const {
  std::vector<Box> pieces;
  for (const auto& g : rules_[index].guard) {
    Box b = box_intersect(within, g);
    if (!box_empty(b)) pieces.push_back(std::move(b));
  }
  for (std::size_t j = 0; j < index && !pieces.empty(); ++j) {
    for (const auto& h : rules_[j].guard) {
      pieces = subtract_all(std::move(pieces), h);
      if (pieces.empty()) break;
    }
  }
  return pieces;
}

std::vector<Box> FirewallModel::default_region_within(const Box& within) const {
  if (box_empty(within)) return {};
  std::vector<Box> pieces = {within};
  for (const auto& info : rules_) {
    for (const auto& h : info.guard) {
      pieces = subtract_all(std::move(pieces), h);
      if (pieces.empty()) return pieces;
    }
  }
  return pieces;
}

SolveResult FirewallModel::solve(const SymbolicPacket& constraints,
                                 std::optional<Action> desired) const {
  const Box q = to_box(constraints);
  SolveResult result;
  if (box_empty(q)) return result;

  std::optional<Point> best;
  auto consider = [&](const std::vector<Box>& boxes) {
    for (const auto& b : boxes) {
      const auto p = box_min(b);
      if (!best || p < *best) best = p;
    }
  };
  if (!desired) {
    consider({q});
  } else {
    for (std::size_t i = 0; i < rules_.size(); ++i) {
      if (config_.rules[rules_[i].index].action != *desired) continue;
      consider(region_of(i, q));
    }
    if (config_.default_action == *desired) {
      consider(default_region_within(q));
    }
  }
  if (!best) return result;

  Box point_box;
  for (std::size_t f = 0; f < kPacketFieldCount; ++f) {
    point_box[f] = IntervalSet::single((*best)[f]);
  }
  result.sat = true;
  result.verdict = evaluate(packet_at(point_box));
  return result;
}

std::optional<PacketField> FirewallModel::first_conflicting_field(
    const SymbolicPacket& constraints, Action desired) const {
  if (solve(constraints, desired).sat) return std::nullopt;
  if (!solve(SymbolicPacket{}, desired).sat) return std::nullopt;
  for (std::size_t f = 0; f < kPacketFieldCount; ++f) {
    if (!solve(constraints.prefix(f + 1), desired).sat) {
      return static_cast<PacketField>(f);
    }
  }
  return std::nullopt;
}

EffectiveRegion FirewallModel::effective_region(std::string_view rule) const {
  auto i = rule_index(rule);
  if (!i) throw NotFoundError("unknown rule '" + std::string(rule) + "'");
  return effective_region(*i);
}

EffectiveRegion FirewallModel::effective_region(std::size_t index) const {
  if (index >= rules_.size()) {
    throw NotFoundError("rule index " + std::to_string(index) +
                        " out of range");
  }
  EffectiveRegion r;
  r.rule = config_.rules[index].name;
  r.boxes = region_of(index, full_box());
  r.shadowed = r.boxes.empty();
  return r;
}

std::vector<Box> FirewallModel::default_region() const {
  return default_region_within(full_box());
}

std::string FirewallModel::describe_field(PacketField f,
                                          const IntervalSet& s) const {
  const Box full = full_box();
  if (s == full[idx(f)]) return "any";
  std::string out;
  auto append = [&](const std::string& piece) {
    if (!out.empty()) out += ",";
    out += piece;
  };
  switch (f) {
    case PacketField::kSrcIp:
    case PacketField::kDstIp:
      for (const auto& iv : s.intervals()) append(ipv4::format_interval(iv));
      break;
    case PacketField::kDstPort:
      for (const auto& iv : s.intervals()) {
        append(iv.lo == iv.hi ? std::to_string(iv.lo)
                              : std::to_string(iv.lo) + "-" +
                                    std::to_string(iv.hi));
      }
      break;
    default: {
      const auto& dom = domain(f);
      for (const auto& iv : s.intervals()) {
        for (std::uint64_t v = iv.lo; v <= iv.hi; ++v) append(dom[v]);
      }
    }
  }
  return out;
}

}  // namespace log2ns
