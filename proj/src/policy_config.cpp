#include <algorithm>
#include <functional>

#include <json.hpp>

#include "log2ns/error.hpp"
#include "log2ns/ipv4.hpp"
#include "log2ns/policy.hpp"
#include "log2ns/strings.hpp"

namespace log2ns {

namespace {

using json = nlohmann::json;

const std::set<std::string> kTopLevelKeys = {
    "vsys",           "zones",         "address_objects",
    "address_groups", "applications",  "application_groups",
    "service_objects", "rules",        "default_action",
    "description",    "comment",
};

const std::set<std::string> kRuleKeys = {
    "name",         "from_zones",  "to_zones",    "src_addrs",
    "dst_addrs",    "applications", "services",   "action",
    "description",  "comment",     "disabled",
};

std::vector<std::string> string_list(const json& value,
                                     const std::string& where) {
  std::vector<std::string> out;
  if (value.is_string()) {
    out.push_back(value.get<std::string>());
    return out;
  }
  if (!value.is_array()) {
    throw ConfigError(where + ": expected a string or an array of strings");
  }
  for (const auto& item : value) {
    if (!item.is_string()) {
      throw ConfigError(where + ": expected an array of strings");
    }
    out.push_back(item.get<std::string>());
  }
  return out;
}

bool is_any(const std::vector<std::string>& names) {
  return names.size() == 1 && to_lower(names[0]) == "any";
}

// Rule field as written; nullopt for "any" or a missing key.
std::optional<std::vector<std::string>> rule_names(const json& rule,
                                                   const std::string& key,
                                                   const std::string& where) {
  if (!rule.contains(key)) return std::nullopt;
  auto names = string_list(rule.at(key), where + "." + key);
  if (names.empty()) {
    throw ConfigError(where + "." + key + ": empty list (use \"any\")");
  }
  if (is_any(names)) return std::nullopt;
  for (const auto& n : names) {
    if (to_lower(n) == "any") {
      throw ConfigError(where + "." + key + ": \"any\" mixed with names");
    }
  }
  return names;
}

IntervalSet parse_ports(const json& value, const std::string& where) {
  std::vector<Interval> parts;
  auto one = [&](const json& item) {
    if (item.is_number_unsigned() || item.is_number_integer()) {
      const auto v = item.get<long long>();
      if (v < 0 || v > 65535) throw ConfigError(where + ": port out of range");
      parts.push_back({static_cast<std::uint32_t>(v),
                       static_cast<std::uint32_t>(v)});
      return;
    }
    if (!item.is_string()) throw ConfigError(where + ": bad port entry");
    const auto text = item.get<std::string>();
    const auto dash = text.find('-');
    try {
      std::size_t used = 0;
      const std::string lo_text = text.substr(0, dash);
      const long lo = std::stol(lo_text, &used);
      if (used != lo_text.size()) throw std::invalid_argument(text);
      long hi = lo;
      if (dash != std::string::npos) {
        const std::string hi_text = text.substr(dash + 1);
        hi = std::stol(hi_text, &used);
        if (used != hi_text.size()) throw std::invalid_argument(text);
      }
      if (lo < 0 || hi > 65535 || lo > hi) throw std::out_of_range(text);
      parts.push_back({static_cast<std::uint32_t>(lo),
                       static_cast<std::uint32_t>(hi)});
    } catch (const std::logic_error&) {
      throw ConfigError(where + ": bad port '" + text + "'");
    }
  };
  if (value.is_array()) {
    for (const auto& item : value) one(item);
  } else {
    one(value);
  }
  return IntervalSet(std::move(parts));
}

// Depth-first expansion of a group table with cycle detection.
class GroupExpander {
 public:
  GroupExpander(const std::map<std::string, std::vector<std::string>>& groups,
                std::string kind)
      : groups_(groups), kind_(std::move(kind)) {}

  // Leaf member names reachable from group `name`. `is_leaf` decides
  // membership of non-group names; unknown names throw.
  std::set<std::string> expand(
      const std::string& name,
      const std::function<bool(const std::string&)>& is_leaf) {
    std::set<std::string> out;
    std::set<std::string> visiting;
    visit(name, is_leaf, out, visiting);
    return out;
  }

 private:
  void visit(const std::string& name,
             const std::function<bool(const std::string&)>& is_leaf,
             std::set<std::string>& out, std::set<std::string>& visiting) {
    auto it = groups_.find(name);
    if (it == groups_.end()) {
      if (!is_leaf(name)) {
        throw ConfigError(kind_ + " group member '" + name +
                          "' does not resolve");
      }
      out.insert(name);
      return;
    }
    if (!visiting.insert(name).second) {
      throw ConfigError("cyclic " + kind_ + " group '" + name + "'");
    }
    for (const auto& member : it->second) visit(member, is_leaf, out, visiting);
    visiting.erase(name);
  }

  const std::map<std::string, std::vector<std::string>>& groups_;
  std::string kind_;
};

}  // namespace

std::string_view action_name(Action a) {
  return a == Action::kPermit ? "PERMIT" : "DENY";
}

std::optional<Action> action_from_name(std::string_view name) {
  const auto lower = to_lower(std::string(name));
  if (lower == "permit" || lower == "allow" || lower == "1") {
    return Action::kPermit;
  }
  if (lower == "deny" || lower == "drop" || lower == "0") return Action::kDeny;
  return std::nullopt;
}

FirewallConfig parse_config(std::string_view source) {
  json doc;
  try {
    doc = json::parse(source);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("policy is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("policy must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (!kTopLevelKeys.contains(key)) {
      throw ConfigError("unknown policy key '" + key + "'");
    }
  }

  FirewallConfig cfg;
  if (doc.contains("vsys")) cfg.vsys = doc.at("vsys").get<std::string>();

  if (doc.contains("zones")) {
    std::set<std::string> seen;
    for (auto& z : string_list(doc.at("zones"), "zones")) {
      if (!seen.insert(z).second) {
        throw ConfigError("duplicate zone '" + z + "'");
      }
      cfg.zones.push_back(z);
    }
  }

  if (doc.contains("address_objects")) {
    for (const auto& [name, value] : doc.at("address_objects").items()) {
      std::vector<Interval> parts;
      for (const auto& entry :
           string_list(value, "address_objects." + name)) {
        auto block = ipv4::parse_block(trim(entry));
        if (!block) {
          throw ConfigError("address object '" + name +
                            "': invalid address '" + entry + "'");
        }
        parts.push_back(*block);
      }
      cfg.address_objects[name] = IntervalSet(std::move(parts));
    }
  }
  if (doc.contains("address_groups")) {
    for (const auto& [name, value] : doc.at("address_groups").items()) {
      if (cfg.address_objects.contains(name)) {
        throw ConfigError("'" + name +
                          "' is both an address object and a group");
      }
      cfg.address_groups[name] = string_list(value, "address_groups." + name);
    }
  }

  if (doc.contains("service_objects")) {
    for (const auto& [name, value] : doc.at("service_objects").items()) {
      const std::string where = "service_objects." + name;
      if (!value.is_object() || !value.contains("protocol")) {
        throw ConfigError(where + ": needs a protocol");
      }
      ServiceObject svc;
      svc.protocol = to_upper(value.at("protocol").get<std::string>());
      if (value.contains("ports")) {
        svc.ports = parse_ports(value.at("ports"), where);
      } else if (value.contains("port")) {
        svc.ports = parse_ports(value.at("port"), where);
      } else {
        svc.ports = IntervalSet::range(0, 65535);
      }
      if (svc.ports.empty()) throw ConfigError(where + ": no ports");
      cfg.service_objects[name] = std::move(svc);
    }
  }

  if (doc.contains("applications")) {
    const auto& apps = doc.at("applications");
    if (apps.is_array()) {
      for (auto& a : string_list(apps, "applications")) {
        cfg.applications[a] = {};
      }
    } else if (apps.is_object()) {
      for (const auto& [name, value] : apps.items()) {
        std::vector<std::string> defaults;
        if (value.is_object() && value.contains("default_service")) {
          defaults = string_list(value.at("default_service"),
                                 "applications." + name + ".default_service");
        } else if (!value.is_null() && !value.is_object()) {
          throw ConfigError("applications." + name + ": expected an object");
        }
        for (const auto& svc : defaults) {
          if (!cfg.service_objects.contains(svc)) {
            throw ConfigError("application '" + name +
                              "': unresolved default service '" + svc + "'");
          }
        }
        cfg.applications[name] = std::move(defaults);
      }
    } else {
      throw ConfigError("applications must be an array or an object");
    }
  }
  if (doc.contains("application_groups")) {
    for (const auto& [name, value] : doc.at("application_groups").items()) {
      if (cfg.applications.contains(name)) {
        throw ConfigError("'" + name + "' is both an application and a group");
      }
      cfg.application_groups[name] =
          string_list(value, "application_groups." + name);
    }
  }

  if (doc.contains("default_action")) {
    auto a = action_from_name(doc.at("default_action").get<std::string>());
    if (a != Action::kDeny) {
      throw ConfigError("default_action must be deny");
    }
  }

  GroupExpander addr_groups(cfg.address_groups, "address");
  GroupExpander app_groups(cfg.application_groups, "application");
  auto is_address_leaf = [&](const std::string& n) {
    return cfg.address_objects.contains(n) ||
           ipv4::parse_block(n).has_value();
  };
  auto is_app = [&](const std::string& n) {
    return cfg.applications.contains(n);
  };
  // Expanding every group once catches cycles and dangling members even
  // when no rule references the group.
  for (const auto& [name, members] : cfg.address_groups) {
    addr_groups.expand(name, is_address_leaf);
  }
  for (const auto& [name, members] : cfg.application_groups) {
    app_groups.expand(name, is_app);
  }

  auto resolve_addresses = [&](const std::vector<std::string>& names,
                               const std::string& rule) {
    std::vector<Interval> parts;
    for (const auto& n : names) {
      std::set<std::string> leaves;
      if (cfg.address_groups.contains(n)) {
        leaves = addr_groups.expand(n, is_address_leaf);
      } else if (is_address_leaf(n)) {
        leaves = {n};
      } else {
        throw ConfigError("rule '" + rule + "': unresolved address '" + n +
                          "'");
      }
      for (const auto& leaf : leaves) {
        if (auto it = cfg.address_objects.find(leaf);
            it != cfg.address_objects.end()) {
          const auto& iv = it->second.intervals();
          parts.insert(parts.end(), iv.begin(), iv.end());
        } else {
          parts.push_back(*ipv4::parse_block(leaf));
        }
      }
    }
    return IntervalSet(std::move(parts));
  };

  if (doc.contains("rules")) {
    const auto& rules = doc.at("rules");
    if (!rules.is_array()) throw ConfigError("rules must be an array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < rules.size(); ++i) {
      const auto& r = rules[i];
      std::string where = "rules[" + std::to_string(i) + "]";
      if (!r.is_object() || !r.contains("name") || !r.at("name").is_string()) {
        throw ConfigError(where + ": rule needs a name");
      }
      for (const auto& [key, value] : r.items()) {
        if (!kRuleKeys.contains(key)) {
          throw ConfigError(where + ": unknown rule key '" + key + "'");
        }
      }
      if (r.value("disabled", false)) continue;
      SecurityRule rule;
      rule.name = r.at("name").get<std::string>();
      where = "rule '" + rule.name + "'";
      if (!names.insert(rule.name).second) {
        throw ConfigError("duplicate rule name '" + rule.name + "'");
      }

      auto zones = [&](const char* key) -> std::optional<std::set<std::string>> {
        auto list = rule_names(r, key, where);
        if (!list) return std::nullopt;
        std::set<std::string> out;
        for (const auto& z : *list) {
          if (std::find(cfg.zones.begin(), cfg.zones.end(), z) ==
              cfg.zones.end()) {
            throw ConfigError(where + ": unresolved zone '" + z + "'");
          }
          out.insert(z);
        }
        return out;
      };
      rule.from_zones = zones("from_zones");
      rule.to_zones = zones("to_zones");

      if (auto src = rule_names(r, "src_addrs", where)) {
        rule.src_names = *src;
        rule.src_addrs = resolve_addresses(*src, rule.name);
      }
      if (auto dst = rule_names(r, "dst_addrs", where)) {
        rule.dst_names = *dst;
        rule.dst_addrs = resolve_addresses(*dst, rule.name);
      }

      if (auto apps = rule_names(r, "applications", where)) {
        std::set<std::string> out;
        for (const auto& a : *apps) {
          if (cfg.application_groups.contains(a)) {
            auto leaves = app_groups.expand(a, is_app);
            out.insert(leaves.begin(), leaves.end());
          } else if (is_app(a)) {
            out.insert(a);
          } else {
            throw ConfigError(where + ": unresolved application '" + a + "'");
          }
        }
        rule.applications = std::move(out);
      }

      if (auto services = rule_names(r, "services", where)) {
        if (services->size() == 1 &&
            to_lower((*services)[0]) == "application-default") {
          rule.services = ServiceMatch::kApplicationDefault;
        } else {
          rule.services = ServiceMatch::kList;
          for (const auto& s : *services) {
            if (!cfg.service_objects.contains(s)) {
              throw ConfigError(where + ": unresolved service '" + s + "'");
            }
          }
          rule.service_names = *services;
        }
      }

      if (!r.contains("action") || !r.at("action").is_string()) {
        throw ConfigError(where + ": missing action");
      }
      auto action = action_from_name(r.at("action").get<std::string>());
      if (!action) {
        throw ConfigError(where + ": unknown action '" +
                          r.at("action").get<std::string>() + "'");
      }
      rule.action = *action;
      cfg.rules.push_back(std::move(rule));
    }
  }
  return cfg;
}

}  // namespace log2ns
