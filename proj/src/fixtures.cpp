#include "log2ns/fixtures.hpp"

#include <json.hpp>

#include "log2ns/error.hpp"
#include "log2ns/ipv4.hpp"
#include "log2ns/rng.hpp"

namespace log2ns {

namespace {

using json = nlohmann::json;

json demo_policy() {
  json services = {
      {"http", {{"protocol", "tcp"}, {"port", 80}}},
      {"https", {{"protocol", "tcp"}, {"port", 443}}},
      {"alt-https", {{"protocol", "tcp"}, {"port", 8443}}},
      {"dns-udp", {{"protocol", "udp"}, {"port", 53}}},
      {"ntp", {{"protocol", "udp"}, {"port", 123}}},
      {"smtp", {{"protocol", "tcp"}, {"port", 25}}},
      {"ssh", {{"protocol", "tcp"}, {"port", 22}}},
      {"ldap", {{"protocol", "tcp"}, {"port", 389}}},
      {"kerberos", {{"protocol", "udp"}, {"port", 88}}},
      {"smb", {{"protocol", "tcp"}, {"port", 445}}},
      {"mssql", {{"protocol", "tcp"}, {"port", 1433}}},
  };
  json apps = {
      {"web-browsing", {{"default_service", {"http"}}}},
      {"ssl", {{"default_service", {"https"}}}},
      {"dns", {{"default_service", {"dns-udp"}}}},
      {"ntp", {{"default_service", {"ntp"}}}},
      {"smtp", {{"default_service", {"smtp"}}}},
      {"ssh", {{"default_service", {"ssh"}}}},
      {"ldap", {{"default_service", {"ldap"}}}},
      {"kerberos", {{"default_service", {"kerberos"}}}},
      {"smb", {{"default_service", {"smb"}}}},
      {"ms-sql", {{"default_service", {"mssql"}}}},
      {"not-applicable", json::object()},
  };
  json rules = json::array();
  rules.push_back({{"name", "GuestIsolation"},
                   {"from_zones", {"Guest"}},
                   {"to_zones", {"Trust", "Internal", "DMZ", "Mgmt"}},
                   {"action", "deny"}});
  rules.push_back({{"name", "SR1"},
                   {"from_zones", {"Trust"}},
                   {"to_zones", {"Internal"}},
                   {"src_addrs", "any"},
                   {"dst_addrs", {"servers"}},
                   {"applications", "any"},
                   {"services", "any"},
                   {"action", "allow"}});
  rules.push_back({{"name", "BypassFW"},
                   {"from_zones", {"Trust"}},
                   {"to_zones", {"Untrust"}},
                   {"src_addrs", "any"},
                   {"dst_addrs", {"cn-bypass"}},
                   {"applications", "any"},
                   {"services", "application-default"},
                   {"action", "allow"}});
  rules.push_back({{"name", "AllowDNS"},
                   {"from_zones", {"Trust", "Internal"}},
                   {"to_zones", {"Untrust"}},
                   {"applications", {"dns"}},
                   {"services", "application-default"},
                   {"action", "allow"}});
  rules.push_back({{"name", "AllowWeb"},
                   {"from_zones", {"Trust", "Guest"}},
                   {"to_zones", {"Untrust"}},
                   {"applications", {"web"}},
                   {"services", "application-default"},
                   {"action", "allow"}});
  rules.push_back({{"name", "AllowAltHttps"},
                   {"from_zones", {"Trust"}},
                   {"to_zones", {"Untrust"}},
                   {"src_addrs", {"corp-lan"}},
                   {"services", {"alt-https"}},
                   {"action", "allow"}});
  rules.push_back({{"name", "AllowNTP"},
                   {"from_zones", {"Internal"}},
                   {"to_zones", {"Untrust"}},
                   {"src_addrs", {"servers"}},
                   {"applications", {"ntp"}},
                   {"services", "application-default"},
                   {"action", "allow"}});
  rules.push_back({{"name", "DmzWebIn"},
                   {"from_zones", {"Untrust"}},
                   {"to_zones", {"DMZ"}},
                   {"dst_addrs", {"dmz-web"}},
                   {"applications", {"web"}},
                   {"services", "application-default"},
                   {"action", "allow"}});
  rules.push_back({{"name", "MailOut"},
                   {"from_zones", {"DMZ"}},
                   {"to_zones", {"Untrust"}},
                   {"src_addrs", {"mail-relay"}},
                   {"applications", {"smtp"}},
                   {"services", "application-default"},
                   {"action", "allow"}});
  rules.push_back({{"name", "MgmtSSH"},
                   {"from_zones", {"Mgmt"}},
                   {"to_zones", {"Internal", "DMZ"}},
                   {"src_addrs", {"mgmt-net"}},
                   {"dst_addrs", {"servers", "dmz-hosts"}},
                   {"applications", {"ssh"}},
                   {"services", {"ssh"}},
                   {"action", "allow"}});
  rules.push_back({{"name", "DenyOutbound"},
                   {"from_zones", {"Trust"}},
                   {"to_zones", {"Untrust"}},
                   {"action", "deny"}});
  return {
      {"vsys", "vsys1"},
      {"zones", {"Trust", "Untrust", "Internal", "DMZ", "Guest", "Mgmt"}},
      {"address_objects",
       {{"corp-lan", {"10.11.29.0/24", "10.11.30.0/24", "192.168.1.0/24"}},
        {"cn-bypass", "42.62.94.0/24"},
        {"servers", "10.20.0.0/24"},
        {"dmz-web", "172.16.10.10-172.16.10.12"},
        {"mail-relay", "172.16.10.20"},
        {"mgmt-net", "10.99.0.0/24"},
        {"public-dns", {"4.4.4.4", "8.8.8.8"}}}},
      {"address_groups", {{"dmz-hosts", {"dmz-web", "mail-relay"}}}},
      {"service_objects", services},
      {"applications", apps},
      {"application_groups", {{"web", {"web-browsing", "ssl"}}}},
      {"rules", rules},
      {"default_action", "deny"},
  };
}

struct AppService {
  const char* app;  // nullptr: the row carries no application
  const char* protocol;
  std::uint16_t port;
};

struct Profile {
  double weight;
  std::vector<const char*> sources;  // blocks; repeats weight the draw
  std::vector<const char*> destinations;
  std::vector<AppService> services;
  const char* from_zone;
  const char* to_zone;
  const char* src_region;
  std::vector<const char*> dst_regions;
  std::uint64_t bytes_lo;
  std::uint64_t bytes_hi;
};

const std::vector<Profile>& demo_profiles() {
  static const std::vector<Profile> profiles = {
      // Trust -> CN through BypassFW, no identified application.
      {0.05,
       {"10.11.29.5", "10.11.29.5", "10.11.29.5", "10.11.29.5", "10.11.29.5",
        "10.11.29.5", "10.11.29.40-10.11.29.45"},
       {"42.62.94.2", "42.62.94.2", "42.62.94.2", "42.62.94.2", "42.62.94.2",
        "42.62.94.2", "42.62.94.2", "42.62.94.2", "42.62.94.10-42.62.94.31"},
       {{"not-applicable", "TCP", 443}, {"not-applicable", "TCP", 8080}},
       "Trust", "Untrust", "corp", {"CN"}, 200, 4000},
      // Public resolvers.
      {0.08,
       {"192.168.1.254", "192.168.1.254", "192.168.1.254", "10.11.29.222",
        "10.11.29.222", "10.11.29.6", "10.11.29.6"},
       {"4.4.4.4", "8.8.8.8"},
       {{"dns", "UDP", 53}},
       "Trust", "Untrust", "corp", {"US"}, 60, 400},
      {0.26,
       {"10.11.30.0/27"},
       {"93.184.216.0/28", "151.101.1.0/28", "104.16.0.0/28"},
       {{"web-browsing", "TCP", 80}, {"ssl", "TCP", 443}},
       "Trust", "Untrust", "corp", {"US", "EU"}, 500, 2000000},
      {0.18,
       {"10.11.29.64/26"},
       {"10.20.0.10-10.20.0.20"},
       {{"ldap", "TCP", 389},
        {"kerberos", "UDP", 88},
        {"smb", "TCP", 445},
        {"ms-sql", "TCP", 1433}},
       "Trust", "Internal", "corp", {"corp"}, 100, 500000},
      {0.12,
       {"81.2.69.0/24", "203.0.113.0/24", "177.71.128.0/24"},
       {"172.16.10.10-172.16.10.12"},
       {{"web-browsing", "TCP", 80}, {"ssl", "TCP", 443}},
       "Untrust", "DMZ", "EU", {"corp"}, 300, 80000},
      {0.06,
       {"172.16.10.20"},
       {"64.233.160.0/26", "40.92.0.0/26"},
       {{"smtp", "TCP", 25}},
       "DMZ", "Untrust", "corp", {"US"}, 1000, 9000000},
      {0.04,
       {"10.20.0.1-10.20.0.4"},
       {"129.6.15.28", "132.163.96.1"},
       {{"ntp", "UDP", 123}},
       "Internal", "Untrust", "corp", {"US"}, 48, 96},
      {0.04,
       {"10.99.0.5-10.99.0.9"},
       {"10.20.0.10-10.20.0.40", "172.16.10.10-172.16.10.12"},
       {{"ssh", "TCP", 22}},
       "Mgmt", "Internal", "corp", {"corp"}, 2000, 60000},
      {0.13,
       {"10.50.0.0/24"},
       {"93.184.216.0/28", "151.101.1.0/28", "104.16.0.0/28"},
       {{"web-browsing", "TCP", 80}, {"ssl", "TCP", 443}},
       "Guest", "Untrust", "guest", {"US", "EU"}, 500, 2000000},
      // Unidentified traffic on an alternate port.
      {0.04,
       {"10.11.30.0/27"},
       {"185.199.108.0/28"},
       {{nullptr, "TCP", 8443}},
       "Trust", "Untrust", "corp", {"US"}, 500, 50000},
  };
  return profiles;
}

std::uint32_t draw_from(const IntervalSet& set, Rng& rng) {
  std::uint64_t r = rng.below(set.cardinality());
  for (const auto& iv : set.intervals()) {
    if (r < iv.size()) return iv.lo + static_cast<std::uint32_t>(r);
    r -= iv.size();
  }
  return set.intervals().back().hi;
}

std::uint32_t draw_address(const char* block, Rng& rng) {
  const auto iv = ipv4::parse_block(block);
  if (!iv) throw InvalidArgument(std::string("bad fixture block ") + block);
  return iv->lo + static_cast<std::uint32_t>(rng.below(iv->size()));
}

template <class T>
const T& pick(const std::vector<T>& items, Rng& rng) {
  return items[rng.below(items.size())];
}

std::vector<Field> full_schema() {
  return {all_fields().begin(), all_fields().end()};
}

}  // namespace

std::string demo_policy_json() { return demo_policy().dump(2) + "\n"; }

std::string remediated_policy_json() {
  json doc = demo_policy();
  json& rules = doc["rules"];
  json block = {{"name", "BlockPublicDNS"},
                {"dst_addrs", {"public-dns"}},
                {"applications", {"dns"}},
                {"action", "deny"}};
  for (std::size_t i = 0; i < rules.size(); ++i) {
    if (rules[i]["name"] == "AllowDNS") {
      rules.insert(rules.begin() + static_cast<std::ptrdiff_t>(i), block);
      break;
    }
  }
  return doc.dump(2) + "\n";
}

LogCorpus demo_logs(std::size_t rows, std::uint64_t seed) {
  const auto& profiles = demo_profiles();
  double total = 0.0;
  for (const auto& p : profiles) total += p.weight;

  Rng rng(seed);
  LogCorpus corpus;
  corpus.schema = full_schema();
  corpus.records.reserve(rows);
  const std::int64_t t0 = 1'600'000'000;
  for (std::size_t i = 0; i < rows; ++i) {
    double u = rng.uniform() * total;
    std::size_t which = 0;
    while (which + 1 < profiles.size() && u >= profiles[which].weight) {
      u -= profiles[which].weight;
      ++which;
    }
    const auto& p = profiles[which];
    const auto& svc = pick(p.services, rng);
    FlowRecord r;
    r.src_ip = draw_address(pick(p.sources, rng), rng);
    r.dst_ip = draw_address(pick(p.destinations, rng), rng);
    r.protocol = svc.protocol;
    r.src_port = static_cast<std::uint16_t>(1024 + rng.below(64511));
    r.dst_port = svc.port;
    r.bytes_sent = p.bytes_lo + rng.below(p.bytes_hi - p.bytes_lo + 1);
    r.from_zone = p.from_zone;
    r.to_zone = p.to_zone;
    if (svc.app) r.application = svc.app;
    r.src_region = p.src_region;
    r.dst_region = pick(p.dst_regions, rng);
    r.timestamp = t0 + static_cast<std::int64_t>(i) * 7 +
                  static_cast<std::int64_t>(rng.below(7));
    corpus.records.push_back(std::move(r));
  }
  return corpus;
}

std::string witness_fixture_policy_json() {
  json doc = {
      {"zones", {"Trust", "Untrust", "DMZ", "Internal", "Partner"}},
      {"address_objects",
       {{"lan", "10.1.0.0/16"},
        {"admins", "10.1.5.0/24"},
        {"dmz-net", "172.16.0.0/28"},
        {"api-host", "172.16.0.5"},
        {"resolvers", {"4.4.4.4", "8.8.8.8"}},
        {"blocked", "203.0.113.0/24"}}},
      {"service_objects",
       {{"http", {{"protocol", "tcp"}, {"port", 80}}},
        {"https", {{"protocol", "tcp"}, {"port", 443}}},
        {"dns-udp", {{"protocol", "udp"}, {"port", 53}}},
        {"ssh", {{"protocol", "tcp"}, {"port", 22}}},
        {"high", {{"protocol", "tcp"}, {"ports", "1024-65535"}}}}},
      {"applications",
       {{"web-browsing", {{"default_service", {"http"}}}},
        {"ssl", {{"default_service", {"https"}}}},
        {"dns", {{"default_service", {"dns-udp"}}}},
        {"ssh", {{"default_service", {"ssh"}}}},
        {"custom", json::object()}}},
      {"rules",
       {
           {{"name", "BlockList"},
            {"dst_addrs", {"blocked"}},
            {"action", "deny"}},
           {{"name", "PartnerNoInternal"},
            {"from_zones", {"Partner"}},
            {"to_zones", {"Internal"}},
            {"action", "deny"}},
           {{"name", "WebOut"},
            {"from_zones", {"Trust"}},
            {"to_zones", {"Untrust"}},
            {"src_addrs", {"lan"}},
            {"applications", {"web-browsing", "ssl"}},
            {"services", "application-default"},
            {"action", "allow"}},
           {{"name", "DnsOut"},
            {"from_zones", {"Internal"}},
            {"to_zones", {"Untrust"}},
            {"dst_addrs", {"resolvers"}},
            {"applications", {"dns"}},
            {"services", "application-default"},
            {"action", "allow"}},
           {{"name", "DmzIn"},
            {"from_zones", {"Untrust"}},
            {"to_zones", {"DMZ"}},
            {"dst_addrs", {"dmz-net"}},
            {"applications", {"web-browsing", "ssl", "custom"}},
            {"services", "application-default"},
            {"action", "allow"}},
           {{"name", "AdminSsh"},
            {"from_zones", {"Trust"}},
            {"to_zones", {"DMZ"}},
            {"src_addrs", {"admins"}},
            {"applications", {"ssh"}},
            {"services", {"ssh"}},
            {"action", "allow"}},
           {{"name", "PartnerApi"},
            {"from_zones", {"Partner"}},
            {"to_zones", {"DMZ"}},
            {"dst_addrs", {"api-host"}},
            {"applications", {"ssl", "custom"}},
            {"services", {"https", "high"}},
            {"action", "allow"}},
       }},
  };
  return doc.dump(2) + "\n";
}

SyntheticLog synthesize_from_policy(const FirewallModel& model,
                                    std::size_t rows_per_rule,
                                    std::uint64_t seed) {
  Rng rng(seed);
  SyntheticLog out;
  out.corpus.schema = {Field::kSrcIp,    Field::kDstIp,   Field::kProtocol,
                       Field::kSrcPort,  Field::kDstPort, Field::kFromZone,
                       Field::kToZone,   Field::kApplication};
  for (std::size_t idx = 0; idx < model.config().rules.size(); ++idx) {
    if (model.rule(idx).action != Action::kPermit) continue;
    const auto region = model.effective_region(idx);
    if (region.shadowed) continue;
    for (std::size_t n = 0; n < rows_per_rule; ++n) {
      const Box& box = pick(region.boxes, rng);
      auto name = [&](PacketField f) {
        const auto i = draw_from(box[static_cast<std::size_t>(f)], rng);
        return model.domain(f)[i];
      };
      auto value = [&](PacketField f) {
        return draw_from(box[static_cast<std::size_t>(f)], rng);
      };
      FlowRecord r;
      r.from_zone = name(PacketField::kFromZone);
      r.to_zone = name(PacketField::kToZone);
      r.src_ip = value(PacketField::kSrcIp);
      r.dst_ip = value(PacketField::kDstIp);
      r.application = name(PacketField::kApplication);
      r.protocol = name(PacketField::kProtocol);
      r.dst_port = static_cast<std::uint16_t>(value(PacketField::kDstPort));
      r.src_port = static_cast<std::uint16_t>(1024 + rng.below(64511));
      out.corpus.records.push_back(std::move(r));
      out.source_rule.push_back(idx);
    }
  }
  return out;
}

LogCorpus similarity_corpus(std::size_t rows, std::uint64_t seed) {
  static const std::vector<const char*> shared_dst = {
      "192.168.0.1", "192.168.0.2", "192.168.0.3", "192.168.0.4",
      "192.168.0.5"};
  static const std::vector<const char*> other_dst = {
      "172.16.0.1", "172.16.0.2", "172.16.0.3", "172.16.0.4", "172.16.0.5"};
  static const std::vector<const char*> shared_app = {"web-browsing", "ssl"};
  static const std::vector<const char*> other_app = {"smtp", "ldap"};

  Rng rng(seed);
  LogCorpus corpus;
  corpus.schema = {Field::kSrcIp, Field::kDstIp, Field::kApplication,
                   Field::kSrcRegion, Field::kDstRegion};
  for (std::size_t i = 0; i < rows; ++i) {
    const auto who = rng.below(3);
    const bool shared = who < 2;
    FlowRecord r;
    r.src_ip = *ipv4::parse(who == 0 ? "10.0.0.1"
                            : who == 1 ? "10.0.0.2"
                                       : "10.0.0.3");
    r.dst_ip = *ipv4::parse(pick(shared ? shared_dst : other_dst, rng));
    r.application = pick(shared ? shared_app : other_app, rng);
    r.src_region = "lab";
    r.dst_region = shared ? "us" : "eu";
    corpus.records.push_back(std::move(r));
  }
  return corpus;
}

}  // namespace log2ns
