#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "log2ns/flowlog.hpp"
#include "log2ns/policy.hpp"

namespace log2ns {

// Demo firewall: six zones, a Trust->Internal rule, the BypassFW rule to
// 42.62.94.0/24 and an AllowDNS rule among others.
std::string demo_policy_json();

// demo_policy_json() with a BlockPublicDNS deny rule inserted directly
// ahead of AllowDNS.
std::string remediated_policy_json();

// Traffic drawn from fixed profiles (web, DNS, directory services, ...).
// Every row is PERMIT-satisfiable under the demo policy.
LogCorpus demo_logs(std::size_t rows, std::uint64_t seed);

// A policy whose permit rules each own a distinct zone pair, so the rows a
// permit rule generates are covered by that rule alone.
std::string witness_fixture_policy_json();

struct SyntheticLog {
  LogCorpus corpus;
  std::vector<std::size_t> source_rule;  // config rule index per row
};

// `rows_per_rule` packets drawn uniformly from the effective region of every
// permit rule (shadowed rules contribute nothing).
SyntheticLog synthesize_from_policy(const FirewallModel& model,
                                    std::size_t rows_per_rule,
                                    std::uint64_t seed);

// Sources A=10.0.0.1 and B=10.0.0.2 talk to the same destination and
// application pools; C=10.0.0.3 uses disjoint pools.
LogCorpus similarity_corpus(std::size_t rows, std::uint64_t seed);

}  // namespace log2ns
