#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "log2ns/interval_set.hpp"

namespace log2ns::ipv4 {

// Strict dotted-quad parse: four decimal octets 0-255, no leading '+' or
// whitespace. Leading zeros are accepted ("010" == 10).
std::optional<std::uint32_t> parse(std::string_view text);

std::string format(std::uint32_t address);

// Accepts "a.b.c.d", "a.b.c.d/len" and "a.b.c.d-e.f.g.h". A CIDR with host
// bits set is masked down to its network.
std::optional<Interval> parse_block(std::string_view text);

// "a.b.c.d" for single addresses, "a.b.c.d/len" when the interval is an
// aligned prefix, otherwise "a.b.c.d-e.f.g.h".
std::string format_interval(const Interval& block);

inline bool looks_like_ipv6(std::string_view text) {
  return text.find(':') != std::string_view::npos;
}

constexpr std::uint32_t kMax = 0xFFFFFFFFu;

}  // namespace log2ns::ipv4
