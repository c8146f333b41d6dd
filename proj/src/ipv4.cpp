#include "log2ns/ipv4.hpp"

#include <bit>
#include <charconv>

namespace log2ns::ipv4 {

namespace {

bool parse_uint(std::string_view text, std::uint32_t max, std::uint32_t& out) {
  if (text.empty() || text.size() > 10) return false;
  for (char c : text) {
    if (c < '0' || c > '9') return false;
  }
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || v > max) {
    return false;
  }
  out = static_cast<std::uint32_t>(v);
  return true;
}

}  // namespace

std::optional<std::uint32_t> parse(std::string_view text) {
  std::uint32_t address = 0;
  for (int octet = 0; octet < 4; ++octet) {
    const auto dot = text.find('.');
    const bool last = octet == 3;
    if (last != (dot == std::string_view::npos)) return std::nullopt;
    std::uint32_t value;
    if (!parse_uint(text.substr(0, dot), 255, value)) return std::nullopt;
    address = (address << 8) | value;
    if (!last) text.remove_prefix(dot + 1);
  }
  return address;
}

std::string format(std::uint32_t a) {
  return std::to_string(a >> 24) + "." + std::to_string((a >> 16) & 0xFF) +
         "." + std::to_string((a >> 8) & 0xFF) + "." + std::to_string(a & 0xFF);
}

std::optional<Interval> parse_block(std::string_view text) {
  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    auto base = parse(text.substr(0, slash));
    std::uint32_t len;
    if (!base || !parse_uint(text.substr(slash + 1), 32, len)) {
      return std::nullopt;
    }
    const std::uint32_t mask = len == 0 ? 0u : ~std::uint32_t{0} << (32 - len);
    const std::uint32_t lo = *base & mask;
    return Interval{lo, lo | ~mask};
  }
  if (auto dash = text.find('-'); dash != std::string_view::npos) {
    auto lo = parse(text.substr(0, dash));
    auto hi = parse(text.substr(dash + 1));
    if (!lo || !hi || *lo > *hi) return std::nullopt;
    return Interval{*lo, *hi};
  }
  if (auto a = parse(text)) return Interval{*a, *a};
  return std::nullopt;
}

std::string format_interval(const Interval& block) {
  if (block.lo == block.hi) return format(block.lo);
  const std::uint64_t size = block.size();
  if (std::has_single_bit(size) && (block.lo & (size - 1)) == 0) {
    const int len = 32 - std::countr_zero(size);
    return format(block.lo) + "/" + std::to_string(len);
  }
  return format(block.lo) + "-" + format(block.hi);
}

}  // namespace log2ns::ipv4
