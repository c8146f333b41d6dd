#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

namespace log2ns {

// Closed interval [lo, hi] over 32-bit unsigned values.
struct Interval {
  std::uint32_t lo = 0;
  std::uint32_t hi = 0;

  std::uint64_t size() const { return std::uint64_t{hi} - lo + 1; }
  bool contains(std::uint32_t v) const { return lo <= v && v <= hi; }
  auto operator<=>(const Interval&) const = default;
};

// A union of intervals kept normalized: sorted, disjoint, non-adjacent.
// Every finite domain in the policy model (IPs, ports, and the indices of
// zones/apps/protocols) is one of these.
class IntervalSet {
 public:
  IntervalSet() = default;
  IntervalSet(std::initializer_list<Interval> parts);
  explicit IntervalSet(std::vector<Interval> parts);

  static IntervalSet single(std::uint32_t v) { return IntervalSet{{v, v}}; }
  static IntervalSet range(std::uint32_t lo, std::uint32_t hi) {
    return IntervalSet{{lo, hi}};
  }

  bool empty() const { return parts_.empty(); }
  bool contains(std::uint32_t v) const;
  std::uint64_t cardinality() const;
  std::optional<std::uint32_t> min() const {
    if (parts_.empty()) return std::nullopt;
    return parts_.front().lo;
  }
  const std::vector<Interval>& intervals() const { return parts_; }

  IntervalSet unite(const IntervalSet& other) const;
  IntervalSet intersect(const IntervalSet& other) const;
  // this \ other
  IntervalSet subtract(const IntervalSet& other) const;
  // Complement relative to [lo, hi].
  IntervalSet complement(std::uint32_t lo, std::uint32_t hi) const;
  bool is_subset_of(const IntervalSet& other) const {
    return subtract(other).empty();
  }

  bool operator==(const IntervalSet&) const = default;

 private:
  void normalize();
  std::vector<Interval> parts_;
};

}  // namespace log2ns
