#include "log2ns/interval_set.hpp"

namespace log2ns {

IntervalSet::IntervalSet(std::initializer_list<Interval> parts)
    : parts_(parts) {
  normalize();
}

IntervalSet::IntervalSet(std::vector<Interval> parts)
    : parts_(std::move(parts)) {
  normalize();
}

void IntervalSet::normalize() {
  std::erase_if(parts_, [](const Interval& i) { return i.lo > i.hi; });
  std::sort(parts_.begin(), parts_.end());
  std::vector<Interval> merged;
  merged.reserve(parts_.size());
  for (const auto& part : parts_) {
    if (!merged.empty() &&
        std::uint64_t{part.lo} <= std::uint64_t{merged.back().hi} + 1) {
      merged.back().hi = std::max(merged.back().hi, part.hi);
    } else {
      merged.push_back(part);
    }
  }
  parts_ = std::move(merged);
}

bool IntervalSet::contains(std::uint32_t v) const {
  auto it = std::upper_bound(
      parts_.begin(), parts_.end(), v,
      [](std::uint32_t x, const Interval& i) { return x < i.lo; });
  if (it == parts_.begin()) return false;
  return std::prev(it)->contains(v);
}

std::uint64_t IntervalSet::cardinality() const {
  std::uint64_t n = 0;
  for (const auto& part : parts_) n += part.size();
  return n;
}

IntervalSet IntervalSet::unite(const IntervalSet& other) const {
  std::vector<Interval> all = parts_;
  all.insert(all.end(), other.parts_.begin(), other.parts_.end());
  return IntervalSet(std::move(all));
}

IntervalSet IntervalSet::intersect(const IntervalSet& other) const {
  std::vector<Interval> out;
  std::size_t i = 0, j = 0;
  while (i < parts_.size() && j < other.parts_.size()) {
    const auto& a = parts_[i];
    const auto& b = other.parts_[j];
    const std::uint32_t lo = std::max(a.lo, b.lo);
    const std::uint32_t hi = std::min(a.hi, b.hi);
    if (lo <= hi) out.push_back({lo, hi});
    if (a.hi < b.hi) {
      ++i;
    } else {
      ++j;
    }
  }
  IntervalSet result;
  result.parts_ = std::move(out);
  return result;
}

IntervalSet IntervalSet::subtract(const IntervalSet& other) const {
  std::vector<Interval> out;
  std::size_t j = 0;
  for (auto part : parts_) {
    std::uint64_t lo = part.lo;
    const std::uint64_t hi = part.hi;
    while (j < other.parts_.size() && other.parts_[j].hi < lo) ++j;
    std::size_t k = j;
    while (lo <= hi && k < other.parts_.size() && other.parts_[k].lo <= hi) {
      const auto& cut = other.parts_[k];
      if (cut.lo > lo) {
        out.push_back({static_cast<std::uint32_t>(lo), cut.lo - 1});
      }
      lo = std::uint64_t{cut.hi} + 1;
      if (cut.hi >= hi) break;
      ++k;
    }
    if (lo <= hi) {
      out.push_back(
          {static_cast<std::uint32_t>(lo), static_cast<std::uint32_t>(hi)});
    }
  }
  IntervalSet result;
  result.parts_ = std::move(out);
  return result;
}

IntervalSet IntervalSet::complement(std::uint32_t lo, std::uint32_t hi) const {
  return IntervalSet::range(lo, hi).subtract(*this);
}

}  // namespace log2ns
