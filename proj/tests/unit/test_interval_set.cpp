#include <doctest.h>

#include <bitset>
#include <ostream>

#include "log2ns/interval_set.hpp"
#include "log2ns/rng.hpp"

using namespace log2ns;

namespace {

constexpr std::uint32_t kUniverse = 64;
using Bits = std::bitset<kUniverse>;

IntervalSet random_set(Rng& rng) {
  std::vector<Interval> parts;
  const auto n = rng.below(5);
  for (std::size_t i = 0; i < n; ++i) {
    auto a = static_cast<std::uint32_t>(rng.below(kUniverse));
    auto b = static_cast<std::uint32_t>(rng.below(kUniverse));
    if (a > b) std::swap(a, b);
    parts.push_back({a, b});
  }
  return IntervalSet(std::move(parts));
}

Bits bits_of(const IntervalSet& s) {
  Bits b;
  for (std::uint32_t v = 0; v < kUniverse; ++v) b[v] = s.contains(v);
  return b;
}

bool normalized(const IntervalSet& s) {
  const auto& iv = s.intervals();
  for (std::size_t i = 0; i < iv.size(); ++i) {
    if (iv[i].lo > iv[i].hi) return false;
    if (i && std::uint64_t{iv[i - 1].hi} + 1 >= iv[i].lo) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("set algebra agrees with a bitset model") {
  Rng rng(11);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto a = random_set(rng);
    const auto b = random_set(rng);
    const Bits ba = bits_of(a), bb = bits_of(b);
    CHECK(normalized(a));
    CHECK(bits_of(a.unite(b)) == (ba | bb));
    CHECK(bits_of(a.intersect(b)) == (ba & bb));
    CHECK(bits_of(a.subtract(b)) == (ba & ~bb));
    CHECK(bits_of(a.complement(0, kUniverse - 1)) == ~ba);
    CHECK(a.cardinality() == ba.count());
    CHECK(a.is_subset_of(b) == ((ba & ~bb).none()));
    CHECK(normalized(a.unite(b)));
    CHECK(normalized(a.subtract(b)));
    if (ba.any()) {
      std::uint32_t first = 0;
      while (!ba[first]) ++first;
      CHECK(a.min() == first);
    } else {
      CHECK_FALSE(a.min().has_value());
    }
  }
}

TEST_CASE("adjacent and overlapping pieces merge") {
  IntervalSet s({{5, 9}, {0, 4}, {7, 12}, {20, 20}});
  REQUIRE(s.intervals().size() == 2);
  CHECK(s.intervals()[0] == Interval{0, 12});
  CHECK(s.intervals()[1] == Interval{20, 20});
}

TEST_CASE("full 32-bit range has exact cardinality") {
  const auto all = IntervalSet::range(0, 0xFFFFFFFFu);
  CHECK(all.cardinality() == (std::uint64_t{1} << 32));
  CHECK(all.complement(0, 0xFFFFFFFFu).empty());
  CHECK(all.subtract(IntervalSet::single(0xFFFFFFFFu)).intervals().back().hi ==
        0xFFFFFFFEu);
}
