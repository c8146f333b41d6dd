#include <doctest.h>

#include "log2ns/ipv4.hpp"

using namespace log2ns;

TEST_CASE("dotted quads") {
  CHECK(ipv4::parse("0.0.0.0") == 0u);
  CHECK(ipv4::parse("255.255.255.255") == 0xFFFFFFFFu);
  CHECK(ipv4::parse("10.11.29.5") == 0x0A0B1D05u);
  CHECK(ipv4::parse("010.1.1.1") == 0x0A010101u);
  for (const char* bad : {"", "1.2.3", "1.2.3.4.5", "256.1.1.1", "1..2.3",
                          " 1.2.3.4", "+1.2.3.4", "1.2.3.4 ", "a.b.c.d",
                          "1.2.3.-4"}) {
    CAPTURE(bad);
    CHECK_FALSE(ipv4::parse(bad).has_value());
  }
  CHECK(ipv4::format(0x2A3E5E02u) == "42.62.94.2");
}

TEST_CASE("blocks") {
  auto cidr = ipv4::parse_block("10.0.0.0/28");
  REQUIRE(cidr);
  CHECK(cidr->lo == 0x0A000000u);
  CHECK(cidr->hi == 0x0A00000Fu);
  auto masked = ipv4::parse_block("10.0.0.9/30");
  REQUIRE(masked);
  CHECK(masked->lo == 0x0A000008u);
  auto all = ipv4::parse_block("0.0.0.0/0");
  REQUIRE(all);
  CHECK(all->size() == (std::uint64_t{1} << 32));
  auto range = ipv4::parse_block("1.1.1.1-1.1.1.9");
  REQUIRE(range);
  CHECK(range->size() == 9);
  CHECK_FALSE(ipv4::parse_block("1.1.1.9-1.1.1.1"));
  CHECK_FALSE(ipv4::parse_block("1.1.1.1/33"));
  CHECK_FALSE(ipv4::parse_block("1.1.1.1/"));
}

TEST_CASE("format_interval round-trips through parse_block") {
  for (const char* text : {"4.4.4.4", "10.0.0.0/28", "1.1.1.1-1.1.1.9",
                           "0.0.0.0/0", "192.168.1.0/24"}) {
    auto block = ipv4::parse_block(text);
    REQUIRE(block);
    CHECK(ipv4::format_interval(*block) == text);
  }
}
