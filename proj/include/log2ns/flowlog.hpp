#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "log2ns/parallel.hpp"

namespace log2ns {

// Columns a flow log may carry, in canonical order.
enum class Field : std::uint8_t {
  kSrcIp,
  kDstIp,
  kProtocol,
  kSrcPort,
  kDstPort,
  kBytesSent,
  kFromZone,
  kToZone,
  kApplication,
  kSrcRegion,
  kDstRegion,
  kTimestamp,
};

inline constexpr std::size_t kFieldCount = 12;

std::string_view field_name(Field f);
std::optional<Field> field_from_name(std::string_view name);
const std::array<Field, kFieldCount>& all_fields();

struct FlowRecord {
  std::uint32_t src_ip = 0;
  std::uint32_t dst_ip = 0;
  std::optional<std::string> protocol;
  std::optional<std::uint16_t> src_port;
  std::optional<std::uint16_t> dst_port;
  std::optional<std::uint64_t> bytes_sent;
  std::optional<std::string> from_zone;
  std::optional<std::string> to_zone;
  std::optional<std::string> application;
  std::optional<std::string> src_region;
  std::optional<std::string> dst_region;
  std::optional<std::int64_t> timestamp;

  bool has(Field f) const;
  // Text form of a field as it appears in CSV; nullopt when absent.
  std::optional<std::string> text(Field f) const;

  bool operator==(const FlowRecord&) const = default;
};

struct Reject {
  std::size_t row = 0;  // 0-based data row (header excluded)
  std::string reason;
};

struct LogCorpus {
  std::vector<FlowRecord> records;
  std::vector<Field> schema;  // canonical order
  std::vector<Reject> rejects;

  std::size_t row_count() const { return records.size(); }
  bool has_field(Field f) const;
};

enum class LogFormat { kCsv, kJsonl };

std::optional<LogFormat> log_format_from_name(std::string_view name);

// Parses a whole log. Malformed rows land in `rejects` with their row index;
// a header missing src_ip/dst_ip (or naming an unknown column) throws
// SchemaError. Rows are parsed in parallel shards and kept in input order.
LogCorpus parse_flow_log(std::string_view source, LogFormat format,
                         Parallelism par = {});

// Writes the accepted rows back out in the given format, schema columns only.
std::string serialize_corpus(const LogCorpus& corpus, LogFormat format);

// One JSON object per line: {"row": N, "reason": "..."}.
std::string serialize_rejects(const LogCorpus& corpus);

// ---------------------------------------------------------------------------
// Tokens

enum class TokenCategory : std::uint8_t {
  kIp,
  kApp,
  kProto,
  kZone,
  kRegion,
  kPort,
  kBytesBucket,
};

std::string_view category_name(TokenCategory c);
std::optional<TokenCategory> category_from_name(std::string_view name);
// Which token space a field's values live in. Timestamps have none.
std::optional<TokenCategory> category_of(Field f);

struct Token {
  TokenCategory category = TokenCategory::kIp;
  std::string value;

  std::string render() const;
  // Inverse of render(); nullopt for an unknown category or missing ':'.
  static std::optional<Token> parse(std::string_view text);

  auto operator<=>(const Token&) const = default;
};

struct TokenScheme {
  std::vector<Field> fields;
  std::uint64_t bytes_base = 10;

  // src/dst addresses, application, protocol and regions.
  static TokenScheme defaults();
  // Throws InvalidArgument for timestamp fields, duplicates or base < 2.
  void validate() const;
};

// floor(log_base(bytes + 1)), computed in integers.
std::uint64_t bytes_bucket(std::uint64_t bytes, std::uint64_t base);

// Token for one field of a record; nullopt when the field is absent.
std::optional<Token> field_token(const FlowRecord& record, Field field,
                                 std::uint64_t bytes_base = 10);

std::vector<Token> tokenize_record(const FlowRecord& record,
                                   const TokenScheme& scheme);

struct TokenCount {
  Token token;
  std::uint64_t count = 0;
};

struct FieldDistinct {
  Field field;
  std::uint64_t distinct = 0;
};

struct CorpusStats {
  std::vector<TokenCount> tokens;  // descending count, then rendered text
  std::vector<FieldDistinct> fields;
  std::uint64_t total_occurrences = 0;
};

CorpusStats corpus_stats(const LogCorpus& corpus, const TokenScheme& scheme);

}  // namespace log2ns
