#include "log2ns/flowlog.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>
#include <variant>

#include <json.hpp>

#include "log2ns/error.hpp"
#include "log2ns/ipv4.hpp"
#include "log2ns/strings.hpp"

namespace log2ns {

namespace {

using json = nlohmann::json;

constexpr std::array<std::string_view, kFieldCount> kFieldNames = {
    "src_ip",      "dst_ip",     "protocol",   "src_port",
    "dst_port",    "bytes_sent", "from_zone",  "to_zone",
    "application", "src_region", "dst_region", "timestamp",
};

constexpr std::array<std::string_view, 7> kCategoryNames = {
    "ip", "app", "proto", "zone", "region", "port", "bytes_bucket",
};

template <class T>
bool parse_integer(std::string_view text, T& out) {
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

// Result of parsing one row: the record, or the reject reason.
using RowResult = std::variant<FlowRecord, std::string>;

// Assigns one textual cell to the record; returns a reject reason on failure.
std::optional<std::string> assign(FlowRecord& r, Field f,
                                  std::string_view cell) {
  auto text_value = [&](std::optional<std::string>& slot)
      -> std::optional<std::string> {
    if (cell.find_first_of(",\n\r") != std::string_view::npos) {
      return "invalid " + std::string(field_name(f));
    }
    slot = std::string(cell);
    return std::nullopt;
  };
  switch (f) {
    case Field::kSrcIp:
    case Field::kDstIp: {
      if (ipv4::looks_like_ipv6(cell)) return std::string("ipv6 not supported");
      auto a = ipv4::parse(cell);
      if (!a) return std::string("invalid IPv4");
      (f == Field::kSrcIp ? r.src_ip : r.dst_ip) = *a;
      return std::nullopt;
    }
    case Field::kProtocol: {
      auto reason = text_value(r.protocol);
      if (!reason) r.protocol = to_upper(*r.protocol);
      return reason;
    }
    case Field::kSrcPort:
    case Field::kDstPort: {
      std::uint32_t port;
      if (!parse_integer(cell, port) || port > 65535) {
        return "invalid " + std::string(field_name(f));
      }
      (f == Field::kSrcPort ? r.src_port : r.dst_port) =
          static_cast<std::uint16_t>(port);
      return std::nullopt;
    }
    case Field::kBytesSent: {
      std::uint64_t bytes;
      if (!parse_integer(cell, bytes)) return std::string("invalid bytes_sent");
      r.bytes_sent = bytes;
      return std::nullopt;
    }
    case Field::kTimestamp: {
      std::int64_t ts;
      if (!parse_integer(cell, ts)) return std::string("invalid timestamp");
      r.timestamp = ts;
      return std::nullopt;
    }
    case Field::kFromZone:
      return text_value(r.from_zone);
    case Field::kToZone:
      return text_value(r.to_zone);
    case Field::kApplication:
      return text_value(r.application);
    case Field::kSrcRegion:
      return text_value(r.src_region);
    case Field::kDstRegion:
      return text_value(r.dst_region);
  }
  return std::string("unknown field");
}

std::vector<std::string_view> split_lines(std::string_view source) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= source.size()) {
    auto end = source.find('\n', start);
    if (end == std::string_view::npos) end = source.size();
    auto line = source.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

bool blank(std::string_view line) { return trim(line).empty(); }

RowResult parse_csv_row(std::string_view line,
                        const std::vector<Field>& columns) {
  auto cells = split(line, ',');
  if (cells.size() != columns.size()) {
    return std::string("column count mismatch");
  }
  FlowRecord r;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    const auto cell = trim(cells[i]);
    const Field f = columns[i];
    if (cell.empty()) {
      if (f == Field::kSrcIp || f == Field::kDstIp) {
        return "missing " + std::string(field_name(f));
      }
      continue;
    }
    if (auto reason = assign(r, f, cell)) return *reason;
  }
  return r;
}

RowResult parse_json_row(std::string_view line, std::set<Field>& seen) {
  json object;
  try {
    object = json::parse(line);
  } catch (const json::parse_error&) {
    return std::string("malformed json");
  }
  if (!object.is_object()) return std::string("malformed json");
  FlowRecord r;
  bool has_src = false, has_dst = false;
  for (const auto& [key, value] : object.items()) {
    auto f = field_from_name(key);
    if (!f) return "unknown field '" + key + "'";
    if (value.is_null()) continue;
    std::string cell;
    if (value.is_string()) {
      cell = value.get<std::string>();
    } else if (value.is_number_integer() || value.is_number_unsigned()) {
      cell = value.dump();
    } else {
      return "invalid " + key;
    }
    if (trim(cell).empty()) continue;
    if (auto reason = assign(r, *f, trim(cell))) return *reason;
    seen.insert(*f);
    has_src |= *f == Field::kSrcIp;
    has_dst |= *f == Field::kDstIp;
  }
  if (!has_src) return std::string("missing src_ip");
  if (!has_dst) return std::string("missing dst_ip");
  return r;
}

void collect(std::vector<RowResult>& results, LogCorpus& corpus) {
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (auto* rec = std::get_if<FlowRecord>(&results[i])) {
      corpus.records.push_back(std::move(*rec));
    } else {
      corpus.rejects.push_back({i, std::get<std::string>(results[i])});
    }
  }
}

LogCorpus parse_csv(std::string_view source, Parallelism par) {
  LogCorpus corpus;
  auto lines = split_lines(source);
  std::size_t at = 0;
  while (at < lines.size() && blank(lines[at])) ++at;
  if (at == lines.size()) return corpus;

  std::vector<Field> columns;
  std::set<Field> unique;
  for (auto name : split(lines[at], ',')) {
    auto f = field_from_name(trim(name));
    if (!f) {
      throw SchemaError("unknown column '" + std::string(trim(name)) + "'");
    }
    if (!unique.insert(*f).second) {
      throw SchemaError("duplicate column '" + std::string(trim(name)) + "'");
    }
    columns.push_back(*f);
  }
  for (Field required : {Field::kSrcIp, Field::kDstIp}) {
    if (!unique.contains(required)) {
      throw SchemaError("missing mandatory column '" +
                        std::string(field_name(required)) + "'");
    }
  }
  corpus.schema.assign(unique.begin(), unique.end());

  std::vector<std::string_view> rows;
  for (std::size_t i = at + 1; i < lines.size(); ++i) {
    if (!blank(lines[i])) rows.push_back(lines[i]);
  }
  std::vector<RowResult> results(rows.size());
  parallel_for(0, rows.size(), par, [&](std::size_t i) {
    results[i] = parse_csv_row(rows[i], columns);
  });
  collect(results, corpus);
  return corpus;
}

LogCorpus parse_jsonl(std::string_view source, Parallelism par) {
  LogCorpus corpus;
  std::vector<std::string_view> rows;
  for (auto line : split_lines(source)) {
    if (!blank(line)) rows.push_back(line);
  }
  std::vector<RowResult> results(rows.size());
  std::vector<std::set<Field>> seen(rows.size());
  parallel_for(0, rows.size(), par, [&](std::size_t i) {
    results[i] = parse_json_row(rows[i], seen[i]);
  });
  std::set<Field> schema;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (std::holds_alternative<FlowRecord>(results[i])) {
      schema.insert(seen[i].begin(), seen[i].end());
    }
  }
  if (!rows.empty()) {
    schema.insert(Field::kSrcIp);
    schema.insert(Field::kDstIp);
  }
  corpus.schema.assign(schema.begin(), schema.end());
  collect(results, corpus);
  return corpus;
}

}  // namespace

std::string_view field_name(Field f) {
  return kFieldNames[static_cast<std::size_t>(f)];
}

std::optional<Field> field_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kFieldNames.size(); ++i) {
    if (kFieldNames[i] == name) return static_cast<Field>(i);
  }
  return std::nullopt;
}

const std::array<Field, kFieldCount>& all_fields() {
  static const auto fields = [] {
    std::array<Field, kFieldCount> out{};
    for (std::size_t i = 0; i < kFieldCount; ++i) {
      out[i] = static_cast<Field>(i);
    }
    return out;
  }();
  return fields;
}

bool FlowRecord::has(Field f) const {
  switch (f) {
    case Field::kSrcIp:
    case Field::kDstIp:
      return true;
    case Field::kProtocol:
      return protocol.has_value();
    case Field::kSrcPort:
      return src_port.has_value();
    case Field::kDstPort:
      return dst_port.has_value();
    case Field::kBytesSent:
      return bytes_sent.has_value();
    case Field::kFromZone:
      return from_zone.has_value();
    case Field::kToZone:
      return to_zone.has_value();
    case Field::kApplication:
      return application.has_value();
    case Field::kSrcRegion:
      return src_region.has_value();
    case Field::kDstRegion:
      return dst_region.has_value();
    case Field::kTimestamp:
      return timestamp.has_value();
  }
  return false;
}

std::optional<std::string> FlowRecord::text(Field f) const {
  auto num = [](const auto& v) -> std::optional<std::string> {
    if (!v) return std::nullopt;
    return std::to_string(*v);
  };
  switch (f) {
    case Field::kSrcIp:
      return ipv4::format(src_ip);
    case Field::kDstIp:
      return ipv4::format(dst_ip);
    case Field::kProtocol:
      return protocol;
    case Field::kSrcPort:
      return num(src_port);
    case Field::kDstPort:
      return num(dst_port);
    case Field::kBytesSent:
      return num(bytes_sent);
    case Field::kFromZone:
      return from_zone;
    case Field::kToZone:
      return to_zone;
    case Field::kApplication:
      return application;
    case Field::kSrcRegion:
      return src_region;
    case Field::kDstRegion:
      return dst_region;
    case Field::kTimestamp:
      return num(timestamp);
  }
  return std::nullopt;
}

bool LogCorpus::has_field(Field f) const {
  return std::find(schema.begin(), schema.end(), f) != schema.end();
}

std::optional<LogFormat> log_format_from_name(std::string_view name) {
  if (name == "csv" || name == "csv_with_header") return LogFormat::kCsv;
  if (name == "jsonl") return LogFormat::kJsonl;
  return std::nullopt;
}

LogCorpus parse_flow_log(std::string_view source, LogFormat format,
                         Parallelism par) {
  return format == LogFormat::kCsv ? parse_csv(source, par)
                                   : parse_jsonl(source, par);
}

std::string serialize_corpus(const LogCorpus& corpus, LogFormat format) {
  std::string out;
  if (format == LogFormat::kCsv) {
    for (std::size_t i = 0; i < corpus.schema.size(); ++i) {
      if (i) out += ',';
      out += field_name(corpus.schema[i]);
    }
    out += '\n';
    for (const auto& r : corpus.records) {
      for (std::size_t i = 0; i < corpus.schema.size(); ++i) {
        if (i) out += ',';
        if (auto t = r.text(corpus.schema[i])) out += *t;
      }
      out += '\n';
    }
    return out;
  }
  for (const auto& r : corpus.records) {
    json row = json::object();
    for (Field f : corpus.schema) {
      if (!r.has(f)) continue;
      const std::string key(field_name(f));
      switch (f) {
        case Field::kSrcPort:
          row[key] = *r.src_port;
          break;
        case Field::kDstPort:
          row[key] = *r.dst_port;
          break;
        case Field::kBytesSent:
          row[key] = *r.bytes_sent;
          break;
        case Field::kTimestamp:
          row[key] = *r.timestamp;
          break;
        default:
          row[key] = *r.text(f);
      }
    }
    out += row.dump();
    out += '\n';
  }
  return out;
}

std::string serialize_rejects(const LogCorpus& corpus) {
  std::string out;
  for (const auto& reject : corpus.rejects) {
    out += json{{"row", reject.row}, {"reason", reject.reason}}.dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string_view category_name(TokenCategory c) {
  return kCategoryNames[static_cast<std::size_t>(c)];
}

std::optional<TokenCategory> category_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
    if (kCategoryNames[i] == name) return static_cast<TokenCategory>(i);
  }
  return std::nullopt;
}

std::optional<TokenCategory> category_of(Field f) {
  switch (f) {
    case Field::kSrcIp:
    case Field::kDstIp:
      return TokenCategory::kIp;
    case Field::kProtocol:
      return TokenCategory::kProto;
    case Field::kSrcPort:
    case Field::kDstPort:
      return TokenCategory::kPort;
    case Field::kBytesSent:
      return TokenCategory::kBytesBucket;
    case Field::kFromZone:
    case Field::kToZone:
      return TokenCategory::kZone;
    case Field::kApplication:
      return TokenCategory::kApp;
    case Field::kSrcRegion:
    case Field::kDstRegion:
      return TokenCategory::kRegion;
    case Field::kTimestamp:
      return std::nullopt;
  }
  return std::nullopt;
}

std::string Token::render() const {
  return std::string(category_name(category)) + ":" + value;
}

std::optional<Token> Token::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  auto category = category_from_name(text.substr(0, colon));
  if (!category) return std::nullopt;
  return Token{*category, std::string(text.substr(colon + 1))};
}

TokenScheme TokenScheme::defaults() {
  return {{Field::kSrcIp, Field::kDstIp, Field::kApplication, Field::kProtocol,
           Field::kSrcRegion, Field::kDstRegion},
          10};
}

void TokenScheme::validate() const {
  if (bytes_base < 2) throw InvalidArgument("bytes_base must be >= 2");
  std::set<Field> seen;
  for (Field f : fields) {
    if (!category_of(f)) {
      throw InvalidArgument("field '" + std::string(field_name(f)) +
                            "' cannot be tokenized");
    }
    if (!seen.insert(f).second) {
      throw InvalidArgument("field '" + std::string(field_name(f)) +
                            "' listed twice in tokenization scheme");
    }
  }
}

std::uint64_t bytes_bucket(std::uint64_t bytes, std::uint64_t base) {
  // Largest b with base^b <= bytes + 1, in 128 bits so bytes + 1 never wraps.
  using u128 = unsigned __int128;
  const u128 n = static_cast<u128>(bytes) + 1;
  std::uint64_t bucket = 0;
  for (u128 power = base; power <= n; power *= base) ++bucket;
  return bucket;
}

std::optional<Token> field_token(const FlowRecord& record, Field field,
                                 std::uint64_t bytes_base) {
  auto category = category_of(field);
  if (!category || !record.has(field)) return std::nullopt;
  if (field == Field::kBytesSent) {
    return Token{*category,
                 std::to_string(bytes_bucket(*record.bytes_sent, bytes_base))};
  }
  return Token{*category, *record.text(field)};
}

std::vector<Token> tokenize_record(const FlowRecord& record,
                                   const TokenScheme& scheme) {
  std::vector<Token> tokens;
  tokens.reserve(scheme.fields.size());
  for (Field f : scheme.fields) {
    if (auto t = field_token(record, f, scheme.bytes_base)) {
      tokens.push_back(std::move(*t));
    }
  }
  return tokens;
}

CorpusStats corpus_stats(const LogCorpus& corpus, const TokenScheme& scheme) {
  scheme.validate();
  CorpusStats stats;
  std::map<std::string, std::pair<Token, std::uint64_t>> counts;
  std::vector<std::set<std::string>> distinct(scheme.fields.size());
  for (const auto& record : corpus.records) {
    for (std::size_t i = 0; i < scheme.fields.size(); ++i) {
      auto t = field_token(record, scheme.fields[i], scheme.bytes_base);
      if (!t) continue;
      auto key = t->render();
      distinct[i].insert(t->value);
      auto [it, inserted] = counts.try_emplace(key, *t, 0);
      ++it->second.second;
      ++stats.total_occurrences;
    }
  }
  for (auto& [key, entry] : counts) {
    stats.tokens.push_back({std::move(entry.first), entry.second});
  }
  std::stable_sort(stats.tokens.begin(), stats.tokens.end(),
                   [](const TokenCount& a, const TokenCount& b) {
                     return a.count > b.count;
                   });
  for (std::size_t i = 0; i < scheme.fields.size(); ++i) {
    stats.fields.push_back({scheme.fields[i], distinct[i].size()});
  }
  return stats;
}

}  // namespace log2ns
