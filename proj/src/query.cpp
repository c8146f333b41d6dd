#include "log2ns/query.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <numeric>

#include "log2ns/error.hpp"
#include "log2ns/ipv4.hpp"
#include "log2ns/rng.hpp"
#include "log2ns/strings.hpp"

namespace log2ns {

namespace {

constexpr std::array<std::string_view, 9> kQueryFieldNames = {
    "src_ip",   "dst_ip",   "from_zone",  "to_zone",    "application",
    "protocol", "dst_port", "src_region", "dst_region",
};

std::optional<QueryField> query_field_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kQueryFieldNames.size(); ++i) {
    if (kQueryFieldNames[i] == name) return static_cast<QueryField>(i);
  }
  return std::nullopt;
}

bool is_address(QueryField f) {
  return f == QueryField::kSrcIp || f == QueryField::kDstIp;
}

bool value_char(char c) {
  return !std::isspace(static_cast<unsigned char>(c)) && c != ',' &&
         c != '{' && c != '}' && c != '(' && c != ')' && c != '=' && c != '!';
}

bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

std::optional<std::uint32_t> parse_port(std::string_view text) {
  if (text.empty() || text.size() > 5) return std::nullopt;
  std::uint32_t v = 0;
  for (char c : text) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + static_cast<std::uint32_t>(c - '0');
  }
  if (v > 65535) return std::nullopt;
  return v;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  Query parse() {
    Query q;
    skip_ws();
    const std::size_t mode_pos = pos_;
    const auto mode = ident();
    if (mode == "logs") {
      q.mode = QueryMode::kLogs;
    } else if (mode == "corr") {
      q.mode = QueryMode::kCorr;
    } else if (mode == "formal") {
      q.mode = QueryMode::kFormal;
    } else if (mode == "auto") {
      q.mode = QueryMode::kAuto;
    } else {
      fail("expected mode logs|corr|formal|auto", mode_pos);
    }
    skip_ws();
    expect(':');
    skip_ws();
    while (!eof()) {
      clause(q);
      skip_ws();
    }
    finish(q);
    return q;
  }

 private:
  [[noreturn]] void fail(const std::string& what, std::size_t at) const {
    throw ParseError(what, at);
  }

  bool eof() const { return pos_ >= s_.size(); }
  char peek() const { return eof() ? '\0' : s_[pos_]; }

  void skip_ws() {
    while (!eof() && std::isspace(static_cast<unsigned char>(s_[pos_]))) {
      ++pos_;
    }
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'", pos_);
    ++pos_;
  }

  std::string ident() {
    const std::size_t start = pos_;
    while (!eof() && ident_char(s_[pos_])) ++pos_;
    return std::string(s_.substr(start, pos_ - start));
  }

  std::string value() {
    const std::size_t start = pos_;
    while (!eof() && value_char(s_[pos_])) ++pos_;
    if (pos_ == start) fail("expected a value", start);
    return std::string(s_.substr(start, pos_ - start));
  }

  std::size_t number() {
    const std::size_t start = pos_;
    std::size_t v = 0;
    while (!eof() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
      v = v * 10 + static_cast<std::size_t>(s_[pos_] - '0');
      if (v > 1'000'000'000) fail("number too large", start);
      ++pos_;
    }
    if (pos_ == start) fail("expected a number", start);
    return v;
  }

  std::vector<std::string> value_set() {
    expect('{');
    std::vector<std::string> out;
    skip_ws();
    if (peek() == '}') {
      ++pos_;
      return out;
    }
    while (true) {
      skip_ws();
      out.push_back(value());
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      expect('}');
      return out;
    }
  }

  void clause(Query& q) {
    const std::size_t start = pos_;
    const auto name = ident();
    if (name.empty()) fail("expected a clause", start);

    if (name == "neighbors") {
      if (q.anchor) fail("only one neighbors() clause allowed", start);
      skip_ws();
      expect('(');
      skip_ws();
      const std::size_t token_pos = pos_;
      auto token = Token::parse(value());
      if (!token || token->value.empty()) {
        fail("expected a token like ip:10.0.0.1", token_pos);
      }
      skip_ws();
      expect(',');
      skip_ws();
      const std::size_t k_pos = pos_;
      if (ident() != "k") fail("expected k=N", k_pos);
      skip_ws();
      expect('=');
      skip_ws();
      const std::size_t n_pos = pos_;
      const auto k = number();
      if (k < 1) fail("k must be >= 1", n_pos);
      skip_ws();
      expect(')');
      q.anchor = std::move(*token);
      q.k = k;
      anchor_pos_ = start;
      return;
    }

    skip_ws();
    if (name == "action" || name == "limit") {
      expect('=');
      skip_ws();
      const std::size_t vpos = pos_;
      if (name == "limit") {
        q.limit = number();
        return;
      }
      const auto v = to_lower(value());
      if (v != "permit" && v != "deny") fail("action must be permit or deny", vpos);
      if (q.desired_action) fail("action given twice", start);
      q.desired_action = v == "permit" ? Action::kPermit : Action::kDeny;
      action_pos_ = start;
      return;
    }

    auto field = query_field_from_name(name);
    if (!field) fail("unknown field '" + name + "'", start);
    Constraint c;
    c.field = *field;
    c.position = start;
    if (peek() == '!' ) {
      ++pos_;
      expect('=');
      skip_ws();
      c.op = ConstraintOp::kNe;
      c.values.push_back(value());
    } else if (peek() == '=') {
      ++pos_;
      skip_ws();
      const std::size_t vpos = pos_;
      auto v = value();
      if (auto dots = v.find(".."); dots != std::string::npos) {
        c.op = ConstraintOp::kRange;
        c.values = {v.substr(0, dots), v.substr(dots + 2)};
        if (c.values[0].empty() || c.values[1].empty()) {
          fail("range needs both ends", vpos);
        }
      } else {
        c.op = ConstraintOp::kEq;
        c.values.push_back(std::move(v));
      }
    } else {
      const std::size_t op_pos = pos_;
      const auto op = ident();
      if (op == "in") {
        c.op = ConstraintOp::kIn;
      } else if (op == "not-in") {
        c.op = ConstraintOp::kNotIn;
      } else {
        fail("expected =, !=, in or not-in", op_pos);
      }
      skip_ws();
      c.values = value_set();
    }
    validate_values(c);
    q.constraints.push_back(std::move(c));
  }

  void validate_values(const Constraint& c) const {
    if (c.op == ConstraintOp::kRange && !is_address(c.field) &&
        c.field != QueryField::kDstPort) {
      fail("ranges apply only to addresses and ports", c.position);
    }
    if (is_address(c.field)) {
      if (c.op == ConstraintOp::kRange) {
        auto lo = ipv4::parse(c.values[0]);
        auto hi = ipv4::parse(c.values[1]);
        if (!lo || !hi || *lo > *hi) fail("invalid address range", c.position);
        return;
      }
      for (const auto& v : c.values) {
        if (!ipv4::parse_block(v)) {
          fail("invalid IPv4 address '" + v + "'", c.position);
        }
      }
    } else if (c.field == QueryField::kDstPort) {
      for (const auto& v : c.values) {
        if (!parse_port(v)) fail("invalid port '" + v + "'", c.position);
      }
      if (c.op == ConstraintOp::kRange &&
          *parse_port(c.values[0]) > *parse_port(c.values[1])) {
        fail("invalid port range", c.position);
      }
    }
  }

  void finish(const Query& q) const {
    if (q.mode == QueryMode::kCorr) {
      if (!q.anchor) fail("corr query needs neighbors(token, k=N)", s_.size());
      if (!q.constraints.empty()) {
        fail("corr query takes only neighbors(...)", q.constraints[0].position);
      }
      if (q.desired_action) fail("action is not valid in corr mode", action_pos_);
      return;
    }
    if (q.anchor) fail("neighbors() is only valid in corr mode", anchor_pos_);
    if (q.mode == QueryMode::kLogs && q.desired_action) {
      fail("action is only valid in formal or auto mode", action_pos_);
    }
    if (q.mode == QueryMode::kFormal) {
      for (const auto& c : q.constraints) {
        if (!is_formal_field(c.field)) {
          fail("field '" + std::string(query_field_name(c.field)) +
                   "' is not part of the formal model",
               c.position);
        }
      }
    }
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::size_t anchor_pos_ = 0;
  std::size_t action_pos_ = 0;
};

IntervalSet values_to_set(const Constraint& c) {
  std::vector<Interval> parts;
  if (c.op == ConstraintOp::kRange) {
    if (is_address(c.field)) {
      parts.push_back({*ipv4::parse(c.values[0]), *ipv4::parse(c.values[1])});
    } else {
      parts.push_back({*parse_port(c.values[0]), *parse_port(c.values[1])});
    }
    return IntervalSet(std::move(parts));
  }
  for (const auto& v : c.values) {
    if (is_address(c.field)) {
      parts.push_back(*ipv4::parse_block(v));
    } else {
      const auto p = *parse_port(v);
      parts.push_back({p, p});
    }
  }
  return IntervalSet(std::move(parts));
}

bool positive(ConstraintOp op) {
  return op == ConstraintOp::kEq || op == ConstraintOp::kIn ||
         op == ConstraintOp::kRange;
}

}  // namespace

std::string_view query_mode_name(QueryMode m) {
  switch (m) {
    case QueryMode::kLogs:
      return "logs";
    case QueryMode::kCorr:
      return "corr";
    case QueryMode::kFormal:
      return "formal";
    case QueryMode::kAuto:
      return "auto";
  }
  return "logs";
}

std::string_view query_field_name(QueryField f) {
  return kQueryFieldNames[static_cast<std::size_t>(f)];
}

bool is_formal_field(QueryField f) {
  return f != QueryField::kSrcRegion && f != QueryField::kDstRegion;
}

std::string_view provenance_name(Provenance p) {
  switch (p) {
    case Provenance::kLogSearch:
      return "log_search";
    case Provenance::kCorrelation:
      return "correlation";
    case Provenance::kFormal:
      return "formal";
  }
  return "log_search";
}

Query parse_query(std::string_view text) { return Parser(text).parse(); }

std::string format_query(const Query& q) {
  std::string out(query_mode_name(q.mode));
  out += ":";
  for (const auto& c : q.constraints) {
    out += " ";
    out += query_field_name(c.field);
    switch (c.op) {
      case ConstraintOp::kEq:
        out += "=" + c.values[0];
        break;
      case ConstraintOp::kNe:
        out += "!=" + c.values[0];
        break;
      case ConstraintOp::kRange:
        out += "=" + c.values[0] + ".." + c.values[1];
        break;
      case ConstraintOp::kIn:
      case ConstraintOp::kNotIn: {
        out += c.op == ConstraintOp::kIn ? " in {" : " not-in {";
        for (std::size_t i = 0; i < c.values.size(); ++i) {
          if (i) out += ", ";
          out += c.values[i];
        }
        out += "}";
        break;
      }
    }
  }
  if (q.anchor) {
    out += " neighbors(" + q.anchor->render() + ", k=" + std::to_string(*q.k) +
           ")";
  }
  if (q.desired_action) {
    out += q.desired_action == Action::kPermit ? " action=permit"
                                               : " action=deny";
  }
  if (q.limit) out += " limit=" + std::to_string(*q.limit);
  return out;
}

// ---------------------------------------------------------------------------

ConstraintSet ConstraintSet::from(const std::vector<Constraint>& constraints) {
  ConstraintSet cs;
  for (const auto& c : constraints) {
    if (is_address(c.field) || c.field == QueryField::kDstPort) {
      auto& slot = c.field == QueryField::kSrcIp   ? cs.src_ip
                   : c.field == QueryField::kDstIp ? cs.dst_ip
                                                   : cs.dst_port;
      const IntervalSet full = c.field == QueryField::kDstPort
                                   ? IntervalSet::range(0, 65535)
                                   : IntervalSet::range(0, ipv4::kMax);
      const IntervalSet set = values_to_set(c);
      const IntervalSet current = slot ? *slot : full;
      slot = positive(c.op) ? current.intersect(set) : current.subtract(set);
      continue;
    }
    NameConstraint* slot = nullptr;
    switch (c.field) {
      case QueryField::kFromZone:
        slot = &cs.from_zone;
        break;
      case QueryField::kToZone:
        slot = &cs.to_zone;
        break;
      case QueryField::kApplication:
        slot = &cs.application;
        break;
      case QueryField::kProtocol:
        slot = &cs.protocol;
        break;
      case QueryField::kSrcRegion:
        slot = &cs.src_region;
        break;
      case QueryField::kDstRegion:
        slot = &cs.dst_region;
        break;
      default:
        break;
    }
    std::set<std::string> values;
    for (const auto& v : c.values) {
      values.insert(c.field == QueryField::kProtocol ? to_upper(v) : v);
    }
    if (positive(c.op)) {
      slot->require_in(values);
    } else {
      slot->exclude(values);
    }
  }
  return cs;
}

bool ConstraintSet::matches(const FlowRecord& r) const {
  if (src_ip && !src_ip->contains(r.src_ip)) return false;
  if (dst_ip && !dst_ip->contains(r.dst_ip)) return false;
  if (dst_port && (!r.dst_port || !dst_port->contains(*r.dst_port))) {
    return false;
  }
  auto named = [](const NameConstraint& c,
                  const std::optional<std::string>& value) {
    if (c.unconstrained()) return true;
    return value && c.admits(*value);
  };
  return named(from_zone, r.from_zone) && named(to_zone, r.to_zone) &&
         named(application, r.application) && named(protocol, r.protocol) &&
         named(src_region, r.src_region) && named(dst_region, r.dst_region);
}

SymbolicPacket ConstraintSet::to_symbolic() const {
  SymbolicPacket sp;
  sp.from_zone = from_zone;
  sp.to_zone = to_zone;
  sp.src_ip = src_ip;
  sp.dst_ip = dst_ip;
  sp.application = application;
  sp.protocol = protocol;
  sp.dst_port = dst_port;
  return sp;
}

std::vector<std::size_t> scan_logs(const LogCorpus& corpus,
                                   const ConstraintSet& constraints,
                                   Parallelism par) {
  std::vector<std::uint8_t> hit(corpus.records.size(), 0);
  parallel_for(0, corpus.records.size(), par, [&](std::size_t i) {
    hit[i] = constraints.matches(corpus.records[i]) ? 1 : 0;
  });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < hit.size(); ++i) {
    if (hit[i]) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> scan_logs_serial(const LogCorpus& corpus,
                                          const ConstraintSet& constraints) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    if (constraints.matches(corpus.records[i])) out.push_back(i);
  }
  return out;
}

namespace {

SolveResult run_formal(const Query& q, const Artifacts& a) {
  if (!a.policy) throw InvalidArgument("query needs the formal model (compile)");
  for (const auto& c : q.constraints) {
    if (!is_formal_field(c.field)) {
      throw InvalidArgument("field '" + std::string(query_field_name(c.field)) +
                            "' has no formal counterpart");
    }
  }
  return a.policy->solve(ConstraintSet::from(q.constraints).to_symbolic(),
                         q.desired_action);
}

}  // namespace

QueryResult execute(const Query& q, const Artifacts& a, Parallelism par) {
  const auto start = std::chrono::steady_clock::now();
  QueryResult r;
  switch (q.mode) {
    case QueryMode::kCorr: {
      if (!a.embedding) {
        throw InvalidArgument("query needs the embedding model (train)");
      }
      r.provenance = Provenance::kCorrelation;
      r.neighbors = nearest_neighbors(*a.embedding, *q.anchor, *q.k, par);
      break;
    }
    case QueryMode::kFormal:
      r.provenance = Provenance::kFormal;
      r.formal = run_formal(q, a);
      break;
    case QueryMode::kLogs:
    case QueryMode::kAuto: {
      if (!a.corpus) throw InvalidArgument("query needs the log corpus (ingest)");
      r.provenance = Provenance::kLogSearch;
      r.matches = scan_logs(*a.corpus, ConstraintSet::from(q.constraints), par);
      r.total_matches = r.matches.size();
      if (q.limit && r.matches.size() > *q.limit) r.matches.resize(*q.limit);
      if (q.mode == QueryMode::kAuto && r.total_matches == 0) {
        r.provenance = Provenance::kFormal;
        r.escalated = true;
        r.formal = run_formal(q, a);
      }
      break;
    }
  }
  r.elapsed = std::chrono::duration_cast<std::chrono::nanoseconds>(
      std::chrono::steady_clock::now() - start);
  return r;
}

// ---------------------------------------------------------------------------

SymbolicPacket witness_constraints(const FlowRecord& record) {
  SymbolicPacket sp;
  if (record.from_zone) sp.from_zone.require_in({*record.from_zone});
  if (record.to_zone) sp.to_zone.require_in({*record.to_zone});
  sp.src_ip = IntervalSet::single(record.src_ip);
  sp.dst_ip = IntervalSet::single(record.dst_ip);
  if (record.application) sp.application.require_in({*record.application});
  return sp;
}

std::string witness_clauses(const FlowRecord& record) {
  std::string out;
  if (record.from_zone) out += "from_zone=" + *record.from_zone + " ";
  if (record.to_zone) out += "to_zone=" + *record.to_zone + " ";
  out += "src_ip=" + ipv4::format(record.src_ip) + " ";
  out += "dst_ip=" + ipv4::format(record.dst_ip);
  if (record.application) out += " application=" + *record.application;
  return out;
}

WitnessReport witness_check(const LogCorpus& corpus,
                            const FirewallModel& model, std::size_t n,
                            std::uint64_t seed, Parallelism par) {
  std::vector<std::size_t> rows(corpus.records.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  n = std::min(n, rows.size());
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::swap(rows[i], rows[i + rng.below(rows.size() - i)]);
  }
  rows.resize(n);
  std::sort(rows.begin(), rows.end());

  std::vector<std::optional<WitnessFailure>> outcome(n);
  parallel_for(0, n, par, [&](std::size_t i) {
    const auto& rec = corpus.records[rows[i]];
    const auto sp = witness_constraints(rec);
    if (model.solve(sp, Action::kPermit).sat) return;
    WitnessFailure f;
    f.row = rows[i];
    f.constraints = witness_clauses(rec);
    if (auto field = model.first_conflicting_field(sp, Action::kPermit)) {
      f.reason = "no PERMIT packet once " +
                 std::string(packet_field_name(*field)) +
                 " is constrained";
    } else {
      f.reason = "policy permits no traffic";
    }
    outcome[i] = std::move(f);
  });

  WitnessReport report;
  report.sampled = n;
  for (auto& o : outcome) {
    if (o) {
      report.failures.push_back(std::move(*o));
    } else {
      ++report.passed;
    }
  }
  return report;
}

}  // namespace log2ns
