#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "log2ns/cluster.hpp"
#include "log2ns/embedding.hpp"
#include "log2ns/flowlog.hpp"
#include "log2ns/parallel.hpp"
#include "log2ns/policy.hpp"

namespace log2ns {

enum class QueryMode { kLogs, kCorr, kFormal, kAuto };

std::string_view query_mode_name(QueryMode m);

enum class ConstraintOp { kEq, kNe, kIn, kNotIn, kRange };

// Fields a query may constrain. Regions exist only in the logs.
enum class QueryField {
  kSrcIp,
  kDstIp,
  kFromZone,
  kToZone,
  kApplication,
  kProtocol,
  kDstPort,
  kSrcRegion,
  kDstRegion,
};

std::string_view query_field_name(QueryField f);
bool is_formal_field(QueryField f);

struct Constraint {
  QueryField field = QueryField::kSrcIp;
  ConstraintOp op = ConstraintOp::kEq;
  std::vector<std::string> values;  // kRange: {low, high}
  std::size_t position = 0;
};

struct Query {
  QueryMode mode = QueryMode::kLogs;
  std::vector<Constraint> constraints;
  std::optional<Action> desired_action;
  std::optional<Token> anchor;  // corr mode
  std::optional<std::size_t> k;
  std::optional<std::size_t> limit;
};

// Grammar: `<mode>: <clause> (<clause>)*` with clauses `field=value`,
// `field!=value`, `field in {a, b}`, `field not-in {a, b}`, `field=a..b`,
// `action=permit|deny`, `limit=N` and `neighbors(token, k=N)`.
// Errors throw ParseError carrying the byte position.
Query parse_query(std::string_view text);

// Canonical text form; parse_query(format_query(q)) == q up to positions.
std::string format_query(const Query& q);

// Conjunction of a query's field constraints, normalized per field.
struct ConstraintSet {
  std::optional<IntervalSet> src_ip;
  std::optional<IntervalSet> dst_ip;
  std::optional<IntervalSet> dst_port;
  NameConstraint from_zone;
  NameConstraint to_zone;
  NameConstraint application;
  NameConstraint protocol;
  NameConstraint src_region;
  NameConstraint dst_region;

  static ConstraintSet from(const std::vector<Constraint>& constraints);

  // A field absent from the record fails every constraint placed on it.
  bool matches(const FlowRecord& record) const;
  SymbolicPacket to_symbolic() const;
};

// Exact predicate scan. Returns matching row indices in order.
std::vector<std::size_t> scan_logs(const LogCorpus& corpus,
                                   const ConstraintSet& constraints,
                                   Parallelism par = {});
std::vector<std::size_t> scan_logs_serial(const LogCorpus& corpus,
                                          const ConstraintSet& constraints);

// Artifacts a query may need. Null members are "not loaded".
struct Artifacts {
  const LogCorpus* corpus = nullptr;
  const EmbeddingModel* embedding = nullptr;
  const ClusterModel* clusters = nullptr;
  const FirewallModel* policy = nullptr;
};

enum class Provenance { kLogSearch, kCorrelation, kFormal };

std::string_view provenance_name(Provenance p);

struct QueryResult {
  Provenance provenance = Provenance::kLogSearch;
  bool escalated = false;  // auto mode fell through to the formal engine
  std::vector<std::size_t> matches;
  std::size_t total_matches = 0;
  std::vector<Neighbor> neighbors;
  std::optional<SolveResult> formal;
  std::chrono::nanoseconds elapsed{0};
};

// Throws InvalidArgument naming the missing artifact.
QueryResult execute(const Query& query, const Artifacts& artifacts,
                    Parallelism par = {});

struct WitnessFailure {
  std::size_t row = 0;
  std::string constraints;  // query-grammar clauses
  std::string reason;
};

struct WitnessReport {
  std::size_t sampled = 0;
  std::size_t passed = 0;
  std::vector<WitnessFailure> failures;
};

// Formal constraints asserting that a logged row's zones, addresses and
// application can be permitted.
SymbolicPacket witness_constraints(const FlowRecord& record);
std::string witness_clauses(const FlowRecord& record);

// Samples min(n, rows) rows uniformly without replacement (seeded) and
// checks each is PERMIT-satisfiable. Failures are reported in row order.
WitnessReport witness_check(const LogCorpus& corpus,
                            const FirewallModel& model, std::size_t n,
                            std::uint64_t seed, Parallelism par = {});

}  // namespace log2ns
