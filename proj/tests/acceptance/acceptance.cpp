// Runs acceptance criteria 1-9 and prints one PASS/FAIL line for each.
// Exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <fmt/core.h>
#include <json.hpp>

#include "log2ns/cluster.hpp"
#include "log2ns/embedding.hpp"
#include "log2ns/fixtures.hpp"
#include "log2ns/pipeline.hpp"
#include "log2ns/policy.hpp"
#include "log2ns/query.hpp"
#include "log2ns/store.hpp"
#include "oracles.hpp"

using namespace log2ns;
using oracle::SmallOracle;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

Outcome solver_matches_enumeration() {
  const auto start = Clock::now();
  Rng rng(1001);
  std::size_t queries = 0, sat = 0, mismatches = 0, bad_replays = 0;
  for (int c = 0; c < 100; ++c) {
    const auto cfg = parse_config(oracle::random_small_config(rng, 10));
    const auto model = FirewallModel::compile(cfg);
    const SmallOracle truth(cfg);
    for (int q = 0; q < 100; ++q, ++queries) {
      const auto sp = oracle::random_small_query(rng);
      std::optional<Action> desired;
      if (rng.below(3)) desired = rng.below(2) ? Action::kPermit : Action::kDeny;
      const auto got = model.solve(sp, desired);
      const auto want = truth.solve(sp, desired);
      if (got.sat != want.has_value()) {
        ++mismatches;
        continue;
      }
      if (!got.sat) continue;
      ++sat;
      const auto& v = *got.verdict;
      const auto replay = model.evaluate(v.witness);
      if (SmallOracle::code_of(v.witness) != want || !sp.contains(v.witness) ||
          replay.action != v.action || replay.matched_rule != v.matched_rule ||
          (desired && v.action != *desired)) {
        ++bad_replays;
      }
    }
  }
  const double secs = seconds_since(start);
  return {mismatches == 0 && bad_replays == 0 && secs < 10.0,
          fmt::format("{} queries, {} sat, {} mismatches, {} bad witnesses, "
                      "{:.2f}s",
                      queries, sat, mismatches, bad_replays, secs)};
}

Outcome bypass_golden() {
  const auto model = FirewallModel::compile(parse_config(demo_policy_json()));
  Artifacts a;
  a.policy = &model;
  const auto r = execute(
      parse_query("formal: from_zone=Trust to_zone=Untrust "
                  "dst_ip=42.62.94.2 action=permit"),
      a);
  if (!r.formal || !r.formal->sat) return {false, "query is unsat"};
  const auto& v = *r.formal->verdict;
  const std::string got = to_json(v).dump(2) + "\n";
  const std::string want =
      slurp(fs::path(LOG2NS_GOLDEN_DIR) / "bypass_verdict.json");
  const bool trace_ok = !v.trace_lines.empty() &&
                        v.trace_lines.front() == "Matched security rule BypassFW";
  return {v.action == Action::kPermit && v.matched_rule == "BypassFW" &&
              trace_ok && got == want,
          fmt::format("{} via {}, golden {}", action_name(v.action),
                      v.matched_rule, got == want ? "identical" : "differs")};
}

Outcome dns_remediation() {
  const auto q_permit = parse_query(
      "formal: dst_ip in {4.4.4.4, 8.8.8.8} application=dns action=permit");
  const auto q_deny = parse_query(
      "formal: dst_ip in {4.4.4.4, 8.8.8.8} application=dns action=deny");
  const auto before = FirewallModel::compile(parse_config(demo_policy_json()));
  const auto after =
      FirewallModel::compile(parse_config(remediated_policy_json()));
  Artifacts a;
  a.policy = &before;
  const bool sat_before = execute(q_permit, a).formal->sat;
  a.policy = &after;
  const bool sat_after = execute(q_permit, a).formal->sat;
  const auto deny = execute(q_deny, a);
  const bool ordered = after.rule_index("BlockPublicDNS") &&
                       after.rule_index("AllowDNS") &&
                       *after.rule_index("BlockPublicDNS") <
                           *after.rule_index("AllowDNS");
  const bool deny_ok = deny.formal->sat &&
                       deny.formal->verdict->matched_rule == "BlockPublicDNS";
  return {sat_before && !sat_after && deny_ok && ordered,
          fmt::format("permit before={} after={}, deny via {}",
                      sat_before ? "SAT" : "UNSAT",
                      sat_after ? "SAT" : "UNSAT",
                      deny.formal->sat ? deny.formal->verdict->matched_rule
                                       : "UNSAT")};
}

EmbeddingModel random_model(std::size_t eta, std::size_t d,
                            std::mt19937_64& rng) {
  std::vector<std::pair<Token, std::uint64_t>> entries;
  std::vector<std::uint64_t> freq(eta);
  for (auto& f : freq) f = 1 + rng() % 50;
  std::sort(freq.rbegin(), freq.rend());
  for (std::size_t i = 0; i < eta; ++i) {
    entries.push_back(
        {Token{TokenCategory::kApp, fmt::format("t{:03}", i)}, freq[i]});
  }
  TrainingConfig cfg;
  cfg.dimension = d;
  auto m = EmbeddingModel::initialize(Vocabulary(std::move(entries)), cfg);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& x : m.input_vectors.data()) x = u(rng);
  for (double& x : m.inner_vectors.data()) x = u(rng);
  return m;
}

Outcome hs_normalization() {
  std::mt19937_64 rng(44);
  double worst = 0.0;
  std::size_t contexts = 0;
  for (std::size_t eta = 2; eta <= 64; ++eta) {
    const auto m = random_model(eta, 6, rng);
    for (std::size_t c = 0; c < eta; ++c, ++contexts) {
      double sum = 0.0;
      for (std::size_t t = 0; t < eta; ++t) sum += hs_probability(m, c, t);
      worst = std::max(worst, std::abs(sum - 1.0));
    }
  }
  return {worst <= 1e-9,
          fmt::format("{} contexts, max |sum-1| = {:.2e}", contexts, worst)};
}

Outcome gradient_check() {
  const double rate = 1e-3;
  const double h = 1e-5;
  std::mt19937_64 rng(55);
  double worst = 0.0;
  std::size_t checked = 0;
  for (int trial = 0; trial < 8; ++trial) {
    auto m = random_model(8, 4, rng);
    const std::size_t c = rng() % 8;
    const std::size_t t = rng() % 8;
    std::vector<double> scratch(4);
    auto stepped = m;
    sgd_step(stepped, c, t, rate, scratch);
    auto check = [&](double& slot, double moved) {
      const double orig = slot;
      slot = orig + h;
      const double up = std::log(hs_probability(m, c, t));
      slot = orig - h;
      const double down = std::log(hs_probability(m, c, t));
      slot = orig;
      const double numeric = (up - down) / (2 * h);
      const double analytic = (moved - orig) / rate;
      const double scale =
          std::max({std::abs(numeric), std::abs(analytic), 1e-3});
      worst = std::max(worst, std::abs(numeric - analytic) / scale);
      ++checked;
    };
    for (std::size_t k = 0; k < 4; ++k) {
      check(m.input_vectors(c, k), stepped.input_vectors(c, k));
    }
    for (std::size_t node = 0; node + 1 < 8; ++node) {
      for (std::size_t k = 0; k < 4; ++k) {
        check(m.inner_vectors(node, k), stepped.inner_vectors(node, k));
      }
    }
  }
  return {worst < 1e-4, fmt::format("{} partials, max relative error {:.2e}",
                                    checked, worst)};
}

Outcome embedding_similarity() {
  const auto start = Clock::now();
  int passed = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto corpus = similarity_corpus(600, seed);
    const auto vocab = build_vocabulary(corpus, TokenScheme::defaults());
    const auto pairs = generate_pairs(corpus, PairSchema::standard(), vocab);
    TrainingConfig cfg;
    cfg.seed = seed;
    const auto m = train_skipgram_hs(pairs, vocab, cfg);
    auto row = [&](const char* ip) {
      return m.input_vectors.row(vocab.id(Token{TokenCategory::kIp, ip}));
    };
    passed += cosine_similarity(row("10.0.0.1"), row("10.0.0.2")) >
              cosine_similarity(row("10.0.0.1"), row("10.0.0.3"));
  }
  const double secs = seconds_since(start);
  return {passed >= 95 && secs < 60.0,
          fmt::format("{}/100 seeds, {:.2f}s", passed, secs)};
}

Outcome kmeans_properties() {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g(0.0, 1.0);
  auto points = [&](std::size_t n, std::size_t d) {
    Matrix m(n, d);
    for (double& x : m.data()) x = g(rng);
    return m;
  };
  std::size_t increases = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 5 + rng() % 60;
    const auto pts = points(n, 1 + rng() % 4);
    const std::size_t k = 1 + rng() % std::min<std::size_t>(n, 8);
    const auto m = lloyd(pts, k, rng(), 100, 1e-6, Parallelism::serial());
    for (std::size_t i = 1; i < m.sse_history.size(); ++i) {
      if (m.sse_history[i] > m.sse_history[i - 1]) ++increases;
    }
  }
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto pts = points(3 + rng() % 6, 2);
    KMeansConfig cfg;
    cfg.k = 2;
    cfg.restarts = 50;
    cfg.seed = static_cast<std::uint64_t>(trial);
    const auto m = kmeans_fit(pts, cfg);
    worst = std::max(worst, std::abs(m.sse - oracle::exhaustive_min_sse(pts, 2)));
  }
  return {increases == 0 && worst <= 1e-9,
          fmt::format("1000 lloyd runs with {} sse increases; 100 tiny fits, "
                      "max gap to optimum {:.2e}",
                      increases, worst)};
}

Outcome witness_property() {
  const auto doc = nlohmann::json::parse(witness_fixture_policy_json());
  const auto model = FirewallModel::compile(parse_config(doc.dump()));
  const auto synth = synthesize_from_policy(model, 40, 8);
  const auto n = synth.corpus.row_count();
  const auto baseline = witness_check(synth.corpus, model, n, 1);
  if (baseline.sampled != n || !baseline.failures.empty()) {
    return {false, fmt::format("{} failures on the unmodified policy",
                               baseline.failures.size())};
  }
  std::size_t rules_checked = 0;
  for (std::size_t idx = 0; idx < model.config().rules.size(); ++idx) {
    if (model.rule(idx).action != Action::kPermit) continue;
    auto edited = doc;
    edited["rules"].erase(idx);
    const auto without = FirewallModel::compile(parse_config(edited.dump()));
    const auto report = witness_check(synth.corpus, without, n, 1);
    std::set<std::size_t> failed, expected;
    for (const auto& f : report.failures) failed.insert(f.row);
    for (std::size_t row = 0; row < n; ++row) {
      if (synth.source_rule[row] == idx) expected.insert(row);
    }
    if (expected.empty() || failed != expected) {
      return {false, fmt::format("removing {} failed {} rows, expected {}",
                                 model.rule(idx).name, failed.size(),
                                 expected.size())};
    }
    ++rules_checked;
  }
  return {rules_checked > 0,
          fmt::format("{} rows, 0 failures; {} permit rules removed in turn, "
                      "each failing exactly its rows",
                      n, rules_checked)};
}

// Hash of the manifest's stage table with timestamps and command lines left
// out: stage keys plus every artifact hash.
std::string manifest_hash(const ProjectStore& store) {
  nlohmann::json table = nlohmann::json::object();
  for (const auto& [stage, rec] : store.stages()) {
    nlohmann::json arts = nlohmann::json::object();
    for (const auto& [name, entry] : rec.artifacts) arts[name] = entry.sha256;
    table[stage] = {{"key", rec.key}, {"artifacts", arts}};
  }
  return sha256_hex(table.dump());
}

Outcome determinism() {
  std::random_device rd;
  const fs::path dir =
      fs::temp_directory_path() / fmt::format("log2ns-accept-{}", rd());
  fs::create_directories(dir);
  write_file(dir / "logs.csv",
             serialize_corpus(demo_logs(2000, 11), LogFormat::kCsv));
  write_file(dir / "policy.json", demo_policy_json());
  PipelineConfig cfg;
  cfg.ingest.source = dir / "logs.csv";
  cfg.train.training.dimension = 16;
  cfg.train.training.epochs = 3;
  cfg.cluster.k_values = {20};
  cfg.cluster.kmeans.restarts = 3;
  cfg.compile.config = dir / "policy.json";

  ProjectStore first(dir / "run1");
  Pipeline(first, "acceptance", {1}).run(cfg);
  ProjectStore second(dir / "run2");
  Pipeline(second, "acceptance", {4}).run(cfg);

  const auto a = manifest_hash(first);
  const auto b = manifest_hash(second);
  std::size_t objects = 0, differing = 0;
  for (const auto& [stage, rec] : first.stages()) {
    for (const auto& [name, entry] : rec.artifacts) {
      ++objects;
      const auto& other = second.stages().at(stage).artifacts.at(name);
      if (slurp(first.root() / entry.path) != slurp(second.root() / other.path)) {
        ++differing;
      }
    }
  }
  std::error_code ec;
  fs::remove_all(dir, ec);
  return {a == b && differing == 0 && first.stages().size() == 7,
          fmt::format("manifest {} vs {}, {} objects, {} differ",
                      a.substr(0, 12), b.substr(0, 12), objects, differing)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"solver agrees with exhaustive enumeration", solver_matches_enumeration},
      {"bypass scenario matches the golden verdict", bypass_golden},
      {"dns remediation flips permit to deny", dns_remediation},
      {"hierarchical softmax sums to one", hs_normalization},
      {"training gradients match finite differences", gradient_check},
      {"similar sources embed closer", embedding_similarity},
      {"k-means sse monotone and optimal on tiny inputs", kmeans_properties},
      {"witness check isolates a removed permit rule", witness_property},
      {"pipeline runs are bit-identical", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << fmt::format("criterion {}: {}  {} ({})", i + 1,
                             o.pass ? "PASS" : "FAIL", criteria[i].first,
                             o.detail)
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
