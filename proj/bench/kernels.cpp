// Serial reference vs OpenMP for each parallel kernel. The state.range(0)
// argument is the thread count for the Parallelism-driven kernels
// (1 = serial path).

#include <benchmark/benchmark.h>

#include <random>

#include "log2ns/cluster.hpp"
#include "log2ns/embedding.hpp"
#include "log2ns/fixtures.hpp"
#include "log2ns/flowlog.hpp"
#include "log2ns/policy.hpp"
#include "log2ns/query.hpp"

using namespace log2ns;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(rows, cols);
  for (double& x : m.data()) x = g(rng);
  return m;
}

const LogCorpus& corpus() {
  static const LogCorpus c = demo_logs(200000, 3);
  return c;
}

const std::string& corpus_csv() {
  static const std::string s = serialize_corpus(demo_logs(100000, 5), LogFormat::kCsv);
  return s;
}

const FirewallModel& policy() {
  static const FirewallModel m =
      FirewallModel::compile(parse_config(demo_policy_json()));
  return m;
}

int threads_arg(const benchmark::State& state) {
  return static_cast<int>(state.range(0));
}

void BM_AssignSerial(benchmark::State& state) {
  const auto pts = random_matrix(100000, 32, 1);
  const auto cents = random_matrix(20, 32, 2);
  std::vector<std::uint32_t> a;
  std::vector<double> d;
  for (auto _ : state) {
    assign_points_serial(pts, cents, a, d);
    benchmark::DoNotOptimize(a.data());
  }
}
BENCHMARK(BM_AssignSerial)->Unit(benchmark::kMillisecond);

void BM_AssignParallel(benchmark::State& state) {
  const auto pts = random_matrix(100000, 32, 1);
  const auto cents = random_matrix(20, 32, 2);
  std::vector<std::uint32_t> a;
  std::vector<double> d;
  for (auto _ : state) {
    assign_points(pts, cents, a, d, {threads_arg(state)});
    benchmark::DoNotOptimize(a.data());
  }
}
BENCHMARK(BM_AssignParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(0)
    ->Unit(benchmark::kMillisecond);

std::vector<std::uint32_t> labels(std::size_t n, std::size_t k) {
  std::vector<std::uint32_t> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = static_cast<std::uint32_t>(i % k);
  return a;
}

void BM_SilhouetteSerial(benchmark::State& state) {
  const auto pts = random_matrix(3000, 16, 3);
  const auto a = labels(3000, 8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mean_silhouette_serial(pts, a, 8));
  }
}
BENCHMARK(BM_SilhouetteSerial)->Unit(benchmark::kMillisecond);

void BM_SilhouetteParallel(benchmark::State& state) {
  const auto pts = random_matrix(3000, 16, 3);
  const auto a = labels(3000, 8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mean_silhouette(pts, a, 8, {threads_arg(state)}));
  }
}
BENCHMARK(BM_SilhouetteParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(0)
    ->Unit(benchmark::kMillisecond);

ConstraintSet dns_constraints() {
  return ConstraintSet::from(
      parse_query("logs: application=dns dst_ip in {8.8.8.8, 4.4.4.4} "
                  "from_zone!=Guest")
          .constraints);
}

void BM_ScanSerial(benchmark::State& state) {
  const auto cs = dns_constraints();
  const auto& logs = corpus();
  for (auto _ : state) {
    benchmark::DoNotOptimize(scan_logs_serial(logs, cs).size());
  }
}
BENCHMARK(BM_ScanSerial)->Unit(benchmark::kMillisecond);

void BM_ScanParallel(benchmark::State& state) {
  const auto cs = dns_constraints();
  const auto& logs = corpus();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        scan_logs(logs, cs, {threads_arg(state)}).size());
  }
}
BENCHMARK(BM_ScanParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(0)
    ->Unit(benchmark::kMillisecond);

void BM_ParseCsv(benchmark::State& state) {
  const auto& text = corpus_csv();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        parse_flow_log(text, LogFormat::kCsv, {threads_arg(state)})
            .row_count());
  }
}
BENCHMARK(BM_ParseCsv)->Arg(1)->Arg(2)->Arg(4)->Arg(0)
    ->Unit(benchmark::kMillisecond);

void BM_WitnessCheck(benchmark::State& state) {
  const auto sample = demo_logs(20000, 9);
  const auto& model = policy();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        witness_check(sample, model, 20000, 1, {threads_arg(state)}).passed);
  }
}
BENCHMARK(BM_WitnessCheck)->Arg(1)->Arg(2)->Arg(4)->Arg(0)
    ->Unit(benchmark::kMillisecond);

void BM_Neighbors(benchmark::State& state) {
  std::vector<std::pair<Token, std::uint64_t>> entries;
  for (std::size_t i = 0; i < 50000; ++i) {
    entries.push_back({Token{TokenCategory::kApp, "a" + std::to_string(i)}, 1});
  }
  TrainingConfig cfg;
  cfg.dimension = 64;
  const auto m = EmbeddingModel::initialize(Vocabulary(std::move(entries)), cfg);
  const Token probe{TokenCategory::kApp, "a17"};
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        nearest_neighbors(m, probe, 10, {threads_arg(state)}).size());
  }
}
BENCHMARK(BM_Neighbors)->Arg(1)->Arg(2)->Arg(4)->Arg(0)
    ->Unit(benchmark::kMillisecond);

void BM_Vectorize(benchmark::State& state) {
  const auto logs = demo_logs(20000, 4);
  const auto vocab = build_vocabulary(logs, TokenScheme::defaults());
  TrainingConfig cfg;
  cfg.dimension = 32;
  const auto m = EmbeddingModel::initialize(vocab, cfg);
  VectorizeConfig vc;
  vc.fields = TokenScheme::defaults().fields;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        vectorize_rows(logs, m, vc, {threads_arg(state)}).size());
  }
}
BENCHMARK(BM_Vectorize)->Arg(1)->Arg(2)->Arg(4)->Arg(0)
    ->Unit(benchmark::kMillisecond);

void BM_Train(benchmark::State& state) {
  const auto logs = demo_logs(5000, 6);
  const auto vocab = build_vocabulary(logs, TokenScheme::defaults());
  const auto pairs = generate_pairs(logs, PairSchema::standard(), vocab);
  TrainingConfig cfg;
  cfg.dimension = 32;
  cfg.epochs = 2;
  cfg.parallelism = {threads_arg(state)};
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_skipgram_hs(pairs, vocab, cfg).dimension());
  }
}
BENCHMARK(BM_Train)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
