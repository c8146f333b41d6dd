// log2ns command-line driver.

#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "log2ns/api.hpp"
#include "log2ns/error.hpp"
#include "log2ns/fixtures.hpp"
#include "log2ns/persist.hpp"
#include "log2ns/pipeline.hpp"
#include "log2ns/strings.hpp"

namespace fs = std::filesystem;
using namespace log2ns;

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::vector<Field> parse_fields(const std::string& list) {
  std::vector<Field> out;
  for (auto part : split(list, ',')) {
    const auto name = std::string(trim(part));
    auto f = field_from_name(name);
    if (!f) throw InvalidArgument("unknown field '" + name + "'");
    out.push_back(*f);
  }
  return out;
}

PairSchema parse_pair_list(const std::string& text) {
  if (text == "standard") return PairSchema::standard();
  PairSchema schema;
  for (auto part : split(text, ',')) {
    const auto entry = trim(part);
    const auto colon = entry.find(':');
    if (colon == std::string_view::npos) {
      throw InvalidArgument("pair '" + std::string(entry) +
                            "' is not context:target");
    }
    auto c = field_from_name(entry.substr(0, colon));
    auto t = field_from_name(entry.substr(colon + 1));
    if (!c || !t) {
      throw InvalidArgument("unknown field in pair '" + std::string(entry) + "'");
    }
    schema.entries.emplace_back(*c, *t);
  }
  return schema;
}

std::vector<std::size_t> parse_k_range(const std::string& text) {
  std::vector<std::size_t> out;
  const auto dash = text.find('-');
  try {
    if (dash != std::string::npos) {
      const auto lo = std::stoul(text.substr(0, dash));
      const auto hi = std::stoul(text.substr(dash + 1));
      for (auto k = lo; k <= hi; ++k) out.push_back(k);
    } else {
      for (auto part : split(text, ',')) {
        out.push_back(std::stoul(std::string(trim(part))));
      }
    }
  } catch (const std::logic_error&) {
    throw InvalidArgument("bad k range '" + text + "'");
  }
  if (out.empty()) throw InvalidArgument("empty k range '" + text + "'");
  return out;
}

void print_reports(const std::vector<StageReport>& reports) {
  for (const auto& r : reports) {
    std::cout << r.stage << ": "
              << (r.status == StageStatus::kRan ? "ran" : "up-to-date")
              << "\n";
  }
}

void print_parse_error(const std::string& text, const ParseError& e) {
  std::cerr << "query parse error: " << e.message() << " at position "
            << e.position() << "\n  " << text << "\n  "
            << std::string(std::min(e.position(), text.size()), ' ') << "^\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"log2ns: flow-log embeddings, clustering and firewall policy "
               "reasoning"};
  app.require_subcommand(1);

  std::string store_flag;
  int threads = 0;
  app.add_option("--store", store_flag,
                 "Artifact store directory (default $LOG2NS_STORE or "
                 "./log2ns-store)");
  app.add_option("--threads", threads,
                 "OpenMP threads for parallel kernels (0 = runtime default)")
      ->check(CLI::NonNegativeNumber);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse a flow log into the store");
  std::string ingest_input;
  std::string ingest_format = "csv";
  ingest->add_option("--input,-i", ingest_input, "Log file")->required();
  ingest->add_option("--format", ingest_format, "csv or jsonl")
      ->check(CLI::IsMember({"csv", "jsonl"}));

  // train
  auto* train = app.add_subcommand(
      "train", "Build the vocabulary and pairs, then train the embedding");
  std::string train_fields;
  std::string train_pairs = "standard";
  TrainParams train_params;
  int train_threads = 1;
  train->add_option("--fields", train_fields,
                    "Token fields, comma separated (default src_ip,dst_ip,"
                    "application,protocol,src_region,dst_region)");
  train->add_option("--bytes-base", train_params.scheme.bytes_base,
                    "Logarithm base for bytes_sent buckets");
  train->add_option("--pairs", train_pairs,
                    "standard or context:target,... field pairs");
  train->add_option("--dim", train_params.training.dimension, "Dimension d");
  train->add_option("--epochs", train_params.training.epochs, "Epochs");
  train->add_option("--lr", train_params.training.learning_rate,
                    "Initial learning rate");
  train->add_option("--seed", train_params.training.seed, "Seed");
  train->add_option("--train-threads", train_threads,
                    "1 = deterministic; more = lock-free parallel SGD");

  // cluster
  auto* cluster = app.add_subcommand(
      "cluster", "Vectorize rows and fit k-means (or grid-search k)");
  ClusterParams cluster_params;
  std::size_t cluster_k = 0;
  std::string cluster_range;
  std::string cluster_fields;
  std::string cluster_mode = "concat";
  std::vector<double> cluster_weights;
  auto* k_opt = cluster->add_option("--k", cluster_k, "Cluster count (default 20)");
  cluster->add_option("--k-range", cluster_range, "e.g. 5-30 or 4,8,16")
      ->excludes(k_opt);
  cluster->add_option("--restarts", cluster_params.kmeans.restarts,
                      "k-means++ restarts");
  cluster->add_option("--seed", cluster_params.kmeans.seed, "Seed");
  cluster->add_option("--max-iter", cluster_params.kmeans.max_iter,
                      "Lloyd iteration cap");
  cluster->add_option("--tol", cluster_params.kmeans.tol,
                      "Centroid shift tolerance");
  cluster->add_option("--fields", cluster_fields,
                      "Fields to vectorize (default: the token fields)");
  cluster->add_option("--mode", cluster_mode, "concat or weighted_avg")
      ->check(CLI::IsMember({"concat", "weighted_avg"}));
  cluster->add_option("--weights", cluster_weights,
                      "Per-field weights for weighted_avg")
      ->delimiter(',');

  // compile
  auto* compile = app.add_subcommand("compile", "Compile a firewall policy");
  std::string compile_config;
  compile->add_option("--config,-c", compile_config, "Policy JSON")->required();

  // query
  auto* query = app.add_subcommand("query", "Run a query against the store");
  std::string query_text;
  bool query_compact = false;
  query->add_option("text", query_text, "Query text")->required();
  query->add_flag("--compact", query_compact, "Single-line JSON");

  // witness-check
  auto* witness = app.add_subcommand(
      "witness-check", "Check sampled log rows are permitted by the policy");
  std::size_t witness_n = 100;
  std::uint64_t witness_seed = 1;
  witness->add_option("--n", witness_n, "Sample size");
  witness->add_option("--seed", witness_seed, "Sampling seed");

  // serve
  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  std::string bind = "127.0.0.1:8080";
  serve->add_option("--bind", bind, "HOST:PORT");

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "Run all seven stages");
  std::string pipeline_config;
  pipeline->add_option("--config,-c", pipeline_config, "Pipeline document")
      ->required();

  // status
  auto* status = app.add_subcommand("status", "Print the store manifest");

  // synth
  auto* synth = app.add_subcommand(
      "synth", "Write the demo policy, logs and pipeline document");
  std::string synth_out;
  std::size_t synth_rows = 5000;
  std::uint64_t synth_seed = 7;
  synth->add_option("--out,-o", synth_out, "Output directory")->required();
  synth->add_option("--rows", synth_rows, "Log rows");
  synth->add_option("--seed", synth_seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  const Parallelism par{threads};
  const fs::path root = ProjectStore::resolve_root(
      store_flag.empty() ? std::nullopt : std::optional<fs::path>(store_flag));
  auto log = [](const std::string& line) { std::cout << line << "\n"; };

  try {
    if (*ingest) {
      StoreLock lock(root);
      ProjectStore store(root);
      Pipeline p(store, "ingest", par, log);
      p.ingest({ingest_input, *log_format_from_name(ingest_format)});
      std::cout << Json::parse(store.read("ingest", "summary")).dump() << "\n";
    } else if (*train) {
      if (!train_fields.empty()) {
        train_params.scheme.fields = parse_fields(train_fields);
      }
      train_params.scheme.validate();
      train_params.pairs = parse_pair_list(train_pairs);
      train_params.training.parallelism.threads = train_threads;
      train_params.training.validate();
      StoreLock lock(root);
      ProjectStore store(root);
      Pipeline p(store, "train", par, log);
      p.vocab(train_params);
      p.pairs(train_params);
      p.train(train_params);
    } else if (*cluster) {
      if (cluster_k) cluster_params.k_values = {cluster_k};
      if (!cluster_range.empty()) {
        cluster_params.k_values = parse_k_range(cluster_range);
      }
      if (!cluster_fields.empty()) {
        cluster_params.vectorize.fields = parse_fields(cluster_fields);
      }
      cluster_params.vectorize.mode = cluster_mode == "concat"
                                          ? VectorizeMode::kConcat
                                          : VectorizeMode::kWeightedAverage;
      cluster_params.vectorize.weights = cluster_weights;
      StoreLock lock(root);
      ProjectStore store(root);
      Pipeline p(store, "cluster", par, log);
      p.vectorize(cluster_params);
      p.cluster(cluster_params);
      const auto model = load_clusters(store);
      std::cout << "k=" << model.k << " sse=" << model.sse << "\n";
    } else if (*compile) {
      StoreLock lock(root);
      ProjectStore store(root);
      Pipeline p(store, "compile", par, log);
      p.compile({compile_config});
    } else if (*query) {
      Query q;
      try {
        q = parse_query(query_text);
      } catch (const ParseError& e) {
        print_parse_error(query_text, e);
        return kExitUsage;
      }
      ProjectStore store(root);
      const auto ws = load_workspace(store);
      const auto artifacts = ws.artifacts();
      const auto result = execute(q, artifacts, par);
      const auto doc = query_result_json(q, result, artifacts);
      std::cout << (query_compact ? doc.dump() : doc.dump(2)) << "\n";
    } else if (*witness) {
      ProjectStore store(root);
      const auto corpus = load_corpus(store);
      const auto model = load_policy(store);
      const auto report =
          witness_check(corpus, model, witness_n, witness_seed, par);
      std::cout << to_json(report).dump(2) << "\n";
    } else if (*serve) {
      const auto colon = bind.rfind(':');
      if (colon == std::string::npos) {
        std::cerr << "--bind expects HOST:PORT\n";
        return kExitUsage;
      }
      const std::string host = bind.substr(0, colon);
      int port = 0;
      try {
        port = std::stoi(bind.substr(colon + 1));
      } catch (const std::logic_error&) {
        std::cerr << "bad port in --bind " << bind << "\n";
        return kExitUsage;
      }
      ProjectStore store(root);
      const auto ws = load_workspace(
          store, {"ingest", "train", "vectorize", "cluster", "compile"});
      const Api api(ws, par);
      serve_http(api, host, port, [&](int bound, auto) {
        std::cout << "serving " << root.string() << " on http://" << host
                  << ":" << bound << std::endl;
      });
    } else if (*pipeline) {
      const fs::path doc_path(pipeline_config);
      const auto config = parse_pipeline_document(
          slurp(doc_path), doc_path.parent_path());
      StoreLock lock(root);
      ProjectStore store(root);
      Pipeline p(store, "pipeline --config " + pipeline_config, par);
      print_reports(p.run(config));
    } else if (*status) {
      if (!fs::exists(root / "manifest.json")) {
        std::cerr << "no store at " << root.string() << "\n";
        return kExitError;
      }
      ProjectStore store(root);
      std::cout << store.manifest_json().dump(2) << "\n";
    } else if (*synth) {
      const fs::path out(synth_out);
      fs::create_directories(out);
      write_text(out / "logs.csv",
                 serialize_corpus(demo_logs(synth_rows, synth_seed),
                                  LogFormat::kCsv));
      write_text(out / "policy.json", demo_policy_json());
      write_text(out / "policy_remediated.json", remediated_policy_json());
      const Json doc = {
          {"logs", {{"path", "logs.csv"}, {"format", "csv"}}},
          {"tokens", token_scheme_json(TokenScheme::defaults())},
          {"pairs", "standard"},
          {"training", training_config_json(TrainingConfig{})},
          {"clustering", {{"k", 20}, {"restarts", 10}, {"seed", 1}}},
          {"firewall", {{"path", "policy.json"}}},
      };
      write_text(out / "pipeline.json", doc.dump(2) + "\n");
      std::cout << "wrote " << out.string() << "\n";
    }
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return 0;
}
