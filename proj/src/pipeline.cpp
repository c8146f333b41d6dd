#include "log2ns/pipeline.hpp"

#include <fstream>
#include <sstream>

#include "log2ns/error.hpp"
#include "log2ns/persist.hpp"

namespace log2ns {

namespace fs = std::filesystem;

namespace {

std::string read_source(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_name(LogFormat f) {
  return f == LogFormat::kCsv ? "csv" : "jsonl";
}

Json cluster_key_params(const ClusterParams& p) {
  return {{"k_values", p.k_values},
          {"seed", p.kmeans.seed},
          {"restarts", p.kmeans.restarts},
          {"max_iter", p.kmeans.max_iter},
          {"tol", p.kmeans.tol},
          {"silhouette_sample", p.silhouette_sample}};
}

EmbeddingFiles embedding_files(const ProjectStore& store) {
  return {store.read("train", "metadata"), store.read("train", "inputs"),
          store.read("train", "inner"), store.read("train", "vocab")};
}

Json model_summary(const FirewallModel& model) {
  Json rules = Json::array();
  for (std::size_t i = 0; i < model.config().rules.size(); ++i) {
    const auto region = model.effective_region(i);
    Json r = rule_json(model, i);
    r["shadowed"] = region.shadowed;
    r["region_boxes"] = region.boxes.size();
    rules.push_back(std::move(r));
  }
  return {{"vsys", model.config().vsys},
          {"zones", model.zones()},
          {"applications", model.applications()},
          {"protocols", model.protocols()},
          {"default_action", action_name(model.config().default_action)},
          {"rules", rules}};
}

}  // namespace

PipelineConfig parse_pipeline_document(std::string_view text,
                                       const fs::path& base_dir) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("pipeline document is not valid JSON: ") +
                      e.what());
  }
  static const std::set<std::string> kKeys = {
      "logs",     "tokens",     "pairs",    "training",
      "vectorize", "clustering", "firewall", "description"};
  for (const auto& [key, value] : doc.items()) {
    if (!kKeys.contains(key)) {
      throw ConfigError("unknown pipeline key '" + key + "'");
    }
  }
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  PipelineConfig c;
  try {
    if (!doc.contains("logs") || !doc.contains("firewall")) {
      throw ConfigError("pipeline document needs \"logs\" and \"firewall\"");
    }
    const auto& logs = doc.at("logs");
    c.ingest.source = resolve(logs.at("path").get<std::string>());
    const auto fmt = log_format_from_name(logs.value("format", "csv"));
    if (!fmt) throw ConfigError("logs.format must be csv or jsonl");
    c.ingest.format = *fmt;

    if (doc.contains("tokens")) {
      c.train.scheme = token_scheme_from_json(doc.at("tokens"));
    }
    if (doc.contains("pairs")) {
      c.train.pairs = pair_schema_from_json(doc.at("pairs"));
    }
    if (doc.contains("training")) {
      c.train.training = training_config_from_json(doc.at("training"));
    }
    if (doc.contains("vectorize")) {
      c.cluster.vectorize = vectorize_config_from_json(doc.at("vectorize"));
    }
    if (doc.contains("clustering")) {
      const auto& cl = doc.at("clustering");
      if (cl.contains("k") && cl.contains("k_range")) {
        throw ConfigError("clustering takes k or k_range, not both");
      }
      if (cl.contains("k")) {
        c.cluster.k_values = {cl.at("k").get<std::size_t>()};
      } else if (cl.contains("k_range")) {
        const auto& r = cl.at("k_range");
        c.cluster.k_values.clear();
        if (r.is_object()) {
          const auto lo = r.at("min").get<std::size_t>();
          const auto hi = r.at("max").get<std::size_t>();
          if (lo > hi) throw ConfigError("k_range min exceeds max");
          for (auto k = lo; k <= hi; ++k) c.cluster.k_values.push_back(k);
        } else {
          c.cluster.k_values = r.get<std::vector<std::size_t>>();
        }
        if (c.cluster.k_values.empty()) {
          throw ConfigError("k_range is empty");
        }
      }
      c.cluster.kmeans.seed = cl.value("seed", c.cluster.kmeans.seed);
      c.cluster.kmeans.restarts =
          cl.value("restarts", c.cluster.kmeans.restarts);
      c.cluster.kmeans.max_iter =
          cl.value("max_iter", c.cluster.kmeans.max_iter);
      c.cluster.kmeans.tol = cl.value("tol", c.cluster.kmeans.tol);
      c.cluster.silhouette_sample =
          cl.value("silhouette_sample", c.cluster.silhouette_sample);
    }
    c.compile.config = resolve(doc.at("firewall").at("path").get<std::string>());
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("pipeline document: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------

Pipeline::Pipeline(ProjectStore& store, std::string command, Parallelism par,
                   std::function<void(const std::string&)> log)
    : store_(store),
      command_(std::move(command)),
      par_(par),
      log_(std::move(log)) {}

std::string Pipeline::input_hash(const std::string& stage,
                                 const std::string& needed_by,
                                 const std::string& artifact) const {
  const StageRecord* rec = store_.stage(stage);
  if (!rec) {
    throw StageError(needed_by, "needs the '" + stage +
                                    "' stage; run it first");
  }
  auto it = rec->artifacts.find(artifact);
  if (it == rec->artifacts.end()) {
    throw StageError(needed_by, "stage '" + stage + "' lacks '" + artifact +
                                    "'");
  }
  return it->second.sha256;
}

StageReport Pipeline::run_stage(const std::string& stage,
                                const Json& key_params, const Json& params,
                                const Json& inputs,
                                const std::function<Outputs()>& produce) {
  const Json key_doc = {
      {"stage", stage}, {"parameters", key_params}, {"inputs", inputs}};
  const std::string key = sha256_hex(key_doc.dump());
  if (const StageRecord* rec = store_.stage(stage);
      rec && rec->key == key && store_.intact(*rec)) {
    if (log_) log_(stage + ": up-to-date");
    return {stage, StageStatus::kUpToDate, key};
  }
  Outputs outputs;
  try {
    outputs = produce();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
  StageRecord rec;
  rec.stage = stage;
  rec.key = key;
  rec.command = command_;
  rec.parameters = params;
  for (const auto& [name, bytes] : outputs) rec.artifacts[name] = store_.put(bytes);
  store_.record(std::move(rec));
  if (log_) log_(stage + ": done");
  return {stage, StageStatus::kRan, key};
}

StageReport Pipeline::ingest(const IngestParams& p) {
  std::string source;
  try {
    source = read_source(p.source);
  } catch (const std::exception& e) {
    throw StageError("ingest", e.what());
  }
  const Json key_params = {{"format", format_name(p.format)}};
  const Json params = {{"format", format_name(p.format)},
                       {"source", p.source.string()}};
  return run_stage("ingest", key_params, params,
                   {{"source", sha256_hex(source)}}, [&] {
                     const auto corpus =
                         parse_flow_log(source, p.format, par_);
                     Json schema = Json::array();
                     for (Field f : corpus.schema) schema.push_back(field_name(f));
                     const Json summary = {{"rows", corpus.row_count()},
                                           {"rejected", corpus.rejects.size()},
                                           {"schema", schema}};
                     return Outputs{
                         {"corpus", serialize_corpus(corpus, LogFormat::kCsv)},
                         {"rejects", serialize_rejects(corpus)},
                         {"summary", summary.dump(2) + "\n"}};
                   });
}

StageReport Pipeline::vocab(const TrainParams& p) {
  const Json params = {{"tokens", token_scheme_json(p.scheme)}};
  const Json inputs = {{"corpus", input_hash("ingest", "vocab", "corpus")}};
  return run_stage("vocab", params, params, inputs, [&] {
    p.scheme.validate();
    const auto corpus = load_corpus(store_);
    return Outputs{{"vocab", build_vocabulary(corpus, p.scheme).to_text()}};
  });
}

StageReport Pipeline::pairs(const TrainParams& p) {
  const Json params = {{"pairs", pair_schema_json(p.pairs)},
                       {"bytes_base", p.scheme.bytes_base}};
  const Json inputs = {{"corpus", input_hash("ingest", "pairs", "corpus")},
                       {"vocab", input_hash("vocab", "pairs", "vocab")}};
  return run_stage("pairs", params, params, inputs, [&] {
    const auto corpus = load_corpus(store_);
    p.pairs.validate(corpus.schema);
    const auto vocab = Vocabulary::from_text(store_.read("vocab", "vocab"));
    const auto pairs =
        generate_pairs(corpus, p.pairs, vocab, p.scheme.bytes_base);
    return Outputs{{"pairs", encode_pairs(pairs)}};
  });
}

StageReport Pipeline::train(const TrainParams& p) {
  const Json params = {{"training", training_config_json(p.training)},
                       {"tokens", token_scheme_json(p.scheme)},
                       {"pairs", pair_schema_json(p.pairs)}};
  const Json inputs = {{"pairs", input_hash("pairs", "train", "pairs")},
                       {"vocab", input_hash("vocab", "train", "vocab")}};
  return run_stage("train", params, params, inputs, [&] {
    const auto vocab = Vocabulary::from_text(store_.read("vocab", "vocab"));
    const auto pairs = decode_pairs(store_.read("pairs", "pairs"));
    const auto model = train_skipgram_hs(pairs, vocab, p.training);
    auto files = encode_embedding(model, p.scheme, p.pairs);
    return Outputs{{"metadata", std::move(files.metadata)},
                   {"inputs", std::move(files.inputs)},
                   {"inner", std::move(files.inner)},
                   {"vocab", std::move(files.vocab)}};
  });
}

StageReport Pipeline::vectorize(const ClusterParams& p) {
  const Json inputs = {
      {"corpus", input_hash("ingest", "vectorize", "corpus")},
      {"metadata", input_hash("train", "vectorize", "metadata")},
      {"inputs", input_hash("train", "vectorize", "inputs")},
      {"vocab", input_hash("train", "vectorize", "vocab")}};
  VectorizeConfig config = p.vectorize;
  if (config.fields.empty()) {
    try {
      const auto scheme =
          token_scheme_from_json(Json::parse(store_.read("train", "metadata"))
                                     .at("tokens"));
      config.fields = scheme.fields;
      config.bytes_base = scheme.bytes_base;
    } catch (const std::exception& e) {
      throw StageError("vectorize", e.what());
    }
  }
  const Json params = {{"vectorize", vectorize_config_json(config)}};
  return run_stage("vectorize", params, params, inputs, [&] {
    config.validate();
    const auto corpus = load_corpus(store_);
    const auto model = load_embedding(store_);
    auto files = encode_vectors(vectorize_rows(corpus, model, config, par_));
    return Outputs{{"metadata", std::move(files.metadata)},
                   {"values", std::move(files.values)}};
  });
}

StageReport Pipeline::cluster(const ClusterParams& p) {
  const Json params = cluster_key_params(p);
  const Json inputs = {
      {"metadata", input_hash("vectorize", "cluster", "metadata")},
      {"values", input_hash("vectorize", "cluster", "values")}};
  return run_stage("cluster", params, params, inputs, [&] {
    if (p.k_values.empty()) throw InvalidArgument("no k given");
    const auto vectors = load_vectors(store_);
    KMeansConfig cfg = p.kmeans;
    cfg.parallelism = par_;
    std::optional<KSelection> selection;
    if (p.k_values.size() > 1) {
      selection = select_k(vectors.values, p.k_values, cfg,
                           p.silhouette_sample);
      cfg.k = selection->best_k;
    } else {
      cfg.k = p.k_values.front();
    }
    auto files = encode_cluster(kmeans_fit(vectors.values, cfg), selection);
    return Outputs{{"document", std::move(files.document)},
                   {"centroids", std::move(files.centroids)}};
  });
}

StageReport Pipeline::compile(const CompileParams& p) {
  std::string source;
  try {
    source = read_source(p.config);
  } catch (const std::exception& e) {
    throw StageError("compile", e.what());
  }
  const Json params = {{"config", p.config.string()}};
  return run_stage("compile", Json::object(), params,
                   {{"config", sha256_hex(source)}}, [&] {
                     const auto model =
                         FirewallModel::compile(parse_config(source));
                     return Outputs{
                         {"policy", source},
                         {"model", model_summary(model).dump(2) + "\n"}};
                   });
}

std::vector<StageReport> Pipeline::run(const PipelineConfig& c) {
  std::vector<StageReport> out;
  out.push_back(ingest(c.ingest));
  out.push_back(vocab(c.train));
  out.push_back(pairs(c.train));
  out.push_back(train(c.train));
  out.push_back(vectorize(c.cluster));
  out.push_back(cluster(c.cluster));
  out.push_back(compile(c.compile));
  return out;
}

// ---------------------------------------------------------------------------

Artifacts Workspace::artifacts() const {
  Artifacts a;
  if (corpus) a.corpus = &*corpus;
  if (embedding) a.embedding = &*embedding;
  if (clusters) a.clusters = &*clusters;
  if (policy) a.policy = &*policy;
  return a;
}

LogCorpus load_corpus(const ProjectStore& store) {
  return parse_flow_log(store.read("ingest", "corpus"), LogFormat::kCsv);
}

EmbeddingModel load_embedding(const ProjectStore& store) {
  return decode_embedding(embedding_files(store));
}

ClusterModel load_clusters(const ProjectStore& store) {
  return decode_cluster(
      {store.read("cluster", "document"), store.read("cluster", "centroids")});
}

RowVectors load_vectors(const ProjectStore& store) {
  return decode_vectors(
      {store.read("vectorize", "metadata"), store.read("vectorize", "values")});
}

FirewallModel load_policy(const ProjectStore& store) {
  return FirewallModel::compile(parse_config(store.read("compile", "policy")));
}

Workspace load_workspace(const ProjectStore& store,
                         const std::vector<std::string>& required) {
  std::string missing;
  for (const auto& name : required) {
    if (!store.stage(name)) {
      if (!missing.empty()) missing += ", ";
      missing += name;
    }
  }
  if (!missing.empty()) {
    throw NotFoundError("store " + store.root().string() +
                        " is missing artifacts: " + missing);
  }
  Workspace w;
  if (store.stage("ingest")) w.corpus = load_corpus(store);
  if (store.stage("train")) w.embedding = load_embedding(store);
  if (store.stage("vectorize")) w.vectors = load_vectors(store);
  if (store.stage("cluster")) w.clusters = load_clusters(store);
  if (store.stage("compile")) w.policy = load_policy(store);
  if (w.corpus && w.clusters &&
      w.clusters->assignments.size() != w.corpus->row_count()) {
    throw Error("cluster artifact covers " +
                std::to_string(w.clusters->assignments.size()) +
                " rows but the corpus has " +
                std::to_string(w.corpus->row_count()) + "; re-run cluster");
  }
  if (w.vectors && w.corpus && w.vectors->size() != w.corpus->row_count()) {
    throw Error("vector artifact is stale; re-run cluster");
  }
  return w;
}

}  // namespace log2ns
