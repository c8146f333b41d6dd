#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "log2ns/cluster.hpp"
#include "log2ns/embedding.hpp"
#include "log2ns/flowlog.hpp"
#include "log2ns/policy.hpp"
#include "log2ns/query.hpp"
#include "log2ns/store.hpp"

namespace log2ns {

// Stage names in execution order.
inline const std::vector<std::string> kStages = {
    "ingest", "vocab", "pairs", "train", "vectorize", "cluster", "compile"};

struct IngestParams {
  std::filesystem::path source;
  LogFormat format = LogFormat::kCsv;
};

struct TrainParams {
  TokenScheme scheme = TokenScheme::defaults();
  PairSchema pairs = PairSchema::standard();
  TrainingConfig training;
};

struct ClusterParams {
  // Empty fields: the token fields the embedding was trained with.
  VectorizeConfig vectorize;
  // One value fits that k; several run select_k over them.
  std::vector<std::size_t> k_values = {20};
  KMeansConfig kmeans;
  std::size_t silhouette_sample = 4000;
};

struct CompileParams {
  std::filesystem::path config;
};

struct PipelineConfig {
  IngestParams ingest;
  TrainParams train;
  ClusterParams cluster;
  CompileParams compile;
};

// JSON pipeline document. Relative paths resolve against `base_dir`.
PipelineConfig parse_pipeline_document(std::string_view text,
                                       const std::filesystem::path& base_dir);

class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("stage '" + stage + "' failed: " + what),
        stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

enum class StageStatus { kRan, kUpToDate };

struct StageReport {
  std::string stage;
  StageStatus status = StageStatus::kRan;
  std::string key;
};

// Runs stages against a store. A stage whose key (parameters plus input
// artifact hashes) matches the manifest and whose objects are intact is
// skipped. Callers hold a StoreLock.
class Pipeline {
 public:
  Pipeline(ProjectStore& store, std::string command, Parallelism par = {},
           std::function<void(const std::string&)> log = {});

  StageReport ingest(const IngestParams& params);
  StageReport vocab(const TrainParams& params);
  StageReport pairs(const TrainParams& params);
  StageReport train(const TrainParams& params);
  StageReport vectorize(const ClusterParams& params);
  StageReport cluster(const ClusterParams& params);
  StageReport compile(const CompileParams& params);

  std::vector<StageReport> run(const PipelineConfig& config);

 private:
  using Outputs = std::map<std::string, std::string>;
  StageReport run_stage(const std::string& stage, const Json& key_params,
                        const Json& params, const Json& inputs,
                        const std::function<Outputs()>& produce);
  std::string input_hash(const std::string& stage,
                         const std::string& needed_by,
                         const std::string& artifact) const;

  ProjectStore& store_;
  std::string command_;
  Parallelism par_;
  std::function<void(const std::string&)> log_;
};

// Artifacts loaded back from a store.
struct Workspace {
  std::optional<LogCorpus> corpus;
  std::optional<EmbeddingModel> embedding;
  std::optional<RowVectors> vectors;
  std::optional<ClusterModel> clusters;
  std::optional<FirewallModel> policy;

  Artifacts artifacts() const;
};

// Loads every stage present. Throws NotFoundError listing the `required`
// stages the manifest lacks.
Workspace load_workspace(const ProjectStore& store,
                         const std::vector<std::string>& required = {});

LogCorpus load_corpus(const ProjectStore& store);
EmbeddingModel load_embedding(const ProjectStore& store);
ClusterModel load_clusters(const ProjectStore& store);
RowVectors load_vectors(const ProjectStore& store);
FirewallModel load_policy(const ProjectStore& store);

}  // namespace log2ns
