#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "log2ns/embedding.hpp"
#include "log2ns/flowlog.hpp"
#include "log2ns/matrix.hpp"
#include "log2ns/parallel.hpp"
#include "log2ns/rng.hpp"

namespace log2ns {

enum class VectorizeMode { kConcat, kWeightedAverage };

struct VectorizeConfig {
  std::vector<Field> fields;
  VectorizeMode mode = VectorizeMode::kConcat;
  std::vector<double> weights;  // one per field, weighted average only
  std::uint64_t bytes_base = 10;

  void validate() const;
};

// One vector per corpus row, stored contiguously.
struct RowVectors {
  Matrix values;
  // Bit f set when configured field f was absent and contributed zeros.
  std::vector<std::uint32_t> missing_mask;
  std::vector<Field> fields;
  VectorizeMode mode = VectorizeMode::kConcat;

  std::size_t size() const { return values.rows(); }
  std::size_t dimension() const { return values.cols(); }
};

RowVectors vectorize_rows(const LogCorpus& corpus,
                          const EmbeddingModel& model,
                          const VectorizeConfig& config, Parallelism par = {});

// ---------------------------------------------------------------------------
// K-means

struct KMeansConfig {
  std::size_t k = 20;
  std::uint64_t seed = 1;
  std::size_t max_iter = 100;
  double tol = 1e-6;
  std::size_t restarts = 10;
  Parallelism parallelism = {};
};

struct ClusterModel {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  Matrix centroids;                      // k x dim
  std::vector<std::uint32_t> assignments;  // per row
  double sse = 0.0;
  std::size_t iterations = 0;
  // SSE after each assignment step of the winning restart.
  std::vector<double> sse_history;

  std::vector<std::size_t> cluster_sizes() const;
};

std::size_t count_distinct_rows(const Matrix& points);

// Nearest-centroid assignment kernel. Ties go to the lowest centroid index.
// Writes each point's squared distance to `dist`. The two variants must
// produce identical results; the serial one is the reference.
void assign_points(const Matrix& points, const Matrix& centroids,
                   std::vector<std::uint32_t>& assignment,
                   std::vector<double>& dist, Parallelism par);
void assign_points_serial(const Matrix& points, const Matrix& centroids,
                          std::vector<std::uint32_t>& assignment,
                          std::vector<double>& dist);

// k-means++ seeding. Returns the chosen point indices.
std::vector<std::size_t> kmeanspp_seeds(const Matrix& points, std::size_t k,
                                        Rng& rng);

// A single seeded Lloyd run (no restarts).
ClusterModel lloyd(const Matrix& points, std::size_t k, std::uint64_t seed,
                   std::size_t max_iter, double tol, Parallelism par = {});

// Best (lowest SSE) of `restarts` Lloyd runs. Throws InvalidArgument when k
// is 0 or exceeds the number of distinct points.
ClusterModel kmeans_fit(const Matrix& points, const KMeansConfig& config);

// Mean silhouette with Euclidean distance. Points in singleton clusters
// score 0; k == 1 scores 0.
double mean_silhouette(const Matrix& points,
                       const std::vector<std::uint32_t>& assignment,
                       std::size_t k, Parallelism par = {});
double mean_silhouette_serial(const Matrix& points,
                              const std::vector<std::uint32_t>& assignment,
                              std::size_t k);

struct KScore {
  std::size_t k = 0;
  double sse = 0.0;
  double silhouette = 0.0;
};

struct KSelection {
  std::size_t best_k = 0;
  std::vector<KScore> scores;
};

// Grid search over k_range. Best = max silhouette, ties to the smaller k.
// Silhouette uses at most `silhouette_sample` points (seeded subsample).
KSelection select_k(const Matrix& points, const std::vector<std::size_t>& ks,
                    const KMeansConfig& base,
                    std::size_t silhouette_sample = 4000);

// ---------------------------------------------------------------------------
// Summaries

struct CountedValue {
  std::string value;
  std::uint64_t count = 0;

  bool operator==(const CountedValue&) const = default;
};

struct ClusterSummary {
  std::size_t cluster = 0;
  std::uint64_t members = 0;
  std::vector<CountedValue> top_sources;
  std::vector<CountedValue> top_destinations;
  std::vector<CountedValue> top_applications;
  std::vector<CountedValue> top_zone_pairs;  // "from->to"
};

ClusterSummary summarize_cluster(std::size_t cluster,
                                 const ClusterModel& model,
                                 const LogCorpus& corpus,
                                 std::size_t top_n = 10);

// ---------------------------------------------------------------------------
// Projection

struct ProjectedPoint {
  std::size_t row = 0;
  double x = 0.0;
  double y = 0.0;
};

// Projection onto the top two principal directions. Each direction's
// largest-magnitude coordinate is made positive. Throws for < 2 points.
std::vector<ProjectedPoint> project_2d(const Matrix& points);

}  // namespace log2ns
