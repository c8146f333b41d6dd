#include "log2ns/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <Eigen/Dense>

#include "log2ns/error.hpp"

namespace log2ns {

// ---------------------------------------------------------------------------
// Row vectors

void VectorizeConfig::validate() const {
  if (fields.empty()) throw InvalidArgument("no fields to vectorize");
  if (fields.size() > 32) throw InvalidArgument("at most 32 fields");
  for (Field f : fields) {
    if (!category_of(f)) {
      throw InvalidArgument("field '" + std::string(field_name(f)) +
                            "' has no embedding");
    }
  }
  if (mode == VectorizeMode::kWeightedAverage) {
    if (weights.size() != fields.size()) {
      throw InvalidArgument("weighted average needs one weight per field");
    }
    double total = 0.0;
    for (double w : weights) {
      if (!std::isfinite(w) || w < 0.0) {
        throw InvalidArgument("weights must be finite and non-negative");
      }
      total += w;
    }
    if (!(total > 0.0)) throw InvalidArgument("weights must sum to > 0");
  }
}

RowVectors vectorize_rows(const LogCorpus& corpus,
                          const EmbeddingModel& model,
                          const VectorizeConfig& config, Parallelism par) {
  config.validate();
  const std::size_t d = model.dimension();
  const std::size_t nf = config.fields.size();
  const std::size_t n = corpus.records.size();
  constexpr std::size_t kAbsent = std::numeric_limits<std::size_t>::max();

  // Resolve ids up front so lookup failures surface outside the parallel
  // region.
  std::vector<std::size_t> ids(n * nf, kAbsent);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < nf; ++j) {
      auto t = field_token(corpus.records[r], config.fields[j],
                           config.bytes_base);
      if (!t) continue;
      auto id = model.vocab.find(*t);
      if (!id) {
        throw InvalidArgument("row " + std::to_string(r) + ": token '" +
                              t->render() +
                              "' is not in the embedding vocabulary");
      }
      ids[r * nf + j] = *id;
    }
  }

  RowVectors out;
  out.fields = config.fields;
  out.mode = config.mode;
  out.missing_mask.assign(n, 0);
  const bool concat = config.mode == VectorizeMode::kConcat;
  out.values = Matrix(n, concat ? nf * d : d);
  const double weight_sum =
      concat ? 1.0
             : std::accumulate(config.weights.begin(), config.weights.end(),
                               0.0);

  parallel_for(0, n, par, [&](std::size_t r) {
    auto dst = out.values.row(r);
    std::uint32_t mask = 0;
    for (std::size_t j = 0; j < nf; ++j) {
      const std::size_t id = ids[r * nf + j];
      if (id == kAbsent) {
        mask |= 1u << j;
        continue;
      }
      const auto src = model.input_vectors.row(id);
      if (concat) {
        std::copy(src.begin(), src.end(), dst.begin() + j * d);
      } else {
        for (std::size_t c = 0; c < d; ++c) {
          dst[c] += config.weights[j] * src[c];
        }
      }
    }
    if (!concat) {
      for (double& x : dst) x /= weight_sum;
    }
    out.missing_mask[r] = mask;
  });
  return out;
}

// ---------------------------------------------------------------------------
// K-means

std::vector<std::size_t> ClusterModel::cluster_sizes() const {
  std::vector<std::size_t> sizes(k, 0);
  for (auto a : assignments) ++sizes[a];
  return sizes;
}

std::size_t count_distinct_rows(const Matrix& points) {
  std::vector<std::size_t> order(points.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto less = [&](std::size_t a, std::size_t b) {
    auto ra = points.row(a), rb = points.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(),
                                        rb.end());
  };
  std::sort(order.begin(), order.end(), less);
  std::size_t distinct = order.empty() ? 0 : 1;
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (less(order[i - 1], order[i])) ++distinct;
  }
  return distinct;
}

namespace {

inline void nearest(const Matrix& points, const Matrix& centroids,
                    std::size_t i, std::uint32_t& best, double& best_dist) {
  const auto p = points.row(i);
  best = 0;
  best_dist = squared_distance(p, centroids.row(0));
  for (std::size_t c = 1; c < centroids.rows(); ++c) {
    const double dc = squared_distance(p, centroids.row(c));
    if (dc < best_dist) {
      best_dist = dc;
      best = static_cast<std::uint32_t>(c);
    }
  }
}

}  // namespace

void assign_points(const Matrix& points, const Matrix& centroids,
                   std::vector<std::uint32_t>& assignment,
                   std::vector<double>& dist, Parallelism par) {
  assignment.resize(points.rows());
  dist.resize(points.rows());
  parallel_for(0, points.rows(), par, [&](std::size_t i) {
    nearest(points, centroids, i, assignment[i], dist[i]);
  });
}

void assign_points_serial(const Matrix& points, const Matrix& centroids,
                          std::vector<std::uint32_t>& assignment,
                          std::vector<double>& dist) {
  assignment.resize(points.rows());
  dist.resize(points.rows());
  for (std::size_t i = 0; i < points.rows(); ++i) {
    nearest(points, centroids, i, assignment[i], dist[i]);
  }
}

std::vector<std::size_t> kmeanspp_seeds(const Matrix& points, std::size_t k,
                                        Rng& rng) {
  const std::size_t n = points.rows();
  std::vector<std::size_t> seeds;
  seeds.push_back(rng.below(n));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) {
    d2[i] = squared_distance(points.row(i), points.row(seeds[0]));
  }
  while (seeds.size() < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = n;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        pick = i;
        target -= d2[i];
        if (target < 0.0) break;
      }
    }
    if (pick == n) {
      throw InvalidArgument("k-means++ ran out of distinct points");
    }
    seeds.push_back(pick);
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(points.row(i), points.row(pick)));
    }
  }
  return seeds;
}

ClusterModel lloyd(const Matrix& points, std::size_t k, std::uint64_t seed,
                   std::size_t max_iter, double tol, Parallelism par) {
  const std::size_t n = points.rows();
  const std::size_t dim = points.cols();
  Rng rng(seed);
  ClusterModel m;
  m.k = k;
  m.seed = seed;
  m.centroids = Matrix(k, dim);
  const auto seeds = kmeanspp_seeds(points, k, rng);
  for (std::size_t c = 0; c < k; ++c) {
    auto src = points.row(seeds[c]);
    std::copy(src.begin(), src.end(), m.centroids.row(c).begin());
  }

  std::vector<double> dist;
  auto assign_and_score = [&] {
    assign_points(points, m.centroids, m.assignments, dist, par);
    // Summed in index order so the result does not depend on thread count.
    m.sse = std::accumulate(dist.begin(), dist.end(), 0.0);
    m.sse_history.push_back(m.sse);
  };

  Matrix next(k, dim);
  std::vector<std::size_t> counts(k);
  for (m.iterations = 0; m.iterations < max_iter; ++m.iterations) {
    assign_and_score();

    std::fill(next.data().begin(), next.data().end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto dst = next.row(m.assignments[i]);
      auto src = points.row(i);
      for (std::size_t c = 0; c < dim; ++c) dst[c] += src[c];
      ++counts[m.assignments[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // Re-seed at the point currently farthest from its centroid.
        const auto far = static_cast<std::size_t>(
            std::max_element(dist.begin(), dist.end()) - dist.begin());
        auto src = points.row(far);
        std::copy(src.begin(), src.end(), next.row(c).begin());
        dist[far] = 0.0;
        continue;
      }
      for (double& x : next.row(c)) x /= static_cast<double>(counts[c]);
    }

    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      shift = std::max(shift, std::sqrt(squared_distance(next.row(c),
                                                         m.centroids.row(c))));
    }
    std::swap(m.centroids, next);
    if (shift < tol) {
      ++m.iterations;
      break;
    }
  }
  assign_and_score();
  return m;
}

ClusterModel kmeans_fit(const Matrix& points, const KMeansConfig& config) {
  if (config.k == 0) throw InvalidArgument("k must be >= 1");
  if (config.restarts == 0) throw InvalidArgument("restarts must be >= 1");
  const std::size_t distinct = count_distinct_rows(points);
  if (config.k > distinct) {
    throw InvalidArgument("k = " + std::to_string(config.k) + " exceeds the " +
                          std::to_string(distinct) + " distinct vectors");
  }
  std::optional<ClusterModel> best;
  for (std::size_t r = 0; r < config.restarts; ++r) {
    auto m = lloyd(points, config.k, Rng::derive(config.seed, r),
                   config.max_iter, config.tol, config.parallelism);
    if (!best || m.sse < best->sse) best = std::move(m);
  }
  best->seed = config.seed;
  return std::move(*best);
}

namespace {

double silhouette_of(const Matrix& points,
                     const std::vector<std::uint32_t>& assignment,
                     const std::vector<std::size_t>& sizes, std::size_t i,
                     std::vector<double>& sums) {
  std::fill(sums.begin(), sums.end(), 0.0);
  const auto p = points.row(i);
  for (std::size_t j = 0; j < points.rows(); ++j) {
    if (j == i) continue;
    sums[assignment[j]] += std::sqrt(squared_distance(p, points.row(j)));
  }
  const std::size_t own = assignment[i];
  if (sizes[own] <= 1) return 0.0;
  const double a = sums[own] / static_cast<double>(sizes[own] - 1);
  double b = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    if (c == own || sizes[c] == 0) continue;
    b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
  }
  if (!std::isfinite(b)) return 0.0;
  const double denom = std::max(a, b);
  return denom > 0.0 ? (b - a) / denom : 0.0;
}

std::vector<std::size_t> sizes_of(const std::vector<std::uint32_t>& assignment,
                                  std::size_t k) {
  std::vector<std::size_t> sizes(k, 0);
  for (auto a : assignment) ++sizes[a];
  return sizes;
}

}  // namespace

double mean_silhouette(const Matrix& points,
                       const std::vector<std::uint32_t>& assignment,
                       std::size_t k, Parallelism par) {
  if (k <= 1 || points.rows() == 0) return 0.0;
  const auto sizes = sizes_of(assignment, k);
  std::vector<double> s(points.rows());
  const int threads = par.resolved();
#pragma omp parallel num_threads(threads) if (threads > 1)
  {
    std::vector<double> sums(k);
#pragma omp for schedule(dynamic, 16)
    for (long long i = 0; i < static_cast<long long>(points.rows()); ++i) {
      s[static_cast<std::size_t>(i)] = silhouette_of(
          points, assignment, sizes, static_cast<std::size_t>(i), sums);
    }
  }
  return std::accumulate(s.begin(), s.end(), 0.0) /
         static_cast<double>(points.rows());
}

double mean_silhouette_serial(const Matrix& points,
                              const std::vector<std::uint32_t>& assignment,
                              std::size_t k) {
  if (k <= 1 || points.rows() == 0) return 0.0;
  const auto sizes = sizes_of(assignment, k);
  std::vector<double> sums(k);
  double total = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    total += silhouette_of(points, assignment, sizes, i, sums);
  }
  return total / static_cast<double>(points.rows());
}

KSelection select_k(const Matrix& points, const std::vector<std::size_t>& ks,
                    const KMeansConfig& base, std::size_t silhouette_sample) {
  if (ks.empty()) throw InvalidArgument("k range is empty");

  // Fixed subsample shared by every k so scores are comparable.
  std::vector<std::size_t> sample(points.rows());
  std::iota(sample.begin(), sample.end(), std::size_t{0});
  if (silhouette_sample > 0 && points.rows() > silhouette_sample) {
    Rng rng(Rng::derive(base.seed, 0x5117));
    for (std::size_t i = 0; i < silhouette_sample; ++i) {
      std::swap(sample[i], sample[i + rng.below(sample.size() - i)]);
    }
    sample.resize(silhouette_sample);
    std::sort(sample.begin(), sample.end());
  }
  Matrix sub(sample.size(), points.cols());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    auto src = points.row(sample[i]);
    std::copy(src.begin(), src.end(), sub.row(i).begin());
  }

  KSelection out;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k : ks) {
    KMeansConfig cfg = base;
    cfg.k = k;
    auto model = kmeans_fit(points, cfg);
    std::vector<std::uint32_t> sub_assign(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) {
      sub_assign[i] = model.assignments[sample[i]];
    }
    const double s = mean_silhouette(sub, sub_assign, k, base.parallelism);
    out.scores.push_back({k, model.sse, s});
    if (s > best || (s == best && k < out.best_k)) {
      best = s;
      out.best_k = k;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Summaries

namespace {

class Tally {
 public:
  void add(const std::string& v) { ++counts_[v]; }

  std::vector<CountedValue> top(std::size_t n) const {
    std::vector<CountedValue> out;
    for (const auto& [value, count] : counts_) out.push_back({value, count});
    std::stable_sort(out.begin(), out.end(),
                     [](const CountedValue& a, const CountedValue& b) {
                       return a.count > b.count;
                     });
    if (out.size() > n) out.resize(n);
    return out;
  }

 private:
  std::map<std::string, std::uint64_t> counts_;
};

}  // namespace

ClusterSummary summarize_cluster(std::size_t cluster,
                                 const ClusterModel& model,
                                 const LogCorpus& corpus, std::size_t top_n) {
  if (cluster >= model.k) {
    throw InvalidArgument("cluster " + std::to_string(cluster) +
                          " out of range (k = " + std::to_string(model.k) +
                          ")");
  }
  if (model.assignments.size() != corpus.records.size()) {
    throw InvalidArgument("cluster model and corpus row counts differ");
  }
  ClusterSummary s;
  s.cluster = cluster;
  Tally sources, destinations, applications, zone_pairs;
  for (std::size_t r = 0; r < corpus.records.size(); ++r) {
    if (model.assignments[r] != cluster) continue;
    const auto& rec = corpus.records[r];
    ++s.members;
    sources.add(*rec.text(Field::kSrcIp));
    destinations.add(*rec.text(Field::kDstIp));
    if (rec.application) applications.add(*rec.application);
    if (rec.from_zone && rec.to_zone) {
      zone_pairs.add(*rec.from_zone + "->" + *rec.to_zone);
    }
  }
  s.top_sources = sources.top(top_n);
  s.top_destinations = destinations.top(top_n);
  s.top_applications = applications.top(top_n);
  s.top_zone_pairs = zone_pairs.top(top_n);
  return s;
}

// ---------------------------------------------------------------------------
// Projection

std::vector<ProjectedPoint> project_2d(const Matrix& points) {
  const std::size_t n = points.rows();
  const std::size_t dim = points.cols();
  if (n < 2) throw InvalidArgument("projection needs at least 2 vectors");

  Eigen::MatrixXd x(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < dim; ++c) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          points(i, c);
    }
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;

  Eigen::MatrixXd directions = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(dim), 2);
  if (dim > 0) {
    const Eigen::MatrixXd cov = x.transpose() * x;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    const auto& vecs = eig.eigenvectors();  // ascending eigenvalues
    const Eigen::Index last = static_cast<Eigen::Index>(dim) - 1;
    for (Eigen::Index j = 0; j < std::min<Eigen::Index>(2, last + 1); ++j) {
      Eigen::VectorXd v = vecs.col(last - j);
      Eigen::Index arg = 0;
      v.cwiseAbs().maxCoeff(&arg);
      if (v(arg) < 0) v = -v;
      directions.col(j) = v;
    }
  }
  const Eigen::MatrixXd projected = x * directions;
  std::vector<ProjectedPoint> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out[i] = {i, projected(r, 0), projected(r, 1)};
  }
  return out;
}

}  // namespace log2ns
