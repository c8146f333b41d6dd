#include "log2ns/embedding.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numeric>
#include <queue>
#include <set>

#include "log2ns/error.hpp"
#include "log2ns/rng.hpp"
#include "log2ns/strings.hpp"

namespace log2ns {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Plain loads/stores for the sequential trainer.
struct PlainAccess {
  static double load(const double& x) { return x; }
  static void add(double& x, double delta) { x += delta; }
};

// Relaxed atomics for asynchronous multi-threaded SGD: updates from other
// threads may be lost or interleaved, but no access is a data race.
struct RelaxedAccess {
  static double load(const double& x) {
    return std::atomic_ref<double>(const_cast<double&>(x))
        .load(std::memory_order_relaxed);
  }
  static void add(double& x, double delta) {
    std::atomic_ref<double> ref(x);
    ref.store(ref.load(std::memory_order_relaxed) + delta,
              std::memory_order_relaxed);
  }
};

template <class Access>
void step(EmbeddingModel& m, std::size_t context, std::size_t target,
          double rate, std::span<double> grad_input) {
  const std::size_t d = m.dimension();
  auto input = m.input_vectors.row(context);
  std::fill(grad_input.begin(), grad_input.end(), 0.0);
  const auto& code = m.tree.code(target);
  const auto& path = m.tree.path(target);
  for (std::size_t j = 0; j < path.size(); ++j) {
    auto inner = m.inner_vectors.row(path[j]);
    double x = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      x += Access::load(input[c]) * Access::load(inner[c]);
    }
    // d/dx log sigma(+x) = 1 - sigma(x); d/dx log sigma(-x) = -sigma(x)
    const double g = (1.0 - code[j] - sigmoid(x)) * rate;
    for (std::size_t c = 0; c < d; ++c) {
      grad_input[c] += g * Access::load(inner[c]);
    }
    for (std::size_t c = 0; c < d; ++c) {
      Access::add(inner[c], g * Access::load(input[c]));
    }
  }
  for (std::size_t c = 0; c < d; ++c) Access::add(input[c], grad_input[c]);
}

void shuffle(std::vector<std::size_t>& order, Rng& rng) {
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary(std::vector<std::pair<Token, std::uint64_t>> entries) {
  tokens_.reserve(entries.size());
  freqs_.reserve(entries.size());
  for (auto& [token, freq] : entries) {
    if (freq == 0) throw InvalidArgument("vocabulary frequency must be >= 1");
    auto key = token.render();
    if (!index_.emplace(key, tokens_.size()).second) {
      throw InvalidArgument("duplicate vocabulary token '" + key + "'");
    }
    tokens_.push_back(std::move(token));
    freqs_.push_back(freq);
  }
}

std::optional<std::size_t> Vocabulary::find(const Token& t) const {
  auto it = index_.find(t.render());
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Vocabulary::id(const Token& t) const {
  if (auto found = find(t)) return *found;
  throw NotFoundError("unknown token '" + t.render() + "'");
}

std::string Vocabulary::to_text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    out += tokens_[i].render();
    out += '\t';
    out += std::to_string(freqs_[i]);
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::from_text(std::string_view text) {
  std::vector<std::pair<Token, std::uint64_t>> entries;
  for (auto line : split(text, '\n')) {
    if (trim(line).empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string_view::npos) {
      throw SchemaError("vocabulary line without frequency");
    }
    auto token = Token::parse(line.substr(0, tab));
    if (!token) {
      throw SchemaError("bad vocabulary token '" +
                        std::string(line.substr(0, tab)) + "'");
    }
    const std::string freq(trim(line.substr(tab + 1)));
    entries.emplace_back(std::move(*token), std::stoull(freq));
  }
  return Vocabulary(std::move(entries));
}

Vocabulary build_vocabulary(const LogCorpus& corpus,
                            const TokenScheme& scheme) {
  auto stats = corpus_stats(corpus, scheme);
  std::vector<std::pair<Token, std::uint64_t>> entries;
  entries.reserve(stats.tokens.size());
  for (auto& tc : stats.tokens) entries.emplace_back(tc.token, tc.count);
  return Vocabulary(std::move(entries));
}

// ---------------------------------------------------------------------------
// Pairs

PairSchema PairSchema::standard() {
  return {{{Field::kSrcIp, Field::kDstIp},
           {Field::kSrcIp, Field::kApplication},
           {Field::kApplication, Field::kDstIp},
           {Field::kDstRegion, Field::kSrcIp},
           {Field::kDstRegion, Field::kApplication}}};
}

void PairSchema::validate(const std::vector<Field>& corpus_schema) const {
  auto present = [&](Field f) {
    return std::find(corpus_schema.begin(), corpus_schema.end(), f) !=
           corpus_schema.end();
  };
  for (auto [context, target] : entries) {
    if (context == target) {
      throw InvalidArgument("pair schema pairs '" +
                            std::string(field_name(context)) +
                            "' with itself");
    }
    for (Field f : {context, target}) {
      if (!category_of(f)) {
        throw InvalidArgument("field '" + std::string(field_name(f)) +
                              "' has no token space");
      }
      if (!present(f)) {
        throw InvalidArgument("pair schema field '" +
                              std::string(field_name(f)) +
                              "' is not in the corpus schema");
      }
    }
  }
}

std::vector<ContextTargetPair> generate_pairs(const LogCorpus& corpus,
                                              const PairSchema& schema,
                                              const Vocabulary& vocab,
                                              std::uint64_t bytes_base) {
  schema.validate(corpus.schema);
  std::vector<ContextTargetPair> pairs;
  for (std::size_t row = 0; row < corpus.records.size(); ++row) {
    const auto& record = corpus.records[row];
    for (auto [context_field, target_field] : schema.entries) {
      auto context = field_token(record, context_field, bytes_base);
      auto target = field_token(record, target_field, bytes_base);
      if (!context || !target) continue;
      pairs.push_back({static_cast<std::uint32_t>(vocab.id(*context)),
                       static_cast<std::uint32_t>(vocab.id(*target)),
                       static_cast<std::uint32_t>(row)});
    }
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Huffman tree

HuffmanTree HuffmanTree::build(std::span<const std::uint64_t> frequencies) {
  const std::size_t n = frequencies.size();
  if (n < 2) {
    throw InvalidArgument("hierarchical softmax needs at least 2 tokens, got " +
                          std::to_string(n));
  }
  using Entry = std::pair<std::uint64_t, std::size_t>;  // (weight, node)
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  for (std::size_t i = 0; i < n; ++i) queue.emplace(frequencies[i], i);

  std::vector<std::size_t> parent(2 * n - 1, 0);
  std::vector<std::uint8_t> bit(2 * n - 1, 0);
  for (std::size_t merge = 0; merge < n - 1; ++merge) {
    auto [wa, a] = queue.top();
    queue.pop();
    auto [wb, b] = queue.top();
    queue.pop();
    const std::size_t node = n + merge;
    parent[a] = node;
    parent[b] = node;
    bit[a] = 0;
    bit[b] = 1;
    queue.emplace(wa + wb, node);
  }
  const std::size_t root = 2 * n - 2;

  HuffmanTree tree;
  tree.codes_.resize(n);
  tree.paths_.resize(n);
  for (std::size_t leaf = 0; leaf < n; ++leaf) {
    auto& code = tree.codes_[leaf];
    auto& path = tree.paths_[leaf];
    for (std::size_t node = leaf; node != root; node = parent[node]) {
      code.push_back(bit[node]);
      path.push_back(static_cast<std::uint32_t>(parent[node] - n));
    }
    std::reverse(code.begin(), code.end());
    std::reverse(path.begin(), path.end());
  }
  return tree;
}

// ---------------------------------------------------------------------------
// Training

void TrainingConfig::validate() const {
  if (dimension < 1) throw InvalidArgument("dimension must be >= 1");
  if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (!(learning_rate > 0.0)) {
    throw InvalidArgument("learning rate must be > 0");
  }
}

EmbeddingModel EmbeddingModel::initialize(Vocabulary vocab,
                                          const TrainingConfig& config) {
  config.validate();
  EmbeddingModel m;
  m.tree = HuffmanTree::build(vocab.frequencies());
  m.config = config;
  const std::size_t d = config.dimension;
  m.input_vectors = Matrix(vocab.size(), d);
  m.inner_vectors = Matrix(vocab.size() - 1, d);
  Rng rng(config.seed);
  const double half = 0.5 / static_cast<double>(d);
  for (double& x : m.input_vectors.data()) x = rng.uniform(-half, half);
  m.vocab = std::move(vocab);
  return m;
}

void sgd_step(EmbeddingModel& model, std::size_t context, std::size_t target,
              double rate, std::span<double> scratch) {
  step<PlainAccess>(model, context, target, rate, scratch);
}

double scheduled_rate(double initial, std::uint64_t done,
                      std::uint64_t total) {
  constexpr double kFloor = 1e-4;
  if (total == 0) return initial;
  const double progress =
      static_cast<double>(done) / static_cast<double>(total);
  return initial * std::max(kFloor, 1.0 - (1.0 - kFloor) * progress);
}

void train_epochs(EmbeddingModel& model,
                  std::span<const ContextTargetPair> pairs) {
  if (pairs.empty()) throw InvalidArgument("no context-target pairs to train");
  for (const auto& p : pairs) {
    if (p.context_id >= model.vocab.size() ||
        p.target_id >= model.vocab.size()) {
      throw InvalidArgument("pair references an id outside the vocabulary");
    }
  }
  const auto& cfg = model.config;
  const std::uint64_t total = cfg.epochs * pairs.size();
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(Rng::derive(cfg.seed, 1));
  const int threads = cfg.parallelism.resolved();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle) shuffle(order, rng);
    const std::uint64_t base = epoch * pairs.size();
    if (threads <= 1) {
      std::vector<double> scratch(model.dimension());
      for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& p = pairs[order[i]];
        step<PlainAccess>(model, p.context_id, p.target_id,
                          scheduled_rate(cfg.learning_rate, base + i, total),
                          scratch);
      }
      continue;
    }
#pragma omp parallel num_threads(threads)
    {
      std::vector<double> scratch(model.dimension());
#pragma omp for schedule(static)
      for (long long i = 0; i < static_cast<long long>(order.size()); ++i) {
        const auto& p = pairs[order[static_cast<std::size_t>(i)]];
        step<RelaxedAccess>(
            model, p.context_id, p.target_id,
            scheduled_rate(cfg.learning_rate,
                           base + static_cast<std::uint64_t>(i), total),
            scratch);
      }
    }
  }
}

EmbeddingModel train_skipgram_hs(std::span<const ContextTargetPair> pairs,
                                 const Vocabulary& vocab,
                                 const TrainingConfig& config) {
  if (pairs.empty()) throw InvalidArgument("no context-target pairs to train");
  auto model = EmbeddingModel::initialize(vocab, config);
  train_epochs(model, pairs);
  return model;
}

// ---------------------------------------------------------------------------
// Queries

double hs_probability(const EmbeddingModel& model, std::size_t context,
                      std::size_t target) {
  const auto input = model.input_vectors.row(context);
  const auto& code = model.tree.code(target);
  const auto& path = model.tree.path(target);
  double p = 1.0;
  for (std::size_t j = 0; j < path.size(); ++j) {
    const double x = dot(input, model.inner_vectors.row(path[j]));
    p *= sigmoid(code[j] == 0 ? x : -x);
  }
  return p;
}

double hs_probability(const EmbeddingModel& model, const Token& context,
                      const Token& target) {
  return hs_probability(model, model.vocab.id(context),
                        model.vocab.id(target));
}

double cosine_similarity(std::span<const double> a,
                         std::span<const double> b) {
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

std::vector<Neighbor> nearest_neighbors(const EmbeddingModel& model,
                                        const Token& token, std::size_t k,
                                        Parallelism par) {
  const std::size_t query = model.vocab.id(token);
  const std::size_t n = model.vocab.size();
  std::vector<double> scores(n);
  const auto q = model.input_vectors.row(query);
  parallel_for(0, n, par, [&](std::size_t i) {
    scores[i] = cosine_similarity(q, model.input_vectors.row(i));
  });
  std::vector<std::size_t> ids;
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i != query) ids.push_back(i);
  }
  k = std::min(k, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<long>(k), ids.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  std::vector<Neighbor> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.push_back({model.vocab.token(ids[i]), ids[i], scores[ids[i]]});
  }
  return out;
}

}  // namespace log2ns
