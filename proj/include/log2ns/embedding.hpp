#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "log2ns/flowlog.hpp"
#include "log2ns/matrix.hpp"
#include "log2ns/parallel.hpp"

namespace log2ns {

// Dense token ids ordered by descending frequency, ties by rendered text.
class Vocabulary {
 public:
  Vocabulary() = default;
  // Entries must already be in id order.
  explicit Vocabulary(std::vector<std::pair<Token, std::uint64_t>> entries);

  std::size_t size() const { return tokens_.size(); }
  const Token& token(std::size_t id) const { return tokens_[id]; }
  std::uint64_t frequency(std::size_t id) const { return freqs_[id]; }
  const std::vector<std::uint64_t>& frequencies() const { return freqs_; }

  std::optional<std::size_t> find(const Token& t) const;
  // Throws NotFoundError naming the token.
  std::size_t id(const Token& t) const;

  // "category:value<TAB>frequency" per line, in id order.
  std::string to_text() const;
  static Vocabulary from_text(std::string_view text);

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_ && freqs_ == other.freqs_;
  }

 private:
  std::vector<Token> tokens_;
  std::vector<std::uint64_t> freqs_;
  std::unordered_map<std::string, std::size_t> index_;
};

Vocabulary build_vocabulary(const LogCorpus& corpus, const TokenScheme& scheme);

struct PairSchema {
  std::vector<std::pair<Field, Field>> entries;  // (context, target)

  // Source -> {destination, application}; application -> destination;
  // destination region -> {source, application}.
  static PairSchema standard();
  // Self-pairs and fields absent from `corpus_schema` throw InvalidArgument.
  void validate(const std::vector<Field>& corpus_schema) const;
};

struct ContextTargetPair {
  std::uint32_t context_id = 0;
  std::uint32_t target_id = 0;
  std::uint32_t source_row = 0;

  bool operator==(const ContextTargetPair&) const = default;
};

// Row-major, then schema order. Tokens missing from `vocab` throw.
std::vector<ContextTargetPair> generate_pairs(const LogCorpus& corpus,
                                              const PairSchema& schema,
                                              const Vocabulary& vocab,
                                              std::uint64_t bytes_base = 10);

// Frequency Huffman tree for hierarchical softmax. Leaves are vocabulary ids
// 0..n-1; inner node i (0-based) is created by the i-th merge, so the root
// is inner node n-2.
class HuffmanTree {
 public:
  // Throws InvalidArgument when fewer than two frequencies are given.
  static HuffmanTree build(std::span<const std::uint64_t> frequencies);

  std::size_t leaf_count() const { return codes_.size(); }
  std::size_t inner_count() const { return leaf_count() - 1; }

  // Bits from the root down; 0 = left child.
  const std::vector<std::uint8_t>& code(std::size_t leaf) const {
    return codes_[leaf];
  }
  // Inner-node indices from the root down, parallel to code().
  const std::vector<std::uint32_t>& path(std::size_t leaf) const {
    return paths_[leaf];
  }

 private:
  std::vector<std::vector<std::uint8_t>> codes_;
  std::vector<std::vector<std::uint32_t>> paths_;
};

struct TrainingConfig {
  std::size_t dimension = 32;
  std::size_t epochs = 5;
  double learning_rate = 0.025;
  std::uint64_t seed = 1;
  // Shuffle pair order at the start of every epoch.
  bool shuffle = true;
  // threads == 1 is the deterministic contract mode. More threads run
  // lock-free asynchronous SGD with no reproducibility guarantee.
  Parallelism parallelism = Parallelism::serial();

  void validate() const;
};

struct EmbeddingModel {
  Vocabulary vocab;
  HuffmanTree tree;
  Matrix input_vectors;  // vocab.size() x dimension; row w is w's embedding
  Matrix inner_vectors;  // (vocab.size() - 1) x dimension
  TrainingConfig config;

  std::size_t dimension() const { return input_vectors.cols(); }

  // input vectors uniform in [-0.5/d, 0.5/d], inner vectors zero.
  static EmbeddingModel initialize(Vocabulary vocab,
                                   const TrainingConfig& config);
};

// One stochastic-gradient ascent step on log p(target | context) at the
// given rate. `scratch` must hold dimension() doubles.
void sgd_step(EmbeddingModel& model, std::size_t context, std::size_t target,
              double rate, std::span<double> scratch);

// Learning rate after `done` of `total` steps: linear decay from the initial
// rate down to 1e-4 of it.
double scheduled_rate(double initial, std::uint64_t done, std::uint64_t total);

// Trains from a freshly initialized model. Empty `pairs` throws.
EmbeddingModel train_skipgram_hs(std::span<const ContextTargetPair> pairs,
                                 const Vocabulary& vocab,
                                 const TrainingConfig& config);

// Continues training an existing model in place.
void train_epochs(EmbeddingModel& model,
                  std::span<const ContextTargetPair> pairs);

// p(target | context) by id: product of sigmoid decisions along target's
// root-to-leaf path.
double hs_probability(const EmbeddingModel& model, std::size_t context,
                      std::size_t target);
double hs_probability(const EmbeddingModel& model, const Token& context,
                      const Token& target);

struct Neighbor {
  Token token;
  std::size_t id = 0;
  double cosine = 0.0;
};

// Top-k by cosine similarity, excluding the query token, ties by id.
std::vector<Neighbor> nearest_neighbors(const EmbeddingModel& model,
                                        const Token& token, std::size_t k,
                                        Parallelism par = {});

double cosine_similarity(std::span<const double> a, std::span<const double> b);

}  // namespace log2ns
