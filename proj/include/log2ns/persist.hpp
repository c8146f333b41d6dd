#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "log2ns/cluster.hpp"
#include "log2ns/embedding.hpp"
#include "log2ns/json_io.hpp"

namespace log2ns {

// Row-major little-endian IEEE-754 binary32.
std::string encode_f32(const Matrix& m);
Matrix decode_f32(std::string_view bytes, std::size_t rows, std::size_t cols);

// Little-endian uint32 triples (context, target, source row).
std::string encode_pairs(std::span<const ContextTargetPair> pairs);
std::vector<ContextTargetPair> decode_pairs(std::string_view bytes);

Json token_scheme_json(const TokenScheme& scheme);
TokenScheme token_scheme_from_json(const Json& doc);
Json pair_schema_json(const PairSchema& schema);
PairSchema pair_schema_from_json(const Json& doc);
Json training_config_json(const TrainingConfig& config);
TrainingConfig training_config_from_json(const Json& doc);
Json vectorize_config_json(const VectorizeConfig& config);
VectorizeConfig vectorize_config_from_json(const Json& doc);
std::vector<Field> fields_from_json(const Json& doc);

struct EmbeddingFiles {
  std::string metadata;  // JSON
  std::string inputs;    // f32, vocab x d
  std::string inner;     // f32, (vocab - 1) x d
  std::string vocab;     // "category:value<TAB>frequency" lines
};

EmbeddingFiles encode_embedding(const EmbeddingModel& model,
                                const TokenScheme& scheme,
                                const PairSchema& pairs);
// Rebuilds the Huffman tree from the vocabulary frequencies. Weights come
// back rounded to binary32.
EmbeddingModel decode_embedding(const EmbeddingFiles& files);
TokenScheme embedding_token_scheme(const EmbeddingFiles& files);

struct VectorFiles {
  std::string metadata;
  std::string values;
};
VectorFiles encode_vectors(const RowVectors& vectors);
RowVectors decode_vectors(const VectorFiles& files);

struct ClusterFiles {
  std::string document;   // k, seed, sse, assignments, ...
  std::string centroids;  // f32, k x dim
};
ClusterFiles encode_cluster(const ClusterModel& model,
                            const std::optional<KSelection>& selection);
ClusterModel decode_cluster(const ClusterFiles& files);

}  // namespace log2ns
