#include "log2ns/persist.hpp"

#include <bit>
#include <cstring>

#include "log2ns/error.hpp"

namespace log2ns {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i]))
         << (8 * i);
  }
  return v;
}

Json parse_doc(std::string_view text, const char* what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(std::string(what) + " is not valid JSON: " + e.what());
  }
}

Field field_or_throw(const std::string& name) {
  auto f = field_from_name(name);
  if (!f) throw ConfigError("unknown field '" + name + "'");
  return *f;
}

}  // namespace

std::string encode_f32(const Matrix& m) {
  std::string out;
  out.reserve(m.data().size() * 4);
  for (double x : m.data()) {
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
  }
  return out;
}

Matrix decode_f32(std::string_view bytes, std::size_t rows, std::size_t cols) {
  if (bytes.size() != rows * cols * 4) {
    throw Error("matrix payload has " + std::to_string(bytes.size()) +
                " bytes, expected " + std::to_string(rows * cols * 4));
  }
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows * cols; ++i) {
    m.data()[i] = std::bit_cast<float>(get_u32(bytes, 4 * i));
  }
  return m;
}

std::string encode_pairs(std::span<const ContextTargetPair> pairs) {
  std::string out;
  out.reserve(pairs.size() * 12);
  for (const auto& p : pairs) {
    put_u32(out, p.context_id);
    put_u32(out, p.target_id);
    put_u32(out, p.source_row);
  }
  return out;
}

std::vector<ContextTargetPair> decode_pairs(std::string_view bytes) {
  if (bytes.size() % 12 != 0) throw Error("pair payload is truncated");
  std::vector<ContextTargetPair> out(bytes.size() / 12);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = {get_u32(bytes, 12 * i), get_u32(bytes, 12 * i + 4),
              get_u32(bytes, 12 * i + 8)};
  }
  return out;
}

std::vector<Field> fields_from_json(const Json& doc) {
  if (!doc.is_array()) throw ConfigError("expected an array of field names");
  std::vector<Field> out;
  for (const auto& f : doc) {
    if (!f.is_string()) throw ConfigError("field names must be strings");
    out.push_back(field_or_throw(f.get<std::string>()));
  }
  return out;
}

namespace {

Json field_names(const std::vector<Field>& fields) {
  Json out = Json::array();
  for (Field f : fields) out.push_back(field_name(f));
  return out;
}

}  // namespace

Json token_scheme_json(const TokenScheme& s) {
  return {{"fields", field_names(s.fields)}, {"bytes_base", s.bytes_base}};
}

TokenScheme token_scheme_from_json(const Json& doc) {
  TokenScheme s = TokenScheme::defaults();
  if (doc.contains("fields")) s.fields = fields_from_json(doc.at("fields"));
  if (doc.contains("bytes_base")) {
    s.bytes_base = doc.at("bytes_base").get<std::uint64_t>();
  }
  s.validate();
  return s;
}

Json pair_schema_json(const PairSchema& schema) {
  Json out = Json::array();
  for (const auto& [c, t] : schema.entries) {
    out.push_back({field_name(c), field_name(t)});
  }
  return out;
}

PairSchema pair_schema_from_json(const Json& doc) {
  if (doc.is_string() && doc.get<std::string>() == "standard") {
    return PairSchema::standard();
  }
  if (!doc.is_array()) {
    throw ConfigError("pairs must be \"standard\" or [[context, target], ...]");
  }
  PairSchema schema;
  for (const auto& entry : doc) {
    if (!entry.is_array() || entry.size() != 2) {
      throw ConfigError("each pair entry is [context, target]");
    }
    schema.entries.emplace_back(field_or_throw(entry[0].get<std::string>()),
                                field_or_throw(entry[1].get<std::string>()));
  }
  return schema;
}

Json training_config_json(const TrainingConfig& c) {
  return {{"dimension", c.dimension},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"seed", c.seed},
          {"shuffle", c.shuffle},
          {"threads", c.parallelism.threads}};
}

TrainingConfig training_config_from_json(const Json& doc) {
  TrainingConfig c;
  c.dimension = doc.value("dimension", c.dimension);
  c.epochs = doc.value("epochs", c.epochs);
  c.learning_rate = doc.value("learning_rate", c.learning_rate);
  c.seed = doc.value("seed", c.seed);
  c.shuffle = doc.value("shuffle", c.shuffle);
  c.parallelism.threads = doc.value("threads", 1);
  c.validate();
  return c;
}

Json vectorize_config_json(const VectorizeConfig& c) {
  return {{"fields", field_names(c.fields)},
          {"mode", c.mode == VectorizeMode::kConcat ? "concat"
                                                    : "weighted_avg"},
          {"weights", c.weights},
          {"bytes_base", c.bytes_base}};
}

VectorizeConfig vectorize_config_from_json(const Json& doc) {
  VectorizeConfig c;
  if (doc.contains("fields")) c.fields = fields_from_json(doc.at("fields"));
  const auto mode = doc.value("mode", std::string("concat"));
  if (mode == "concat") {
    c.mode = VectorizeMode::kConcat;
  } else if (mode == "weighted_avg") {
    c.mode = VectorizeMode::kWeightedAverage;
  } else {
    throw ConfigError("vectorize mode must be concat or weighted_avg");
  }
  if (doc.contains("weights")) {
    c.weights = doc.at("weights").get<std::vector<double>>();
  }
  c.bytes_base = doc.value("bytes_base", c.bytes_base);
  return c;
}

EmbeddingFiles encode_embedding(const EmbeddingModel& model,
                                const TokenScheme& scheme,
                                const PairSchema& pairs) {
  EmbeddingFiles f;
  Json meta = {
      {"dimension", model.dimension()},
      {"vocab_size", model.vocab.size()},
      {"training", training_config_json(model.config)},
      {"tokens", token_scheme_json(scheme)},
      {"pairs", pair_schema_json(pairs)},
      {"encoding", "f32le"},
  };
  f.metadata = meta.dump(2) + "\n";
  f.inputs = encode_f32(model.input_vectors);
  f.inner = encode_f32(model.inner_vectors);
  f.vocab = model.vocab.to_text();
  return f;
}

EmbeddingModel decode_embedding(const EmbeddingFiles& files) {
  const Json meta = parse_doc(files.metadata, "embedding metadata");
  EmbeddingModel m;
  m.vocab = Vocabulary::from_text(files.vocab);
  const auto d = meta.at("dimension").get<std::size_t>();
  if (meta.at("vocab_size").get<std::size_t>() != m.vocab.size()) {
    throw Error("embedding vocabulary size does not match metadata");
  }
  m.config = training_config_from_json(meta.at("training"));
  m.tree = HuffmanTree::build(m.vocab.frequencies());
  m.input_vectors = decode_f32(files.inputs, m.vocab.size(), d);
  m.inner_vectors = decode_f32(files.inner, m.vocab.size() - 1, d);
  return m;
}

TokenScheme embedding_token_scheme(const EmbeddingFiles& files) {
  return token_scheme_from_json(
      parse_doc(files.metadata, "embedding metadata").at("tokens"));
}

VectorFiles encode_vectors(const RowVectors& v) {
  VectorFiles f;
  Json meta = {
      {"rows", v.size()},
      {"dimension", v.dimension()},
      {"fields", field_names(v.fields)},
      {"mode", v.mode == VectorizeMode::kConcat ? "concat" : "weighted_avg"},
      {"missing_mask", v.missing_mask},
      {"encoding", "f32le"},
  };
  f.metadata = meta.dump() + "\n";
  f.values = encode_f32(v.values);
  return f;
}

RowVectors decode_vectors(const VectorFiles& files) {
  const Json meta = parse_doc(files.metadata, "vector metadata");
  RowVectors v;
  v.fields = fields_from_json(meta.at("fields"));
  v.mode = meta.at("mode") == "concat" ? VectorizeMode::kConcat
                                       : VectorizeMode::kWeightedAverage;
  v.missing_mask = meta.at("missing_mask").get<std::vector<std::uint32_t>>();
  v.values = decode_f32(files.values, meta.at("rows").get<std::size_t>(),
                        meta.at("dimension").get<std::size_t>());
  return v;
}

ClusterFiles encode_cluster(const ClusterModel& model,
                            const std::optional<KSelection>& selection) {
  ClusterFiles f;
  Json doc = {
      {"k", model.k},
      {"seed", model.seed},
      {"sse", model.sse},
      {"iterations", model.iterations},
      {"sse_history", model.sse_history},
      {"dimension", model.centroids.cols()},
      {"assignments", model.assignments},
      {"cluster_sizes", model.cluster_sizes()},
      {"encoding", "f32le"},
  };
  if (selection) doc["selection"] = to_json(*selection);
  f.document = doc.dump() + "\n";
  f.centroids = encode_f32(model.centroids);
  return f;
}

ClusterModel decode_cluster(const ClusterFiles& files) {
  const Json doc = parse_doc(files.document, "cluster document");
  ClusterModel m;
  m.k = doc.at("k").get<std::size_t>();
  m.seed = doc.at("seed").get<std::uint64_t>();
  m.sse = doc.at("sse").get<double>();
  m.iterations = doc.at("iterations").get<std::size_t>();
  m.sse_history = doc.at("sse_history").get<std::vector<double>>();
  m.assignments = doc.at("assignments").get<std::vector<std::uint32_t>>();
  m.centroids =
      decode_f32(files.centroids, m.k, doc.at("dimension").get<std::size_t>());
  for (auto a : m.assignments) {
    if (a >= m.k) throw Error("cluster assignment out of range");
  }
  return m;
}

}  // namespace log2ns
