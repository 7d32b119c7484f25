#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "policyforge/corpus.hpp"
#include "policyforge/error.hpp"
#include "policyforge/matrix.hpp"

namespace policyforge::embed {

POLICYFORGE_DEFINE_ERROR(DimensionMismatch, Provider)

enum class ProviderKind { Remote, LocalHash };

struct EmbeddingConfig {
  ProviderKind provider = ProviderKind::LocalHash;
  std::string model_name = "local-hash";
  int dim = 256;
  std::uint64_t seed = 0;      // local-hash only
  std::string endpoint;        // remote only
  int batch_size = 32;
  std::optional<std::filesystem::path> cache_dir;

  friend bool operator==(const EmbeddingConfig&, const EmbeddingConfig&) = default;
};

inline constexpr const char* kApiKeyEnv = "POLICYFORGE_EMBED_KEY";

void validate(const EmbeddingConfig& config);
nlohmann::json to_json(const EmbeddingConfig& config);
EmbeddingConfig config_from_json(const nlohmann::json& j);
// Short stable label, e.g. "local-hash:256:s0".
std::string label(const EmbeddingConfig& config);

struct EmbeddingMatrix {
  Matrix rows;
  std::vector<std::string> segment_ids;
  EmbeddingConfig config;
};

// Feature hashing over the topic tokenizer: each token adds +-1 to a hashed
// column, then the vector is L2-normalized. A zero vector becomes e_0.
std::vector<double> local_hash_embed(std::string_view text, int dim, std::uint64_t seed);

class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
  virtual int dim() const = 0;
};

class LocalHashEmbedder final : public TextEmbedder {
 public:
  LocalHashEmbedder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {}
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;
  int dim() const override { return dim_; }

 private:
  int dim_;
  std::uint64_t seed_;
};

// Embedding API client. Request `{model, input: [..]}`, response
// `{data: [{index, embedding: [..]}]}`. Values are rounded to float so that
// cached and fresh vectors agree bit for bit.
class RemoteEmbedder final : public TextEmbedder {
 public:
  RemoteEmbedder(EmbeddingConfig config, std::string api_key);
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;
  int dim() const override { return config_.dim; }

 private:
  EmbeddingConfig config_;
  std::string api_key_;
};

// Content-addressed vector files: little-endian uint32 dim followed by dim
// little-endian float32 values.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::optional<std::vector<double>> get(std::string_view key_prefix, std::string_view text) const;
  void put(std::string_view key_prefix, std::string_view text, const std::vector<double>& vec);

  std::filesystem::path path_for(std::string_view key_prefix, std::string_view text) const;

 private:
  std::filesystem::path dir_;
  mutable std::shared_mutex mutex_;
};

// Fails with EnvironmentError naming the variable when a remote provider has
// no API key.
std::unique_ptr<TextEmbedder> make_embedder(const EmbeddingConfig& config);

EmbeddingMatrix embed_texts(const std::vector<std::string>& ids,
                            const std::vector<std::string>& texts, const EmbeddingConfig& config,
                            TextEmbedder& embedder);

EmbeddingMatrix embed_corpus(const std::vector<corpus::PolicySegment>& segments,
                             const EmbeddingConfig& config);

}  // namespace policyforge::embed
