#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "policyforge/cluster.hpp"
#include "policyforge/coherence.hpp"
#include "policyforge/corpus.hpp"
#include "policyforge/embed.hpp"
#include "policyforge/reduce.hpp"
#include "policyforge/topics.hpp"

namespace policyforge::pipeline {

POLICYFORGE_DEFINE_ERROR(CorpusTooSmall, Validation)

struct ClusterSpec {
  cluster::Algorithm algorithm = cluster::Algorithm::KMeans;
  // n_clusters for K-means, min_cluster_size for HDBSCAN.
  int value = 8;
  std::optional<int> min_samples;
};

// Parameter name used in reports: "n_clusters" or "min_cluster_size".
std::string cluster_param_name(cluster::Algorithm algorithm);

struct DiscoverConfig {
  embed::EmbeddingConfig embedding;
  std::optional<reduce::UmapConfig> umap = reduce::UmapConfig{};  // nullopt: cluster raw embeddings
  ClusterSpec cluster;
  int min_df = 1;
  topics::VectorizePhase phase = topics::VectorizePhase::Before;
  topics::Weighting weighting = topics::Weighting::CTfIdf;
  coherence::CoherenceConfig coherence;
  std::uint64_t seed = 42;
  bool include_history = false;
};

void validate(const DiscoverConfig& config);
nlohmann::json to_json(const DiscoverConfig& config);
// Missing keys keep their defaults; "umap": null disables reduction.
DiscoverConfig discover_config_from_json(const nlohmann::json& j);
nlohmann::json umap_to_json(const reduce::UmapConfig& c);
reduce::UmapConfig umap_from_json(const nlohmann::json& j, reduce::UmapConfig base = {});

// Tokenized segments of a corpus, the reference documents for coherence.
struct PreparedCorpus {
  std::vector<std::string> segment_ids;
  std::vector<std::string> texts;
  std::vector<topics::TokenList> docs;
};

PreparedCorpus prepare(const corpus::PolicyCorpus& corpus, bool include_history = false);

// Embedding input for each document: the raw text, or under phase=before the
// document's in-vocabulary tokens joined by spaces.
std::vector<std::string> embedding_inputs(const PreparedCorpus& prepared,
                                          const topics::Vocabulary& vocab,
                                          topics::VectorizePhase phase);

// Caches embeddings and reductions shared between configurations. Safe to
// use from several threads; each entry is computed once.
class FeatureMemo {
 public:
  explicit FeatureMemo(std::function<std::unique_ptr<embed::TextEmbedder>(const embed::EmbeddingConfig&)>
                           make = embed::make_embedder);

  std::shared_ptr<const Matrix> embedding(const embed::EmbeddingConfig& config,
                                          const std::vector<std::string>& ids,
                                          const std::vector<std::string>& texts);
  std::shared_ptr<const Matrix> features(const embed::EmbeddingConfig& config,
                                         const std::optional<reduce::UmapConfig>& umap,
                                         const std::vector<std::string>& ids,
                                         const std::vector<std::string>& texts);

 private:
  template <class F>
  std::shared_ptr<const Matrix> once(const std::string& key, F compute);

  std::function<std::unique_ptr<embed::TextEmbedder>(const embed::EmbeddingConfig&)> make_;
  std::mutex mutex_;
  struct Slot;
  std::map<std::string, std::shared_ptr<Slot>> slots_;
};

// Embeds, reduces, clusters, represents and scores. The returned model
// carries its coherence and the config it was fitted with.
topics::TopicModel discover(const PreparedCorpus& prepared, const DiscoverConfig& config,
                            FeatureMemo* memo = nullptr);
topics::TopicModel discover(const corpus::PolicyCorpus& corpus, const DiscoverConfig& config);

}  // namespace policyforge::pipeline
