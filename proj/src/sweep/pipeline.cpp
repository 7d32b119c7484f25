#include "policyforge/pipeline.hpp"

#include "policyforge/hash.hpp"

namespace policyforge::pipeline {

using nlohmann::json;

std::string cluster_param_name(cluster::Algorithm algorithm) {
  return algorithm == cluster::Algorithm::KMeans ? "n_clusters" : "min_cluster_size";
}

void validate(const DiscoverConfig& c) {
  embed::validate(c.embedding);
  if (c.umap) {
    if (c.umap->n_neighbors < 2) throw ConfigError("n_neighbors must be >= 2");
    if (c.umap->n_components < 2) throw ConfigError("n_components must be >= 2");
  }
  if (c.cluster.algorithm == cluster::Algorithm::KMeans && c.cluster.value < 1) {
    throw ConfigError("n_clusters must be >= 1");
  }
  if (c.cluster.algorithm == cluster::Algorithm::Hdbscan && c.cluster.value < 2) {
    throw ConfigError("min_cluster_size must be >= 2");
  }
  if (c.min_df < 1) throw ConfigError("min_df must be >= 1");
  coherence::validate(c.coherence);
}

json umap_to_json(const reduce::UmapConfig& c) {
  return {{"n_neighbors", c.n_neighbors},     {"n_components", c.n_components},
          {"min_dist", c.min_dist},           {"spread", c.spread},
          {"n_epochs", c.n_epochs},           {"learning_rate", c.learning_rate},
          {"negative_samples", c.negative_samples}, {"seed", c.seed}};
}

reduce::UmapConfig umap_from_json(const json& j, reduce::UmapConfig c) {
  if (!j.is_object()) throw ConfigError("umap config must be an object");
  c.n_neighbors = j.value("n_neighbors", c.n_neighbors);
  c.n_components = j.value("n_components", c.n_components);
  c.min_dist = j.value("min_dist", c.min_dist);
  c.spread = j.value("spread", c.spread);
  c.n_epochs = j.value("n_epochs", c.n_epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.negative_samples = j.value("negative_samples", c.negative_samples);
  c.seed = j.value("seed", c.seed);
  return c;
}

json to_json(const DiscoverConfig& c) {
  json cl = {{"algorithm", std::string(cluster::to_string(c.cluster.algorithm))},
             {cluster_param_name(c.cluster.algorithm), c.cluster.value}};
  if (c.cluster.min_samples) cl["min_samples"] = *c.cluster.min_samples;
  return {{"embedding", embed::to_json(c.embedding)},
          {"umap", c.umap ? umap_to_json(*c.umap) : json(nullptr)},
          {"cluster", cl},
          {"min_df", c.min_df},
          {"phase", std::string(topics::to_string(c.phase))},
          {"weighting", std::string(topics::to_string(c.weighting))},
          {"coherence",
           {{"window_size", c.coherence.window_size},
            {"top_n", c.coherence.top_n},
            {"epsilon", c.coherence.epsilon}}},
          {"seed", c.seed},
          {"include_history", c.include_history}};
}

DiscoverConfig discover_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("discover config must be an object");
  DiscoverConfig c;
  try {
    if (j.contains("embedding")) c.embedding = embed::config_from_json(j.at("embedding"));
    if (j.contains("umap")) {
      c.umap = j.at("umap").is_null() ? std::nullopt
                                      : std::optional(umap_from_json(j.at("umap")));
    }
    if (j.contains("cluster")) {
      const auto& cl = j.at("cluster");
      c.cluster.algorithm = cluster::algorithm_from_string(cl.value("algorithm", "kmeans"));
      const auto key = cluster_param_name(c.cluster.algorithm);
      if (!cl.contains(key)) throw ConfigError("cluster config needs '" + key + "'");
      c.cluster.value = cl.at(key).get<int>();
      if (cl.contains("min_samples")) c.cluster.min_samples = cl.at("min_samples").get<int>();
    }
    c.min_df = j.value("min_df", c.min_df);
    if (j.contains("phase")) c.phase = topics::phase_from_string(j.at("phase").get<std::string>());
    if (j.contains("weighting")) {
      c.weighting = topics::weighting_from_string(j.at("weighting").get<std::string>());
    }
    if (j.contains("coherence")) {
      const auto& co = j.at("coherence");
      c.coherence.window_size = co.value("window_size", c.coherence.window_size);
      c.coherence.top_n = co.value("top_n", c.coherence.top_n);
      c.coherence.epsilon = co.value("epsilon", c.coherence.epsilon);
    }
    c.seed = j.value("seed", c.seed);
    c.include_history = j.value("include_history", c.include_history);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad discover config: ") + e.what());
  }
  validate(c);
  return c;
}

PreparedCorpus prepare(const corpus::PolicyCorpus& corpus, bool include_history) {
  PreparedCorpus p;
  for (const auto& s : corpus::flatten_segments(corpus, include_history)) {
    p.segment_ids.push_back(s.segment_id);
    p.texts.push_back(s.text);
    p.docs.push_back(topics::tokenize(s.text));
  }
  return p;
}

std::vector<std::string> embedding_inputs(const PreparedCorpus& prepared,
                                          const topics::Vocabulary& vocab,
                                          topics::VectorizePhase phase) {
  if (phase == topics::VectorizePhase::After) return prepared.texts;
  std::vector<std::string> out;
  out.reserve(prepared.docs.size());
  for (const auto& doc : prepared.docs) {
    std::string s;
    for (const auto& t : topics::restrict_to_vocabulary(doc, vocab)) {
      if (!s.empty()) s += ' ';
      s += t;
    }
    out.push_back(std::move(s));
  }
  return out;
}

struct FeatureMemo::Slot {
  std::mutex mutex;
  bool done = false;
  std::shared_ptr<const Matrix> value;
  std::exception_ptr error;
};

FeatureMemo::FeatureMemo(
    std::function<std::unique_ptr<embed::TextEmbedder>(const embed::EmbeddingConfig&)> make)
    : make_(std::move(make)) {}

template <class F>
std::shared_ptr<const Matrix> FeatureMemo::once(const std::string& key, F compute) {
  std::shared_ptr<Slot> slot;
  {
    std::lock_guard lock(mutex_);
    auto& s = slots_[key];
    if (!s) s = std::make_shared<Slot>();
    slot = s;
  }
  std::lock_guard lock(slot->mutex);
  if (!slot->done) {
    try {
      slot->value = std::make_shared<const Matrix>(compute());
    } catch (...) {
      slot->error = std::current_exception();
    }
    slot->done = true;
  }
  if (slot->error) std::rethrow_exception(slot->error);
  return slot->value;
}

namespace {

std::string texts_key(const std::vector<std::string>& texts) {
  std::uint64_t h = 0;
  for (const auto& t : texts) h = stable_hash64(t, h ^ t.size());
  return hex64(h) + ":" + std::to_string(texts.size());
}

}  // namespace

std::shared_ptr<const Matrix> FeatureMemo::embedding(const embed::EmbeddingConfig& config,
                                                     const std::vector<std::string>& ids,
                                                     const std::vector<std::string>& texts) {
  const std::string key = "emb|" + embed::to_json(config).dump() + "|" + texts_key(texts);
  return once(key, [&] {
    auto embedder = make_(config);
    return embed::embed_texts(ids, texts, config, *embedder).rows;
  });
}

std::shared_ptr<const Matrix> FeatureMemo::features(const embed::EmbeddingConfig& config,
                                                    const std::optional<reduce::UmapConfig>& umap,
                                                    const std::vector<std::string>& ids,
                                                    const std::vector<std::string>& texts) {
  auto base = embedding(config, ids, texts);
  if (!umap) return base;
  const std::string key = "umap|" + embed::to_json(config).dump() + "|" + texts_key(texts) + "|" +
                          umap_to_json(*umap).dump();
  return once(key, [&] { return reduce::umap_fit(*base, *umap).points; });
}

topics::TopicModel discover(const PreparedCorpus& prepared, const DiscoverConfig& config,
                            FeatureMemo* memo) {
  validate(config);
  if (prepared.docs.empty()) throw CorpusTooSmall("corpus has no segments");
  FeatureMemo local;
  if (!memo) memo = &local;

  const auto vocab = topics::build_vocabulary(prepared.docs, config.min_df);
  const auto inputs = embedding_inputs(prepared, vocab, config.phase);
  const auto x = memo->features(config.embedding, config.umap, prepared.segment_ids, inputs);

  cluster::ClusterAssignment assignment;
  if (config.cluster.algorithm == cluster::Algorithm::KMeans) {
    assignment = cluster::kmeans_fit(*x, config.cluster.value, config.seed);
  } else {
    assignment = cluster::hdbscan_fit(*x, config.cluster.value, config.cluster.min_samples);
  }

  topics::TopicModel model;
  model.representations =
      topics::represent_topics(assignment, prepared.docs, vocab, config.weighting, config.phase);
  model.assignment = std::move(assignment);
  model.vocabulary = vocab;
  model.weighting = config.weighting;
  model.phase = config.phase;
  model.segment_ids = prepared.segment_ids;
  model.config = to_json(config);
  const auto mc = coherence::model_coherence(model.representations, prepared.docs, config.coherence);
  model.coherence = mc.score;
  model.skipped_topics = mc.skipped;
  return model;
}

topics::TopicModel discover(const corpus::PolicyCorpus& corpus, const DiscoverConfig& config) {
  return discover(prepare(corpus, config.include_history), config);
}

}  // namespace policyforge::pipeline
