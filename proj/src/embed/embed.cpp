#include "policyforge/embed.hpp"

#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>

#include "policyforge/fileio.hpp"
#include "policyforge/hash.hpp"
#include "policyforge/http.hpp"
#include "policyforge/topics.hpp"

namespace policyforge::embed {

using nlohmann::json;

void validate(const EmbeddingConfig& config) {
  if (config.dim < 2) throw ConfigError("embedding dim must be >= 2");
  if (config.batch_size < 1) throw ConfigError("embedding batch_size must be >= 1");
  if (config.model_name.empty()) throw ConfigError("embedding model_name must be set");
  if (config.provider == ProviderKind::Remote && config.endpoint.empty()) {
    throw ConfigError("remote embedding provider needs an endpoint");
  }
}

json to_json(const EmbeddingConfig& c) {
  json j = {{"provider", c.provider == ProviderKind::Remote ? "remote" : "local-hash"},
            {"model_name", c.model_name},
            {"dim", c.dim},
            {"batch_size", c.batch_size}};
  if (c.provider == ProviderKind::LocalHash) j["seed"] = c.seed;
  if (!c.endpoint.empty()) j["endpoint"] = c.endpoint;
  if (c.cache_dir) j["cache_dir"] = c.cache_dir->string();
  return j;
}

EmbeddingConfig config_from_json(const json& j) {
  EmbeddingConfig c;
  const std::string provider = j.value("provider", "local-hash");
  if (provider == "remote") {
    c.provider = ProviderKind::Remote;
  } else if (provider == "local-hash") {
    c.provider = ProviderKind::LocalHash;
  } else {
    throw ConfigError("unknown embedding provider '" + provider + "'");
  }
  c.model_name = j.value("model_name", c.provider == ProviderKind::Remote ? "" : "local-hash");
  c.dim = j.value("dim", c.dim);
  c.seed = j.value("seed", c.seed);
  c.endpoint = j.value("endpoint", "");
  c.batch_size = j.value("batch_size", c.batch_size);
  if (j.contains("cache_dir")) c.cache_dir = j.at("cache_dir").get<std::string>();
  validate(c);
  return c;
}

std::string label(const EmbeddingConfig& c) {
  std::string s = c.model_name + ":" + std::to_string(c.dim);
  if (c.provider == ProviderKind::LocalHash) s += ":s" + std::to_string(c.seed);
  return s;
}

std::vector<double> local_hash_embed(std::string_view text, int dim, std::uint64_t seed) {
  if (dim < 2) throw ConfigError("embedding dim must be >= 2");
  std::vector<double> v(static_cast<std::size_t>(dim), 0.0);
  for (const auto& token : topics::tokenize(text)) {
    const std::uint64_t h = stable_hash64(token, seed);
    const std::size_t column = static_cast<std::size_t>((h >> 1) % static_cast<std::uint64_t>(dim));
    v[column] += (h & 1u) ? 1.0 : -1.0;
  }
  const double n = norm(v);
  if (n == 0.0) {
    std::fill(v.begin(), v.end(), 0.0);
    v[0] = 1.0;
    return v;
  }
  for (auto& x : v) x /= n;
  return v;
}

std::vector<std::vector<double>> LocalHashEmbedder::embed(const std::vector<std::string>& texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(local_hash_embed(t, dim_, seed_));
  return out;
}

RemoteEmbedder::RemoteEmbedder(EmbeddingConfig config, std::string api_key)
    : config_(std::move(config)), api_key_(std::move(api_key)) {
  validate(config_);
}

std::vector<std::vector<double>> RemoteEmbedder::embed(const std::vector<std::string>& texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  const std::size_t batch = static_cast<std::size_t>(config_.batch_size);
  for (std::size_t start = 0; start < texts.size(); start += batch) {
    const std::size_t end = std::min(texts.size(), start + batch);
    json input = json::array();
    for (std::size_t i = start; i < end; ++i) input.push_back(texts[i]);
    const json response = http::post_json(config_.endpoint,
                                          {{"model", config_.model_name}, {"input", input}},
                                          {{"Authorization", "Bearer " + api_key_}});
    if (!response.contains("data") || !response["data"].is_array() ||
        response["data"].size() != end - start) {
      throw ProviderUnavailable("embedding response lacks a data array of " +
                                std::to_string(end - start) + " items");
    }
    std::vector<std::vector<double>> chunk(end - start);
    for (const auto& item : response["data"]) {
      const std::size_t index = item.value("index", static_cast<std::size_t>(-1));
      if (index >= chunk.size() || !item.contains("embedding")) {
        throw ProviderUnavailable("embedding response item has a bad index");
      }
      const auto& emb = item["embedding"];
      if (emb.size() != static_cast<std::size_t>(config_.dim)) {
        throw DimensionMismatch("provider returned width " + std::to_string(emb.size()) +
                                ", expected " + std::to_string(config_.dim));
      }
      auto& vec = chunk[index];
      vec.reserve(emb.size());
      for (const auto& x : emb) vec.push_back(static_cast<double>(x.get<float>()));
    }
    for (auto& v : chunk) out.push_back(std::move(v));
  }
  return out;
}

std::filesystem::path EmbeddingCache::path_for(std::string_view key_prefix,
                                               std::string_view text) const {
  std::string key(key_prefix);
  key.push_back('\0');
  key.append(text);
  const std::string digest = sha256_hex(key);
  return dir_ / digest.substr(0, 2) / (digest + ".vec");
}

std::optional<std::vector<double>> EmbeddingCache::get(std::string_view key_prefix,
                                                       std::string_view text) const {
  std::shared_lock lock(mutex_);
  const auto path = path_for(key_prefix, text);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  unsigned char header[4];
  if (!in.read(reinterpret_cast<char*>(header), 4)) return std::nullopt;
  const std::uint32_t dim = header[0] | (header[1] << 8) | (header[2] << 16) |
                            (static_cast<std::uint32_t>(header[3]) << 24);
  std::vector<double> vec(dim);
  for (std::uint32_t i = 0; i < dim; ++i) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) return std::nullopt;
    const std::uint32_t bits = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    vec[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return vec;
}

void EmbeddingCache::put(std::string_view key_prefix, std::string_view text,
                         const std::vector<double>& vec) {
  std::string buf;
  buf.reserve(4 + 4 * vec.size());
  auto push_u32 = [&](std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) buf.push_back(static_cast<char>((v >> s) & 0xff));
  };
  push_u32(static_cast<std::uint32_t>(vec.size()));
  for (double x : vec) push_u32(std::bit_cast<std::uint32_t>(static_cast<float>(x)));
  std::unique_lock lock(mutex_);
  write_file_atomic(path_for(key_prefix, text), buf);
}

std::unique_ptr<TextEmbedder> make_embedder(const EmbeddingConfig& config) {
  validate(config);
  if (config.provider == ProviderKind::LocalHash) {
    return std::make_unique<LocalHashEmbedder>(config.dim, config.seed);
  }
  const char* key = std::getenv(kApiKeyEnv);
  if (!key || !*key) {
    throw EnvironmentError(std::string("remote embedding provider requires the ") + kApiKeyEnv +
                           " environment variable");
  }
  return std::make_unique<RemoteEmbedder>(config, key);
}

EmbeddingMatrix embed_texts(const std::vector<std::string>& ids,
                            const std::vector<std::string>& texts, const EmbeddingConfig& config,
                            TextEmbedder& embedder) {
  if (texts.empty()) throw ConfigError("nothing to embed");
  if (ids.size() != texts.size()) throw ConfigError("ids and texts differ in length");
  if (embedder.dim() != config.dim) {
    throw DimensionMismatch("embedder width " + std::to_string(embedder.dim()) +
                            " does not match config dim " + std::to_string(config.dim));
  }

  std::optional<EmbeddingCache> cache;
  if (config.cache_dir) cache.emplace(*config.cache_dir);
  const std::string key_prefix = label(config);

  std::vector<std::vector<double>> vectors(texts.size());
  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (cache) {
      if (auto hit = cache->get(key_prefix, texts[i]); hit && hit->size() == static_cast<std::size_t>(config.dim)) {
        vectors[i] = std::move(*hit);
        continue;
      }
    }
    missing.push_back(i);
  }
  if (!missing.empty()) {
    std::vector<std::string> batch;
    batch.reserve(missing.size());
    for (auto i : missing) batch.push_back(texts[i]);
    auto fresh = embedder.embed(batch);
    if (fresh.size() != batch.size()) throw ProviderUnavailable("embedder returned wrong row count");
    for (std::size_t m = 0; m < missing.size(); ++m) {
      auto& v = fresh[m];
      if (v.size() != static_cast<std::size_t>(config.dim)) {
        throw DimensionMismatch("provider returned width " + std::to_string(v.size()) +
                                ", expected " + std::to_string(config.dim));
      }
      if (cache) {
        // Round through float so the first answer equals later cache hits.
        for (auto& x : v) x = static_cast<double>(static_cast<float>(x));
        cache->put(key_prefix, texts[missing[m]], v);
      }
      vectors[missing[m]] = std::move(v);
    }
  }

  EmbeddingMatrix out;
  out.rows = Matrix(texts.size(), static_cast<std::size_t>(config.dim));
  for (std::size_t i = 0; i < texts.size(); ++i) {
    double n2 = 0.0;
    for (double x : vectors[i]) {
      if (!std::isfinite(x)) throw ProviderUnavailable("provider returned a non-finite value");
      n2 += x * x;
    }
    if (n2 == 0.0) throw ProviderUnavailable("provider returned a zero vector for '" + ids[i] + "'");
    std::copy(vectors[i].begin(), vectors[i].end(), out.rows.row(i).begin());
  }
  out.segment_ids = ids;
  out.config = config;
  return out;
}

EmbeddingMatrix embed_corpus(const std::vector<corpus::PolicySegment>& segments,
                             const EmbeddingConfig& config) {
  if (segments.empty()) throw ConfigError("embed_corpus needs at least one segment");
  std::vector<std::string> ids, texts;
  for (const auto& s : segments) {
    ids.push_back(s.segment_id);
    texts.push_back(s.text);
  }
  auto embedder = make_embedder(config);
  return embed_texts(ids, texts, config, *embedder);
}

}  // namespace policyforge::embed
