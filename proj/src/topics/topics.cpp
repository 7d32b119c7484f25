#include "policyforge/topics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "policyforge/corpus.hpp"
#include "policyforge/fileio.hpp"
#include "policyforge/stopwords.hpp"

namespace policyforge::topics {

using nlohmann::json;

namespace {

bool ascii_alnum(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

void flush_token(std::string& token, TokenList& out) {
  if (token.size() > 1 &&
      !std::all_of(token.begin(), token.end(), [](unsigned char c) { return c >= '0' && c <= '9'; }) &&
      !is_stopword(token)) {
    out.push_back(token);
  }
  token.clear();
}

// Sorts (term, weight) by weight desc then term asc and truncates.
void rank(std::vector<std::pair<std::string, double>>& words, std::size_t limit) {
  std::sort(words.begin(), words.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (words.size() > limit) words.resize(limit);
}

}  // namespace

TokenList tokenize(std::string_view text) {
  TokenList out;
  std::string token;
  for (unsigned char c : text) {
    if (ascii_alnum(c)) {
      token.push_back(static_cast<char>(std::tolower(c)));
    } else if (!token.empty()) {
      flush_token(token, out);
    }
  }
  if (!token.empty()) flush_token(token, out);
  return out;
}

Vocabulary build_vocabulary(const std::vector<TokenList>& docs, int min_df) {
  if (docs.empty()) throw ConfigError("build_vocabulary needs at least one document");
  if (min_df < 1) throw ConfigError("min_df must be >= 1");
  std::map<std::string, int> df;
  for (const auto& doc : docs) {
    std::set<std::string_view> seen(doc.begin(), doc.end());
    for (auto term : seen) ++df[std::string(term)];
  }
  Vocabulary vocab;
  vocab.min_df = min_df;
  for (const auto& [term, count] : df) {
    if (count >= min_df) {
      vocab.term_to_index.emplace(term, vocab.terms.size());
      vocab.terms.push_back(term);
    }
  }
  if (vocab.terms.empty()) {
    throw EmptyVocabulary("no term reaches document frequency " + std::to_string(min_df));
  }
  return vocab;
}

TokenList restrict_to_vocabulary(const TokenList& tokens, const Vocabulary& vocab) {
  TokenList out;
  for (const auto& t : tokens) {
    if (vocab.term_to_index.count(t)) out.push_back(t);
  }
  return out;
}

ClassTermMatrix class_term_matrix(const std::vector<TokenList>& class_docs, const Vocabulary& vocab) {
  ClassTermMatrix m;
  m.n_terms = vocab.size();
  m.counts.assign(class_docs.size(), std::vector<long long>(vocab.size(), 0));
  m.class_sizes.assign(class_docs.size(), 0);
  for (std::size_t c = 0; c < class_docs.size(); ++c) {
    for (const auto& token : class_docs[c]) {
      auto it = vocab.term_to_index.find(token);
      if (it == vocab.term_to_index.end()) continue;
      ++m.counts[c][it->second];
      ++m.class_sizes[c];
    }
  }
  return m;
}

WeightMatrix ctfidf(const ClassTermMatrix& m) {
  const std::size_t n_classes = m.n_classes();
  WeightMatrix w(n_classes, std::vector<double>(m.n_terms, 0.0));
  if (n_classes == 0) return w;
  double total = 0.0;
  for (auto s : m.class_sizes) total += static_cast<double>(s);
  const double avg = total / static_cast<double>(n_classes);
  std::vector<double> f(m.n_terms, 0.0);
  for (const auto& row : m.counts)
    for (std::size_t t = 0; t < m.n_terms; ++t) f[t] += static_cast<double>(row[t]);
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (m.class_sizes[c] == 0) continue;
    const double size = static_cast<double>(m.class_sizes[c]);
    for (std::size_t t = 0; t < m.n_terms; ++t) {
      const long long count = m.counts[c][t];
      if (count == 0) continue;
      w[c][t] = (static_cast<double>(count) / size) * std::log(1.0 + avg / f[t]);
    }
  }
  return w;
}

WeightMatrix bm25_weight(const ClassTermMatrix& m, double k1, double b) {
  if (!(k1 > 0.0)) throw ConfigError("bm25 k1 must be > 0");
  if (!(b >= 0.0 && b <= 1.0)) throw ConfigError("bm25 b must lie in [0, 1]");
  const std::size_t n_classes = m.n_classes();
  WeightMatrix w(n_classes, std::vector<double>(m.n_terms, 0.0));
  if (n_classes == 0) return w;
  double total = 0.0;
  for (auto s : m.class_sizes) total += static_cast<double>(s);
  const double avg = total / static_cast<double>(n_classes);
  std::vector<double> df(m.n_terms, 0.0);
  for (const auto& row : m.counts)
    for (std::size_t t = 0; t < m.n_terms; ++t)
      if (row[t] > 0) df[t] += 1.0;
  const double n = static_cast<double>(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    const double length_norm =
        avg > 0.0 ? 1.0 - b + b * static_cast<double>(m.class_sizes[c]) / avg : 1.0;
    for (std::size_t t = 0; t < m.n_terms; ++t) {
      const double count = static_cast<double>(m.counts[c][t]);
      if (count == 0.0) continue;
      const double idf = std::log(1.0 + (n - df[t] + 0.5) / (df[t] + 0.5));
      w[c][t] = idf * (count * (k1 + 1.0)) / (count + k1 * length_norm);
    }
  }
  return w;
}

std::string_view to_string(Weighting w) { return w == Weighting::Bm25 ? "bm25" : "ctfidf"; }
std::string_view to_string(VectorizePhase p) { return p == VectorizePhase::After ? "after" : "before"; }

Weighting weighting_from_string(std::string_view s) {
  if (s == "ctfidf") return Weighting::CTfIdf;
  if (s == "bm25") return Weighting::Bm25;
  throw ConfigError("unknown weighting '" + std::string(s) + "'");
}

VectorizePhase phase_from_string(std::string_view s) {
  if (s == "before") return VectorizePhase::Before;
  if (s == "after") return VectorizePhase::After;
  throw ConfigError("unknown vectorize phase '" + std::string(s) + "'");
}

std::vector<std::string> TopicRepresentation::words() const {
  std::vector<std::string> out;
  for (const auto& [w, _] : top_words) out.push_back(w);
  return out;
}

std::vector<TopicRepresentation> represent_topics(const cluster::ClusterAssignment& assignment,
                                                  const std::vector<TokenList>& docs,
                                                  const Vocabulary& vocab, Weighting weighting,
                                                  VectorizePhase phase, const Bm25Params& bm25) {
  if (assignment.labels.size() != docs.size()) {
    throw ConfigError("assignment covers " + std::to_string(assignment.labels.size()) +
                      " documents but " + std::to_string(docs.size()) + " were given");
  }
  const std::size_t k = static_cast<std::size_t>(assignment.k);
  std::vector<TokenList> class_docs(k);
  std::vector<int> doc_counts(k, 0);
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const int label = assignment.labels[i];
    if (label < 0) continue;
    if (static_cast<std::size_t>(label) >= k) throw ConfigError("cluster label out of range");
    ++doc_counts[label];
    class_docs[label].insert(class_docs[label].end(), docs[i].begin(), docs[i].end());
  }

  const Vocabulary* weight_vocab = &vocab;
  Vocabulary full;
  if (phase == VectorizePhase::After) {
    std::vector<TokenList> clustered;
    for (std::size_t i = 0; i < docs.size(); ++i)
      if (assignment.labels[i] >= 0) clustered.push_back(docs[i]);
    bool any_token = std::any_of(clustered.begin(), clustered.end(), [](const auto& d) { return !d.empty(); });
    if (any_token) {
      full = build_vocabulary(clustered, 1);
      weight_vocab = &full;
    }
  }

  const ClassTermMatrix matrix = class_term_matrix(class_docs, *weight_vocab);
  const WeightMatrix weights = weighting == Weighting::Bm25 ? bm25_weight(matrix, bm25.k1, bm25.b)
                                                            : ctfidf(matrix);

  std::vector<TopicRepresentation> reps;
  for (std::size_t c = 0; c < k; ++c) {
    TopicRepresentation rep;
    rep.topic_id = static_cast<int>(c);
    rep.doc_count = doc_counts[c];
    std::vector<std::pair<std::string, double>> words;
    for (std::size_t t = 0; t < matrix.n_terms; ++t) {
      if (matrix.counts[c][t] == 0) continue;
      const std::string& term = weight_vocab->terms[t];
      if (phase == VectorizePhase::After && !vocab.contains(term)) continue;
      words.emplace_back(term, weights[c][t]);
    }
    rank(words, kTopWords);
    rep.top_words = std::move(words);
    reps.push_back(std::move(rep));
  }
  std::stable_sort(reps.begin(), reps.end(), [](const auto& a, const auto& b) {
    if (a.doc_count != b.doc_count) return a.doc_count > b.doc_count;
    return a.topic_id < b.topic_id;
  });
  return reps;
}

json to_json(const TopicModel& model) {
  json reps = json::array();
  for (const auto& r : model.representations) {
    json words = json::array();
    for (const auto& [w, weight] : r.top_words) words.push_back({w, weight});
    reps.push_back({{"topic_id", r.topic_id}, {"doc_count", r.doc_count}, {"top_words", words}});
  }
  json params = json::object();
  for (const auto& [k, v] : model.assignment.params) params[k] = v;
  json j = {
      {"format", kTopicModelFormat},
      {"assignment",
       {{"algorithm", cluster::to_string(model.assignment.algorithm)},
        {"k", model.assignment.k},
        {"labels", model.assignment.labels},
        {"params", params},
        {"inertia_or_stability", model.assignment.inertia_or_stability}}},
      {"segment_ids", model.segment_ids},
      {"representations", reps},
      {"vocabulary",
       {{"terms", model.vocabulary.terms},
        {"min_df", model.vocabulary.min_df},
        {"stopwords_applied", model.vocabulary.stopwords_applied}}},
      {"weighting", to_string(model.weighting)},
      {"vectorize_phase", to_string(model.phase)},
      {"skipped_topics", model.skipped_topics},
      {"config", model.config},
  };
  j["coherence"] = model.coherence ? json(*model.coherence) : json(nullptr);
  return j;
}

TopicModel topic_model_from_json(const json& j) {
  if (j.value("format", "") != kTopicModelFormat) {
    throw ConfigError("not a topic model artifact (format tag mismatch)");
  }
  TopicModel m;
  const auto& a = j.at("assignment");
  m.assignment.algorithm = cluster::algorithm_from_string(a.at("algorithm").get<std::string>());
  m.assignment.k = a.at("k").get<int>();
  m.assignment.labels = a.at("labels").get<std::vector<int>>();
  for (auto it = a.at("params").begin(); it != a.at("params").end(); ++it)
    m.assignment.params[it.key()] = it->get<double>();
  m.assignment.inertia_or_stability = a.at("inertia_or_stability").get<double>();
  m.segment_ids = j.at("segment_ids").get<std::vector<std::string>>();
  for (const auto& r : j.at("representations")) {
    TopicRepresentation rep;
    rep.topic_id = r.at("topic_id").get<int>();
    rep.doc_count = r.at("doc_count").get<int>();
    for (const auto& w : r.at("top_words"))
      rep.top_words.emplace_back(w.at(0).get<std::string>(), w.at(1).get<double>());
    m.representations.push_back(std::move(rep));
  }
  const auto& v = j.at("vocabulary");
  m.vocabulary.terms = v.at("terms").get<std::vector<std::string>>();
  for (std::size_t i = 0; i < m.vocabulary.terms.size(); ++i)
    m.vocabulary.term_to_index.emplace(m.vocabulary.terms[i], i);
  m.vocabulary.min_df = v.at("min_df").get<int>();
  m.vocabulary.stopwords_applied = v.at("stopwords_applied").get<bool>();
  m.weighting = weighting_from_string(j.at("weighting").get<std::string>());
  m.phase = phase_from_string(j.at("vectorize_phase").get<std::string>());
  if (!j.at("coherence").is_null()) m.coherence = j.at("coherence").get<double>();
  m.skipped_topics = j.value("skipped_topics", 0);
  m.config = j.value("config", json::object());
  return m;
}

void save_topic_model(const TopicModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, corpus::canonical_dump(to_json(model)));
}

TopicModel load_topic_model(const std::filesystem::path& path) {
  return topic_model_from_json(json::parse(read_file(path)));
}

}  // namespace policyforge::topics
