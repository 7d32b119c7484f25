#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "policyforge/cluster.hpp"
#include "policyforge/error.hpp"

namespace policyforge::topics {

POLICYFORGE_DEFINE_ERROR(EmptyVocabulary, Validation)

using TokenList = std::vector<std::string>;

// Lowercases, splits on every non-alphanumeric run (non-ASCII bytes count as
// separators), drops pure numbers, one-character tokens and stopwords.
TokenList tokenize(std::string_view text);

struct Vocabulary {
  std::vector<std::string> terms;  // alphabetical
  std::unordered_map<std::string, std::size_t> term_to_index;
  int min_df = 1;
  bool stopwords_applied = true;

  std::size_t size() const { return terms.size(); }
  bool contains(std::string_view term) const {
    return term_to_index.find(std::string(term)) != term_to_index.end();
  }
};

// Keeps terms whose document frequency is at least min_df.
Vocabulary build_vocabulary(const std::vector<TokenList>& docs, int min_df);

TokenList restrict_to_vocabulary(const TokenList& tokens, const Vocabulary& vocab);

struct ClassTermMatrix {
  // counts[c][t]: occurrences of vocabulary term t in class c.
  std::vector<std::vector<long long>> counts;
  std::vector<long long> class_sizes;  // row sums
  std::size_t n_terms = 0;

  std::size_t n_classes() const { return counts.size(); }
};

// One token list per class (the concatenation of the class's documents).
// Tokens outside the vocabulary are ignored.
ClassTermMatrix class_term_matrix(const std::vector<TokenList>& class_docs, const Vocabulary& vocab);

using WeightMatrix = std::vector<std::vector<double>>;

// W[c][x] = (count[c][x] / class_size[c]) * ln(1 + A / f_x), with A the mean
// class size and f_x the column total.
WeightMatrix ctfidf(const ClassTermMatrix& matrix);

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

// idf(x) * count * (k1 + 1) / (count + k1 * (1 - b + b * class_size / A)),
// idf(x) = ln(1 + (n_classes - df_x + 0.5) / (df_x + 0.5)).
WeightMatrix bm25_weight(const ClassTermMatrix& matrix, double k1, double b);

enum class Weighting { CTfIdf, Bm25 };
enum class VectorizePhase { Before, After };

std::string_view to_string(Weighting w);
std::string_view to_string(VectorizePhase p);
Weighting weighting_from_string(std::string_view s);
VectorizePhase phase_from_string(std::string_view s);

inline constexpr std::size_t kTopWords = 10;

struct TopicRepresentation {
  int topic_id = 0;
  std::vector<std::pair<std::string, double>> top_words;  // weight desc, term asc
  int doc_count = 0;

  std::vector<std::string> words() const;
};

// Before: classes are built over `vocab` only. After: weights are computed
// over the full (min_df = 1) vocabulary of the clustered documents and terms
// outside `vocab` are dropped from the ranked lists afterwards. Noise
// documents never contribute. Result is sorted by doc_count desc, then id.
std::vector<TopicRepresentation> represent_topics(const cluster::ClusterAssignment& assignment,
                                                  const std::vector<TokenList>& docs,
                                                  const Vocabulary& vocab, Weighting weighting,
                                                  VectorizePhase phase,
                                                  const Bm25Params& bm25 = {});

struct TopicModel {
  cluster::ClusterAssignment assignment;
  std::vector<TopicRepresentation> representations;
  Vocabulary vocabulary;
  Weighting weighting = Weighting::CTfIdf;
  VectorizePhase phase = VectorizePhase::Before;
  std::optional<double> coherence;
  int skipped_topics = 0;              // topics too degenerate to score
  std::vector<std::string> segment_ids;  // aligned with assignment.labels
  nlohmann::json config = nlohmann::json::object();
};

inline constexpr const char* kTopicModelFormat = "policyforge.topic_model/1";

nlohmann::json to_json(const TopicModel& model);
TopicModel topic_model_from_json(const nlohmann::json& j);
void save_topic_model(const TopicModel& model, const std::filesystem::path& path);
TopicModel load_topic_model(const std::filesystem::path& path);

}  // namespace policyforge::topics
