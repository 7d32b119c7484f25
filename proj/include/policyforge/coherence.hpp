#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "policyforge/error.hpp"
#include "policyforge/topics.hpp"

namespace policyforge::coherence {

POLICYFORGE_DEFINE_ERROR(DegenerateTopic, Validation)
POLICYFORGE_DEFINE_ERROR(NoScoreableTopics, Validation)

struct CoherenceConfig {
  int window_size = 110;
  int top_n = 10;
  double epsilon = 1e-12;
};

void validate(const CoherenceConfig& config);

struct WindowStats {
  long long total_windows = 0;
  std::map<std::string, long long> occurrence;
  // Keyed by (min(w, w'), max(w, w')).
  std::map<std::pair<std::string, std::string>, long long> co_occurrence;

  long long occurrences(const std::string& w) const;
  long long co_occurrences(const std::string& a, const std::string& b) const;
};

// Boolean sliding windows advancing one token at a time inside each
// document. A document no longer than the window is a single window; an
// empty document contributes none.
WindowStats sliding_window_stats(const std::vector<topics::TokenList>& docs, int window_size,
                                 const std::set<std::string>& terms);

// ln((p12 + eps) / (p1 p2)) / -ln(p12 + eps), clamped to [-1, 1]. Zero when
// either word never occurs; one when both occur in every window.
double npmi(const WindowStats& stats, const std::string& w1, const std::string& w2,
            double epsilon);

// C_v: one-set segmentation, NPMI context vectors, cosine confirmation,
// arithmetic mean. Words absent from the documents are dropped first.
double coherence_cv(const std::vector<std::string>& words, const WindowStats& stats,
                    const CoherenceConfig& config);
double coherence_cv(const std::vector<std::string>& words,
                    const std::vector<topics::TokenList>& docs, const CoherenceConfig& config);
double coherence_cv(const topics::TopicRepresentation& rep,
                    const std::vector<topics::TokenList>& docs, const CoherenceConfig& config);

struct ModelCoherence {
  double score = 0.0;
  std::vector<std::optional<double>> per_topic;  // aligned with the input topics
  int skipped = 0;
};

ModelCoherence model_coherence(const std::vector<topics::TopicRepresentation>& topics,
                               const std::vector<topics::TokenList>& docs,
                               const CoherenceConfig& config);
ModelCoherence model_coherence(const topics::TopicModel& model,
                               const std::vector<topics::TokenList>& docs,
                               const CoherenceConfig& config);

}  // namespace policyforge::coherence
