#include "policyforge/coherence.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace policyforge::coherence {

namespace {

std::pair<std::string, std::string> ordered(const std::string& a, const std::string& b) {
  return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

std::vector<std::string> first_n(const std::vector<std::string>& words, int n) {
  std::vector<std::string> out;
  for (const auto& w : words) {
    if (static_cast<int>(out.size()) >= n) break;
    if (std::find(out.begin(), out.end(), w) == out.end()) out.push_back(w);
  }
  return out;
}

}  // namespace

void validate(const CoherenceConfig& config) {
  if (config.window_size < 2) throw ConfigError("coherence window_size must be >= 2");
  if (config.top_n < 2) throw ConfigError("coherence top_n must be >= 2");
  if (!(config.epsilon > 0.0)) throw ConfigError("coherence epsilon must be > 0");
}

long long WindowStats::occurrences(const std::string& w) const {
  auto it = occurrence.find(w);
  return it == occurrence.end() ? 0 : it->second;
}

long long WindowStats::co_occurrences(const std::string& a, const std::string& b) const {
  if (a == b) return occurrences(a);
  auto it = co_occurrence.find(ordered(a, b));
  return it == co_occurrence.end() ? 0 : it->second;
}

WindowStats sliding_window_stats(const std::vector<topics::TokenList>& docs, int window_size,
                                 const std::set<std::string>& terms) {
  if (window_size < 1) throw ConfigError("window_size must be positive");
  if (terms.empty()) throw ConfigError("sliding_window_stats needs at least one term");
  std::vector<std::string> term_list(terms.begin(), terms.end());
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < term_list.size(); ++i) index.emplace(term_list[i], i);
  const std::size_t n_terms = term_list.size();

  std::vector<long long> occ(n_terms, 0);
  std::vector<long long> co(n_terms * n_terms, 0);
  long long windows = 0;

  std::vector<int> in_window(n_terms, 0);
  std::vector<std::size_t> present;
  auto count_window = [&] {
    ++windows;
    present.clear();
    for (std::size_t t = 0; t < n_terms; ++t)
      if (in_window[t] > 0) present.push_back(t);
    for (std::size_t a = 0; a < present.size(); ++a) {
      ++occ[present[a]];
      for (std::size_t b = a + 1; b < present.size(); ++b) ++co[present[a] * n_terms + present[b]];
    }
  };

  const std::size_t w = static_cast<std::size_t>(window_size);
  for (const auto& doc : docs) {
    if (doc.empty()) continue;
    std::vector<long> ids(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
      auto it = index.find(doc[i]);
      ids[i] = it == index.end() ? -1 : static_cast<long>(it->second);
    }
    std::fill(in_window.begin(), in_window.end(), 0);
    const std::size_t first = std::min(w, doc.size());
    for (std::size_t i = 0; i < first; ++i)
      if (ids[i] >= 0) ++in_window[ids[i]];
    count_window();
    for (std::size_t end = w; end < doc.size(); ++end) {
      if (ids[end - w] >= 0) --in_window[ids[end - w]];
      if (ids[end] >= 0) ++in_window[ids[end]];
      count_window();
    }
  }

  WindowStats stats;
  stats.total_windows = windows;
  for (std::size_t a = 0; a < n_terms; ++a) {
    stats.occurrence[term_list[a]] = occ[a];
    for (std::size_t b = a + 1; b < n_terms; ++b) {
      const long long c = co[a * n_terms + b];
      if (c > 0) stats.co_occurrence[{term_list[a], term_list[b]}] = c;
    }
  }
  return stats;
}

double npmi(const WindowStats& stats, const std::string& w1, const std::string& w2,
            double epsilon) {
  if (stats.total_windows == 0) return 0.0;
  const double n = static_cast<double>(stats.total_windows);
  const double p1 = static_cast<double>(stats.occurrences(w1)) / n;
  const double p2 = static_cast<double>(stats.occurrences(w2)) / n;
  if (p1 == 0.0 || p2 == 0.0) return 0.0;
  const long long joint = stats.co_occurrences(w1, w2);
  if (joint == stats.total_windows) return 1.0;
  const double p12 = static_cast<double>(joint) / n;
  const double value = std::log((p12 + epsilon) / (p1 * p2)) / -std::log(p12 + epsilon);
  return std::clamp(value, -1.0, 1.0);
}

double coherence_cv(const std::vector<std::string>& words, const WindowStats& stats,
                    const CoherenceConfig& config) {
  std::vector<std::string> scored;
  for (const auto& w : first_n(words, config.top_n))
    if (stats.occurrences(w) > 0) scored.push_back(w);
  if (scored.size() < 2) {
    throw DegenerateTopic("fewer than two top words occur in the reference documents");
  }
  const std::size_t n = scored.size();
  std::vector<std::vector<double>> context(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) context[i][j] = npmi(stats, scored[i], scored[j], config.epsilon);

  std::vector<double> total(n, 0.0);
  for (const auto& row : context)
    for (std::size_t j = 0; j < n; ++j) total[j] += row[j];

  bool any_nonzero = false;
  double sum = 0.0;
  for (const auto& row : context) {
    if (norm(row) > 0.0) any_nonzero = true;
    sum += cosine(row, total);
  }
  if (!any_nonzero) throw DegenerateTopic("all context vectors are zero");
  return sum / static_cast<double>(n);
}

double coherence_cv(const std::vector<std::string>& words,
                    const std::vector<topics::TokenList>& docs, const CoherenceConfig& config) {
  validate(config);
  const auto top = first_n(words, config.top_n);
  if (top.size() < 2) throw DegenerateTopic("topic has fewer than two words");
  const auto stats = sliding_window_stats(docs, config.window_size, {top.begin(), top.end()});
  return coherence_cv(top, stats, config);
}

double coherence_cv(const topics::TopicRepresentation& rep,
                    const std::vector<topics::TokenList>& docs, const CoherenceConfig& config) {
  return coherence_cv(rep.words(), docs, config);
}

ModelCoherence model_coherence(const std::vector<topics::TopicRepresentation>& topic_list,
                               const std::vector<topics::TokenList>& docs,
                               const CoherenceConfig& config) {
  validate(config);
  std::set<std::string> all_terms;
  for (const auto& t : topic_list)
    for (const auto& w : first_n(t.words(), config.top_n)) all_terms.insert(w);

  ModelCoherence result;
  result.per_topic.assign(topic_list.size(), std::nullopt);
  if (all_terms.empty()) throw NoScoreableTopics("no topic has any words");
  // Counts for a term do not depend on which other terms are tracked, so a
  // single pass over the union serves every topic.
  const auto stats = sliding_window_stats(docs, config.window_size, all_terms);

  double sum = 0.0;
  int scored = 0;
  for (std::size_t i = 0; i < topic_list.size(); ++i) {
    try {
      const double c = coherence_cv(topic_list[i].words(), stats, config);
      result.per_topic[i] = c;
      sum += c;
      ++scored;
    } catch (const DegenerateTopic&) {
      ++result.skipped;
    }
  }
  if (scored == 0) throw NoScoreableTopics("every topic is degenerate");
  result.score = sum / scored;
  return result;
}

ModelCoherence model_coherence(const topics::TopicModel& model,
                               const std::vector<topics::TokenList>& docs,
                               const CoherenceConfig& config) {
  return model_coherence(model.representations, docs, config);
}

}  // namespace policyforge::coherence
