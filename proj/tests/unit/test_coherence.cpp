#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "policyforge/coherence.hpp"
#include "policyforge/corpus.hpp"
#include "policyforge/pipeline.hpp"
#include "support.hpp"

using namespace policyforge;
using namespace policyforge::coherence;
using topics::TokenList;

namespace {

std::vector<TokenList> planted_docs() {
  return pipeline::prepare(corpus::load_corpus(testing::fixture("planted_corpus.json"))).docs;
}

CoherenceConfig window(int w) {
  CoherenceConfig c;
  c.window_size = w;
  return c;
}

}  // namespace

TEST_CASE("short documents are a single window") {
  const auto s = sliding_window_stats({{"a", "b"}}, 110, {"a", "b"});
  CHECK(s.total_windows == 1);
  CHECK(s.occurrences("a") == 1);
  CHECK(s.occurrences("b") == 1);
  CHECK(s.co_occurrences("a", "b") == 1);
}

TEST_CASE("words two apart never share a window of two") {
  const auto s = sliding_window_stats({{"a", "x", "b"}}, 2, {"a", "b"});
  CHECK(s.total_windows == 2);
  CHECK(s.co_occurrences("a", "b") == 0);
}

TEST_CASE("empty documents add no windows") {
  const auto s = sliding_window_stats({{}, {"a"}, {}}, 3, {"a"});
  CHECK(s.total_windows == 1);
}

TEST_CASE("toy corpus window counts match exhaustive enumeration") {
  const auto o = testing::oracle("text.json")["toy"];
  std::vector<TokenList> docs;
  for (const auto& d : o["docs"]) docs.push_back(topics::tokenize(d.get<std::string>()));
  CHECK(docs == o["tokens"].get<std::vector<TokenList>>());

  std::set<std::string> terms;
  for (const auto& [t, n] : o["occurrence"].items()) terms.insert(t);
  const auto s = sliding_window_stats(docs, o["window"], terms);
  CHECK(s.total_windows == o["total_windows"].get<long long>());
  for (const auto& [t, n] : o["occurrence"].items()) CHECK(s.occurrences(t) == n.get<long long>());
  for (const auto& [pair, n] : o["co_occurrence"].items()) {
    const auto bar = pair.find('|');
    const auto a = pair.substr(0, bar), b = pair.substr(bar + 1);
    INFO(pair);
    CHECK(s.co_occurrences(a, b) == n.get<long long>());
    CHECK(s.co_occurrences(b, a) == n.get<long long>());
    CHECK(s.co_occurrences(a, b) <= std::min(s.occurrences(a), s.occurrences(b)));
  }
  for (const auto& p : o["npmi"]) {
    INFO(p.dump());
    CHECK(std::abs(npmi(s, p["a"], p["b"], 1e-12) - p["value"].get<double>()) < 1e-9);
  }
  for (const auto& t : o["topics"]) {
    const auto words = t["words"].get<std::vector<std::string>>();
    INFO(t.dump());
    CHECK(std::abs(coherence_cv(words, docs, window(3)) - t["cv"].get<double>()) < 1e-9);
  }
}

TEST_CASE("npmi limits") {
  // a and b together in half the windows
  WindowStats s;
  s.total_windows = 4;
  s.occurrence = {{"a", 2}, {"b", 2}, {"c", 2}, {"d", 4}};
  s.co_occurrence = {{{"a", "b"}, 2}};
  CHECK(std::abs(npmi(s, "a", "b", 1e-12) - 1.0) < 1e-9);
  // never together: ln(eps / (p1 p2)) / -ln(eps)
  CHECK(std::abs(npmi(s, "a", "c", 1e-12) - std::log(1e-12 / 0.25) / -std::log(1e-12)) < 1e-12);
  CHECK(npmi(s, "a", "c", 1e-12) < -0.9);
  CHECK(npmi(s, "a", "zzz", 1e-12) == 0.0);
  CHECK(std::abs(npmi(s, "a", "a", 1e-12) - 1.0) < 1e-6);
  CHECK(npmi(s, "d", "d", 1e-12) == 1.0);
}

TEST_CASE("coherence_cv basics") {
  const std::vector<TokenList> together = {{"x", "y", "z"}, {"x", "y", "z"}, {"q"}};
  CHECK(std::abs(coherence_cv({"x", "y", "z"}, together, {}) - 1.0) < 1e-12);

  const std::vector<TokenList> docs = {{"x", "y"}, {"u", "v"}, {"x", "y"}, {"u", "v"}, {"w"}};
  const double good = coherence_cv({"x", "y"}, docs, {});
  const double bad = coherence_cv({"x", "u"}, docs, {});
  CHECK(bad < good);

  CHECK_THROWS_AS(coherence_cv({"x", "missing"}, docs, {}), DegenerateTopic);
  CHECK_THROWS_AS(coherence_cv({"x"}, docs, {}), DegenerateTopic);

  CoherenceConfig bad_config;
  bad_config.window_size = 1;
  CHECK_THROWS_AS(coherence_cv({"x", "y"}, docs, bad_config), ConfigError);
}

TEST_CASE("planted topics match the reference pipeline") {
  const auto o = testing::oracle("text.json")["planted"];
  const auto docs = planted_docs();
  CHECK(docs.size() == o["n_docs"].get<std::size_t>());

  double min_planted = 1.0;
  std::vector<topics::TopicRepresentation> reps;
  for (const auto& t : o["topics"]) {
    auto words = t["words"].get<std::vector<std::string>>();
    const double cv = coherence_cv(words, docs, {});
    CHECK(std::abs(cv - t["cv"].get<double>()) < 1e-9);
    CHECK(cv >= 0.9);
    min_planted = std::min(min_planted, cv);

    // set semantics
    std::reverse(words.begin(), words.end());
    CHECK(std::abs(coherence_cv(words, docs, {}) - cv) < 1e-12);

    topics::TopicRepresentation r;
    r.topic_id = static_cast<int>(reps.size());
    for (const auto& w : words) r.top_words.emplace_back(w, 1.0);
    reps.push_back(r);
  }
  for (const auto& t : o["shuffled"]) {
    const double cv = coherence_cv(t["words"].get<std::vector<std::string>>(), docs, {});
    CHECK(std::abs(cv - t["cv"].get<double>()) < 1e-9);
    CHECK(cv < min_planted);
  }

  const auto mc = model_coherence(reps, docs, {});
  CHECK(std::abs(mc.score - o["mean"].get<double>()) < 1e-9);
  CHECK(mc.skipped == 0);
}

TEST_CASE("model coherence aggregates") {
  const std::vector<TokenList> docs = {{"x", "y"}, {"u", "v"}, {"x", "y"}, {"u", "v", "x"}};
  auto rep = [](int id, std::vector<std::string> ws) {
    topics::TopicRepresentation r;
    r.topic_id = id;
    for (auto& w : ws) r.top_words.emplace_back(w, 1.0);
    return r;
  };
  const auto one = model_coherence({rep(0, {"x", "y"})}, docs, {});
  CHECK(one.score == coherence_cv({"x", "y"}, docs, {}));

  const auto two = model_coherence({rep(0, {"x", "y"}), rep(1, {"u", "v"}), rep(2, {"nope", "never"})}, docs, {});
  const double expect = (coherence_cv({"x", "y"}, docs, {}) + coherence_cv({"u", "v"}, docs, {})) / 2.0;
  CHECK(std::abs(two.score - expect) < 1e-15);
  CHECK(two.skipped == 1);
  CHECK_FALSE(two.per_topic[2].has_value());

  CHECK_THROWS_AS(model_coherence({rep(0, {"nope", "never"})}, docs, {}), NoScoreableTopics);
}
