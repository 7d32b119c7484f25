#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <deque>
#include <random>

#include "policyforge/classify.hpp"
#include "policyforge/fileio.hpp"
#include "support.hpp"

using namespace policyforge;
using namespace policyforge::classify;

namespace {

const char* kLearningOnly =
    "Students may use generative AI tools for learning, but not for assignments and assessments. "
    "Please contact the instructor with any questions.";

const char* kWashington =
    "These tools can be inaccurate: Each individual is responsible for any content that is produced or "
    "published containing AI-generated material. Note that AI tools sometimes \"hallucinate,\" generating "
    "content that can be highly convincing, but inaccurate, misleading, or entirely fabricated. Furthermore, "
    "it may contain copyrighted material. It is imperative that all AI-generated content be reviewed "
    "carefully for correctness before submission or publication. It is the user\xE2\x80\x99s responsibility "
    "to verify everything.";

const char* kColumbia =
    "Consequences of using generative AI without faculty permission:\n"
    "The use of generative AI without faculty permission will be considered a violation of the CBS Honor "
    "Code. Suspected violations of this nature will be reported to Student Conduct in the Center for Student "
    "Success and Intervention (CSSI).\n"
    "The use of generative Artificial Intelligence (AI) tools to complete an assignment or exam is prohibited "
    "unless students have a written statement from the course instructor granting permission. Unauthorized "
    "use of AI shall be treated similarly to unauthorized assistance and/or plagiarism and is subject to "
    "Dean\xE2\x80\x99s Discipline.";

class ScriptedTransport final : public ChatTransport {
 public:
  explicit ScriptedTransport(std::deque<std::string> replies) : replies_(std::move(replies)) {}
  std::string complete(const std::vector<ChatMessage>& messages) override {
    seen.push_back(messages);
    auto r = replies_.front();
    replies_.pop_front();
    return r;
  }
  std::vector<std::vector<ChatMessage>> seen;

 private:
  std::deque<std::string> replies_;
};

const std::string kGoodReply =
    R"({"learning_use":"allowed","assignment_use":"Not Allowed","assessment_use":"not_allowed",)"
    R"("research_use":"NotMentioned","citation":"not mentioned","validation":"NotAddressed",)"
    R"("info_release":"not addressed","authority":"INSTRUCTOR"})";

}  // namespace

TEST_CASE("schema has the eight categories") {
  const auto& s = schema();
  REQUIRE(s.categories.size() == 8);
  const std::vector<std::string> keys = {"learning_use", "assignment_use", "assessment_use", "research_use",
                                         "citation",     "validation",     "info_release",   "authority"};
  for (std::size_t i = 0; i < keys.size(); ++i) CHECK(s.categories[i].key == keys[i]);
  CHECK(s.find("citation")->labels == std::vector<std::string>{"Required", "NotRequired", "NotMentioned"});
  CHECK(s.find("validation")->labels == std::vector<std::string>{"Addressed", "NotAddressed"});
  CHECK(s.find("authority")->labels ==
        std::vector<std::string>{"University", "College", "Department", "Instructor", "NotMentioned"});
  CHECK(schema_json()["categories"].size() == 8);
}

TEST_CASE("label normalization") {
  const auto& c = *schema().find("assignment_use");
  CHECK(normalize_label(c, "not allowed") == "NotAllowed");
  CHECK(normalize_label(c, "NOT_ALLOWED") == "NotAllowed");
  CHECK(normalize_label(c, "not-mentioned") == "NotMentioned");
  CHECK_FALSE(normalize_label(c, "Pope").has_value());
}

TEST_CASE("rule classifier on quoted statements") {
  RuleClassifier rule;
  const auto fig = classify_statement(kLearningOnly, rule).values;
  CHECK(fig.at("learning_use") == "Allowed");
  CHECK(fig.at("assignment_use") == "NotAllowed");
  CHECK(fig.at("assessment_use") == "NotAllowed");
  CHECK(fig.at("authority") == "Instructor");
  CHECK(fig.at("research_use") == "NotMentioned");
  CHECK(fig.at("citation") == "NotMentioned");
  CHECK(fig.at("validation") == "NotAddressed");
  CHECK(fig.at("info_release") == "NotAddressed");

  CHECK(classify_statement(kWashington, rule).values.at("validation") == "Addressed");

  const auto col = classify_statement(kColumbia, rule).values;
  CHECK(col.at("assignment_use") == "NotAllowed");
  CHECK(col.at("assessment_use") == "NotAllowed");
  CHECK(col.at("authority") == "Instructor");

  CHECK(rule_values("Use of generative AI is not permitted for assignments.").at("assignment_use") == "NotAllowed");
  CHECK(rule_values("") == absent_values());
  CHECK_THROWS_AS(classify_statement("   ", rule), ConfigError);

  // pure
  CHECK(rule_values(kColumbia) == rule_values(kColumbia));
}

TEST_CASE("rule classifier on the smoke fixture") {
  const auto ds = load_labeled_dataset(testing::fixture("smoke12.csv"));
  REQUIRE(ds.statements.size() == 12);
  int exact = 0;
  for (const auto& s : ds.statements) {
    const auto v = rule_values(s.text);
    bool ok = true;
    for (const auto& [cat, label] : s.gold)
      if (!is_absence_label(label) && v.at(cat) != label) ok = false;
    exact += ok;
  }
  CHECK(exact >= 10);
}

TEST_CASE("classification round trip") {
  RuleClassifier rule;
  const auto c = classify_statement(kLearningOnly, rule);
  CHECK(classification_from_json(to_json(c)) == c);
  CHECK(c.provider == "rule");
  CHECK(c.source_text == kLearningOnly);

  auto bad = to_json(c);
  bad["values"].erase("authority");
  CHECK_THROWS(classification_from_json(bad));
}

TEST_CASE("llm classifier repairs once") {
  SUBCASE("valid first reply") {
    auto t = std::make_shared<ScriptedTransport>(std::deque<std::string>{"Here you go: " + kGoodReply});
    LlmClassifier llm(t, "llm");
    const auto c = classify_statement(kLearningOnly, llm);
    CHECK(c.values.at("assignment_use") == "NotAllowed");
    CHECK(c.values.at("authority") == "Instructor");
    CHECK(t->seen.size() == 1);
    const auto& prompt = t->seen[0];
    bool mentions_schema = false;
    for (const auto& m : prompt) mentions_schema |= m.content.find("info_release") != std::string::npos;
    CHECK(mentions_schema);
  }
  SUBCASE("one repair") {
    auto t = std::make_shared<ScriptedTransport>(
        std::deque<std::string>{R"({"learning_use":"Allowed"})", kGoodReply});
    LlmClassifier llm(t, "llm");
    const auto c = classify_statement(kLearningOnly, llm);
    CHECK(c.values.at("learning_use") == "Allowed");
    REQUIRE(t->seen.size() == 2);
    CHECK(t->seen[1].back().content.find("missing key") != std::string::npos);
  }
  SUBCASE("two failures") {
    auto t = std::make_shared<ScriptedTransport>(std::deque<std::string>{"no json", R"({"authority":"Pope"})"});
    LlmClassifier llm(t, "llm");
    CHECK_THROWS_AS(classify_statement(kLearningOnly, llm), UnparseableResponse);
  }
}

TEST_CASE("llm provider needs its key") {
  ::unsetenv(kLlmKeyEnv);
  ProviderConfig cfg;
  cfg.name = "llm";
  try {
    make_provider(cfg);
    FAIL("expected EnvironmentError");
  } catch (const EnvironmentError& e) {
    CHECK(std::string(e.what()).find(kLlmKeyEnv) != std::string::npos);
  }
  cfg.name = "nope";
  CHECK_THROWS_AS(make_provider(cfg), ConfigError);
}

TEST_CASE("dataset loader") {
  const auto ds = load_labeled_dataset(testing::fixture("labeled72.csv"));
  CHECK(ds.statements.size() == 72);
  CHECK(ds.counts.at("citation").at("Required") == 19);
  CHECK(ds.counts.at("authority").at("Instructor") == 19);
  CHECK(ds.counts.at("learning_use").at("NotMentioned") == 70);

  const std::string header =
      "text,learning_use,assignment_use,assessment_use,research_use,citation,validation,info_release,authority\n";
  const std::string row = "x,Allowed,NotAllowed,NotAllowed,NotMentioned,NotMentioned,NotAddressed,NotAddressed,";
  CHECK_NOTHROW(parse_labeled_dataset(header + row + "Instructor\n"));
  try {
    parse_labeled_dataset(header + row + "\n");
    FAIL("expected MalformedDataset");
  } catch (const MalformedDataset& e) {
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_labeled_dataset(""), MalformedDataset);
  CHECK_THROWS_AS(parse_labeled_dataset(header), MalformedDataset);
}

TEST_CASE("precision and recall") {
  Cell c;
  c.tp = 8;
  c.fp = 2;
  c.fn = 2;
  CHECK(*c.precision() == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(*c.recall() == doctest::Approx(0.8).epsilon(1e-15));
  Cell empty;
  CHECK_FALSE(empty.precision().has_value());
  CHECK_FALSE(empty.recall().has_value());
}

TEST_CASE("evaluation reports") {
  const auto ds = load_labeled_dataset(testing::fixture("labeled72.csv"));
  GoldEchoProvider gold(ds);
  const auto g = evaluate(gold, ds);
  CHECK(g.n_statements == 72);
  for (const auto& cell : g.cells) {
    CHECK(cell.tp + cell.fp + cell.fn + cell.tn == 72);
    if (cell.precision()) CHECK(*cell.precision() == 1.0);
    if (cell.recall()) CHECK(*cell.recall() == 1.0);
  }
  CHECK(*g.macro_overall.precision == 1.0);
  CHECK(*g.macro_overall.recall == 1.0);

  RuleClassifier rule;
  const auto r = evaluate(rule, ds);
  CHECK(*r.macro_mentioned.precision >= 0.75);
  CHECK(*r.macro_mentioned.recall >= 0.75);

  // naive recount
  std::vector<Values> predicted;
  for (const auto& s : ds.statements) predicted.push_back(rule_values(s.text));
  for (const auto& cell : r.cells) {
    int tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < ds.statements.size(); ++i) {
      const bool p = predicted[i].at(cell.category) == cell.label;
      const bool t = ds.statements[i].gold.at(cell.category) == cell.label;
      tp += p && t;
      fp += p && !t;
      fn += !p && t;
      tn += !p && !t;
    }
    CHECK(cell.tp == tp);
    CHECK(cell.fp == fp);
    CHECK(cell.fn == fn);
    CHECK(cell.tn == tn);
  }

  // row order does not matter
  auto shuffled = ds;
  std::mt19937 rng(5);
  std::shuffle(shuffled.statements.begin(), shuffled.statements.end(), rng);
  const auto s = evaluate(rule, shuffled);
  CHECK(s.dataset_fingerprint == r.dataset_fingerprint);
  CHECK(report_csv(s) == report_csv(r));
}
