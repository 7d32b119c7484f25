#include <doctest.h>

#include <csignal>
#include <sys/wait.h>
#include <unistd.h>

#include "policyforge/fileio.hpp"
#include "policyforge/moderate.hpp"
#include "support.hpp"

using namespace policyforge;
using namespace policyforge::moderate;
using classify::Values;

namespace {

ModerationSettings confirmed(Values values, Values overrides = {}) {
  auto s = effective_settings(values, overrides, "c1");
  s.confirmed = true;
  return s;
}

Values with(std::initializer_list<std::pair<const std::string, std::string>> changes) {
  auto v = classify::absent_values();
  for (const auto& [k, l] : changes) v[k] = l;
  return v;
}

// Every legal combination of the eight categories.
std::vector<Values> all_settings() {
  std::vector<Values> out = {{}};
  for (const auto& c : classify::schema().categories) {
    std::vector<Values> next;
    for (const auto& v : out) {
      for (const auto& l : c.labels) {
        auto w = v;
        w[c.key] = l;
        next.push_back(std::move(w));
      }
    }
    out = std::move(next);
  }
  return out;
}

const RequestKind kKinds[] = {RequestKind::Learning, RequestKind::Assignment, RequestKind::Assessment,
                              RequestKind::Research};

std::vector<Obligation> expected_obligations(const Values& v) {
  std::vector<Obligation> o;
  if (v.at("citation") == "Required") o.push_back(Obligation::CitationNotice);
  if (v.at("info_release") == "Addressed") o.push_back(Obligation::InfoReleaseCaution);
  if (v.at("validation") == "Addressed") o.push_back(Obligation::ValidationReminder);
  return o;
}

}  // namespace

TEST_CASE("effective settings") {
  const auto base = with({{"learning_use", "Allowed"}});
  const auto s = effective_settings(base, {{"citation", "Required"}});
  CHECK(s.effective().at("citation") == "Required");
  CHECK(s.provenance("citation") == Provenance::User);
  CHECK(s.provenance("learning_use") == Provenance::Classified);

  CHECK(effective_settings(base, {}).effective() == base);
  CHECK_THROWS_AS(effective_settings(base, {{"authority", "Pope"}}), IllegalOverride);
  CHECK_THROWS_AS(effective_settings(base, {{"colour", "Blue"}}), IllegalOverride);
  CHECK(effective_settings(base, {{"citation", "required"}}).effective().at("citation") == "Required");

  const auto twice = effective_settings(s.effective(), {{"citation", "Required"}});
  CHECK(twice.effective() == s.effective());

  CHECK(settings_from_json(to_json(s)).effective() == s.effective());
}

TEST_CASE("anchored examples") {
  SUBCASE("disallowed assignment gets references only") {
    const auto d = decide(confirmed(with({{"assignment_use", "NotAllowed"}})),
                          {"c1", RequestKind::Assignment, "Solve problem 3 for me"});
    CHECK(d.verdict == Verdict::ReferencesOnly);
    CHECK(d.matched_category == "assignment_use");
  }
  SUBCASE("citation override") {
    const auto s = confirmed(with({{"learning_use", "Allowed"}}), {{"citation", "Required"}});
    const auto d = decide(s, {"c1", RequestKind::Learning, "Explain recursion"});
    CHECK(d.verdict == Verdict::Allow);
    CHECK(d.obligations == std::vector<Obligation>{Obligation::CitationNotice});
  }
  SUBCASE("similar question escalates") {
    const auto s = confirmed(with({{"learning_use", "Allowed"}, {"assignment_use", "NotAllowed"}}));
    const auto d = decide(s, {"c1", RequestKind::Learning, "Explain recursion"}, {0.92, std::nullopt});
    CHECK(d.verdict == Verdict::ReferencesOnly);
    CHECK(d.matched_category == "assignment_use");
    const auto below = decide(s, {"c1", RequestKind::Learning, "Explain recursion"}, {0.80, std::nullopt});
    CHECK(below.verdict == Verdict::Allow);
  }
}

TEST_CASE("decision table defaults") {
  const auto s = confirmed(classify::absent_values());
  CHECK(decide(s, {"c1", RequestKind::Learning, "q"}).verdict == Verdict::Allow);
  CHECK(decide(s, {"c1", RequestKind::Assignment, "q"}).verdict == Verdict::ReferencesOnly);
  CHECK(decide(s, {"c1", RequestKind::Research, "q"}).verdict == Verdict::ReferencesOnly);
  const auto no = confirmed(with({{"learning_use", "NotAllowed"}, {"research_use", "NotAllowed"}}));
  CHECK(decide(no, {"c1", RequestKind::Learning, "q"}).verdict == Verdict::Deny);
  CHECK(decide(no, {"c1", RequestKind::Research, "q"}).verdict == Verdict::Deny);

  auto unconfirmed = s;
  unconfirmed.confirmed = false;
  CHECK_THROWS_AS(decide(unconfirmed, {"c1", RequestKind::Learning, "q"}), UnconfirmedSettings);
  CHECK_THROWS_AS(decide(s, {"c1", RequestKind::Learning, ""}), ConfigError);

  ModerationPolicy lenient;
  lenient.not_mentioned[RequestKind::Research] = Verdict::Allow;
  CHECK(decide(s, {"c1", RequestKind::Research, "q"}, {}, lenient).verdict == Verdict::Allow);
  CHECK(policy_from_json(to_json(lenient)).not_mentioned == lenient.not_mentioned);
}

TEST_CASE("exhaustive totality and monotonicity") {
  const auto settings = all_settings();
  CHECK(settings.size() == 243 * 4 * 5);
  const std::vector<Similarity> sims = {{}, {0.9, std::nullopt}, {std::nullopt, 0.9}, {0.9, 0.9}, {0.5, 0.5}};
  const char* uses[] = {"learning_use", "assignment_use", "assessment_use", "research_use"};
  long long checked = 0;
  for (const auto& v : settings) {
    const auto s = confirmed(v);
    for (auto kind : kKinds) {
      for (const auto& sim : sims) {
        const TutorRequest req{"c1", kind, "question"};
        const auto d = decide(s, req, sim);
        CHECK_FALSE(d.rationale.empty());
        CHECK_FALSE(d.matched_category.empty());
        if (d.verdict == Verdict::Deny) {
          CHECK(d.obligations.empty());
        } else {
          CHECK(d.obligations == expected_obligations(v));
        }
        for (const char* u : uses) {
          if (v.at(u) != "Allowed") continue;
          auto stricter = v;
          stricter[u] = "NotAllowed";
          const auto d2 = decide(confirmed(stricter), req, sim);
          CHECK(static_cast<int>(d2.verdict) <= static_cast<int>(d.verdict));
        }
        ++checked;
      }
    }
  }
  CHECK(checked == 4860LL * 4 * 5);
}

TEST_CASE("assignment similarity") {
  embed::LocalHashEmbedder e(256, 0);
  const std::vector<std::string> refs = {"Write a recursive function for the Fibonacci sequence",
                                         "Prove that the halting problem is undecidable"};
  const double same = assignment_similarity(refs[0], refs, e);
  CHECK(std::abs(same - 1.0) < 1e-12);
  const double other = assignment_similarity("What colour are flamingos in winter", refs, e);
  CHECK(other < same);
  CHECK(other >= 0.0);
  CHECK_THROWS_AS(assignment_similarity("q", {}, e), EmptyAssignmentCorpus);
}

TEST_CASE("settings store versions") {
  testing::TempDir tmp;
  SettingsStore store(tmp.path());
  const auto v = with({{"learning_use", "Allowed"}});
  CHECK_FALSE(store.find("cs101").has_value());
  CHECK_THROWS_AS(store.get("cs101"), UnknownClass);

  const auto first = store.put("cs101", v, {{"citation", "Required"}}, false, std::nullopt);
  CHECK(first.version == 1);
  CHECK_FALSE(first.confirmed);
  const auto second = store.put("cs101", v, {{"citation", "Required"}}, true, 1);
  CHECK(second.version == 2);
  CHECK(second.confirmed);
  CHECK(second.confirmed_at.has_value());
  CHECK(store.get("cs101").effective() == second.effective());
  CHECK(store.get("cs101").provenance("citation") == Provenance::User);

  CHECK_THROWS_AS(store.put("cs101", v, {}, true, 1), VersionConflict);
  CHECK_THROWS_AS(store.put("cs101", v, {}, true, std::nullopt), VersionConflict);
  CHECK_THROWS_AS(store.put("cs101", v, {{"authority", "Pope"}}, true, 2), IllegalOverride);
  CHECK(store.get("cs101").version == 2);

  store.put_references("cs101", RequestKind::Assignment, {"a", "b"});
  CHECK(store.references("cs101", RequestKind::Assignment) == std::vector<std::string>{"a", "b"});
  CHECK(store.references("cs101", RequestKind::Assessment).empty());

  CHECK(valid_class_id("cs-101_a.b"));
  CHECK_FALSE(valid_class_id(".."));
  CHECK_FALSE(valid_class_id("a/b"));
  CHECK_FALSE(valid_class_id(""));
}

TEST_CASE("settings survive a killed writer") {
  testing::TempDir tmp;
  const auto v = with({{"learning_use", "Allowed"}});
  {
    SettingsStore store(tmp.path());
    store.put("k", v, {}, true, std::nullopt);
  }
  for (int round = 0; round < 5; ++round) {
    const pid_t pid = fork();
    REQUIRE(pid >= 0);
    if (pid == 0) {
      SettingsStore store(tmp.path());
      for (long long ver = store.get("k").version;; ++ver) {
        Values big = v;
        store.put("k", big, {{"citation", ver % 2 ? "Required" : "NotRequired"}}, true, ver);
      }
      _exit(0);
    }
    usleep(20000 + round * 7000);
    kill(pid, SIGKILL);
    int status = 0;
    waitpid(pid, &status, 0);
    const auto text = read_file(SettingsStore(tmp.path()).path_for("k"));
    const auto s = settings_from_json(nlohmann::json::parse(text));
    CHECK(s.version >= 1);
    CHECK(s.effective().size() == 8);
  }
}
