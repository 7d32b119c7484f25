#include <doctest.h>

#include <algorithm>

#include "policyforge/corpus.hpp"
#include "policyforge/fileio.hpp"
#include "support.hpp"

using namespace policyforge;
using namespace policyforge::corpus;
using nlohmann::json;

namespace {

const char* kPhysics = "univ_a_college_arts_sciences_dept_physics";

json sample_tree() { return json::parse(read_file(testing::fixture("univ_a.json"))); }

Timestamp ts(const char* s) { return *Timestamp::parse(s); }

}  // namespace

TEST_CASE("sample university tree loads with three levels") {
  const auto c = load_corpus(testing::fixture("univ_a.json"));
  REQUIRE(c.institutions.size() == 1);
  const auto& inst = c.institutions[0];
  CHECK(inst.children.size() == 2);
  std::size_t depts = 0;
  for (const auto& col : inst.children) {
    CHECK(col.level == NodeLevel::College);
    depts += col.children.size();
    for (const auto& d : col.children) CHECK(d.level == NodeLevel::Department);
  }
  CHECK(depts == 3);
  CHECK(c.node_count() == 6);

  const auto* physics = c.find(kPhysics);
  REQUIRE(physics != nullptr);
  REQUIRE(physics->policies.size() == 2);
  CHECK(physics->current_policy() == &physics->policies.back());
  CHECK(physics->current_policy()->timestamp == ts("2025-01-01 15:30:00"));
  CHECK(physics->current_policy()->text.find("disclose") != std::string::npos);
}

TEST_CASE("empty institutions list is an empty corpus") {
  const auto c = parse_corpus(json{{"institutions", json::array()}, {"version", "x"}});
  CHECK(c.institutions.empty());
  CHECK(c.segments.empty());
}

TEST_CASE("invalid month names the node") {
  auto doc = sample_tree();
  doc["institutions"][0]["colleges"][0]["departments"][0]["policy"][0]["timestamp"] = "2025-13-01 00:00:00";
  try {
    parse_corpus(doc);
    FAIL("expected MalformedCorpus");
  } catch (const MalformedCorpus& e) {
    const std::string what = e.what();
    CHECK(what.find(kPhysics) != std::string::npos);
    CHECK(what.find("/institutions/0/colleges/0/departments/0/policy/0/timestamp") != std::string::npos);
  }
}

TEST_CASE("duplicate ids and missing fields are rejected") {
  auto doc = sample_tree();
  doc["institutions"][0]["colleges"][1]["_id"] = kPhysics;
  CHECK_THROWS_AS(parse_corpus(doc), MalformedCorpus);

  doc = sample_tree();
  doc["institutions"][0].erase("name");
  CHECK_THROWS_AS(parse_corpus(doc), MalformedCorpus);
}

TEST_CASE("segment_text splits on blank lines and bullets") {
  CHECK(segment_text("Para one.\n\nPara two.") == std::vector<std::string>{"Para one.", "Para two."});
  CHECK(segment_text("").empty());
  CHECK(segment_text("   \n\n  ").empty());

  const std::string option2 =
      "Option 2: Generative AI Tools Allowed\xE2\x80\x94With WCP Director Consultation And Approval\n"
      "- Allows students to use generative AI tools as they see fit, given that they do so responsibly, "
      "transparently, and with appropriate documentation\n"
      "- Provides students with a critical framework and set of expectations for engaging AI tools in "
      "the course and in their writing/communication processes\n"
      "- Requires substantive attention to teaching/learning responsible and critical use of generative "
      "AI tools (i.e., giving students more freedom with these tools means providing more guidance about "
      "how to appropriately use them)\n";
  const auto segs = segment_text(option2);
  REQUIRE(segs.size() == 4);
  CHECK(segs[0].rfind("Option 2:", 0) == 0);
  CHECK(segs[1].find("Allows students") != std::string::npos);
  CHECK(segs[3].find("Requires substantive") != std::string::npos);
}

TEST_CASE("short fragments merge into their neighbour") {
  const auto segs = segment_text("First paragraph has words.\n- Too\n- Third item has words.");
  REQUIRE(segs.size() == 2);
  CHECK(segs[0].find("- Too") != std::string::npos);
  CHECK(segs[1].rfind("- Third", 0) == 0);

  // a short leading fragment moves forward
  const auto lead = segment_text("- Tiny\n- This one is long enough.");
  REQUIRE(lead.size() == 1);
  CHECK(lead[0].rfind("- Tiny", 0) == 0);

  // blank-line paragraphs stand alone
  const auto paras = segment_text("Para one.\n\nPara two.");
  CHECK(paras.size() == 2);
  for (const auto& s : paras) CHECK(s.find("\n\n") == std::string::npos);
}

TEST_CASE("flatten_segments over the sample tree") {
  const auto c = load_corpus(testing::fixture("univ_a.json"));
  const auto current = flatten_segments(c);
  CHECK(current.size() == 6);
  CHECK(flatten_segments(c, true).size() == 7);
  CHECK(current == c.segments);
  CHECK(current.front().source_node_id == "univ_a");

  const auto again = load_corpus(testing::fixture("univ_a.json"));
  CHECK(flatten_segments(again) == current);

  for (const auto& s : current) CHECK(c.find(s.source_node_id) != nullptr);
}

TEST_CASE("corpus without policies has no segments") {
  auto doc = sample_tree();
  for (auto& col : doc["institutions"][0]["colleges"]) {
    col.erase("policy");
    for (auto& d : col["departments"]) d.erase("policy");
  }
  doc["institutions"][0].erase("policy");
  CHECK(flatten_segments(parse_corpus(doc)).empty());
}

TEST_CASE("upsert keeps timestamp order") {
  const auto c = load_corpus(testing::fixture("univ_a.json"));
  const auto newer = upsert_policy(c, kPhysics, {ts("2025-06-01 00:00:00"), "Newest policy text here."});
  const auto* p = newer.find(kPhysics);
  REQUIRE(p->policies.size() == 3);
  CHECK(p->current_policy()->text == "Newest policy text here.");
  CHECK(p->last_update == ts("2025-06-01 00:00:00"));

  const auto older = upsert_policy(c, kPhysics, {ts("2020-01-01 00:00:00"), "Oldest policy text here."});
  const auto* q = older.find(kPhysics);
  REQUIRE(q->policies.size() == 3);
  CHECK(q->policies.front().text == "Oldest policy text here.");
  CHECK(q->current_policy()->timestamp == ts("2025-01-01 15:30:00"));
  CHECK(q->last_update == ts("2025-01-01 15:30:00"));

  CHECK_THROWS_AS(upsert_policy(c, "nope", {ts("2025-06-01 00:00:00"), "x y z"}), UnknownNode);

  // the original value is untouched
  CHECK(c.find(kPhysics)->policies.size() == 2);
}

TEST_CASE("upsert sequences keep every node sorted") {
  auto c = load_corpus(testing::fixture("univ_a.json"));
  const char* stamps[] = {"2023-05-05 05:05:05", "2026-01-01 00:00:00", "2024-12-31 23:59:59",
                          "2021-02-02 02:02:02", "2025-01-01 15:30:01"};
  for (const char* s : stamps) c = upsert_policy(c, kPhysics, {ts(s), std::string("Policy as of ") + s});
  const auto& pol = c.find(kPhysics)->policies;
  CHECK(pol.size() == 7);
  CHECK(std::is_sorted(pol.begin(), pol.end(),
                       [](const PolicyText& a, const PolicyText& b) { return a.timestamp < b.timestamp; }));
}

TEST_CASE("save after load is byte-identical to canonical formatting") {
  testing::TempDir tmp;
  const auto src = testing::fixture("univ_a.json");
  save_corpus(load_corpus(src), tmp / "a.json");
  const std::string saved = read_file(tmp / "a.json");
  CHECK(saved == canonical_dump(json::parse(read_file(src))));

  save_corpus(load_corpus(tmp / "a.json"), tmp / "b.json");
  CHECK(read_file(tmp / "b.json") == saved);

  const auto planted = testing::fixture("planted_corpus.json");
  save_corpus(load_corpus(planted), tmp / "p.json");
  CHECK(read_file(tmp / "p.json") == canonical_dump(json::parse(read_file(planted))));
}

TEST_CASE("file store persists upserts and logs them") {
  testing::TempDir tmp;
  save_corpus(load_corpus(testing::fixture("univ_a.json")), tmp / "c.json");
  FileCorpusStore store(tmp / "c.json");
  store.upsert(kPhysics, {ts("2025-06-01 00:00:00"), "Stored policy text here."});
  const auto reloaded = store.load();
  CHECK(reloaded.find(kPhysics)->current_policy()->text == "Stored policy text here.");
  const auto log = read_file(store.change_log_path());
  CHECK(std::count(log.begin(), log.end(), '\n') == 1);
  CHECK(json::parse(log.substr(0, log.find('\n'))).dump().find(kPhysics) != std::string::npos);
  CHECK_THROWS_AS(store.upsert("nope", {ts("2025-06-01 00:00:00"), "x y z"}), UnknownNode);

  NullFetcher fetcher;
  const auto refreshed = refresh(store, fetcher);
  CHECK(to_json(refreshed) == to_json(reloaded));
}
