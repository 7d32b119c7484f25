// One PASS/FAIL line per acceptance criterion; exits 1 if any fails.
#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

#include "policyforge/classify.hpp"
#include "policyforge/cluster.hpp"
#include "policyforge/coherence.hpp"
#include "policyforge/corpus.hpp"
#include "policyforge/fileio.hpp"
#include "policyforge/moderate.hpp"
#include "policyforge/random.hpp"
#include "policyforge/reduce.hpp"
#include "policyforge/service.hpp"
#include "policyforge/sweep.hpp"
#include "policyforge/topics.hpp"
#include "support.hpp"

using namespace policyforge;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Ctx {
  std::vector<std::string> failures;
  long long checks = 0;
  void expect(bool ok, const std::string& what) {
    ++checks;
    if (!ok && failures.size() < 5) failures.push_back(what);
  }
};

std::vector<int> canonical(const std::vector<int>& labels) {
  std::map<int, int> seen;
  std::vector<int> out;
  for (int l : labels) {
    if (l < 0) {
      out.push_back(-1);
      continue;
    }
    out.push_back(seen.emplace(l, static_cast<int>(seen.size())).first->second);
  }
  return out;
}

topics::ClassTermMatrix from_counts(const std::vector<std::vector<long long>>& counts) {
  topics::ClassTermMatrix m;
  m.counts = counts;
  m.n_terms = counts.front().size();
  for (const auto& row : counts) {
    long long s = 0;
    for (auto c : row) s += c;
    m.class_sizes.push_back(s);
  }
  return m;
}

const pipeline::PreparedCorpus& planted() {
  static const auto p = pipeline::prepare(corpus::load_corpus(testing::fixture("planted_corpus.json")));
  return p;
}

// ---- criteria ---------------------------------------------------------------

void ctfidf_oracle(Ctx& c) {
  const auto w = topics::ctfidf(from_counts({{2, 0, 1, 0}, {0, 1, 0, 1}}));
  c.expect(std::abs(w[0][0] - 0.54062) < 1e-5, "hand example W(ai, c1)");
  const auto o = testing::oracle("ctfidf.json");
  int cases = 0;
  for (const auto& k : o["cases"]) {
    const auto m = from_counts(k["counts"].get<std::vector<std::vector<long long>>>());
    const auto got = topics::ctfidf(m);
    const auto want = k["ctfidf"].get<topics::WeightMatrix>();
    for (std::size_t i = 0; i < want.size(); ++i)
      for (std::size_t j = 0; j < want[i].size(); ++j)
        c.expect(std::abs(got[i][j] - want[i][j]) < 1e-9, k["name"].get<std::string>());
    ++cases;
  }
  c.expect(cases == 21, "expected 20 random cases plus the hand case");
}

void coherence_oracle(Ctx& c) {
  const auto toy = testing::oracle("text.json")["toy"];
  std::vector<topics::TokenList> docs;
  for (const auto& d : toy["docs"]) docs.push_back(topics::tokenize(d.get<std::string>()));
  coherence::CoherenceConfig w3;
  w3.window_size = toy["window"];
  for (const auto& t : toy["topics"]) {
    const double cv = coherence::coherence_cv(t["words"].get<std::vector<std::string>>(), docs, w3);
    c.expect(std::abs(cv - t["cv"].get<double>()) < 1e-9, "toy " + t["words"].dump());
  }

  const auto p = testing::oracle("text.json")["planted"];
  const auto& pd = planted().docs;
  double min_planted = 1.0;
  for (const auto& t : p["topics"]) {
    const double cv = coherence::coherence_cv(t["words"].get<std::vector<std::string>>(), pd, {});
    c.expect(std::abs(cv - t["cv"].get<double>()) < 1e-9, "planted " + t["words"].dump());
    c.expect(cv >= 0.9, "planted topic below 0.9");
    min_planted = std::min(min_planted, cv);
  }
  for (const auto& t : p["shuffled"]) {
    const double cv = coherence::coherence_cv(t["words"].get<std::vector<std::string>>(), pd, {});
    c.expect(std::abs(cv - t["cv"].get<double>()) < 1e-9, "shuffled " + t["words"].dump());
    c.expect(cv < min_planted, "shuffled set not below planted");
  }
}

void kmeans_oracle(Ctx& c) {
  int cases = 0, optimal = 0;
  std::string misses;
  const auto kmeans_cases = testing::oracle("cluster.json")["kmeans"];
  for (const auto& k : kmeans_cases) {
    const auto r = cluster::kmeans(testing::matrix(k["points"]), k["k"], 42);
    const double want = k["inertia"];
    if (canonical(r.assignment.labels) == k["labels"].get<std::vector<int>>() &&
        std::abs(r.assignment.inertia_or_stability - want) < 1e-9) {
      ++optimal;
    } else {
      std::ostringstream m;
      m << " #" << cases << " (" << r.assignment.inertia_or_stability << " vs " << want << ")";
      misses += m.str();
    }
    for (const auto& run : r.runs)
      for (std::size_t i = 1; i < run.inertia_history.size(); ++i)
        c.expect(run.inertia_history[i] <= run.inertia_history[i - 1] + 1e-12, "inertia increased");
    ++cases;
  }
  c.expect(cases == 15, "expected 15 instances");
  c.expect(optimal == cases, std::to_string(optimal) + "/" + std::to_string(cases) +
                                 " instances at the exhaustive optimum; local optimum on" + misses);
}

void hdbscan_oracle(Ctx& c) {
  int cases = 0;
  const auto hdbscan_cases = testing::oracle("cluster.json")["hdbscan"];
  for (const auto& k : hdbscan_cases) {
    std::optional<int> ms;
    if (!k["min_samples"].is_null()) ms = k["min_samples"].get<int>();
    const int mcs = k["min_cluster_size"];
    const auto a = cluster::hdbscan_fit(testing::matrix(k["points"]), mcs, ms);
    const auto name = k["name"].get<std::string>();
    c.expect(a.k == k["n_clusters"].get<int>(), name + " cluster count");
    std::vector<int> noise;
    for (std::size_t i = 0; i < a.labels.size(); ++i)
      if (a.labels[i] == -1) noise.push_back(static_cast<int>(i));
    c.expect(noise == k["noise"].get<std::vector<int>>(), name + " noise set");
    for (auto s : a.cluster_sizes()) c.expect(s >= static_cast<std::size_t>(mcs), name + " small cluster");
    ++cases;
  }
  c.expect(cases == 10, "expected 10 instances");
}

Matrix two_blobs(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> rows;
  for (int b = 0; b < 2; ++b) {
    for (int i = 0; i < 30; ++i) {
      std::vector<double> r(10);
      for (auto& v : r) v = rng.normal();
      r[0] += b * 20.0;
      rows.push_back(r);
    }
  }
  return Matrix::from_rows(rows);
}

double separation(const Matrix& e) {
  std::vector<double> intra, inter;
  for (std::size_t i = 0; i < e.rows(); ++i)
    for (std::size_t j = i + 1; j < e.rows(); ++j)
      ((i < 30) == (j < 30) ? intra : inter).push_back(euclidean_distance(e.row(i), e.row(j)));
  std::nth_element(intra.begin(), intra.begin() + static_cast<long>(intra.size() / 2), intra.end());
  const double median = intra[intra.size() / 2];
  const auto above = std::count_if(inter.begin(), inter.end(), [&](double d) { return d > median; });
  return static_cast<double>(above) / static_cast<double>(inter.size());
}

void umap_checks(Ctx& c) {
  for (std::uint64_t seed : {7u, 8u, 9u}) {
    const auto pts = two_blobs(seed);
    reduce::UmapConfig cfg;
    cfg.seed = seed;
    cfg.n_components = 2;
    const auto a = reduce::umap_fit(pts, cfg);
    const auto b = reduce::umap_fit(pts, cfg);
    c.expect(a.points == b.points, "repeat run differs for seed " + std::to_string(seed));
    c.expect(separation(a.points) >= 0.95, "blobs merge for seed " + std::to_string(seed));
    const auto g = reduce::fuzzy_simplicial_set(reduce::knn_graph(pts, cfg.n_neighbors), cfg.n_neighbors);
    for (double r : g.sigma_residual) c.expect(r < 1e-4, "sigma residual");
  }
  const auto o = testing::oracle("umap.json")["fuzzy"];
  const auto g = reduce::fuzzy_simplicial_set(reduce::knn_graph(testing::matrix(o["points"]), o["n_neighbors"]),
                                              o["n_neighbors"]);
  for (double r : g.sigma_residual) c.expect(r < 1e-4, "sigma residual on the oracle points");
}

void sweep_checks(Ctx& c) {
  const auto plan = sweep::load_plan(testing::fixture("planted_sweep_plan.json"));
  const auto full = sweep::run_sweep(plan, planted());
  const auto* best = full.find(full.best);
  c.expect(full.complete, "sweep incomplete");
  c.expect(best && best->cluster_value == 3, "best k is not 3");

  testing::TempDir tmp;
  sweep::SweepOptions opts;
  opts.journal = tmp / sweep::kJournalName;
  opts.max_new_rows = 4;
  const auto part = sweep::run_sweep(plan, planted(), opts);
  c.expect(!part.complete, "interrupted run reports complete");
  opts.max_new_rows.reset();
  const auto resumed = sweep::run_sweep(plan, planted(), opts);
  c.expect(resumed.complete && resumed.same_outcome(full), "resumed run differs");
}

void classification_checks(Ctx& c) {
  const auto ds = classify::load_labeled_dataset(testing::fixture("labeled72.csv"));
  c.expect(ds.statements.size() == 72, "72 rows");
  c.expect(ds.counts.at("citation").at("Required") == 19, "citation Required marginal");
  c.expect(ds.counts.at("authority").at("Instructor") == 19, "authority Instructor marginal");

  classify::GoldEchoProvider gold(ds);
  const auto g = classify::evaluate(gold, ds);
  for (const auto& cell : g.cells) {
    if (cell.precision()) c.expect(*cell.precision() == 1.0, "gold precision " + cell.category + "/" + cell.label);
    if (cell.recall()) c.expect(*cell.recall() == 1.0, "gold recall " + cell.category + "/" + cell.label);
  }
  classify::RuleClassifier rule;
  const auto r = classify::evaluate(rule, ds);
  c.expect(r.macro_mentioned.precision && *r.macro_mentioned.precision >= 0.75, "rule macro precision");
  c.expect(r.macro_mentioned.recall && *r.macro_mentioned.recall >= 0.75, "rule macro recall");
}

std::vector<classify::Values> all_settings() {
  std::vector<classify::Values> out = {{}};
  for (const auto& cat : classify::schema().categories) {
    std::vector<classify::Values> next;
    for (const auto& v : out)
      for (const auto& l : cat.labels) {
        auto w = v;
        w[cat.key] = l;
        next.push_back(std::move(w));
      }
    out = std::move(next);
  }
  return out;
}

moderate::ModerationSettings confirmed(const classify::Values& v, const classify::Values& o = {}) {
  auto s = moderate::effective_settings(v, o, "c1");
  s.confirmed = true;
  return s;
}

void moderation_checks(Ctx& c) {
  using moderate::RequestKind;
  using moderate::Verdict;
  const RequestKind kinds[] = {RequestKind::Learning, RequestKind::Assignment, RequestKind::Assessment,
                               RequestKind::Research};
  const char* uses[] = {"learning_use", "assignment_use", "assessment_use", "research_use"};
  const std::vector<moderate::Similarity> sims = {{}, {0.9, std::nullopt}, {std::nullopt, 0.9}, {0.5, 0.5}};
  const auto settings = all_settings();
  c.expect(settings.size() == 4860, "legal settings count");
  for (const auto& v : settings) {
    const auto s = confirmed(v);
    for (auto kind : kinds) {
      for (const auto& sim : sims) {
        const moderate::TutorRequest req{"c1", kind, "question"};
        const auto d = moderate::decide(s, req, sim);
        c.expect(!d.rationale.empty() && !d.matched_category.empty(), "incomplete decision");
        for (const char* u : uses) {
          if (v.at(u) != "Allowed") continue;
          auto stricter = v;
          stricter[u] = "NotAllowed";
          const auto d2 = moderate::decide(confirmed(stricter), req, sim);
          c.expect(static_cast<int>(d2.verdict) <= static_cast<int>(d.verdict), "monotonicity");
        }
      }
    }
  }

  auto base = classify::absent_values();
  auto v = base;
  v["assignment_use"] = "NotAllowed";
  c.expect(moderate::decide(confirmed(v), {"c1", RequestKind::Assignment, "Solve problem 3"}).verdict ==
               Verdict::ReferencesOnly,
           "references-only redirect");
  v = base;
  v["learning_use"] = "Allowed";
  const auto cite = moderate::decide(confirmed(v, {{"citation", "Required"}}), {"c1", RequestKind::Learning, "Explain"});
  c.expect(cite.verdict == Verdict::Allow &&
               cite.obligations == std::vector<moderate::Obligation>{moderate::Obligation::CitationNotice},
           "citation override");
  v["assignment_use"] = "NotAllowed";
  c.expect(moderate::decide(confirmed(v), {"c1", RequestKind::Learning, "Explain"}, {0.92, std::nullopt}).verdict ==
               Verdict::ReferencesOnly,
           "similarity escalation");
}

void killed_writer(Ctx& c) {
  testing::TempDir tmp;
  auto v = classify::absent_values();
  v["learning_use"] = "Allowed";
  moderate::SettingsStore(tmp.path()).put("k", v, {}, true, std::nullopt);
  for (int round = 0; round < 5; ++round) {
    const pid_t pid = fork();
    if (pid < 0) {
      c.expect(false, "fork failed");
      return;
    }
    if (pid == 0) {
      moderate::SettingsStore store(tmp.path());
      for (long long ver = store.get("k").version;; ++ver)
        store.put("k", v, {{"citation", ver % 2 ? "Required" : "NotRequired"}}, true, ver);
    }
    usleep(20000 + round * 7000);
    kill(pid, SIGKILL);
    int status = 0;
    waitpid(pid, &status, 0);
    try {
      const auto s = moderate::settings_from_json(
          json::parse(read_file(moderate::SettingsStore(tmp.path()).path_for("k"))));
      c.expect(s.effective().size() == 8, "settings incomplete after kill");
    } catch (const std::exception& e) {
      c.expect(false, std::string("settings unreadable after kill: ") + e.what());
    }
  }
}

void service_contract(Ctx& c) {
  killed_writer(c);

  testing::TempDir tmp;
  for (const char* f : {"univ_a.json", "planted_corpus.json"}) {
    const auto src = testing::fixture(f);
    corpus::save_corpus(corpus::load_corpus(src), tmp / f);
    c.expect(read_file(tmp / f) == corpus::canonical_dump(json::parse(read_file(src))),
             std::string("corpus round trip ") + f);
  }

  service::ServerConfig cfg;
  cfg.port = 0;
  cfg.data_dir = tmp / "data";
  cfg.corpus_dir = tmp.path();
  service::Server server(cfg);
  const int port = server.bind();
  std::thread t([&] { server.listen(); });
  server.wait_until_ready();
  httplib::Client cli("127.0.0.1", port);
  cli.set_read_timeout(60, 0);

  auto status = [&](const httplib::Result& r, int want, const std::string& what) {
    c.expect(r && r->status == want, what + " status " + (r ? std::to_string(r->status) : "none"));
    return r ? json::parse(r->body, nullptr, false) : json();
  };
  const std::string learning_only =
      "Students may use generative AI tools for learning, but not for assignments and assessments. "
      "Please contact the instructor with any questions.";

  c.expect(status(cli.Get("/schema"), 200, "schema")["categories"].size() == 8, "schema categories");
  const auto cls = status(cli.Post("/classify", json{{"text", learning_only}}.dump(), "application/json"), 200, "classify");
  c.expect(cls["values"]["assignment_use"] == "NotAllowed" && cls["values"]["authority"] == "Instructor",
           "classify values");
  status(cli.Post("/classify", R"({"text":""})", "application/json"), 400, "empty text");

  json put = {{"values", cls["values"]}, {"overrides", {{"citation", "Required"}}}, {"confirmed", true}};
  status(cli.Put("/classes/cs1/settings", put.dump(), "application/json"), 200, "settings put");
  status(cli.Put("/classes/cs1/settings", {{"If-Match", "\"0\""}}, put.dump(), "application/json"), 409,
         "stale write");
  const auto got = status(cli.Get("/classes/cs1/settings"), 200, "settings get");
  c.expect(got["effective"]["citation"]["provenance"] == "user", "override provenance");
  const auto d = status(cli.Post("/classes/cs1/moderate", json{{"kind", "assignment"}, {"question", "Do Q3"}}.dump(),
                                 "application/json"),
                        200, "moderate");
  c.expect(d["verdict"] == "ReferencesOnly", "moderation verdict");
  const auto err = status(cli.Get("/classes/none/settings"), 404, "unknown class");
  c.expect(err["error"]["code"] == "not_found", "error body");

  const auto job = status(cli.Post("/jobs/discover",
                                   json{{"corpus_ref", "planted_corpus"},
                                        {"config", json::parse(read_file(testing::fixture("best.json")))}}
                                       .dump(),
                                   "application/json"),
                          202, "discover submit");
  json rec;
  for (int i = 0; i < 1200; ++i) {
    rec = status(cli.Get("/jobs/" + job.value("job_id", std::string("x"))), 200, "job poll");
    if (rec["status"] == "done" || rec["status"] == "failed") break;
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  c.expect(rec["status"] == "done", "discover job did not finish");

  server.stop();
  t.join();
}

struct Criterion {
  const char* name;
  double budget_s;  // 0 means no runtime bound
  std::function<void(Ctx&)> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"ctfidf-oracle", 5, ctfidf_oracle},
      {"coherence-cv-oracle", 0, coherence_oracle},
      {"kmeans-exhaustive", 10, kmeans_oracle},
      {"hdbscan-oracle", 10, hdbscan_oracle},
      {"umap-determinism-separation", 30, umap_checks},
      {"sweep-planted-resumable", 120, sweep_checks},
      {"classification-evaluation", 0, classification_checks},
      {"moderation-decision-table", 5, moderation_checks},
      {"service-contract", 0, service_contract},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Ctx ctx;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      cr.run(ctx);
    } catch (const std::exception& e) {
      ctx.failures.push_back(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (cr.budget_s > 0 && secs > cr.budget_s) {
      std::ostringstream msg;
      msg << "runtime over " << cr.budget_s << " s";
      ctx.failures.push_back(msg.str());
    }
    const bool ok = ctx.failures.empty();
    if (!ok) ++failed;
    std::printf("%s %-30s %8.2fs  checks=%lld%s%s\n", ok ? "PASS" : "FAIL", cr.name, secs, ctx.checks,
                ok ? "" : "  ", ok ? "" : ctx.failures.front().c_str());
    for (std::size_t i = 1; i < ctx.failures.size(); ++i) std::printf("       %s\n", ctx.failures[i].c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
