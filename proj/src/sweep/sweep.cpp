#include "policyforge/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "policyforge/csv.hpp"
#include "policyforge/fileio.hpp"
#include "policyforge/hash.hpp"

namespace policyforge::sweep {

using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string nn_string(const std::optional<int>& nn) { return nn ? std::to_string(*nn) : "none"; }

template <class T>
void require_nonempty(const std::vector<T>& v, const char* what) {
  if (v.empty()) throw ConfigError(std::string("sweep plan needs at least one ") + what);
}

}  // namespace

void validate(const SweepPlan& p) {
  require_nonempty(p.embeddings, "embedding");
  require_nonempty(p.n_neighbors, "n_neighbors value");
  require_nonempty(p.clusters, "cluster spec");
  require_nonempty(p.min_df, "min_df value");
  require_nonempty(p.phases, "phase");
  require_nonempty(p.weightings, "weighting");
  for (const auto& e : p.embeddings) embed::validate(e);
  for (int nn : p.n_neighbors) {
    if (nn < 2) throw ConfigError("n_neighbors values must be >= 2");
  }
  std::vector<cluster::Algorithm> seen;
  for (const auto& c : p.clusters) {
    require_nonempty(c.values, "cluster parameter value");
    if (std::find(seen.begin(), seen.end(), c.algorithm) != seen.end()) {
      throw ConfigError("each clustering algorithm may appear once in a sweep plan");
    }
    seen.push_back(c.algorithm);
    for (int v : c.values) {
      if (v < 1 || (c.algorithm == cluster::Algorithm::Hdbscan && v < 2)) {
        throw ConfigError("cluster parameter values must be positive (min_cluster_size >= 2)");
      }
    }
  }
  for (int m : p.min_df) {
    if (m < 1) throw ConfigError("min_df values must be >= 1");
  }
  if (p.workers < 1) throw ConfigError("workers must be >= 1");
  coherence::validate(p.coherence);
  std::vector<std::string> labels;
  for (const auto& e : p.embeddings) labels.push_back(embed::label(e));
  std::sort(labels.begin(), labels.end());
  if (std::adjacent_find(labels.begin(), labels.end()) != labels.end()) {
    throw ConfigError("embedding configs must have distinct labels");
  }
}

SweepPlan plan_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("sweep plan must be an object");
  SweepPlan p;
  try {
    for (const auto& e : j.at("embeddings")) p.embeddings.push_back(embed::config_from_json(e));
    p.n_neighbors = j.at("n_neighbors").get<std::vector<int>>();
    for (const auto& c : j.at("clusters")) {
      ClusterSweep cs;
      cs.algorithm = cluster::algorithm_from_string(c.at("algorithm").get<std::string>());
      cs.values = c.at("values").get<std::vector<int>>();
      if (c.contains("min_samples")) cs.min_samples = c.at("min_samples").get<int>();
      p.clusters.push_back(std::move(cs));
    }
    p.min_df = j.value("min_df", std::vector<int>{1});
    for (const auto& s : j.value("phases", std::vector<std::string>{"before"})) {
      p.phases.push_back(topics::phase_from_string(s));
    }
    for (const auto& s : j.value("weightings", std::vector<std::string>{"ctfidf"})) {
      p.weightings.push_back(topics::weighting_from_string(s));
    }
    p.seed = j.value("seed", p.seed);
    p.skip_degrading_steps = j.value("skip_degrading_steps", p.skip_degrading_steps);
    if (j.contains("umap")) p.umap = pipeline::umap_from_json(j.at("umap"));
    if (j.contains("coherence")) {
      const auto& co = j.at("coherence");
      p.coherence.window_size = co.value("window_size", p.coherence.window_size);
      p.coherence.top_n = co.value("top_n", p.coherence.top_n);
      p.coherence.epsilon = co.value("epsilon", p.coherence.epsilon);
    }
    p.workers = j.value("workers", p.workers);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad sweep plan: ") + e.what());
  }
  validate(p);
  return p;
}

json to_json(const SweepPlan& p) {
  json j;
  j["embeddings"] = json::array();
  for (const auto& e : p.embeddings) j["embeddings"].push_back(embed::to_json(e));
  j["n_neighbors"] = p.n_neighbors;
  j["clusters"] = json::array();
  for (const auto& c : p.clusters) {
    json cj = {{"algorithm", std::string(cluster::to_string(c.algorithm))}, {"values", c.values}};
    if (c.min_samples) cj["min_samples"] = *c.min_samples;
    j["clusters"].push_back(cj);
  }
  j["min_df"] = p.min_df;
  j["phases"] = json::array();
  for (auto ph : p.phases) j["phases"].push_back(std::string(topics::to_string(ph)));
  j["weightings"] = json::array();
  for (auto w : p.weightings) j["weightings"].push_back(std::string(topics::to_string(w)));
  j["seed"] = p.seed;
  j["skip_degrading_steps"] = p.skip_degrading_steps;
  j["umap"] = pipeline::umap_to_json(p.umap);
  j["coherence"] = {{"window_size", p.coherence.window_size},
                    {"top_n", p.coherence.top_n},
                    {"epsilon", p.coherence.epsilon}};
  j["workers"] = p.workers;
  return j;
}

SweepPlan load_plan(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return plan_from_json(j);
}

std::string fingerprint(const SweepPlan& plan, const RowConfig& r) {
  std::string s = "emb=" + embed::label(plan.embeddings.at(r.embedding));
  s += "|nn=" + nn_string(r.n_neighbors);
  s += "|alg=" + std::string(cluster::to_string(r.cluster.algorithm));
  s += r.cluster.algorithm == cluster::Algorithm::KMeans ? "|k=" : "|mcs=";
  s += std::to_string(r.cluster.value);
  if (r.cluster.min_samples) s += "|ms=" + std::to_string(*r.cluster.min_samples);
  s += "|min_df=" + std::to_string(r.min_df);
  s += "|phase=" + std::string(topics::to_string(r.phase));
  s += "|w=" + std::string(topics::to_string(r.weighting));
  return s;
}

pipeline::DiscoverConfig discover_config(const SweepPlan& plan, const RowConfig& r) {
  pipeline::DiscoverConfig c;
  c.embedding = plan.embeddings.at(r.embedding);
  if (r.n_neighbors) {
    c.umap = plan.umap;
    c.umap->n_neighbors = *r.n_neighbors;
    c.umap->seed = plan.seed;
  } else {
    c.umap.reset();
  }
  c.cluster = r.cluster;
  c.min_df = r.min_df;
  c.phase = r.phase;
  c.weighting = r.weighting;
  c.coherence = plan.coherence;
  c.seed = plan.seed;
  return c;
}

bool SweepRow::same_outcome(const SweepRow& o) const {
  const bool coh_equal =
      (std::isnan(coherence) && std::isnan(o.coherence)) || coherence == o.coherence;
  return fingerprint == o.fingerprint && embedding == o.embedding && n_neighbors == o.n_neighbors &&
         algorithm == o.algorithm && cluster_value == o.cluster_value && min_df == o.min_df &&
         phase == o.phase && weighting == o.weighting && coh_equal && n_topics == o.n_topics &&
         error == o.error;
}

const SweepRow* SweepResult::find(const std::string& fp) const {
  auto it = std::lower_bound(rows.begin(), rows.end(), fp,
                             [](const SweepRow& r, const std::string& key) { return r.fingerprint < key; });
  return it != rows.end() && it->fingerprint == fp ? &*it : nullptr;
}

bool SweepResult::same_outcome(const SweepResult& o) const {
  if (best != o.best || complete != o.complete || rows.size() != o.rows.size()) return false;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].same_outcome(o.rows[i])) return false;
  }
  if (curves.size() != o.curves.size()) return false;
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& a = curves[i];
    const auto& b = o.curves[i];
    if (a.param != b.param || a.embedding != b.embedding || a.x != b.x || a.y.size() != b.y.size()) {
      return false;
    }
    for (std::size_t t = 0; t < a.y.size(); ++t) {
      if (!(a.y[t] == b.y[t] || (std::isnan(a.y[t]) && std::isnan(b.y[t])))) return false;
    }
  }
  if (choices.size() != o.choices.size()) return false;
  for (std::size_t i = 0; i < choices.size(); ++i) {
    const auto& a = choices[i];
    const auto& b = o.choices[i];
    if (a.embedding != b.embedding || a.n_neighbors != b.n_neighbors ||
        a.reduction_ignored != b.reduction_ignored || a.cluster.algorithm != b.cluster.algorithm ||
        a.cluster.value != b.cluster.value || a.min_df != b.min_df || a.phase != b.phase ||
        a.weighting != b.weighting || a.best_fingerprint != b.best_fingerprint) {
      return false;
    }
  }
  return true;
}

namespace {

json row_to_json(const SweepRow& r) {
  return {{"fingerprint", r.fingerprint},
          {"embedding", r.embedding},
          {"n_neighbors", r.n_neighbors ? json(*r.n_neighbors) : json(nullptr)},
          {"algorithm", std::string(cluster::to_string(r.algorithm))},
          {"cluster_value", r.cluster_value},
          {"min_df", r.min_df},
          {"phase", std::string(topics::to_string(r.phase))},
          {"weighting", std::string(topics::to_string(r.weighting))},
          {"coherence", std::isnan(r.coherence) ? json(nullptr) : json(r.coherence)},
          {"n_topics", r.n_topics},
          {"wall_ms", r.wall_ms},
          {"error", r.error}};
}

SweepRow row_from_json(const json& j) {
  SweepRow r;
  r.fingerprint = j.at("fingerprint").get<std::string>();
  r.embedding = j.at("embedding").get<std::string>();
  if (!j.at("n_neighbors").is_null()) r.n_neighbors = j.at("n_neighbors").get<int>();
  r.algorithm = cluster::algorithm_from_string(j.at("algorithm").get<std::string>());
  r.cluster_value = j.at("cluster_value").get<int>();
  r.min_df = j.at("min_df").get<int>();
  r.phase = topics::phase_from_string(j.at("phase").get<std::string>());
  r.weighting = topics::weighting_from_string(j.at("weighting").get<std::string>());
  r.coherence = j.at("coherence").is_null() ? std::nan("") : j.at("coherence").get<double>();
  r.n_topics = j.at("n_topics").get<int>();
  r.wall_ms = j.at("wall_ms").get<long long>();
  r.error = j.at("error").get<std::string>();
  return r;
}

// Everything besides the row itself that influences a row's outcome.
std::string context_key(const SweepPlan& plan, const pipeline::PreparedCorpus& corpus) {
  auto umap = pipeline::umap_to_json(plan.umap);
  umap.erase("n_neighbors");
  umap.erase("seed");
  const json ctx = {{"seed", plan.seed},
                    {"umap", umap},
                    {"coherence",
                     {plan.coherence.window_size, plan.coherence.top_n, plan.coherence.epsilon}}};
  std::uint64_t h = stable_hash64(ctx.dump());
  for (std::size_t i = 0; i < corpus.texts.size(); ++i) {
    h = stable_hash64(corpus.segment_ids[i], h);
    h = stable_hash64(corpus.texts[i], h);
  }
  return hex64(h);
}

class Runner {
 public:
  Runner(const SweepPlan& plan, const pipeline::PreparedCorpus& corpus, const SweepOptions& options,
         pipeline::FeatureMemo& memo)
      : plan_(plan), corpus_(corpus), options_(options), memo_(memo) {
    if (options_.journal) load_journal();
  }

  bool interrupted() const { return interrupted_; }

  // Evaluates every config not yet known. Returns false when the new-row
  // budget ran out before all of them were done.
  bool evaluate(const std::vector<RowConfig>& configs) {
    std::vector<RowConfig> pending;
    std::vector<std::string> seen;
    for (const auto& c : configs) {
      const auto fp = fingerprint(plan_, c);
      requested_.insert(fp);
      if (rows_.count(fp) || std::find(seen.begin(), seen.end(), fp) != seen.end()) continue;
      seen.push_back(fp);
      pending.push_back(c);
    }
    if (options_.max_new_rows) {
      const std::size_t budget = *options_.max_new_rows > new_rows_ ? *options_.max_new_rows - new_rows_ : 0;
      if (pending.size() > budget) {
        pending.resize(budget);
        interrupted_ = true;
      }
    }
    std::atomic<std::size_t> next{0};
    auto work = [&] {
      for (std::size_t i = next++; i < pending.size(); i = next++) {
        SweepRow row = compute(pending[i]);
        std::lock_guard lock(mutex_);
        if (options_.journal) append_line(*options_.journal, row_to_json(row).dump());
        rows_[row.fingerprint] = std::move(row);
        ++new_rows_;
      }
    };
    const std::size_t n_threads =
        std::min<std::size_t>(static_cast<std::size_t>(plan_.workers), pending.size());
    std::vector<std::thread> threads;
    for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(work);
    if (n_threads > 0) work();
    for (auto& t : threads) t.join();
    return !interrupted_;
  }

  const SweepRow* row(const RowConfig& c) const {
    auto it = rows_.find(fingerprint(plan_, c));
    return it == rows_.end() ? nullptr : &it->second;
  }

  std::vector<SweepRow> rows() const {
    std::vector<SweepRow> out;
    for (const auto& [fp, r] : rows_) {
      if (requested_.count(fp)) out.push_back(r);
    }
    return out;
  }

 private:
  SweepRow compute(const RowConfig& c) const {
    SweepRow r;
    r.fingerprint = fingerprint(plan_, c);
    r.embedding = embed::label(plan_.embeddings[c.embedding]);
    r.n_neighbors = c.n_neighbors;
    r.algorithm = c.cluster.algorithm;
    r.cluster_value = c.cluster.value;
    r.min_df = c.min_df;
    r.phase = c.phase;
    r.weighting = c.weighting;
    const auto start = std::chrono::steady_clock::now();
    try {
      const auto model = pipeline::discover(corpus_, discover_config(plan_, c), &memo_);
      r.coherence = model.coherence.value_or(std::nan(""));
      r.n_topics = model.assignment.k;
    } catch (const Error& e) {
      if (e.error_class() != ErrorClass::Validation) throw;
      r.coherence = std::nan("");
      r.error = e.kind() + ": " + e.what();
    }
    r.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now() - start)
                    .count();
    return r;
  }

  void load_journal() {
    const auto& path = *options_.journal;
    const std::string header = json{{"sweep_journal", 1}, {"context", context_key(plan_, corpus_)}}.dump();
    if (!std::filesystem::exists(path) || std::filesystem::file_size(path) == 0) {
      if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
      append_line(path, header);
      return;
    }
    std::istringstream in(read_file(path));
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error&) {
        continue;  // a torn final line from an interrupted run
      }
      if (first) {
        if (j.dump() != header) {
          throw ConfigError(path.string() + " was written for a different corpus or plan settings");
        }
        first = false;
        continue;
      }
      auto row = row_from_json(j);
      rows_[row.fingerprint] = std::move(row);
    }
  }

  const SweepPlan& plan_;
  const pipeline::PreparedCorpus& corpus_;
  const SweepOptions& options_;
  pipeline::FeatureMemo& memo_;
  std::map<std::string, SweepRow> rows_;
  std::set<std::string> requested_;
  std::size_t new_rows_ = 0;
  bool interrupted_ = false;
  std::mutex mutex_;
};

// Index of the best successful row among configs, first in plan order on
// ties; nullopt when all failed.
std::optional<std::size_t> stage_argmax(const Runner& runner, const std::vector<RowConfig>& configs) {
  std::optional<std::size_t> best;
  double best_value = 0.0;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto* r = runner.row(configs[i]);
    if (!r || !r->ok()) continue;
    if (!best || r->coherence > best_value) {
      best = i;
      best_value = r->coherence;
    }
  }
  return best;
}

Curve make_curve(const Runner& runner, std::string param, const std::string& embedding,
                 const std::vector<RowConfig>& configs, const std::vector<std::string>& xs) {
  Curve c{std::move(param), embedding, xs, {}};
  for (const auto& cfg : configs) {
    const auto* r = runner.row(cfg);
    c.y.push_back(r && r->ok() ? r->coherence : std::nan(""));
  }
  return c;
}

}  // namespace

SweepResult run_sweep(const SweepPlan& plan, const pipeline::PreparedCorpus& corpus,
                      const SweepOptions& options, pipeline::FeatureMemo* memo) {
  validate(plan);
  std::size_t max_mcs = 0;
  for (const auto& c : plan.clusters) {
    if (c.algorithm == cluster::Algorithm::Hdbscan) {
      max_mcs = std::max<std::size_t>(max_mcs, static_cast<std::size_t>(*std::max_element(c.values.begin(), c.values.end())));
    }
  }
  if (corpus.docs.size() < 2 || corpus.docs.size() < 2 * max_mcs) {
    throw pipeline::CorpusTooSmall("corpus has " + std::to_string(corpus.docs.size()) +
                                   " segments; the plan needs at least " +
                                   std::to_string(std::max<std::size_t>(2, 2 * max_mcs)));
  }
  pipeline::FeatureMemo local;
  if (!memo) memo = &local;
  Runner runner(plan, corpus, options, *memo);
  SweepResult result;

  for (std::size_t e = 0; e < plan.embeddings.size() && !runner.interrupted(); ++e) {
    const std::string emb = embed::label(plan.embeddings[e]);
    RowConfig base;
    base.embedding = e;
    base.n_neighbors = plan.n_neighbors.front();
    base.cluster = {plan.clusters.front().algorithm, plan.clusters.front().values.front(),
                    plan.clusters.front().min_samples};
    base.min_df = plan.min_df.front();
    base.phase = plan.phases.front();
    base.weighting = plan.weightings.front();
    StageChoice choice;
    choice.embedding = emb;

    // Stage 1: neighbourhood size, against a no-reduction baseline.
    std::vector<RowConfig> nn_rows;
    std::vector<std::string> nn_x;
    for (int nn : plan.n_neighbors) {
      auto c = base;
      c.n_neighbors = nn;
      nn_rows.push_back(c);
      nn_x.push_back(std::to_string(nn));
    }
    auto baseline = base;
    baseline.n_neighbors.reset();
    auto stage = nn_rows;
    if (plan.skip_degrading_steps) stage.push_back(baseline);
    if (!runner.evaluate(stage)) break;
    result.curves.push_back(make_curve(runner, "n_neighbors", emb, nn_rows, nn_x));
    if (auto best = stage_argmax(runner, nn_rows)) base.n_neighbors = nn_rows[*best].n_neighbors;
    if (plan.skip_degrading_steps) {
      const auto* b = runner.row(baseline);
      const auto* r = runner.row(base);
      if (b && b->ok() && (!r || !r->ok() || b->coherence > r->coherence)) {
        base.n_neighbors.reset();
        choice.reduction_ignored = true;
      }
    }
    choice.n_neighbors = base.n_neighbors;

    // Stage 2: clustering algorithm and its parameter.
    std::vector<RowConfig> cl_rows;
    for (const auto& spec : plan.clusters) {
      for (int v : spec.values) {
        auto c = base;
        c.cluster = {spec.algorithm, v, spec.min_samples};
        cl_rows.push_back(c);
      }
    }
    if (!runner.evaluate(cl_rows)) break;
    std::size_t offset = 0;
    for (const auto& spec : plan.clusters) {
      std::vector<RowConfig> part(cl_rows.begin() + offset, cl_rows.begin() + offset + spec.values.size());
      std::vector<std::string> xs;
      for (int v : spec.values) xs.push_back(std::to_string(v));
      result.curves.push_back(make_curve(runner, pipeline::cluster_param_name(spec.algorithm), emb, part, xs));
      offset += spec.values.size();
    }
    if (auto best = stage_argmax(runner, cl_rows)) base.cluster = cl_rows[*best].cluster;
    choice.cluster = base.cluster;

    // Stages 3-5: vectorization.
    std::vector<RowConfig> df_rows;
    std::vector<std::string> df_x;
    for (int m : plan.min_df) {
      auto c = base;
      c.min_df = m;
      df_rows.push_back(c);
      df_x.push_back(std::to_string(m));
    }
    if (!runner.evaluate(df_rows)) break;
    result.curves.push_back(make_curve(runner, "min_df", emb, df_rows, df_x));
    if (auto best = stage_argmax(runner, df_rows)) base.min_df = df_rows[*best].min_df;
    choice.min_df = base.min_df;

    std::vector<RowConfig> ph_rows;
    std::vector<std::string> ph_x;
    for (auto ph : plan.phases) {
      auto c = base;
      c.phase = ph;
      ph_rows.push_back(c);
      ph_x.emplace_back(topics::to_string(ph));
    }
    if (!runner.evaluate(ph_rows)) break;
    result.curves.push_back(make_curve(runner, "phase", emb, ph_rows, ph_x));
    if (auto best = stage_argmax(runner, ph_rows)) base.phase = ph_rows[*best].phase;
    choice.phase = base.phase;

    std::vector<RowConfig> w_rows;
    std::vector<std::string> w_x;
    for (auto w : plan.weightings) {
      auto c = base;
      c.weighting = w;
      w_rows.push_back(c);
      w_x.emplace_back(topics::to_string(w));
    }
    if (!runner.evaluate(w_rows)) break;
    result.curves.push_back(make_curve(runner, "weighting", emb, w_rows, w_x));
    if (auto best = stage_argmax(runner, w_rows)) base.weighting = w_rows[*best].weighting;
    choice.weighting = base.weighting;
    choice.best_fingerprint = fingerprint(plan, base);
    result.choices.push_back(choice);
  }

  result.complete = !runner.interrupted();
  result.rows = runner.rows();
  // Ties go to a stage choice (in embedding order), then the smallest fingerprint.
  std::map<std::string, std::size_t> choice_rank;
  for (std::size_t i = 0; i < result.choices.size(); ++i) choice_rank.emplace(result.choices[i].best_fingerprint, i);
  auto rank = [&](const SweepRow& r) {
    auto it = choice_rank.find(r.fingerprint);
    return it == choice_rank.end() ? result.choices.size() : it->second;
  };
  const SweepRow* best = nullptr;
  for (const auto& r : result.rows) {  // rows are fingerprint-sorted
    if (!r.ok()) continue;
    if (!best || r.coherence > best->coherence || (r.coherence == best->coherence && rank(r) < rank(*best))) {
      best = &r;
    }
  }
  if (best) result.best = best->fingerprint;
  return result;
}

SweepResult run_sweep(const SweepPlan& plan, const corpus::PolicyCorpus& corpus,
                      const SweepOptions& options) {
  return run_sweep(plan, pipeline::prepare(corpus), options);
}

namespace {

const std::vector<std::string> kRowHeader = {"fingerprint", "embedding", "n_neighbors", "algorithm",
                                             "cluster_value", "min_df", "phase", "weighting",
                                             "coherence", "n_topics", "wall_ms", "error"};

std::string sanitize(std::string s) {
  for (auto& ch : s) {
    const bool keep = std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.';
    if (!keep) ch = '_';
  }
  return s;
}

}  // namespace

std::string rows_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  csv::write_row(out, kRowHeader);
  for (const auto& r : rows) {
    csv::write_row(out, {r.fingerprint, r.embedding, nn_string(r.n_neighbors),
                         std::string(cluster::to_string(r.algorithm)), std::to_string(r.cluster_value),
                         std::to_string(r.min_df), std::string(topics::to_string(r.phase)),
                         std::string(topics::to_string(r.weighting)), fmt_double(r.coherence),
                         std::to_string(r.n_topics), std::to_string(r.wall_ms), r.error});
  }
  return out.str();
}

std::vector<SweepRow> parse_rows_csv(const std::string& text) {
  const auto table = csv::parse(text);
  if (table.empty() || table.front() != kRowHeader) throw ConfigError("not a sweep rows file");
  std::vector<SweepRow> rows;
  for (std::size_t i = 1; i < table.size(); ++i) {
    const auto& f = table[i];
    if (f.size() != kRowHeader.size()) {
      throw ConfigError("rows file line " + std::to_string(i + 1) + " has " + std::to_string(f.size()) + " fields");
    }
    SweepRow r;
    try {
      r.fingerprint = f[0];
      r.embedding = f[1];
      if (f[2] != "none") r.n_neighbors = std::stoi(f[2]);
      r.algorithm = cluster::algorithm_from_string(f[3]);
      r.cluster_value = std::stoi(f[4]);
      r.min_df = std::stoi(f[5]);
      r.phase = topics::phase_from_string(f[6]);
      r.weighting = topics::weighting_from_string(f[7]);
      r.coherence = std::strtod(f[8].c_str(), nullptr);
      r.n_topics = std::stoi(f[9]);
      r.wall_ms = std::stoll(f[10]);
      r.error = f[11];
    } catch (const std::logic_error&) {
      throw ConfigError("rows file line " + std::to_string(i + 1) + " is malformed");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string curve_file_name(const Curve& c) {
  return "curve_" + sanitize(c.param) + "_" + sanitize(c.embedding) + ".csv";
}

void emit_report(const SweepResult& result, const std::filesystem::path& dir) {
  if (result.rows.empty()) throw ConfigError("nothing to report: the sweep has no rows");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  write_file_atomic(dir / "rows.csv", rows_csv(result.rows));
  for (const auto& c : result.curves) {
    std::ostringstream out;
    csv::write_row(out, {c.param, "coherence"});
    for (std::size_t i = 0; i < c.x.size(); ++i) csv::write_row(out, {c.x[i], fmt_double(c.y[i])});
    write_file_atomic(dir / curve_file_name(c), out.str());
  }

  std::ostringstream s;
  const auto* best = result.find(result.best);
  if (best) {
    s << "best: " << best->fingerprint << "\n";
    s << "coherence: " << fmt_double(best->coherence) << "\n";
    s << "n_topics: " << best->n_topics << "\n";
  } else {
    s << "best: none (every row failed)\n";
  }
  if (!result.complete) s << "status: incomplete (rerun to resume)\n";
  s << "rows: " << result.rows.size() << "\n\n";
  s << "per-embedding coherence:\n";
  std::map<std::string, std::pair<double, double>> ranges;
  std::map<std::string, std::size_t> failures;
  for (const auto& r : result.rows) {
    if (!r.ok()) {
      ++failures[r.embedding];
      continue;
    }
    auto [it, fresh] = ranges.try_emplace(r.embedding, r.coherence, r.coherence);
    if (!fresh) {
      it->second.first = std::min(it->second.first, r.coherence);
      it->second.second = std::max(it->second.second, r.coherence);
    }
  }
  for (const auto& [emb, mm] : ranges) {
    s << "  " << emb << ": min " << fmt_double(mm.first) << " max " << fmt_double(mm.second);
    if (failures.count(emb)) s << " (" << failures[emb] << " failed)";
    s << "\n";
  }
  for (const auto& [emb, n] : failures) {
    if (!ranges.count(emb)) s << "  " << emb << ": all " << n << " rows failed\n";
  }
  s << "\nstage choices:\n";
  for (const auto& c : result.choices) {
    s << "  " << c.embedding << ": n_neighbors=" << nn_string(c.n_neighbors)
      << (c.reduction_ignored ? " (reduction ignored: below no-reduction baseline)" : "") << ", "
      << cluster::to_string(c.cluster.algorithm) << " " << pipeline::cluster_param_name(c.cluster.algorithm)
      << "=" << c.cluster.value << ", min_df=" << c.min_df << ", phase=" << topics::to_string(c.phase)
      << ", weighting=" << topics::to_string(c.weighting) << "\n";
  }
  write_file_atomic(dir / "summary.txt", s.str());
}

}  // namespace policyforge::sweep
