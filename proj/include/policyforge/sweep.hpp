#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "policyforge/pipeline.hpp"

namespace policyforge::sweep {

struct ClusterSweep {
  cluster::Algorithm algorithm = cluster::Algorithm::KMeans;
  std::vector<int> values;
  std::optional<int> min_samples;
};

struct SweepPlan {
  std::vector<embed::EmbeddingConfig> embeddings;
  std::vector<int> n_neighbors;
  std::vector<ClusterSweep> clusters;
  std::vector<int> min_df;
  std::vector<topics::VectorizePhase> phases;
  std::vector<topics::Weighting> weightings;
  std::uint64_t seed = 42;
  bool skip_degrading_steps = true;
  reduce::UmapConfig umap;  // n_neighbors is overridden per row
  coherence::CoherenceConfig coherence;
  int workers = 1;
};

void validate(const SweepPlan& plan);
SweepPlan plan_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SweepPlan& plan);
SweepPlan load_plan(const std::filesystem::path& path);

// One point of the search space.
struct RowConfig {
  std::size_t embedding = 0;             // index into plan.embeddings
  std::optional<int> n_neighbors;        // nullopt: no reduction
  pipeline::ClusterSpec cluster;
  int min_df = 1;
  topics::VectorizePhase phase = topics::VectorizePhase::Before;
  topics::Weighting weighting = topics::Weighting::CTfIdf;
};

// e.g. "emb=local-hash:256:s0|nn=25|alg=kmeans|k=70|min_df=1|phase=before|w=ctfidf".
std::string fingerprint(const SweepPlan& plan, const RowConfig& row);
pipeline::DiscoverConfig discover_config(const SweepPlan& plan, const RowConfig& row);

struct SweepRow {
  std::string fingerprint;
  std::string embedding;
  std::optional<int> n_neighbors;
  cluster::Algorithm algorithm = cluster::Algorithm::KMeans;
  int cluster_value = 0;
  int min_df = 1;
  topics::VectorizePhase phase = topics::VectorizePhase::Before;
  topics::Weighting weighting = topics::Weighting::CTfIdf;
  double coherence = 0.0;  // NaN when the row failed
  int n_topics = 0;
  long long wall_ms = 0;
  std::string error;  // "Kind: message", empty on success

  bool ok() const { return error.empty(); }
  // Field-wise equality that ignores wall_ms and treats NaN == NaN.
  bool same_outcome(const SweepRow& other) const;
};

struct Curve {
  std::string param;
  std::string embedding;
  std::vector<std::string> x;  // plan values in plan order
  std::vector<double> y;       // NaN where the row failed
};

// What each stage settled on for one embedding.
struct StageChoice {
  std::string embedding;
  std::optional<int> n_neighbors;
  bool reduction_ignored = false;
  pipeline::ClusterSpec cluster;
  int min_df = 1;
  topics::VectorizePhase phase = topics::VectorizePhase::Before;
  topics::Weighting weighting = topics::Weighting::CTfIdf;
  std::string best_fingerprint;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // sorted by fingerprint
  std::string best;            // empty when every row failed
  std::vector<Curve> curves;
  std::vector<StageChoice> choices;
  bool complete = true;

  const SweepRow* find(const std::string& fingerprint) const;
  // Equal apart from wall-clock timings.
  bool same_outcome(const SweepResult& other) const;
};

struct SweepOptions {
  // Rows already present here are reused; new rows are appended.
  std::optional<std::filesystem::path> journal;
  // Stop after computing this many new rows (result marked incomplete).
  std::optional<std::size_t> max_new_rows;
};

inline constexpr const char* kJournalName = "sweep_journal.jsonl";

SweepResult run_sweep(const SweepPlan& plan, const pipeline::PreparedCorpus& corpus,
                      const SweepOptions& options = {}, pipeline::FeatureMemo* memo = nullptr);
SweepResult run_sweep(const SweepPlan& plan, const corpus::PolicyCorpus& corpus,
                      const SweepOptions& options = {});

// rows.csv, curve_<param>_<embedding>.csv per curve, summary.txt.
void emit_report(const SweepResult& result, const std::filesystem::path& dir);
std::vector<SweepRow> parse_rows_csv(const std::string& text);
std::string rows_csv(const std::vector<SweepRow>& rows);
std::string curve_file_name(const Curve& curve);

}  // namespace policyforge::sweep
