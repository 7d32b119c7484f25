#pragma once

#include <filesystem>
#include <memory>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "policyforge/error.hpp"
#include "policyforge/timestamp.hpp"

namespace policyforge::corpus {

POLICYFORGE_DEFINE_ERROR(MalformedCorpus, Validation)
POLICYFORGE_DEFINE_ERROR(UnknownNode, NotFound)

enum class NodeLevel { Institution = 0, College = 1, Department = 2 };

struct PolicyText {
  Timestamp timestamp;
  std::string text;

  friend bool operator==(const PolicyText&, const PolicyText&) = default;
};

// One node of the institution -> college -> department tree.
struct OrgNode {
  std::string id;
  std::string name;
  std::string url;
  Timestamp last_update;
  NodeLevel level = NodeLevel::Institution;
  std::vector<PolicyText> policies;  // ascending by timestamp
  std::vector<OrgNode> children;

  // Layout details needed to write the document back unchanged.
  bool has_policy_key = false;
  bool has_children_key = false;
  nlohmann::json extra = nlohmann::json::object();

  // Latest policy, or nullptr when the node has none.
  const PolicyText* current_policy() const {
    return policies.empty() ? nullptr : &policies.back();
  }
};

struct PolicySegment {
  std::string segment_id;
  std::string source_node_id;
  Timestamp source_timestamp;
  std::string text;
  int ordinal = 0;

  friend bool operator==(const PolicySegment&, const PolicySegment&) = default;
};

struct PolicyCorpus {
  std::vector<OrgNode> institutions;
  std::vector<PolicySegment> segments;  // current policies only
  std::string version;
  nlohmann::json extra = nlohmann::json::object();

  const OrgNode* find(std::string_view node_id) const;
  std::size_t node_count() const;
};

// Parses a document in the institutions/colleges/departments layout.
// Throws MalformedCorpus carrying a JSON-pointer path to the offending value.
PolicyCorpus parse_corpus(const nlohmann::json& doc);
PolicyCorpus load_corpus(const std::filesystem::path& path);

nlohmann::json to_json(const PolicyCorpus& corpus);
// Sorted keys, two-space indentation, trailing newline.
std::string canonical_dump(const nlohmann::json& doc);
void save_corpus(const PolicyCorpus& corpus, const std::filesystem::path& path);

inline constexpr std::string_view kSegmentDelimiter = "\n\n";

struct SegmentOptions {
  // Fragments inside a paragraph with fewer whitespace tokens than this are
  // merged into a neighbour.
  std::size_t min_tokens = 3;
};

// Splits on blank lines and on bullet/`Option N:` line starts.
std::vector<std::string> segment_text(std::string_view text, const SegmentOptions& options = {});

// Pre-order over the tree, then timestamp, then ordinal.
std::vector<PolicySegment> flatten_segments(const PolicyCorpus& corpus,
                                            bool include_history = false);

PolicyCorpus upsert_policy(const PolicyCorpus& corpus, std::string_view node_id,
                           PolicyText policy);

class CorpusStore {
 public:
  virtual ~CorpusStore() = default;
  virtual PolicyCorpus load() const = 0;
  virtual PolicyCorpus upsert(std::string_view node_id, PolicyText policy) = 0;
};

// Canonical document file plus an append-only change log next to it
// (`<path>.changes.jsonl`). Writers hold an exclusive lock.
class FileCorpusStore final : public CorpusStore {
 public:
  explicit FileCorpusStore(std::filesystem::path path) : path_(std::move(path)) {}

  PolicyCorpus load() const override;
  PolicyCorpus upsert(std::string_view node_id, PolicyText policy) override;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path change_log_path() const;

 private:
  std::filesystem::path path_;
};

// Source of freshly collected policy texts for a node. Live scraping is not
// part of this project; NullFetcher is the only shipped implementation.
struct FetchedPolicy {
  std::string node_id;
  PolicyText policy;
};

class PolicyFetcher {
 public:
  virtual ~PolicyFetcher() = default;
  virtual std::vector<FetchedPolicy> fetch(const OrgNode& node) = 0;
};

class NullFetcher final : public PolicyFetcher {
 public:
  std::vector<FetchedPolicy> fetch(const OrgNode&) override { return {}; }
};

// Runs the fetcher over every node and upserts whatever it returns.
PolicyCorpus refresh(CorpusStore& store, PolicyFetcher& fetcher);

}  // namespace policyforge::corpus
