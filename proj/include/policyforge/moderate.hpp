#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "policyforge/classify.hpp"
#include "policyforge/embed.hpp"
#include "policyforge/error.hpp"
#include "policyforge/timestamp.hpp"

namespace policyforge::moderate {

POLICYFORGE_DEFINE_ERROR(IllegalOverride, Validation)
POLICYFORGE_DEFINE_ERROR(UnconfirmedSettings, Precondition)
POLICYFORGE_DEFINE_ERROR(EmptyAssignmentCorpus, Validation)
POLICYFORGE_DEFINE_ERROR(VersionConflict, Conflict)
POLICYFORGE_DEFINE_ERROR(UnknownClass, NotFound)

enum class Provenance { Classified, User };

struct ModerationSettings {
  std::string class_id;
  classify::Values classified;
  classify::Values overrides;  // only user-set categories
  bool confirmed = false;
  std::optional<Timestamp> confirmed_at;
  long long version = 0;
  std::optional<double> similarity_threshold;  // per-class override

  classify::Values effective() const;
  Provenance provenance(const std::string& category) const;
};

// Throws IllegalOverride for unknown categories or labels. Override labels
// are normalized like classifier output.
ModerationSettings effective_settings(const classify::Values& classification,
                                      const classify::Values& overrides,
                                      std::string class_id = {});

nlohmann::json to_json(const ModerationSettings& s);
ModerationSettings settings_from_json(const nlohmann::json& j);

enum class RequestKind { Learning, Assignment, Assessment, Research };
enum class Verdict { Deny = 0, ReferencesOnly = 1, Allow = 2 };  // ordered by permissiveness
enum class Obligation { CitationNotice, InfoReleaseCaution, ValidationReminder };

std::string_view to_string(RequestKind k);
std::string_view to_string(Verdict v);
std::string_view to_string(Obligation o);
RequestKind kind_from_string(std::string_view s);
std::string category_for(RequestKind k);

struct TutorRequest {
  std::string class_id;
  RequestKind kind = RequestKind::Learning;
  std::string question;
};

struct ModerationPolicy {
  double similarity_threshold = 0.85;
  std::map<RequestKind, Verdict> not_mentioned = {{RequestKind::Learning, Verdict::Allow},
                                                  {RequestKind::Assignment, Verdict::ReferencesOnly},
                                                  {RequestKind::Assessment, Verdict::ReferencesOnly},
                                                  {RequestKind::Research, Verdict::ReferencesOnly}};
  std::map<RequestKind, Verdict> not_allowed = {{RequestKind::Learning, Verdict::Deny},
                                                {RequestKind::Assignment, Verdict::ReferencesOnly},
                                                {RequestKind::Assessment, Verdict::ReferencesOnly},
                                                {RequestKind::Research, Verdict::Deny}};
};

nlohmann::json to_json(const ModerationPolicy& p);
ModerationPolicy policy_from_json(const nlohmann::json& j);

// Similarity of the question to each reference corpus, on the [0, 1] scale.
struct Similarity {
  std::optional<double> assignment;
  std::optional<double> assessment;
};

struct ModerationDecision {
  Verdict verdict = Verdict::Deny;
  std::vector<Obligation> obligations;  // sorted, empty on Deny
  std::string rationale;
  std::string matched_category;
};

nlohmann::json to_json(const ModerationDecision& d);

// A learning question close enough to the assignment (or assessment) corpus
// is also judged under that category's rule and gets the stricter verdict.
ModerationDecision decide(const ModerationSettings& settings, const TutorRequest& request,
                          const Similarity& similarity = {}, const ModerationPolicy& policy = {});

// (1 + max cosine) / 2 between the question and any assignment text.
double assignment_similarity(const std::string& question, const std::vector<std::string>& texts,
                             embed::TextEmbedder& embedder);

// One JSON file per class with atomic replacement and optimistic versions.
class SettingsStore {
 public:
  explicit SettingsStore(std::filesystem::path dir);

  std::optional<ModerationSettings> find(const std::string& class_id) const;
  ModerationSettings get(const std::string& class_id) const;  // UnknownClass
  // expected_version: the version the caller last read (0 or nullopt for a
  // new class). Existing classes require a matching version.
  ModerationSettings put(const std::string& class_id, const classify::Values& classified,
                         const classify::Values& overrides, bool confirm,
                         std::optional<long long> expected_version,
                         std::optional<double> similarity_threshold = std::nullopt);

  // Reference texts for similarity escalation; kind is Assignment or Assessment.
  void put_references(const std::string& class_id, RequestKind kind, const std::vector<std::string>& texts);
  std::vector<std::string> references(const std::string& class_id, RequestKind kind) const;

  std::filesystem::path path_for(const std::string& class_id) const;

 private:
  std::filesystem::path dir_;
  mutable std::mutex mutex_;
};

// Letters, digits, '.', '_' and '-', 1 to 128 characters.
bool valid_class_id(std::string_view id);

}  // namespace policyforge::moderate
