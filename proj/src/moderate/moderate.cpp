#include "policyforge/moderate.hpp"

#include <algorithm>

#include "policyforge/fileio.hpp"
#include "policyforge/matrix.hpp"

namespace policyforge::moderate {

using nlohmann::json;

classify::Values ModerationSettings::effective() const {
  auto v = classified;
  for (const auto& [k, label] : overrides) v[k] = label;
  return v;
}

Provenance ModerationSettings::provenance(const std::string& category) const {
  return overrides.count(category) ? Provenance::User : Provenance::Classified;
}

ModerationSettings effective_settings(const classify::Values& classification,
                                      const classify::Values& overrides, std::string class_id) {
  classify::validate_values(classification);
  ModerationSettings s;
  s.class_id = std::move(class_id);
  s.classified = classification;
  for (const auto& [k, raw] : overrides) {
    const auto* cat = classify::schema().find(k);
    if (!cat) throw IllegalOverride("unknown category '" + k + "'");
    auto label = classify::normalize_label(*cat, raw);
    if (!label) throw IllegalOverride("'" + raw + "' is not a legal label for " + k);
    s.overrides[k] = *label;
  }
  return s;
}

json to_json(const ModerationSettings& s) {
  json values = json::object();
  const auto eff = s.effective();
  for (const auto& c : classify::schema().categories) {
    values[c.key] = {{"value", eff.at(c.key)},
                     {"provenance", s.provenance(c.key) == Provenance::User ? "user" : "classified"}};
  }
  return {{"class_id", s.class_id},
          {"version", s.version},
          {"classified", s.classified},
          {"overrides", s.overrides},
          {"effective", values},
          {"confirmed", s.confirmed},
          {"confirmed_at", s.confirmed_at ? json(s.confirmed_at->str()) : json(nullptr)},
          {"similarity_threshold", s.similarity_threshold ? json(*s.similarity_threshold) : json(nullptr)}};
}

ModerationSettings settings_from_json(const json& j) {
  try {
    auto s = effective_settings(j.at("classified").get<classify::Values>(),
                                j.value("overrides", classify::Values{}), j.at("class_id").get<std::string>());
    s.version = j.at("version").get<long long>();
    s.confirmed = j.value("confirmed", false);
    if (j.contains("confirmed_at") && !j.at("confirmed_at").is_null()) {
      s.confirmed_at = Timestamp::parse(j.at("confirmed_at").get<std::string>());
      if (!s.confirmed_at) throw ConfigError("bad confirmed_at timestamp");
    }
    if (j.contains("similarity_threshold") && !j.at("similarity_threshold").is_null()) {
      s.similarity_threshold = j.at("similarity_threshold").get<double>();
    }
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad settings record: ") + e.what());
  }
}

std::string_view to_string(RequestKind k) {
  switch (k) {
    case RequestKind::Learning: return "learning";
    case RequestKind::Assignment: return "assignment";
    case RequestKind::Assessment: return "assessment";
    case RequestKind::Research: return "research";
  }
  return "learning";
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Deny: return "Deny";
    case Verdict::ReferencesOnly: return "ReferencesOnly";
    case Verdict::Allow: return "Allow";
  }
  return "Deny";
}

std::string_view to_string(Obligation o) {
  switch (o) {
    case Obligation::CitationNotice: return "CitationNotice";
    case Obligation::InfoReleaseCaution: return "InfoReleaseCaution";
    case Obligation::ValidationReminder: return "ValidationReminder";
  }
  return "CitationNotice";
}

RequestKind kind_from_string(std::string_view s) {
  for (auto k : {RequestKind::Learning, RequestKind::Assignment, RequestKind::Assessment, RequestKind::Research}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown request kind '" + std::string(s) + "'");
}

namespace {

Verdict verdict_from_string(std::string_view s) {
  for (auto v : {Verdict::Deny, Verdict::ReferencesOnly, Verdict::Allow}) {
    if (to_string(v) == s) return v;
  }
  throw ConfigError("unknown verdict '" + std::string(s) + "'");
}

json verdict_map(const std::map<RequestKind, Verdict>& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[std::string(to_string(k))] = std::string(to_string(v));
  return j;
}

void read_verdict_map(const json& j, std::map<RequestKind, Verdict>& m) {
  for (const auto& [k, v] : j.items()) m[kind_from_string(k)] = verdict_from_string(v.get<std::string>());
}

}  // namespace

std::string category_for(RequestKind k) { return std::string(to_string(k)) + "_use"; }

json to_json(const ModerationPolicy& p) {
  return {{"similarity_threshold", p.similarity_threshold},
          {"not_mentioned", verdict_map(p.not_mentioned)},
          {"not_allowed", verdict_map(p.not_allowed)}};
}

ModerationPolicy policy_from_json(const json& j) {
  ModerationPolicy p;
  try {
    p.similarity_threshold = j.value("similarity_threshold", p.similarity_threshold);
    if (j.contains("not_mentioned")) read_verdict_map(j.at("not_mentioned"), p.not_mentioned);
    if (j.contains("not_allowed")) read_verdict_map(j.at("not_allowed"), p.not_allowed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad moderation policy: ") + e.what());
  }
  if (!(p.similarity_threshold >= 0.0 && p.similarity_threshold <= 1.0)) {
    throw ConfigError("similarity_threshold must lie in [0, 1]");
  }
  return p;
}

json to_json(const ModerationDecision& d) {
  json obligations = json::array();
  for (auto o : d.obligations) obligations.push_back(std::string(to_string(o)));
  return {{"verdict", std::string(to_string(d.verdict))},
          {"obligations", obligations},
          {"rationale", d.rationale},
          {"matched_category", d.matched_category}};
}

namespace {

struct Ruling {
  Verdict verdict;
  std::string category;
  std::string label;
};

Ruling rule_for(const classify::Values& eff, RequestKind kind, const ModerationPolicy& policy) {
  const auto cat = category_for(kind);
  const auto& label = eff.at(cat);
  Verdict v;
  if (label == "Allowed") {
    v = Verdict::Allow;
  } else if (label == "NotAllowed") {
    v = policy.not_allowed.at(kind);
  } else {
    v = policy.not_mentioned.at(kind);
  }
  return {v, cat, label};
}

}  // namespace

ModerationDecision decide(const ModerationSettings& settings, const TutorRequest& request,
                          const Similarity& similarity, const ModerationPolicy& policy) {
  if (!settings.confirmed) {
    throw UnconfirmedSettings("settings for class '" + settings.class_id + "' are not confirmed");
  }
  if (request.question.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ConfigError("question is empty");
  }
  const auto eff = settings.effective();
  const double threshold = settings.similarity_threshold.value_or(policy.similarity_threshold);
  Ruling r = rule_for(eff, request.kind, policy);
  std::string rationale = r.category + " is " + r.label + " -> " + std::string(to_string(r.verdict));

  if (request.kind == RequestKind::Learning) {
    const std::pair<RequestKind, std::optional<double>> escalations[] = {
        {RequestKind::Assignment, similarity.assignment}, {RequestKind::Assessment, similarity.assessment}};
    for (const auto& [kind, sim] : escalations) {
      if (!sim || *sim < threshold) continue;
      const Ruling other = rule_for(eff, kind, policy);
      rationale += "; question resembles " + std::string(to_string(kind)) + " material (similarity " +
                   std::to_string(*sim) + "), " + other.category + " is " + other.label;
      if (other.verdict < r.verdict) r = other;
    }
  }

  ModerationDecision d;
  d.verdict = r.verdict;
  d.matched_category = r.category;
  d.rationale = rationale;
  if (d.verdict != Verdict::Deny) {
    if (eff.at("citation") == "Required") d.obligations.push_back(Obligation::CitationNotice);
    if (eff.at("info_release") == "Addressed") d.obligations.push_back(Obligation::InfoReleaseCaution);
    if (eff.at("validation") == "Addressed") d.obligations.push_back(Obligation::ValidationReminder);
  }
  return d;
}

double assignment_similarity(const std::string& question, const std::vector<std::string>& texts,
                             embed::TextEmbedder& embedder) {
  if (texts.empty()) throw EmptyAssignmentCorpus("no assignment texts to compare against");
  std::vector<std::string> all = {question};
  all.insert(all.end(), texts.begin(), texts.end());
  const auto vecs = embedder.embed(all);
  double best = -1.0;
  for (std::size_t i = 1; i < vecs.size(); ++i) best = std::max(best, cosine(vecs[0], vecs[i]));
  return std::clamp((1.0 + best) / 2.0, 0.0, 1.0);
}

bool valid_class_id(std::string_view id) {
  if (id.empty() || id.size() > 128 || id == "." || id == "..") return false;
  return std::all_of(id.begin(), id.end(), [](char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '_' || ch == '-';
  });
}

SettingsStore::SettingsStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create settings directory " + dir_.string() + ": " + ec.message());
}

std::filesystem::path SettingsStore::path_for(const std::string& class_id) const {
  if (!valid_class_id(class_id)) throw ConfigError("invalid class id '" + class_id + "'");
  return dir_ / (class_id + ".settings.json");
}

std::optional<ModerationSettings> SettingsStore::find(const std::string& class_id) const {
  const auto path = path_for(class_id);
  std::lock_guard lock(mutex_);
  if (!std::filesystem::exists(path)) return std::nullopt;
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw IoError(path.string() + " is corrupt: " + e.what());
  }
  return settings_from_json(j);
}

ModerationSettings SettingsStore::get(const std::string& class_id) const {
  auto s = find(class_id);
  if (!s) throw UnknownClass("no settings for class '" + class_id + "'");
  return *s;
}

ModerationSettings SettingsStore::put(const std::string& class_id, const classify::Values& classified,
                                      const classify::Values& overrides, bool confirm,
                                      std::optional<long long> expected_version,
                                      std::optional<double> similarity_threshold) {
  const auto path = path_for(class_id);
  if (similarity_threshold && !(*similarity_threshold >= 0.0 && *similarity_threshold <= 1.0)) {
    throw ConfigError("similarity_threshold must lie in [0, 1]");
  }
  auto next = effective_settings(classified, overrides, class_id);
  std::lock_guard lock(mutex_);
  FileLock file_lock(path);
  long long current = 0;
  std::optional<ModerationSettings> existing;
  if (std::filesystem::exists(path)) {
    existing = settings_from_json(json::parse(read_file(path)));
    current = existing->version;
  }
  const long long expected = expected_version.value_or(0);
  if (expected != current) {
    throw VersionConflict("class '" + class_id + "' is at version " + std::to_string(current) +
                          ", the update was based on version " + std::to_string(expected));
  }
  next.version = current + 1;
  next.confirmed = confirm;
  next.similarity_threshold = similarity_threshold;
  if (confirm) next.confirmed_at = Timestamp::now();
  write_file_atomic(path, to_json(next).dump(2) + "\n");
  return next;
}

namespace {

std::string reference_suffix(RequestKind kind) {
  if (kind != RequestKind::Assignment && kind != RequestKind::Assessment) {
    throw ConfigError("reference texts exist only for assignment and assessment");
  }
  return "." + std::string(to_string(kind)) + "s.json";
}

}  // namespace

void SettingsStore::put_references(const std::string& class_id, RequestKind kind,
                                   const std::vector<std::string>& texts) {
  const auto path = path_for(class_id);
  const auto target = dir_ / (class_id + reference_suffix(kind));
  std::lock_guard lock(mutex_);
  FileLock file_lock(path);
  write_file_atomic(target, json(texts).dump(2) + "\n");
}

std::vector<std::string> SettingsStore::references(const std::string& class_id, RequestKind kind) const {
  path_for(class_id);
  const auto path = dir_ / (class_id + reference_suffix(kind));
  std::lock_guard lock(mutex_);
  if (!std::filesystem::exists(path)) return {};
  try {
    return json::parse(read_file(path)).get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw IoError(path.string() + " is corrupt: " + e.what());
  }
}

}  // namespace policyforge::moderate
