#include <algorithm>
#include <cctype>

#include "policyforge/classify.hpp"

namespace policyforge::classify {

using nlohmann::json;

namespace {

std::string squash(std::string_view s) {
  std::string out;
  for (char ch : s) {
    if (ch == ' ' || ch == '_' || ch == '-' || ch == '/' || ch == '\t') continue;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  return out;
}

PolicySchema build_schema() {
  const std::vector<std::string> use = {"Allowed", "NotAllowed", "NotMentioned"};
  PolicySchema s;
  s.version = "policy-schema/v1";
  s.categories = {
      {"learning_use", "Learning Use", use, "NotMentioned"},
      {"assignment_use", "Assignment Use", use, "NotMentioned"},
      {"assessment_use", "Assessment Use", use, "NotMentioned"},
      {"research_use", "Research Use", use, "NotMentioned"},
      {"citation", "Citation Requirement", {"Required", "NotRequired", "NotMentioned"}, "NotMentioned"},
      {"validation", "Validation Requirement", {"Addressed", "NotAddressed"}, "NotAddressed"},
      {"info_release", "Cautions on Information Release", {"Addressed", "NotAddressed"}, "NotAddressed"},
      {"authority", "Main Authority",
       {"University", "College", "Department", "Instructor", "NotMentioned"}, "NotMentioned"},
  };
  return s;
}

}  // namespace

const Category* PolicySchema::find(std::string_view key) const {
  for (const auto& c : categories) {
    if (c.key == key) return &c;
  }
  return nullptr;
}

const PolicySchema& schema() {
  static const PolicySchema s = build_schema();
  return s;
}

json schema_json() {
  json cats = json::array();
  for (const auto& c : schema().categories) {
    cats.push_back({{"key", c.key}, {"display", c.display}, {"labels", c.labels}, {"absent", c.absent}});
  }
  return {{"version", schema().version}, {"categories", cats}};
}

std::optional<std::string> normalize_label(const Category& category, std::string_view raw) {
  std::string key = squash(raw);
  if (category.key == "authority" && (key == "school" || key == "collegeschool")) key = "college";
  for (const auto& l : category.labels) {
    if (squash(l) == key) return l;
  }
  return std::nullopt;
}

bool is_absence_label(std::string_view label) {
  return label == "NotMentioned" || label == "NotAddressed";
}

void validate_values(const Values& values) {
  for (const auto& c : schema().categories) {
    auto it = values.find(c.key);
    if (it == values.end()) throw InvalidClassification("missing category '" + c.key + "'");
    if (std::find(c.labels.begin(), c.labels.end(), it->second) == c.labels.end()) {
      throw InvalidClassification("illegal label '" + it->second + "' for " + c.key);
    }
  }
  if (values.size() != schema().categories.size()) {
    for (const auto& [k, v] : values) {
      if (!schema().find(k)) throw InvalidClassification("unknown category '" + k + "'");
    }
  }
}

Values absent_values() {
  Values v;
  for (const auto& c : schema().categories) v[c.key] = c.absent;
  return v;
}

json to_json(const PolicyClassification& c) {
  return {{"values", c.values},         {"source_text", c.source_text},
          {"provider", c.provider},     {"raw_response", c.raw_response},
          {"latency_ms", c.latency_ms}, {"prompt_version", c.prompt_version}};
}

PolicyClassification classification_from_json(const json& j) {
  PolicyClassification c;
  try {
    c.values = j.at("values").get<Values>();
    c.source_text = j.value("source_text", "");
    c.provider = j.value("provider", "");
    c.raw_response = j.value("raw_response", "");
    c.latency_ms = j.value("latency_ms", 0LL);
    c.prompt_version = j.value("prompt_version", "");
  } catch (const json::exception& e) {
    throw InvalidClassification(std::string("bad classification document: ") + e.what());
  }
  validate_values(c.values);
  return c;
}

}  // namespace policyforge::classify
