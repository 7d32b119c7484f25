#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "policyforge/error.hpp"
#include "policyforge/http.hpp"

namespace policyforge::classify {

POLICYFORGE_DEFINE_ERROR(UnparseableResponse, Provider)
POLICYFORGE_DEFINE_ERROR(MalformedDataset, Validation)
POLICYFORGE_DEFINE_ERROR(InvalidClassification, Validation)

struct Category {
  std::string key;
  std::string display;
  std::vector<std::string> labels;
  std::string absent;  // NotMentioned or NotAddressed
};

struct PolicySchema {
  std::string version;
  std::vector<Category> categories;

  const Category* find(std::string_view key) const;
};

const PolicySchema& schema();
nlohmann::json schema_json();

// Case-insensitive, ignoring spaces, underscores, hyphens and slashes.
std::optional<std::string> normalize_label(const Category& category, std::string_view raw);
bool is_absence_label(std::string_view label);

using Values = std::map<std::string, std::string>;

// Every category present, every label legal. Throws InvalidClassification.
void validate_values(const Values& values);
Values absent_values();

struct PolicyClassification {
  Values values;
  std::string source_text;
  std::string provider;
  std::string raw_response;
  long long latency_ms = 0;
  std::string prompt_version;

  friend bool operator==(const PolicyClassification&, const PolicyClassification&) = default;
};

nlohmann::json to_json(const PolicyClassification& c);
PolicyClassification classification_from_json(const nlohmann::json& j);

class ClassifierProvider {
 public:
  virtual ~ClassifierProvider() = default;
  virtual std::string name() const = 0;
  virtual PolicyClassification classify(std::string_view text) = 0;
};

// Rejects empty text, times the provider and validates its output.
PolicyClassification classify_statement(std::string_view text, ClassifierProvider& provider);

// ---- rule classifier ------------------------------------------------------

struct RulePattern {
  std::string category;  // schema key, or "polarity"
  std::string label;     // label set when the pattern fires, or a polarity
  std::string regex;
};

// The shipped pattern table, in evaluation order.
const std::vector<RulePattern>& rule_patterns();
Values rule_values(std::string_view text);

class RuleClassifier final : public ClassifierProvider {
 public:
  std::string name() const override { return "rule"; }
  PolicyClassification classify(std::string_view text) override;
};

// ---- LLM classifier -------------------------------------------------------

struct ChatMessage {
  std::string role;
  std::string content;
};

class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
};

inline constexpr const char* kLlmKeyEnv = "POLICYFORGE_LLM_KEY";
inline constexpr const char* kPromptVersion = "policy-classify/v1";

// OpenAI-style chat completions: `{model, temperature: 0, messages}` in,
// `choices[0].message.content` out.
class HttpChatTransport final : public ChatTransport {
 public:
  HttpChatTransport(std::string endpoint, std::string model, std::string api_key,
                    http::RetryPolicy retry = {});
  std::string complete(const std::vector<ChatMessage>& messages) override;

 private:
  std::string endpoint_;
  std::string model_;
  std::string api_key_;
  http::RetryPolicy retry_;
};

std::vector<ChatMessage> build_prompt(std::string_view text);
// Parses the first JSON object in a reply. Throws UnparseableResponse.
Values parse_llm_reply(const std::string& reply);

class LlmClassifier final : public ClassifierProvider {
 public:
  LlmClassifier(std::shared_ptr<ChatTransport> transport, std::string name);
  std::string name() const override { return name_; }
  // One repair round-trip quoting the validation error, then UnparseableResponse.
  PolicyClassification classify(std::string_view text) override;

 private:
  std::shared_ptr<ChatTransport> transport_;
  std::string name_;
};

// ---- datasets and evaluation ----------------------------------------------

struct LabeledStatement {
  std::string text;
  Values gold;
  std::optional<std::string> annotator_note;
};

struct LabeledDataset {
  std::vector<LabeledStatement> statements;
  std::map<std::string, std::map<std::string, int>> counts;  // category -> label -> rows
  std::string fingerprint;  // independent of row order
};

// CSV: text, the eight category keys, optional annotator_note.
LabeledDataset parse_labeled_dataset(const std::string& csv_text);
LabeledDataset load_labeled_dataset(const std::filesystem::path& path);

// Answers with the gold labels of a known statement.
class GoldEchoProvider final : public ClassifierProvider {
 public:
  explicit GoldEchoProvider(const LabeledDataset& dataset);
  std::string name() const override { return "gold"; }
  PolicyClassification classify(std::string_view text) override;

 private:
  std::map<std::string, Values> gold_;
};

struct Cell {
  std::string category;
  std::string label;
  int tp = 0, fp = 0, fn = 0, tn = 0;
  int support() const { return tp + fn; }
  std::optional<double> precision() const;  // nullopt when tp + fp == 0
  std::optional<double> recall() const;     // nullopt when tp + fn == 0
};

struct Averages {
  std::optional<double> precision;
  std::optional<double> recall;
};

struct EvaluationReport {
  std::string provider;
  std::string dataset_fingerprint;
  int n_statements = 0;
  std::vector<Cell> cells;  // schema order
  std::map<std::string, Averages> macro;  // per category, labels with gold support
  std::map<std::string, Averages> micro;  // per category, pooled cells
  Averages macro_overall;    // every cell with gold support
  Averages macro_mentioned;  // cells with gold support, absence labels excluded

  const Cell* cell(std::string_view category, std::string_view label) const;
};

EvaluationReport evaluate_predictions(const LabeledDataset& dataset, const std::vector<Values>& predicted,
                                      const std::string& provider);
EvaluationReport evaluate(ClassifierProvider& provider, const LabeledDataset& dataset);
std::string report_csv(const EvaluationReport& report);

// "rule", "gold" (needs a dataset) or "llm" (endpoint/model from config, key
// from POLICYFORGE_LLM_KEY).
struct ProviderConfig {
  std::string name = "rule";
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4o";
};
std::unique_ptr<ClassifierProvider> make_provider(const ProviderConfig& config,
                                                  const LabeledDataset* dataset = nullptr);

}  // namespace policyforge::classify
