#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <regex>

#include "policyforge/classify.hpp"

namespace policyforge::classify {

using nlohmann::json;

PolicyClassification classify_statement(std::string_view text, ClassifierProvider& provider) {
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw ConfigError("statement text is empty");
  }
  const auto start = std::chrono::steady_clock::now();
  auto c = provider.classify(text);
  c.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                     std::chrono::steady_clock::now() - start)
                     .count();
  c.source_text = std::string(text);
  c.provider = provider.name();
  validate_values(c.values);
  return c;
}

// ---- rule classifier ------------------------------------------------------

const std::vector<RulePattern>& rule_patterns() {
  static const std::vector<RulePattern> table = {
      {"polarity", "NotAllowed",
       R"(\b(not permitted|not allowed|prohibited|may not|must not|cannot|can not|not be used|not to use|not use|banned|forbidden|not for|unauthorized|considered a violation|is a violation|not authorized|disallowed|never use|should not use)\b)"},
      {"polarity", "Allowed",
       R"(\b(may|can use|can be used|allowed|permitted|encouraged|welcome|free to|acceptable)\b)"},
      {"learning_use", "context", R"(\b(learning|learn|study|studying|tutor|tutoring)\b)"},
      {"assignment_use", "context",
       R"(\b(assignments?|homework|essays?|coursework|problem sets?|projects?|lab reports?)\b)"},
      {"assessment_use", "context",
       R"(\b(exams?|examinations?|quiz|quizzes|tests?|assessments?|midterms?)\b)"},
      {"research_use", "context",
       R"(\b(research\w*|thesis|theses|dissertations?|manuscripts?|grant proposals?)\b)"},
      {"citation", "NotRequired",
       R"(\b(not required|no need to|not need to|need not|not necessary|no attribution is needed|without citing)\b)"},
      {"citation", "Required",
       R"(\b(cite|cited|citing|citations?|acknowledg\w*|attribut\w*|disclos\w*)\b)"},
      {"validation", "Addressed",
       R"(\b(verif\w*|accura\w*|inaccura\w*|hallucinat\w*|fabricat\w*|fact[- ]check\w*|double[- ]check\w*|check (every|all|outputs?)|correctness|copyright\w*)\b)"},
      {"info_release", "Addressed",
       R"(\b(confidential\w*|personal|private|privacy|sensitive|proprietary|identifiable|ferpa|hipaa|student records|do not (upload|paste|enter|share))\b)"},
      {"authority", "Instructor", R"(\b(instructors?|professors?|faculty|teachers?)\b)"},
      {"authority", "Department", R"(\b(departments?|departmental|program director)\b)"},
      {"authority", "College", R"(\b(college|dean)\b)"},
      {"authority", "University", R"(\b(university|institution-wide|campus-wide)\b)"},
  };
  return table;
}

namespace {

struct CompiledPattern {
  const RulePattern* source;
  std::regex re;
};

const std::vector<CompiledPattern>& compiled() {
  static const std::vector<CompiledPattern> c = [] {
    std::vector<CompiledPattern> out;
    for (const auto& p : rule_patterns()) {
      out.push_back({&p, std::regex(p.regex, std::regex::ECMAScript | std::regex::optimize)});
    }
    return out;
  }();
  return c;
}

std::vector<std::string> clauses_of(std::string_view text) {
  std::string lower;
  for (char ch : text) {
    lower += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  static const std::regex sentence_end(R"([.!?\n]+)");
  static const std::regex clause_break(R"(;|\b(but|however|while|whereas)\b)");
  std::vector<std::string> out;
  for (std::sregex_token_iterator s(lower.begin(), lower.end(), sentence_end, -1), end; s != end; ++s) {
    const std::string sentence = *s;
    for (std::sregex_token_iterator c(sentence.begin(), sentence.end(), clause_break, -1); c != end; ++c) {
      const std::string clause = *c;
      if (clause.find_first_not_of(" \t\r,") != std::string::npos) out.push_back(clause);
    }
  }
  return out;
}

}  // namespace

Values rule_values(std::string_view text) {
  Values v = absent_values();
  bool citation_required = false, citation_not_required = false;
  for (const auto& clause : clauses_of(text)) {
    std::optional<std::string> polarity;
    for (const auto& p : compiled()) {
      if (p.source->category == "polarity" && !polarity && std::regex_search(clause, p.re)) {
        polarity = p.source->label;
      }
    }
    bool clause_nr = false;
    for (const auto& p : compiled()) {
      const auto& cat = p.source->category;
      const auto& label = p.source->label;
      if (cat == "polarity" || !std::regex_search(clause, p.re)) continue;
      if (label == "context") {
        // NotAllowed from any clause sticks.
        if (polarity && v[cat] != "NotAllowed") v[cat] = *polarity;
      } else if (cat == "citation") {
        if (label == "NotRequired") {
          clause_nr = citation_not_required = true;
        } else if (!clause_nr) {
          citation_required = true;
        }
      } else if (cat == "authority") {
        continue;  // decided over the whole text below
      } else {
        v[cat] = label;
      }
    }
  }
  if (citation_required) {
    v["citation"] = "Required";
  } else if (citation_not_required) {
    v["citation"] = "NotRequired";
  }
  std::string lower;
  for (char ch : text) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  for (const auto& p : compiled()) {
    if (p.source->category == "authority" && std::regex_search(lower, p.re)) {
      v["authority"] = p.source->label;
      break;
    }
  }
  return v;
}

PolicyClassification RuleClassifier::classify(std::string_view text) {
  PolicyClassification c;
  c.values = rule_values(text);
  c.raw_response = json(c.values).dump();
  c.prompt_version = "rule-table/v1";
  return c;
}

// ---- LLM classifier -------------------------------------------------------

HttpChatTransport::HttpChatTransport(std::string endpoint, std::string model, std::string api_key,
                                     http::RetryPolicy retry)
    : endpoint_(std::move(endpoint)), model_(std::move(model)), api_key_(std::move(api_key)), retry_(retry) {}

std::string HttpChatTransport::complete(const std::vector<ChatMessage>& messages) {
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  const json body = {{"model", model_}, {"temperature", 0}, {"messages", msgs}};
  const json reply = http::post_json(endpoint_, body, {{"Authorization", "Bearer " + api_key_}}, retry_);
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw UnparseableResponse("chat completion reply has no choices[0].message.content");
  }
}

std::vector<ChatMessage> build_prompt(std::string_view text) {
  std::string spec;
  for (const auto& c : schema().categories) {
    spec += "- \"" + c.key + "\" (" + c.display + "): one of ";
    for (std::size_t i = 0; i < c.labels.size(); ++i) {
      spec += (i ? ", " : "") + std::string("\"") + c.labels[i] + "\"";
    }
    spec += "\n";
  }
  std::string system =
      "You classify generative-AI policy statements from academic syllabi and institutions.\n"
      "Return a single JSON object with exactly these keys and one label each:\n" +
      spec +
      "Use NotMentioned or NotAddressed when the statement does not cover a category. "
      "Reply with the JSON object only.";
  return {{"system", system}, {"user", "Policy statement:\n" + std::string(text)}};
}

Values parse_llm_reply(const std::string& reply) {
  const auto open = reply.find('{');
  const auto close = reply.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    throw UnparseableResponse("reply contains no JSON object");
  }
  json j;
  try {
    j = json::parse(reply.substr(open, close - open + 1));
  } catch (const json::parse_error& e) {
    throw UnparseableResponse(std::string("reply is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw UnparseableResponse("reply is not a JSON object");
  Values v;
  std::vector<std::string> problems;
  for (const auto& c : schema().categories) {
    if (!j.contains(c.key)) {
      problems.push_back("missing key \"" + c.key + "\"");
      continue;
    }
    if (!j.at(c.key).is_string()) {
      problems.push_back("\"" + c.key + "\" must be a string");
      continue;
    }
    auto label = normalize_label(c, j.at(c.key).get<std::string>());
    if (!label) {
      problems.push_back("\"" + c.key + "\" has illegal label \"" + j.at(c.key).get<std::string>() + "\"");
      continue;
    }
    v[c.key] = *label;
  }
  for (const auto& [k, _] : j.items()) {
    if (!schema().find(k)) problems.push_back("unexpected key \"" + k + "\"");
  }
  if (!problems.empty()) {
    std::string msg;
    for (const auto& p : problems) msg += (msg.empty() ? "" : "; ") + p;
    throw UnparseableResponse(msg);
  }
  return v;
}

LlmClassifier::LlmClassifier(std::shared_ptr<ChatTransport> transport, std::string name)
    : transport_(std::move(transport)), name_(std::move(name)) {}

PolicyClassification LlmClassifier::classify(std::string_view text) {
  auto messages = build_prompt(text);
  PolicyClassification c;
  c.prompt_version = kPromptVersion;
  std::string reply = transport_->complete(messages);
  try {
    c.values = parse_llm_reply(reply);
    c.raw_response = reply;
    return c;
  } catch (const UnparseableResponse& e) {
    messages.push_back({"assistant", reply});
    messages.push_back({"user", std::string("That reply was invalid: ") + e.what() +
                                    ". Answer again with only the JSON object holding exactly the "
                                    "eight keys and legal labels."});
  }
  reply = transport_->complete(messages);
  c.values = parse_llm_reply(reply);  // a second failure propagates
  c.raw_response = reply;
  return c;
}

// ---- gold echo --------------------------------------------------------------

GoldEchoProvider::GoldEchoProvider(const LabeledDataset& dataset) {
  for (const auto& s : dataset.statements) gold_.emplace(s.text, s.gold);
}

PolicyClassification GoldEchoProvider::classify(std::string_view text) {
  auto it = gold_.find(std::string(text));
  if (it == gold_.end()) throw ConfigError("gold provider has no label for this statement");
  PolicyClassification c;
  c.values = it->second;
  c.raw_response = json(c.values).dump();
  c.prompt_version = "gold";
  return c;
}

std::unique_ptr<ClassifierProvider> make_provider(const ProviderConfig& config, const LabeledDataset* dataset) {
  if (config.name == "rule") return std::make_unique<RuleClassifier>();
  if (config.name == "gold") {
    if (!dataset) throw ConfigError("the gold provider needs a labeled dataset");
    return std::make_unique<GoldEchoProvider>(*dataset);
  }
  if (config.name == "llm") {
    const char* key = std::getenv(kLlmKeyEnv);
    if (!key || !*key) {
      throw EnvironmentError(std::string(kLlmKeyEnv) + " is not set; it is required for the llm provider");
    }
    auto transport = std::make_shared<HttpChatTransport>(config.endpoint, config.model, key);
    return std::make_unique<LlmClassifier>(std::move(transport), "llm:" + config.model);
  }
  throw ConfigError("unknown classifier provider '" + config.name + "' (expected rule, gold or llm)");
}

}  // namespace policyforge::classify
