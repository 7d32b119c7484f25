#pragma once

#include <chrono>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace policyforge::http {

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};  // doubles per retry
  std::chrono::seconds timeout{30};
};

// POSTs a JSON body and parses a JSON response. Connection failures, 429 and
// 5xx are retried with exponential backoff; anything else fails at once.
// Throws ProviderUnavailable.
nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                         const std::vector<std::pair<std::string, std::string>>& headers,
                         const RetryPolicy& retry = {});

// Splits `scheme://host[:port]/path` into {"scheme://host[:port]", "/path"}.
std::pair<std::string, std::string> split_url(const std::string& url);

}  // namespace policyforge::http
