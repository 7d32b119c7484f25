#pragma once

#include <span>
#include <string_view>

namespace policyforge::topics {

// Built-in English stopword list. The version string changes whenever the
// list does, and is recorded in topic model artifacts.
std::string_view stopword_list_version();
bool is_stopword(std::string_view word);
std::span<const std::string_view> stopwords();

}  // namespace policyforge::topics
