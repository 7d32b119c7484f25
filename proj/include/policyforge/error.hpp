#pragma once

#include <stdexcept>
#include <string>

namespace policyforge {

// Broad failure classes; the CLI maps them to exit codes and the HTTP layer
// to ApiError codes.
enum class ErrorClass {
  Validation,   // bad input, bad config, malformed files
  NotFound,
  Conflict,
  Precondition,
  Provider,     // remote provider or environment problem
  Io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, std::string kind, const std::string& message)
      : std::runtime_error(message), class_(cls), kind_(std::move(kind)) {}

  ErrorClass error_class() const noexcept { return class_; }
  // Name of the concrete error, e.g. "MalformedCorpus".
  const std::string& kind() const noexcept { return kind_; }

 private:
  ErrorClass class_;
  std::string kind_;
};

#define POLICYFORGE_DEFINE_ERROR(Name, Cls)                              \
  class Name : public ::policyforge::Error {                             \
   public:                                                               \
    explicit Name(const std::string& message)                            \
        : ::policyforge::Error(::policyforge::ErrorClass::Cls, #Name,    \
                               message) {}                               \
  };

POLICYFORGE_DEFINE_ERROR(ConfigError, Validation)
POLICYFORGE_DEFINE_ERROR(IoError, Io)
POLICYFORGE_DEFINE_ERROR(ProviderUnavailable, Provider)
POLICYFORGE_DEFINE_ERROR(EnvironmentError, Provider)

}  // namespace policyforge
