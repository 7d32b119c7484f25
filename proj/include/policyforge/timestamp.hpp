#pragma once

#include <chrono>
#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace policyforge {

// UTC instant with one-second resolution, written as `YYYY-MM-DD HH:MM:SS`.
class Timestamp {
 public:
  Timestamp() = default;
  explicit Timestamp(std::chrono::sys_seconds t) : t_(t) {}

  // Strict parse; nullopt on any deviation from the format or an invalid
  // calendar date/time.
  static std::optional<Timestamp> parse(std::string_view s);
  static Timestamp now();

  std::string str() const;
  // `YYYYMMDDTHHMMSS`, used inside identifiers.
  std::string compact() const;
  std::chrono::sys_seconds time() const { return t_; }

  auto operator<=>(const Timestamp&) const = default;

 private:
  std::chrono::sys_seconds t_{};
};

}  // namespace policyforge
