#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <string>

#include "policyforge/matrix.hpp"

namespace testing {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(POLICYFORGE_FIXTURE_DIR) / name;
}

// Frozen output of a script under tests/oracles.
inline nlohmann::json oracle(const std::string& name) {
  std::ifstream in(std::filesystem::path(POLICYFORGE_ORACLE_DIR) / name);
  return nlohmann::json::parse(in);
}

inline policyforge::Matrix matrix(const nlohmann::json& rows) {
  return policyforge::Matrix::from_rows(rows.get<std::vector<std::vector<double>>>());
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("pf-test-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace testing
