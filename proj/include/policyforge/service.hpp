#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "policyforge/classify.hpp"
#include "policyforge/embed.hpp"
#include "policyforge/error.hpp"
#include "policyforge/moderate.hpp"
#include "policyforge/pipeline.hpp"
#include "policyforge/timestamp.hpp"

namespace policyforge::service {

POLICYFORGE_DEFINE_ERROR(UnknownJob, NotFound)
POLICYFORGE_DEFINE_ERROR(UnknownCorpus, NotFound)
POLICYFORGE_DEFINE_ERROR(QueueFull, Provider)

inline constexpr const char* kApiTokenEnv = "POLICYFORGE_API_TOKEN";
inline constexpr const char* kAuditSaltEnv = "POLICYFORGE_AUDIT_SALT";

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  classify::ProviderConfig provider;
  moderate::ModerationPolicy moderation;
  embed::EmbeddingConfig similarity_embedding;
  pipeline::DiscoverConfig discover_defaults;
  std::filesystem::path data_dir = "policyforge-data";
  std::filesystem::path corpus_dir = ".";
  std::optional<std::filesystem::path> ui_dir;
  std::size_t max_text_bytes = 64 * 1024;
  std::size_t job_queue_limit = 16;
  int request_timeout_s = 30;
  int retry_after_s = 5;
  int threads = 8;
  // Read from POLICYFORGE_API_TOKEN, never from the config file.
  std::optional<std::string> bearer_token;
};

// Relative paths are resolved against base_dir. Unknown keys are rejected.
ServerConfig server_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
ServerConfig load_server_config(const std::filesystem::path& path);
nlohmann::json to_json(const ServerConfig& config);

struct ApiError {
  int status = 500;
  std::string code;  // bad_request, not_found, provider_unavailable, validation_failed, conflict, internal
  std::string message;
  nlohmann::json detail;

  nlohmann::json body() const;
};

ApiError api_error(int status, std::string code, std::string message, nlohmann::json detail = nullptr);
// Maps a thrown exception to a response. Unknown exceptions become a bare
// 500 without the original message.
ApiError to_api_error(const std::exception& e);

enum class JobKind { Discover, Sweep };
enum class JobStatus { Queued, Running, Done, Failed };

std::string_view to_string(JobKind k);
std::string_view to_string(JobStatus s);

struct JobRecord {
  std::string job_id;
  JobKind kind = JobKind::Discover;
  JobStatus status = JobStatus::Queued;
  std::optional<std::string> artifact_path;
  Timestamp submitted_at;
  std::optional<Timestamp> started_at;
  std::optional<Timestamp> finished_at;
  nlohmann::json request;
  nlohmann::json detail;  // set on failure, or a summary when done
};

nlohmann::json to_json(const JobRecord& r);
JobRecord job_record_from_json(const nlohmann::json& j);

// Single worker, FIFO. Records live in `<dir>/<job_id>/job.json`; records
// left queued or running by a previous process are marked failed on start.
class JobRunner {
 public:
  // Runs inside the worker; receives the job directory and returns the
  // artifact path plus an optional summary.
  using Task = std::function<std::pair<std::filesystem::path, nlohmann::json>(const std::filesystem::path&)>;

  JobRunner(std::filesystem::path dir, std::size_t queue_limit);
  ~JobRunner();
  JobRunner(const JobRunner&) = delete;
  JobRunner& operator=(const JobRunner&) = delete;

  // Throws QueueFull when queue_limit jobs are already waiting.
  JobRecord submit(JobKind kind, nlohmann::json request, Task task);
  JobRecord get(const std::string& job_id) const;  // UnknownJob
  // Blocks until the queue is empty and the worker idle.
  void drain();

 private:
  struct State;
  std::unique_ptr<State> state_;
};

// Append-only NDJSON audit of moderation decisions. The question is stored as
// sha256(salt + question) only.
class AuditLog {
 public:
  AuditLog(std::filesystem::path path, std::string salt);
  void append(const std::string& class_id, moderate::RequestKind kind, const std::string& question,
              const moderate::ModerationDecision& decision);
  std::string question_hash(const std::string& question) const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::string salt_;
};

// Salt from POLICYFORGE_AUDIT_SALT, else a random value kept in `<data_dir>/audit.salt`.
std::string load_or_create_salt(const std::filesystem::path& data_dir);

class Server {
 public:
  explicit Server(ServerConfig config);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds the configured port (0 picks a free one) and returns the bound port.
  int bind();
  // Serves until stop(); calls bind() first if needed.
  void listen();
  void stop();
  void wait_until_ready() const;

  int port() const;
  const ServerConfig& config() const;
  JobRunner& jobs();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace policyforge::service
