#include "policyforge/service.hpp"

#include <httplib.h>
#include <openssl/rand.h>

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <map>
#include <mutex>
#include <regex>
#include <set>
#include <thread>

#include "policyforge/corpus.hpp"
#include "policyforge/fileio.hpp"
#include "policyforge/hash.hpp"
#include "policyforge/sweep.hpp"
#include "policyforge/topics.hpp"

namespace policyforge::service {

using nlohmann::json;
namespace fs = std::filesystem;

// ---- config -----------------------------------------------------------------

namespace {

fs::path resolve(const fs::path& base, const fs::path& p) { return p.is_absolute() ? p : base / p; }

std::string random_hex(std::size_t bytes) {
  std::string raw(bytes, '\0');
  if (RAND_bytes(reinterpret_cast<unsigned char*>(raw.data()), static_cast<int>(bytes)) != 1) {
    throw IoError("RAND_bytes failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned char c : raw) {
    out += kHex[c >> 4];
    out += kHex[c & 15];
  }
  return out;
}

}  // namespace

ServerConfig server_config_from_json(const json& j, const fs::path& base_dir) {
  static const std::set<std::string> kKeys = {
      "host", "port", "provider", "moderation", "similarity_embedding", "discover_defaults",
      "data_dir", "corpus_dir", "ui_dir", "max_text_bytes", "job_queue_limit", "request_timeout_s",
      "retry_after_s", "threads"};
  if (!j.is_object()) throw ConfigError("server config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (k == "api_key" || k == "token" || k == "bearer_token") {
      throw ConfigError("secrets are read from the environment, not from '" + k + "'");
    }
    if (!kKeys.count(k)) throw ConfigError("unknown server config key '" + k + "'");
  }
  ServerConfig c;
  try {
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    if (j.contains("provider")) {
      const auto& p = j.at("provider");
      c.provider.name = p.value("name", c.provider.name);
      c.provider.endpoint = p.value("endpoint", c.provider.endpoint);
      c.provider.model = p.value("model", c.provider.model);
    }
    if (j.contains("moderation")) c.moderation = moderate::policy_from_json(j.at("moderation"));
    if (j.contains("similarity_embedding")) c.similarity_embedding = embed::config_from_json(j.at("similarity_embedding"));
    if (j.contains("discover_defaults")) c.discover_defaults = pipeline::discover_config_from_json(j.at("discover_defaults"));
    c.data_dir = resolve(base_dir, j.value("data_dir", c.data_dir.string()));
    c.corpus_dir = resolve(base_dir, j.value("corpus_dir", c.corpus_dir.string()));
    if (j.contains("ui_dir") && !j.at("ui_dir").is_null()) c.ui_dir = resolve(base_dir, j.at("ui_dir").get<std::string>());
    c.max_text_bytes = j.value("max_text_bytes", c.max_text_bytes);
    c.job_queue_limit = j.value("job_queue_limit", c.job_queue_limit);
    c.request_timeout_s = j.value("request_timeout_s", c.request_timeout_s);
    c.retry_after_s = j.value("retry_after_s", c.retry_after_s);
    c.threads = j.value("threads", c.threads);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad server config: ") + e.what());
  }
  if (c.port < 0 || c.port > 65535) throw ConfigError("port must lie in [0, 65535]");
  if (c.job_queue_limit < 1) throw ConfigError("job_queue_limit must be >= 1");
  if (c.request_timeout_s < 1 || c.retry_after_s < 1) throw ConfigError("timeouts must be >= 1 second");
  if (c.threads < 1) throw ConfigError("threads must be >= 1");
  if (c.max_text_bytes < 1) throw ConfigError("max_text_bytes must be >= 1");
  embed::validate(c.similarity_embedding);
  pipeline::validate(c.discover_defaults);
  if (c.provider.name != "rule" && c.provider.name != "llm") {
    throw ConfigError("server provider must be 'rule' or 'llm'");
  }
  return c;
}

ServerConfig load_server_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return server_config_from_json(j, path.parent_path());
}

json to_json(const ServerConfig& c) {
  return {{"host", c.host},
          {"port", c.port},
          {"provider", {{"name", c.provider.name}, {"endpoint", c.provider.endpoint}, {"model", c.provider.model}}},
          {"moderation", moderate::to_json(c.moderation)},
          {"similarity_embedding", embed::to_json(c.similarity_embedding)},
          {"discover_defaults", pipeline::to_json(c.discover_defaults)},
          {"data_dir", c.data_dir.string()},
          {"corpus_dir", c.corpus_dir.string()},
          {"ui_dir", c.ui_dir ? json(c.ui_dir->string()) : json(nullptr)},
          {"max_text_bytes", c.max_text_bytes},
          {"job_queue_limit", c.job_queue_limit},
          {"request_timeout_s", c.request_timeout_s},
          {"retry_after_s", c.retry_after_s},
          {"threads", c.threads}};
}

// ---- errors -----------------------------------------------------------------

json ApiError::body() const {
  return {{"error", {{"code", code}, {"message", message}, {"detail", detail}}}};
}

ApiError api_error(int status, std::string code, std::string message, json detail) {
  return {status, std::move(code), std::move(message), std::move(detail)};
}

ApiError to_api_error(const std::exception& e) {
  const auto* pe = dynamic_cast<const Error*>(&e);
  if (!pe) return api_error(500, "internal", "internal error");
  const json detail = {{"kind", pe->kind()}};
  switch (pe->error_class()) {
    case ErrorClass::Validation: return api_error(400, "validation_failed", pe->what(), detail);
    case ErrorClass::NotFound: return api_error(404, "not_found", pe->what(), detail);
    case ErrorClass::Conflict: return api_error(409, "conflict", pe->what(), detail);
    case ErrorClass::Precondition: return api_error(412, "validation_failed", pe->what(), detail);
    case ErrorClass::Provider: return api_error(502, "provider_unavailable", pe->what(), detail);
    case ErrorClass::Io: return api_error(500, "internal", "storage error", detail);
  }
  return api_error(500, "internal", "internal error");
}

// ---- jobs -------------------------------------------------------------------

std::string_view to_string(JobKind k) { return k == JobKind::Discover ? "discover" : "sweep"; }

std::string_view to_string(JobStatus s) {
  switch (s) {
    case JobStatus::Queued: return "queued";
    case JobStatus::Running: return "running";
    case JobStatus::Done: return "done";
    case JobStatus::Failed: return "failed";
  }
  return "failed";
}

namespace {

json opt_ts(const std::optional<Timestamp>& t) { return t ? json(t->str()) : json(nullptr); }

std::optional<Timestamp> read_ts(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  auto t = Timestamp::parse(j.at(key).get<std::string>());
  if (!t) throw ConfigError(std::string("bad timestamp in ") + key);
  return t;
}

}  // namespace

json to_json(const JobRecord& r) {
  return {{"job_id", r.job_id},
          {"kind", std::string(to_string(r.kind))},
          {"status", std::string(to_string(r.status))},
          {"artifact_path", r.artifact_path ? json(*r.artifact_path) : json(nullptr)},
          {"submitted_at", r.submitted_at.str()},
          {"started_at", opt_ts(r.started_at)},
          {"finished_at", opt_ts(r.finished_at)},
          {"request", r.request},
          {"detail", r.detail}};
}

JobRecord job_record_from_json(const json& j) {
  JobRecord r;
  try {
    r.job_id = j.at("job_id").get<std::string>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind != "discover" && kind != "sweep") throw ConfigError("bad job kind '" + kind + "'");
    r.kind = kind == "discover" ? JobKind::Discover : JobKind::Sweep;
    const auto status = j.at("status").get<std::string>();
    bool known = false;
    for (auto s : {JobStatus::Queued, JobStatus::Running, JobStatus::Done, JobStatus::Failed}) {
      if (to_string(s) == status) {
        r.status = s;
        known = true;
      }
    }
    if (!known) throw ConfigError("bad job status '" + status + "'");
    if (!j.at("artifact_path").is_null()) r.artifact_path = j.at("artifact_path").get<std::string>();
    r.submitted_at = read_ts(j, "submitted_at").value();
    r.started_at = read_ts(j, "started_at");
    r.finished_at = read_ts(j, "finished_at");
    r.request = j.value("request", json(nullptr));
    r.detail = j.value("detail", json(nullptr));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad job record: ") + e.what());
  } catch (const std::bad_optional_access&) {
    throw ConfigError("bad job record: missing submitted_at");
  }
  return r;
}

struct JobRunner::State {
  fs::path dir;
  std::size_t queue_limit;
  mutable std::mutex mutex;
  std::condition_variable cv;
  std::condition_variable idle_cv;
  std::map<std::string, JobRecord> records;
  std::deque<std::pair<std::string, Task>> queue;
  bool busy = false;
  bool stopping = false;
  std::thread worker;

  void persist(const JobRecord& r) {
    fs::create_directories(dir / r.job_id);
    write_file_atomic(dir / r.job_id / "job.json", to_json(r).dump(2) + "\n");
  }

  void run() {
    for (;;) {
      std::pair<std::string, Task> item;
      {
        std::unique_lock lock(mutex);
        cv.wait(lock, [&] { return stopping || !queue.empty(); });
        if (queue.empty()) return;
        item = std::move(queue.front());
        queue.pop_front();
        busy = true;
        auto& r = records.at(item.first);
        r.status = JobStatus::Running;
        r.started_at = Timestamp::now();
        persist(r);
      }
      JobRecord finished;
      {
        std::lock_guard lock(mutex);
        finished = records.at(item.first);
      }
      try {
        auto [artifact, summary] = item.second(dir / item.first);
        finished.status = JobStatus::Done;
        finished.artifact_path = artifact.string();
        finished.detail = std::move(summary);
      } catch (const std::exception& e) {
        finished.status = JobStatus::Failed;
        const auto err = to_api_error(e);
        finished.detail = {{"code", err.code}, {"message", err.message}, {"kind", err.detail.value("kind", "")}};
      }
      finished.finished_at = Timestamp::now();
      std::lock_guard lock(mutex);
      records[finished.job_id] = finished;
      try {
        persist(finished);
      } catch (const std::exception&) {
        // record stays correct in memory; the next restart marks it failed
      }
      busy = false;
      idle_cv.notify_all();
    }
  }
};

JobRunner::JobRunner(fs::path dir, std::size_t queue_limit) : state_(std::make_unique<State>()) {
  state_->dir = std::move(dir);
  state_->queue_limit = queue_limit;
  fs::create_directories(state_->dir);
  for (const auto& entry : fs::directory_iterator(state_->dir)) {
    const auto file = entry.path() / "job.json";
    if (!entry.is_directory() || !fs::exists(file)) continue;
    try {
      auto r = job_record_from_json(json::parse(read_file(file)));
      if (r.status == JobStatus::Queued || r.status == JobStatus::Running) {
        r.status = JobStatus::Failed;
        r.finished_at = Timestamp::now();
        r.detail = {{"code", "internal"}, {"message", "interrupted by a server restart"}, {"kind", ""}};
        state_->persist(r);
      }
      state_->records[r.job_id] = std::move(r);
    } catch (const std::exception&) {
      // unreadable record: leave it on disk, do not serve it
    }
  }
  state_->worker = std::thread([s = state_.get()] { s->run(); });
}

JobRunner::~JobRunner() {
  {
    std::lock_guard lock(state_->mutex);
    state_->stopping = true;
    state_->queue.clear();
  }
  state_->cv.notify_all();
  if (state_->worker.joinable()) state_->worker.join();
}

JobRecord JobRunner::submit(JobKind kind, json request, Task task) {
  std::lock_guard lock(state_->mutex);
  if (state_->queue.size() >= state_->queue_limit) {
    throw QueueFull("job queue is full (" + std::to_string(state_->queue_limit) + " waiting)");
  }
  JobRecord r;
  r.job_id = "job-" + Timestamp::now().compact() + "-" + random_hex(4);
  r.kind = kind;
  r.submitted_at = Timestamp::now();
  r.request = std::move(request);
  state_->persist(r);
  state_->records[r.job_id] = r;
  state_->queue.emplace_back(r.job_id, std::move(task));
  state_->cv.notify_one();
  return r;
}

JobRecord JobRunner::get(const std::string& job_id) const {
  std::lock_guard lock(state_->mutex);
  auto it = state_->records.find(job_id);
  if (it == state_->records.end()) throw UnknownJob("no job '" + job_id + "'");
  return it->second;
}

void JobRunner::drain() {
  std::unique_lock lock(state_->mutex);
  state_->idle_cv.wait(lock, [&] { return state_->queue.empty() && !state_->busy; });
}

// ---- audit ------------------------------------------------------------------

AuditLog::AuditLog(fs::path path, std::string salt) : path_(std::move(path)), salt_(std::move(salt)) {}

std::string AuditLog::question_hash(const std::string& question) const { return sha256_hex(salt_ + question); }

void AuditLog::append(const std::string& class_id, moderate::RequestKind kind, const std::string& question,
                      const moderate::ModerationDecision& decision) {
  const json row = {{"timestamp", Timestamp::now().str()},
                    {"class_id", class_id},
                    {"kind", std::string(moderate::to_string(kind))},
                    {"question_sha256", question_hash(question)},
                    {"verdict", std::string(moderate::to_string(decision.verdict))},
                    {"matched_category", decision.matched_category}};
  append_line(path_, row.dump());
}

std::string load_or_create_salt(const fs::path& data_dir) {
  if (const char* env = std::getenv(kAuditSaltEnv); env && *env) return env;
  const auto path = data_dir / "audit.salt";
  fs::create_directories(data_dir);
  FileLock lock(path);
  if (fs::exists(path)) return read_file(path);
  auto salt = random_hex(16);
  write_file_atomic(path, salt);
  fs::permissions(path, fs::perms::owner_read | fs::perms::owner_write, fs::perm_options::replace);
  return salt;
}

// ---- server -----------------------------------------------------------------

namespace {

const std::regex kRefPattern("[A-Za-z0-9._-]{1,128}");

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const ApiError& e) { send_json(res, e.status, e.body()); }

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) throw api_error(400, "bad_request", "request body is empty");
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) throw api_error(400, "bad_request", "request body must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw api_error(400, "bad_request", "request body is not valid JSON", {{"parse_error", e.what()}});
  }
}

template <class T>
T field(const json& body, const char* key) {
  if (!body.contains(key)) throw api_error(400, "bad_request", std::string("missing field '") + key + "'");
  try {
    return body.at(key).get<T>();
  } catch (const json::exception&) {
    throw api_error(400, "bad_request", std::string("field '") + key + "' has the wrong type");
  }
}

classify::Values values_field(const json& body, const char* key, bool required) {
  if (!body.contains(key) || body.at(key).is_null()) {
    if (required) throw api_error(400, "bad_request", std::string("missing field '") + key + "'");
    return {};
  }
  const auto& v = body.at(key);
  if (!v.is_object()) throw api_error(400, "bad_request", std::string("field '") + key + "' must be an object");
  classify::Values out;
  for (const auto& [k, x] : v.items()) {
    if (!x.is_string()) throw api_error(400, "validation_failed", "label for '" + k + "' must be a string");
    out[k] = x.get<std::string>();
  }
  return out;
}

std::optional<long long> parse_version(const httplib::Request& req) {
  if (!req.has_header("If-Match")) return std::nullopt;
  auto v = req.get_header_value("If-Match");
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
  try {
    std::size_t used = 0;
    const long long n = std::stoll(v, &used);
    if (used != v.size() || n < 0) throw std::invalid_argument("trailing");
    return n;
  } catch (const std::exception&) {
    throw api_error(400, "bad_request", "If-Match must be a settings version number");
  }
}

std::string etag(long long version) { return "\"" + std::to_string(version) + "\""; }

// Accept time of the connection the current worker thread is serving; cleared
// once its first request has been checked.
thread_local std::optional<std::chrono::steady_clock::time_point> t_accepted_at;

class DeadlineQueue final : public httplib::TaskQueue {
 public:
  DeadlineQueue(std::size_t threads, std::size_t max_queued) : pool_(threads, max_queued) {}
  bool enqueue(std::function<void()> fn) override {
    return pool_.enqueue([fn = std::move(fn), t = std::chrono::steady_clock::now()] {
      t_accepted_at = t;
      fn();
    });
  }
  void shutdown() override { pool_.shutdown(); }

 private:
  httplib::ThreadPool pool_;
};

}  // namespace

struct Server::Impl {
  ServerConfig config;
  httplib::Server http;
  moderate::SettingsStore settings;
  JobRunner runner;
  AuditLog audit;
  std::unique_ptr<embed::TextEmbedder> similarity_embedder;
  std::mutex embedder_mutex;
  int bound_port = -1;

  explicit Impl(ServerConfig c)
      : config(std::move(c)),
        settings(config.data_dir / "classes"),
        runner(config.data_dir / "jobs", config.job_queue_limit),
        audit(config.data_dir / "audit.ndjson", load_or_create_salt(config.data_dir)),
        similarity_embedder(embed::make_embedder(config.similarity_embedding)) {
    if (const char* env = std::getenv(kApiTokenEnv); env && *env) config.bearer_token = env;
    routes();
  }

  fs::path corpus_path(const std::string& ref) const {
    std::string name = ref;
    if (!std::regex_match(name, kRefPattern)) throw api_error(400, "bad_request", "invalid corpus reference");
    if (name.size() < 5 || name.substr(name.size() - 5) != ".json") name += ".json";
    const auto path = config.corpus_dir / name;
    if (!fs::exists(path)) throw UnknownCorpus("no corpus '" + ref + "'");
    return path;
  }

  std::string class_id(const httplib::Request& req) const {
    const auto id = req.path_params.at("id");
    if (!moderate::valid_class_id(id)) throw api_error(400, "bad_request", "invalid class id");
    return id;
  }

  bool authorized(const httplib::Request& req) const {
    if (!config.bearer_token) return true;
    return req.get_header_value("Authorization") == "Bearer " + *config.bearer_token;
  }

  template <class F>
  httplib::Server::Handler guarded(F f) {
    return [this, f](const httplib::Request& req, httplib::Response& res) {
      try {
        if (!authorized(req)) {
          send_error(res, api_error(401, "bad_request", "missing or invalid bearer token"));
          return;
        }
        f(req, res);
      } catch (const ApiError& e) {
        send_error(res, e);
      } catch (const QueueFull& e) {
        res.set_header("Retry-After", std::to_string(config.retry_after_s));
        send_error(res, api_error(503, "internal", e.what(), {{"kind", e.kind()}}));
      } catch (const std::exception& e) {
        send_error(res, to_api_error(e));
      } catch (...) {
        send_error(res, api_error(500, "internal", "internal error"));
      }
    };
  }

  void routes() {
    http.set_read_timeout(config.request_timeout_s, 0);
    http.set_write_timeout(config.request_timeout_s, 0);
    // Small JSON envelope on top of the text limit.
    http.set_payload_max_length(config.max_text_bytes * 8 + 4096);
    const int threads = config.threads;
    http.new_task_queue = [threads] { return new DeadlineQueue(static_cast<std::size_t>(threads), 1024); };
    // A request that sat in the accept queue past the timeout is turned away.
    http.set_pre_routing_handler([this](const httplib::Request&, httplib::Response& res) {
      if (!t_accepted_at) return httplib::Server::HandlerResponse::Unhandled;
      const auto waited = std::chrono::steady_clock::now() - *t_accepted_at;
      t_accepted_at.reset();
      if (waited < std::chrono::seconds(config.request_timeout_s)) return httplib::Server::HandlerResponse::Unhandled;
      res.set_header("Retry-After", std::to_string(config.retry_after_s));
      send_error(res, api_error(503, "internal", "server busy"));
      return httplib::Server::HandlerResponse::Handled;
    });
    http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      switch (res.status) {
        case 404: send_error(res, api_error(404, "not_found", "no such endpoint")); break;
        case 413: send_error(res, api_error(413, "bad_request", "request body too large")); break;
        case 503:
          res.set_header("Retry-After", "1");
          send_error(res, api_error(503, "internal", "server busy"));
          break;
        default:
          send_error(res, api_error(res.status, res.status >= 500 ? "internal" : "bad_request", "request failed"));
      }
    });
    http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
      send_error(res, api_error(500, "internal", "internal error"));
    });
    if (config.ui_dir) {
      if (!http.set_mount_point("/ui", config.ui_dir->string())) {
        throw ConfigError("ui_dir " + config.ui_dir->string() + " is not a directory");
      }
    }

    http.Get("/schema", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, classify::schema_json());
    });
    http.Get("/health", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"status", "ok"}});
    });

    http.Post("/classify", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req);
      const auto text = field<std::string>(body, "text");
      if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw api_error(400, "bad_request", "text is empty");
      }
      if (text.size() > config.max_text_bytes) {
        throw api_error(400, "bad_request", "text exceeds " + std::to_string(config.max_text_bytes) + " bytes");
      }
      auto provider = classify::make_provider(config.provider);
      auto c = classify::classify_statement(text, *provider);
      send_json(res, 200, classify::to_json(c));
    }));

    http.Get("/classes/:id/settings", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto s = settings.get(class_id(req));
      res.set_header("ETag", etag(s.version));
      send_json(res, 200, moderate::to_json(s));
    }));

    http.Put("/classes/:id/settings", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto id = class_id(req);
      const auto body = parse_body(req);
      const auto values = values_field(body, "values", true);
      const auto overrides = values_field(body, "overrides", false);
      const bool confirm = body.contains("confirmed") ? field<bool>(body, "confirmed") : false;
      std::optional<double> threshold;
      if (body.contains("similarity_threshold") && !body.at("similarity_threshold").is_null()) {
        threshold = field<double>(body, "similarity_threshold");
      }
      auto version = parse_version(req);
      if (!version && body.contains("version") && !body.at("version").is_null()) {
        version = field<long long>(body, "version");
      }
      const auto s = settings.put(id, values, overrides, confirm, version, threshold);
      res.set_header("ETag", etag(s.version));
      send_json(res, 200, moderate::to_json(s));
    }));

    http.Put("/classes/:id/references/:kind", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto id = class_id(req);
      const auto kind = moderate::kind_from_string(req.path_params.at("kind"));
      const auto body = parse_body(req);
      const auto texts = field<std::vector<std::string>>(body, "texts");
      settings.get(id);
      settings.put_references(id, kind, texts);
      send_json(res, 200, {{"class_id", id}, {"kind", std::string(moderate::to_string(kind))}, {"count", texts.size()}});
    }));

    http.Post("/classes/:id/moderate", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto id = class_id(req);
      const auto body = parse_body(req);
      moderate::TutorRequest request;
      request.class_id = id;
      request.kind = moderate::kind_from_string(field<std::string>(body, "kind"));
      request.question = field<std::string>(body, "question");
      if (request.question.size() > config.max_text_bytes) {
        throw api_error(400, "bad_request", "question exceeds " + std::to_string(config.max_text_bytes) + " bytes");
      }
      const auto s = settings.get(id);
      if (!s.confirmed) throw moderate::UnconfirmedSettings("settings for class '" + id + "' are not confirmed");
      if (request.question.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw api_error(400, "bad_request", "question is empty");
      }
      moderate::Similarity sim;
      if (request.kind == moderate::RequestKind::Learning) {
        std::lock_guard lock(embedder_mutex);
        for (auto kind : {moderate::RequestKind::Assignment, moderate::RequestKind::Assessment}) {
          const auto refs = settings.references(id, kind);
          if (refs.empty()) continue;
          const double v = moderate::assignment_similarity(request.question, refs, *similarity_embedder);
          (kind == moderate::RequestKind::Assignment ? sim.assignment : sim.assessment) = v;
        }
      }
      const auto decision = moderate::decide(s, request, sim, config.moderation);
      audit.append(id, request.kind, request.question, decision);
      auto out = moderate::to_json(decision);
      out["similarity"] = {{"assignment", sim.assignment ? json(*sim.assignment) : json(nullptr)},
                           {"assessment", sim.assessment ? json(*sim.assessment) : json(nullptr)}};
      send_json(res, 200, out);
    }));

    http.Get("/corpora/:ref", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto path = corpus_path(req.path_params.at("ref"));
      send_json(res, 200, corpus::to_json(corpus::FileCorpusStore(path).load()));
    }));

    http.Post("/corpora/:ref/policies", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto path = corpus_path(req.path_params.at("ref"));
      const auto body = parse_body(req);
      corpus::PolicyText policy;
      policy.text = field<std::string>(body, "text");
      if (body.contains("timestamp") && !body.at("timestamp").is_null()) {
        auto t = Timestamp::parse(field<std::string>(body, "timestamp"));
        if (!t) throw api_error(400, "bad_request", "timestamp must be 'YYYY-MM-DD HH:MM:SS'");
        policy.timestamp = *t;
      } else {
        policy.timestamp = Timestamp::now();
      }
      corpus::FileCorpusStore store(path);
      const auto updated = store.upsert(field<std::string>(body, "node_id"), policy);
      send_json(res, 200, {{"segments", updated.segments.size()}, {"nodes", updated.node_count()}});
    }));

    http.Post("/jobs/discover", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req);
      const auto ref = field<std::string>(body, "corpus_ref");
      const auto path = corpus_path(ref);
      auto job_config = config.discover_defaults;
      if (body.contains("config") && !body.at("config").is_null()) {
        job_config = pipeline::discover_config_from_json(body.at("config"));
      }
      pipeline::validate(job_config);
      json request = {{"corpus_ref", ref}, {"config", pipeline::to_json(job_config)}};
      const auto record = runner.submit(JobKind::Discover, request, [path, job_config](const fs::path& dir) {
        const auto corpus = corpus::load_corpus(path);
        const auto model = pipeline::discover(corpus, job_config);
        const auto out = dir / "topic_model.json";
        topics::save_topic_model(model, out);
        json summary = {{"n_topics", model.representations.size()},
                        {"coherence", model.coherence ? json(*model.coherence) : json(nullptr)}};
        return std::pair{out, summary};
      });
      send_json(res, 202, to_json(record));
    }));

    http.Post("/jobs/sweep", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req);
      const auto ref = field<std::string>(body, "corpus_ref");
      const auto path = corpus_path(ref);
      if (!body.contains("plan")) throw api_error(400, "bad_request", "missing field 'plan'");
      const auto plan = sweep::plan_from_json(body.at("plan"));
      sweep::validate(plan);
      json request = {{"corpus_ref", ref}, {"plan", sweep::to_json(plan)}};
      const auto record = runner.submit(JobKind::Sweep, request, [path, plan](const fs::path& dir) {
        const auto corpus = corpus::load_corpus(path);
        sweep::SweepOptions options;
        options.journal = dir / sweep::kJournalName;
        const auto result = sweep::run_sweep(plan, corpus, options);
        const auto out = dir / "report";
        sweep::emit_report(result, out);
        json summary = {{"rows", result.rows.size()}};
        if (const auto* best = result.find(result.best)) {
          summary["best_fingerprint"] = best->fingerprint;
          summary["best_coherence"] = best->coherence;
        }
        return std::pair{out, summary};
      });
      send_json(res, 202, to_json(record));
    }));

    http.Get("/jobs/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, 200, to_json(runner.get(req.path_params.at("id"))));
    }));
  }
};

Server::Server(ServerConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Server::~Server() { stop(); }

int Server::bind() {
  if (impl_->bound_port > 0) return impl_->bound_port;
  const auto& c = impl_->config;
  if (c.port == 0) {
    impl_->bound_port = impl_->http.bind_to_any_port(c.host);
  } else if (impl_->http.bind_to_port(c.host, c.port)) {
    impl_->bound_port = c.port;
  }
  if (impl_->bound_port <= 0) {
    throw EnvironmentError("cannot bind " + c.host + ":" + std::to_string(c.port));
  }
  return impl_->bound_port;
}

void Server::listen() {
  bind();
  impl_->http.listen_after_bind();
}

void Server::stop() {
  if (impl_ && impl_->http.is_running()) impl_->http.stop();
}

void Server::wait_until_ready() const { impl_->http.wait_until_ready(); }

int Server::port() const { return impl_->bound_port; }

const ServerConfig& Server::config() const { return impl_->config; }

JobRunner& Server::jobs() { return impl_->runner; }

}  // namespace policyforge::service
