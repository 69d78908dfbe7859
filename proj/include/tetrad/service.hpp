#pragma once

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "tetrad/bootstrap.hpp"
#include "tetrad/errors.hpp"
#include "tetrad/store.hpp"

namespace tetrad {

struct ServiceConfig {
  std::string listen_host = "127.0.0.1";
  int listen_port = 8080;
  std::filesystem::path data_dir = "./data";
  std::int64_t session_ttl_secs = 300;
  int bootstrap_workers = 4;
  // Seconds since the epoch. Defaults to the system clock.
  std::function<std::int64_t()> clock;
  // Session seeds and id suffixes. Defaults to a random_device-seeded engine.
  std::function<std::uint64_t()> random;
};

// LISTEN_ADDR (host:port), DATA_DIR, SESSION_TTL_SECS. Throws ValidationError
// on malformed values.
ServiceConfig config_from_env();

int http_status(ErrorCode code);

// Error body shared by every endpoint: {"error": {"code", "message"}}.
nlohmann::json error_body(ErrorCode code, const std::string& message);

struct GatedResource {
  std::string resource_id;
  std::string title;
  Consequence required;
};

// One resource per consequence.
std::vector<GatedResource> default_catalog();

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;

  nlohmann::json json() const { return nlohmann::json::parse(body); }
};

class TetradService {
public:
  explicit TetradService(ServiceConfig config, std::vector<GatedResource> catalog = default_catalog());
  ~TetradService();
  TetradService(const TetradService&) = delete;
  TetradService& operator=(const TetradService&) = delete;

  // Routes one request. Never throws; errors become JSON error responses.
  ApiResponse handle(const ApiRequest& request);

  // Handlers behind handle(). These throw tetrad::Error.
  // Body may name the account: {"account_id": "..."}; otherwise one is generated.
  nlohmann::json create_account(const nlohmann::json& body = nlohmann::json::object());
  nlohmann::json account_summary(const std::string& account_id);
  nlohmann::json start_bootstrap(const std::string& account_id, const nlohmann::json& body);
  nlohmann::json bootstrap_status(const std::string& account_id, const std::string& job_id);
  std::string face_crop(const std::string& account_id, const std::string& image_id);
  nlohmann::json register_images(const std::string& account_id, const nlohmann::json& body);
  nlohmann::json create_session(const std::string& account_id, const nlohmann::json& body);
  nlohmann::json add_move(const std::string& session_id, const nlohmann::json& body);
  nlohmann::json submit_session(const std::string& session_id);
  nlohmann::json get_resource(const std::string& resource_id, const std::string& session_id);
  nlohmann::json list_resources() const;

  // Re-derives every closed session's decision from the stored seed and
  // transcript. Throws IntegrityError on the first disagreement.
  void audit(const std::string& account_id);

  AccountStore& store() { return store_; }
  const ServiceConfig& config() const { return config_; }

  // Blocks until every bootstrap job has written its index.
  void wait_for_bootstraps();

private:
  struct Job {
    std::string account_id;
    std::unique_ptr<bootstrap::PipelineJob> pipeline;
    std::jthread finalizer;
    bool done = false;  // guarded by jobs_mu_
    std::string error;  // guarded by jobs_mu_
  };

  std::int64_t now() const;
  std::uint64_t next_random();
  AccountRecord load_account(const std::string& account_id);
  void finalize_job(Job& job);

  ServiceConfig config_;
  std::vector<GatedResource> catalog_;
  AccountStore store_;
  std::mutex random_mu_;
  std::mt19937_64 random_engine_;
  mutable std::mutex jobs_mu_;
  std::condition_variable jobs_cv_;
  std::map<std::string, std::unique_ptr<Job>> jobs_;
  int job_counter_ = 0;
};

}  // namespace tetrad
