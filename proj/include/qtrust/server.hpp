#pragma once

// HTTP front end for the session service. See docs/protocol.md.

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "qtrust/session.hpp"

namespace httplib {
class Server;
}

namespace qtrust::service {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path agent_dir = "agents";
  std::optional<std::filesystem::path> templates;  // builtin templates when absent
  int whatif_samples = whatif::kDefaultSampleCount;
  double default_speed = kDefaultTicksPerSecond;
  int worker_threads = 32;
};

// JSON config file; unknown keys are rejected. Missing keys keep defaults.
ServiceConfig load_service_config(const std::filesystem::path& file);
nlohmann::json to_json(const ServiceConfig& c);

// QTRUST_PORT and QTRUST_AGENT_DIR override the file. `getenv` is injectable
// for tests.
void apply_env_overrides(ServiceConfig& c,
                         const std::function<const char*(const char*)>& getenv = [](const char* k) {
                           return std::getenv(k);
                         });

class Server {
 public:
  Server(SessionManager& manager, const ServiceConfig& config);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds config.host:config.port (0 picks a free port) and returns the
  // bound port, or -1.
  int bind();
  // Serves until stop(); call after bind().
  bool serve();
  void stop();

 private:
  void routes();

  SessionManager& manager_;
  ServiceConfig config_;
  std::unique_ptr<httplib::Server> http_;
};

}  // namespace qtrust::service
