#include "qtrust/server.hpp"

#include <atomic>
#include <fstream>
#include <httplib.h>

namespace qtrust::service {

using nlohmann::json;

ServiceConfig load_service_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::invalid_argument("cannot open config " + file.string());
  const json j = json::parse(in);
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  ServiceConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "host") c.host = value.get<std::string>();
    else if (key == "port") c.port = value.get<int>();
    else if (key == "agent_dir") c.agent_dir = value.get<std::string>();
    else if (key == "templates") c.templates = value.is_null() ? std::nullopt
                                                               : std::optional<std::filesystem::path>(value.get<std::string>());
    else if (key == "whatif_samples") c.whatif_samples = value.get<int>();
    else if (key == "default_speed") c.default_speed = value.get<double>();
    else if (key == "worker_threads") c.worker_threads = value.get<int>();
    else throw std::invalid_argument("unknown config key " + key);
  }
  if (c.port < 0 || c.port > 65535) throw std::invalid_argument("port out of range");
  if (c.whatif_samples < 1) throw std::invalid_argument("whatif_samples must be at least 1");
  if (c.default_speed < 0) throw std::invalid_argument("default_speed must be non-negative");
  if (c.worker_threads < 2) throw std::invalid_argument("worker_threads must be at least 2");
  return c;
}

json to_json(const ServiceConfig& c) {
  return {{"host", c.host},
          {"port", c.port},
          {"agent_dir", c.agent_dir.string()},
          {"templates", c.templates ? json(c.templates->string()) : json(nullptr)},
          {"whatif_samples", c.whatif_samples},
          {"default_speed", c.default_speed},
          {"worker_threads", c.worker_threads}};
}

void apply_env_overrides(ServiceConfig& c, const std::function<const char*(const char*)>& getenv) {
  if (const char* port = getenv("QTRUST_PORT"); port && *port) {
    std::size_t used = 0;
    const int p = std::stoi(port, &used);
    if (used != std::string_view(port).size() || p < 0 || p > 65535)
      throw std::invalid_argument(std::string("bad QTRUST_PORT ") + port);
    c.port = p;
  }
  if (const char* dir = getenv("QTRUST_AGENT_DIR"); dir && *dir) c.agent_dir = dir;
}

namespace {

void reply(httplib::Response& res, int status, json body) {
  body["protocol_version"] = kProtocolVersion;
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
  reply(res, status, {{"error", message}});
}

json body_of(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json j = json::parse(req.body);
  if (!j.is_object()) throw std::invalid_argument("request body must be a JSON object");
  return j;
}

// Runs `fn`, mapping service errors onto status codes.
template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const NotFound& e) {
    reply_error(res, 404, e.what());
  } catch (const SessionError& e) {
    reply_error(res, 409, e.what());
  } catch (const json::exception& e) {
    reply_error(res, 400, e.what());
  } catch (const std::invalid_argument& e) {
    reply_error(res, 400, e.what());
  } catch (const std::exception& e) {
    reply_error(res, 500, e.what());
  }
}

}  // namespace

Server::Server(SessionManager& manager, const ServiceConfig& config)
    : manager_(manager), config_(config), http_(std::make_unique<httplib::Server>()) {
  const auto threads = static_cast<std::size_t>(config_.worker_threads);
  http_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  routes();
}

Server::~Server() { stop(); }

int Server::bind() {
  if (config_.port == 0) return http_->bind_to_any_port(config_.host);
  return http_->bind_to_port(config_.host, config_.port) ? config_.port : -1;
}

bool Server::serve() { return http_->listen_after_bind(); }

void Server::stop() {
  if (http_ && http_->is_running()) http_->stop();
}

void Server::routes() {
  auto& s = *http_;
  auto& mgr = manager_;
  const double default_speed = config_.default_speed;

  s.Get("/api/agents", [&mgr](const httplib::Request&, httplib::Response& res) {
    json agents = json::array();
    for (const auto& e : mgr.registry().list()) agents.push_back(to_json(e));
    reply(res, 200, {{"agents", agents}});
  });

  s.Post("/api/sessions", [&mgr, default_speed](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = body_of(req);
      const auto agent_id = body.at("agent_id").get<std::string>();
      const auto seed = body.value("seed", std::uint64_t{1});
      const auto speed = body.value("speed", default_speed);
      const auto id = mgr.start(agent_id, seed, speed);
      reply(res, 201, mgr.describe(id));
    });
  });

  s.Get(R"(/api/sessions/([^/]+))", [&mgr](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, mgr.describe(req.matches[1])); });
  });

  s.Post(R"(/api/sessions/([^/]+)/(pause|resume|stop|step))",
         [&mgr](const httplib::Request& req, httplib::Response& res) {
           guarded(res, [&] {
             const std::string id = req.matches[1];
             const std::string action = req.matches[2];
             if (action == "pause") mgr.pause(id);
             else if (action == "resume") mgr.resume(id);
             else if (action == "stop") mgr.stop(id);
             else mgr.step_once(id);
             reply(res, 200, mgr.describe(id));
           });
         });

  s.Post(R"(/api/sessions/([^/]+)/speed)", [&mgr](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      mgr.set_speed(id, body_of(req).at("speed").get<double>());
      reply(res, 200, mgr.describe(id));
    });
  });

  s.Post(R"(/api/sessions/([^/]+)/whatif)", [&mgr](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = body_of(req);
      std::optional<std::uint64_t> seed;
      if (body.contains("seed") && !body["seed"].is_null()) seed = body["seed"].get<std::uint64_t>();
      reply(res, 200, mgr.query_whatif(req.matches[1], seed));
    });
  });

  s.Get(R"(/api/sessions/([^/]+)/trace)", [&mgr](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      res.set_content(mgr.export_trace(req.matches[1]), "application/x-ndjson");
      res.status = 200;
    });
  });

  s.Get(R"(/api/sessions/([^/]+)/events)", [&mgr](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      std::size_t from = 0;
      if (req.has_param("from")) from = std::stoull(req.get_param_value("from"));
      mgr.status(id);  // 404 before the stream opens
      auto next = std::make_shared<std::size_t>(from);
      res.set_chunked_content_provider(
          "application/x-ndjson", [&mgr, id, next](std::size_t, httplib::DataSink& sink) {
            bool done = false;
            std::vector<json> batch;
            try {
              batch = mgr.events(id, *next, std::chrono::milliseconds(250), &done);
            } catch (const std::exception&) {
              sink.done();
              return true;
            }
            for (const auto& e : batch) {
              const std::string line = e.dump() + "\n";
              if (!sink.write(line.data(), line.size())) return false;
            }
            *next += batch.size();
            if (done) sink.done();
            return true;
          });
    });
  });
}

}  // namespace qtrust::service
