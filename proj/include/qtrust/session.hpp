#pragma once

// Live sessions: an agent plays a greedy episode while the service emits
// frames, trust points with narratives, what-if panels and an episode end
// marker as JSON events.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "qtrust/narrative.hpp"
#include "qtrust/qagent.hpp"
#include "qtrust/whatif.hpp"

namespace qtrust::service {

inline constexpr int kProtocolVersion = 1;
inline constexpr double kDefaultTicksPerSecond = 10.0;

struct AgentRegistryEntry {
  std::string id;
  std::string display_name;
  std::string description;
  std::shared_ptr<const agent::AgentBundle> bundle;
};

std::string variant_display_name(agent::Variant v);
std::string variant_description(agent::Variant v);

class Registry {
 public:
  // Every subdirectory holding a bundle.json, in name order. A missing or
  // empty directory gives an empty registry.
  static Registry load(const std::filesystem::path& dir);

  void add(std::shared_ptr<const agent::AgentBundle> bundle);
  const std::vector<AgentRegistryEntry>& list() const { return entries_; }
  const AgentRegistryEntry* find(const std::string& id) const;

 private:
  std::vector<AgentRegistryEntry> entries_;
};

nlohmann::json to_json(const AgentRegistryEntry& e);

class SessionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotFound : public SessionError {
 public:
  using SessionError::SessionError;
};

enum class Status { Running, Paused, Finished };
std::string_view status_name(Status s);

// Board rendering for Frame events: one string per row, ' ' off the track,
// '.' unpainted, '#' painted.
std::vector<std::string> render_cells(const game::GameState& state);

// Single-threaded session core. Event payloads carry "seq", "type" and
// "protocol_version"; seq numbers are consecutive from 0.
class Session {
 public:
  Session(std::string id, std::shared_ptr<const agent::AgentBundle> agent, std::uint64_t seed,
          std::shared_ptr<const narrative::Templates> templates, int whatif_samples = whatif::kDefaultSampleCount);

  const std::string& id() const { return id_; }
  const agent::AgentBundle& agent() const { return *agent_; }
  std::uint64_t seed() const { return seed_; }
  const game::GameState& state() const { return state_; }
  const metrics::EpisodeTrace& trace() const { return trace_; }
  bool finished() const { return finished_; }
  const std::vector<nlohmann::json>& events() const { return events_; }

  // Plays one tick and appends Trust(t) and Frame(t+1), plus EpisodeEnd when
  // the episode ends. Returns false when already finished.
  bool advance();

  // Ends an unfinished episode early; EpisodeEnd then carries no backfill.
  void stop();

  // Panel for the live state; appends and returns a WhatIf event, or an
  // Error event when evaluation fails. Throws SessionError once finished.
  nlohmann::json query_whatif(std::optional<std::uint64_t> seed = std::nullopt);

  // The two halves of query_whatif, so a caller can evaluate a snapshot
  // without holding the session. whatif_seed is the default panel seed.
  std::uint64_t whatif_seed() const;
  nlohmann::json evaluate_whatif(const game::GameState& snapshot, std::uint64_t seed) const;
  nlohmann::json record(nlohmann::json payload);

  // JSON-lines trace of the finished episode; throws SessionError before.
  std::string export_trace() const;

 private:
  void emit_frame();
  void finish(bool stopped);

  std::string id_;
  std::shared_ptr<const agent::AgentBundle> agent_;
  std::uint64_t seed_;
  std::shared_ptr<const narrative::Templates> templates_;
  int whatif_samples_;
  game::GameState state_;
  metrics::EpisodeTrace trace_;
  bool finished_ = false;
  std::vector<nlohmann::json> events_;
};

// Owns sessions and the threads that advance them at their tick rate.
class SessionManager {
 public:
  SessionManager(Registry registry, std::shared_ptr<const narrative::Templates> templates,
                 int whatif_samples = whatif::kDefaultSampleCount);
  ~SessionManager();
  SessionManager(const SessionManager&) = delete;
  SessionManager& operator=(const SessionManager&) = delete;

  const Registry& registry() const { return registry_; }

  // speed is ticks per second; 0 starts paused. Throws SessionError for
  // an unknown agent or a negative speed.
  std::string start(const std::string& agent_id, std::uint64_t seed, double speed = kDefaultTicksPerSecond);
  void pause(const std::string& id);
  void resume(const std::string& id);
  void stop(const std::string& id);
  void set_speed(const std::string& id, double speed);
  // Advance a paused session by one tick.
  void step_once(const std::string& id);

  Status status(const std::string& id) const;
  nlohmann::json describe(const std::string& id) const;
  std::uint64_t state_hash(const std::string& id) const;
  std::int64_t tick(const std::string& id) const;

  nlohmann::json query_whatif(const std::string& id, std::optional<std::uint64_t> seed = std::nullopt);
  std::string export_trace(const std::string& id) const;

  // Events with seq >= from; blocks up to `wait` for at least one when none
  // are available yet. `done` is set once the EpisodeEnd event is included.
  std::vector<nlohmann::json> events(const std::string& id, std::size_t from, std::chrono::milliseconds wait,
                                     bool* done = nullptr) const;

  void shutdown();

 private:
  struct Slot {
    explicit Slot(Session s) : session(std::move(s)) {}
    mutable std::mutex mutex;
    std::condition_variable changed;
    Session session;
    Status status = Status::Paused;
    double speed = 0.0;
    bool quit = false;
    std::thread worker;
  };

  std::shared_ptr<Slot> slot(const std::string& id) const;
  static void run(Slot& slot);

  Registry registry_;
  std::shared_ptr<const narrative::Templates> templates_;
  int whatif_samples_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Slot>> slots_;
  std::uint64_t next_id_ = 1;
};

}  // namespace qtrust::service
