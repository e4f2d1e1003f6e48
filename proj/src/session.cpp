#include "qtrust/session.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>

#include "qtrust/trust_metrics.hpp"

namespace qtrust::service {

using nlohmann::json;
namespace fs = std::filesystem;

std::string variant_display_name(agent::Variant v) {
  switch (v) {
    case agent::Variant::Standard: return "Standard agent";
    case agent::Variant::RandomLadders: return "Random-ladders agent";
    case agent::Variant::RandomStart: return "Random-start agent";
  }
  return "";
}

std::string variant_description(agent::Variant v) {
  switch (v) {
    case agent::Variant::Standard:
      return "This agent was trained on the standard board, with the usual ladders and starting position.";
    case agent::Variant::RandomLadders:
      return "This agent was trained in a scenario where some ladders have been randomly added.";
    case agent::Variant::RandomStart:
      return "This agent was trained in a scenario where the player starts from a random position on the board.";
  }
  return "";
}

Registry Registry::load(const fs::path& dir) {
  Registry r;
  if (!fs::is_directory(dir)) return r;
  std::vector<fs::path> found;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory() && fs::exists(e.path() / "bundle.json")) found.push_back(e.path());
  std::sort(found.begin(), found.end());
  for (const auto& p : found) r.add(std::make_shared<agent::AgentBundle>(agent::load_bundle(p)));
  return r;
}

void Registry::add(std::shared_ptr<const agent::AgentBundle> bundle) {
  if (find(bundle->id)) throw std::invalid_argument("duplicate agent id " + bundle->id);
  AgentRegistryEntry e;
  e.id = bundle->id;
  e.display_name = variant_display_name(bundle->variant);
  e.description = variant_description(bundle->variant);
  e.bundle = std::move(bundle);
  entries_.push_back(std::move(e));
}

const AgentRegistryEntry* Registry::find(const std::string& id) const {
  for (const auto& e : entries_)
    if (e.id == id) return &e;
  return nullptr;
}

json to_json(const AgentRegistryEntry& e) {
  return {{"id", e.id},
          {"display_name", e.display_name},
          {"description", e.description},
          {"variant", agent::variant_name(e.bundle->variant)},
          {"baseline_mean_reward", e.bundle->baseline_mean_reward},
          {"calibrated", e.bundle->calibration.has_value()}};
}

std::string_view status_name(Status s) {
  switch (s) {
    case Status::Running: return "running";
    case Status::Paused: return "paused";
    case Status::Finished: return "finished";
  }
  return "";
}

std::vector<std::string> render_cells(const game::GameState& state) {
  const auto& board = *state.board;
  std::vector<std::string> rows(static_cast<std::size_t>(board.height()), std::string(board.width(), ' '));
  for (int idx : board.track_cells()) {
    const auto t = board.tile(idx);
    rows[t.y][t.x] = state.painted[idx] ? '#' : '.';
  }
  return rows;
}

namespace {

json tile_json(game::Tile t) { return {{"x", t.x}, {"y", t.y}}; }

json point_json(const metrics::TrustPoint& p, const agent::AgentBundle& agent,
                const narrative::Templates& templates) {
  json j = metrics::to_json(p);
  j["narrative"] = agent.calibration ? narrative::to_json(narrative::narrate(p, *agent.calibration, templates))
                                     : json(nullptr);
  return j;
}

}  // namespace

Session::Session(std::string id, std::shared_ptr<const agent::AgentBundle> agent, std::uint64_t seed,
                 std::shared_ptr<const narrative::Templates> templates, int whatif_samples)
    : id_(std::move(id)),
      agent_(std::move(agent)),
      seed_(seed),
      templates_(std::move(templates)),
      whatif_samples_(whatif_samples),
      state_(game::new_game(agent::episode_board(agent_->variant, seed))) {
  trace_.gamma = agent_->hyperparams.gamma;
  emit_frame();
}

json Session::record(json payload) {
  payload["seq"] = events_.size();
  payload["protocol_version"] = kProtocolVersion;
  payload["session_id"] = id_;
  events_.push_back(payload);
  return payload;
}

void Session::emit_frame() {
  json enemies = json::array();
  for (const auto& e : state_.enemies) enemies.push_back(tile_json(e.pos));
  record({{"type", "frame"},
          {"tick", state_.tick},
          {"width", state_.board->width()},
          {"height", state_.board->height()},
          {"cells", render_cells(state_)},
          {"player", tile_json(state_.player)},
          {"enemies", enemies},
          {"score", state_.score},
          {"lives", state_.lives},
          {"terminal", state_.terminal}});
}

bool Session::advance() {
  if (finished_) return false;
  const int t = static_cast<int>(trace_.size());
  trace_.records.push_back(agent::greedy_step(agent_->q, state_, t));
  const auto& rec = trace_.records.back();
  metrics::TrustPoint p{t, metrics::vee_cumulative(trace_, trace_.size() - 1),
                        metrics::dnts(rec.embedding, agent_->embeddings), metrics::VeeMode::Cumulative};
  record({{"type", "trust"},
          {"tick", t},
          {"action", game::action_name(rec.action)},
          {"reward", rec.reward},
          {"q_value", rec.q_value},
          {"point", point_json(p, *agent_, *templates_)}});
  emit_frame();
  if (state_.terminal) {
    trace_.complete = true;
    finish(false);
  }
  return true;
}

void Session::stop() {
  if (!finished_) finish(true);
}

void Session::finish(bool stopped) {
  finished_ = true;
  json curve = nullptr;
  if (trace_.complete) {
    curve = json::array();
    for (const auto& p : metrics::trace_curve(trace_, agent_->embeddings, metrics::VeeMode::Instantaneous))
      curve.push_back(point_json(p, *agent_, *templates_));
  }
  record({{"type", "episode_end"},
          {"final_score", state_.score},
          {"ticks", trace_.size()},
          {"complete", trace_.complete},
          {"stopped", stopped},
          {"mode", metrics::mode_name(metrics::VeeMode::Instantaneous)},
          {"curve", curve}});
}

std::uint64_t Session::whatif_seed() const {
  return derive_seed(seed_, "whatif", static_cast<std::uint64_t>(state_.tick));
}

json Session::evaluate_whatif(const game::GameState& snapshot, std::uint64_t seed) const {
  try {
    json panel = json::array();
    for (const auto& entry : whatif::panel(*agent_, snapshot, seed, whatif_samples_))
      panel.push_back(whatif::to_json(entry));
    return {{"type", "whatif"},
            {"tick", snapshot.tick},
            {"seed", seed},
            {"state_hash", snapshot.hash()},
            {"panel", panel}};
  } catch (const std::exception& e) {
    return {{"type", "error"}, {"context", "whatif"}, {"tick", snapshot.tick}, {"message", e.what()}};
  }
}

json Session::query_whatif(std::optional<std::uint64_t> seed) {
  if (finished_) throw SessionError("session " + id_ + " is finished");
  return record(evaluate_whatif(state_, seed.value_or(whatif_seed())));
}

std::string Session::export_trace() const {
  if (!finished_) throw SessionError("session " + id_ + " has not finished");
  const auto mode = trace_.complete ? metrics::VeeMode::Instantaneous : metrics::VeeMode::Cumulative;
  std::ostringstream out;
  const auto points = trace_.size() == 0 ? std::vector<metrics::TrustPoint>{}
                                         : metrics::trace_curve(trace_, agent_->embeddings, mode);
  metrics::write_trace_jsonl(out, trace_, points, agent_->id);
  return out.str();
}

SessionManager::SessionManager(Registry registry, std::shared_ptr<const narrative::Templates> templates,
                               int whatif_samples)
    : registry_(std::move(registry)), templates_(std::move(templates)), whatif_samples_(whatif_samples) {}

SessionManager::~SessionManager() { shutdown(); }

void SessionManager::shutdown() {
  std::map<std::string, std::shared_ptr<Slot>> slots;
  {
    std::lock_guard lk(mutex_);
    slots = slots_;
  }
  for (auto& [id, s] : slots) {
    {
      std::lock_guard lk(s->mutex);
      s->quit = true;
    }
    s->changed.notify_all();
    if (s->worker.joinable()) s->worker.join();
  }
}

std::shared_ptr<SessionManager::Slot> SessionManager::slot(const std::string& id) const {
  std::lock_guard lk(mutex_);
  auto it = slots_.find(id);
  if (it == slots_.end()) throw NotFound("unknown session " + id);
  return it->second;
}

std::string SessionManager::start(const std::string& agent_id, std::uint64_t seed, double speed) {
  const auto* entry = registry_.find(agent_id);
  if (!entry) throw NotFound("unknown agent " + agent_id);
  if (!(speed >= 0.0)) throw SessionError("speed must be non-negative");
  std::string id;
  {
    std::lock_guard lk(mutex_);
    id = "s" + std::to_string(next_id_++);
  }
  auto s = std::make_shared<Slot>(Session(id, entry->bundle, seed, templates_, whatif_samples_));
  s->speed = speed;
  s->status = speed > 0.0 ? Status::Running : Status::Paused;
  s->worker = std::thread([raw = s.get()] { run(*raw); });
  std::lock_guard lk(mutex_);
  slots_.emplace(id, std::move(s));
  return id;
}

void SessionManager::run(Slot& s) {
  using clock = std::chrono::steady_clock;
  std::unique_lock lk(s.mutex);
  while (!s.quit && s.status != Status::Finished) {
    if (s.status != Status::Running || s.speed <= 0.0) {
      s.changed.wait(lk);
      continue;
    }
    const auto next = clock::now() + std::chrono::duration_cast<clock::duration>(
                                         std::chrono::duration<double>(1.0 / s.speed));
    s.session.advance();
    if (s.session.finished()) s.status = Status::Finished;
    s.changed.notify_all();
    s.changed.wait_until(lk, next, [&] { return s.quit || s.status != Status::Running; });
  }
}

void SessionManager::pause(const std::string& id) {
  auto s = slot(id);
  std::lock_guard lk(s->mutex);
  if (s->status == Status::Finished) throw SessionError("session " + id + " is finished");
  s->status = Status::Paused;
  s->changed.notify_all();
}

void SessionManager::resume(const std::string& id) {
  auto s = slot(id);
  std::lock_guard lk(s->mutex);
  if (s->status == Status::Finished) throw SessionError("session " + id + " is finished");
  if (s->speed <= 0.0) s->speed = kDefaultTicksPerSecond;
  s->status = Status::Running;
  s->changed.notify_all();
}

void SessionManager::stop(const std::string& id) {
  auto s = slot(id);
  std::lock_guard lk(s->mutex);
  s->session.stop();
  s->status = Status::Finished;
  s->changed.notify_all();
}

void SessionManager::set_speed(const std::string& id, double speed) {
  if (!(speed >= 0.0)) throw SessionError("speed must be non-negative");
  auto s = slot(id);
  std::lock_guard lk(s->mutex);
  s->speed = speed;
  if (speed == 0.0 && s->status == Status::Running) s->status = Status::Paused;
  s->changed.notify_all();
}

void SessionManager::step_once(const std::string& id) {
  auto s = slot(id);
  std::lock_guard lk(s->mutex);
  if (s->status != Status::Paused) throw SessionError("session " + id + " is not paused");
  s->session.advance();
  if (s->session.finished()) s->status = Status::Finished;
  s->changed.notify_all();
}

Status SessionManager::status(const std::string& id) const {
  auto s = slot(id);
  std::lock_guard lk(s->mutex);
  return s->status;
}

json SessionManager::describe(const std::string& id) const {
  auto s = slot(id);
  std::lock_guard lk(s->mutex);
  return {{"protocol_version", kProtocolVersion},
          {"session_id", id},
          {"agent_id", s->session.agent().id},
          {"seed", s->session.seed()},
          {"status", status_name(s->status)},
          {"speed", s->speed},
          {"tick", s->session.state().tick},
          {"score", s->session.state().score},
          {"lives", s->session.state().lives},
          {"events", s->session.events().size()}};
}

std::uint64_t SessionManager::state_hash(const std::string& id) const {
  auto s = slot(id);
  std::lock_guard lk(s->mutex);
  return s->session.state().hash();
}

std::int64_t SessionManager::tick(const std::string& id) const {
  auto s = slot(id);
  std::lock_guard lk(s->mutex);
  return s->session.state().tick;
}

json SessionManager::query_whatif(const std::string& id, std::optional<std::uint64_t> seed) {
  auto s = slot(id);
  game::GameState snapshot;
  std::uint64_t panel_seed = 0;
  {
    std::lock_guard lk(s->mutex);
    if (s->session.finished()) throw SessionError("session " + id + " is finished");
    snapshot = s->session.state();
    panel_seed = seed.value_or(s->session.whatif_seed());
  }
  // Rollouts run on the snapshot while the live episode keeps going.
  json payload = s->session.evaluate_whatif(snapshot, panel_seed);
  std::lock_guard lk(s->mutex);
  json event = s->session.record(std::move(payload));
  s->changed.notify_all();
  return event;
}

std::string SessionManager::export_trace(const std::string& id) const {
  auto s = slot(id);
  std::lock_guard lk(s->mutex);
  return s->session.export_trace();
}

std::vector<json> SessionManager::events(const std::string& id, std::size_t from, std::chrono::milliseconds wait,
                                         bool* done) const {
  auto s = slot(id);
  std::unique_lock lk(s->mutex);
  s->changed.wait_for(lk, wait, [&] { return s->session.events().size() > from || s->quit; });
  const auto& log = s->session.events();
  std::vector<json> out;
  for (std::size_t i = from; i < log.size(); ++i) out.push_back(log[i]);
  if (done) *done = s->session.finished() && from + out.size() >= log.size();
  return out;
}

}  // namespace qtrust::service
