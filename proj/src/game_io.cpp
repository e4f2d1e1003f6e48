#include "qtrust/game_io.hpp"

#include <istream>
#include <ostream>
#include <string>

namespace qtrust::game {

using nlohmann::json;

json to_json(const BoardSpec& spec) {
  json ladders = json::array();
  for (const auto& v : spec.vertical_segments)
    ladders.push_back({{"column", v.column}, {"row_a", v.row_a}, {"row_b", v.row_b}});
  return {{"schema_version", kBoardSchemaVersion},
          {"width", spec.width},
          {"height", spec.height},
          {"horizontal_levels", spec.horizontal_levels},
          {"vertical_segments", ladders},
          {"enemy_count", spec.enemy_count},
          {"player_start", {{"x", spec.player_start.x}, {"y", spec.player_start.y}}},
          {"rng_seed", spec.rng_seed},
          {"starting_lives", spec.starting_lives},
          {"tick_limit", spec.tick_limit}};
}

BoardSpec board_spec_from_json(const json& j) {
  const int version = j.value("schema_version", 0);
  if (version != kBoardSchemaVersion)
    throw InvalidSpec("unsupported board schema_version " + std::to_string(version));
  BoardSpec spec;
  try {
    spec.width = j.at("width").get<int>();
    spec.height = j.at("height").get<int>();
    spec.horizontal_levels = j.at("horizontal_levels").get<std::vector<int>>();
    for (const auto& v : j.at("vertical_segments"))
      spec.vertical_segments.push_back(
          {v.at("column").get<int>(), v.at("row_a").get<int>(), v.at("row_b").get<int>()});
    spec.enemy_count = j.at("enemy_count").get<int>();
    spec.player_start = {j.at("player_start").at("x").get<int>(), j.at("player_start").at("y").get<int>()};
    spec.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    spec.starting_lives = j.value("starting_lives", 3);
    spec.tick_limit = j.value("tick_limit", 3000);
  } catch (const json::exception& e) {
    throw InvalidSpec(std::string("malformed board spec: ") + e.what());
  }
  return spec;
}

void write_action_log(std::ostream& out, const std::vector<ActionRecord>& log) {
  for (const auto& r : log)
    out << json{{"tick", r.tick}, {"action", action_name(r.action)}, {"reward", r.reward}}.dump() << '\n';
}

std::vector<ActionRecord> read_action_log(std::istream& in) {
  std::vector<ActionRecord> log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    const auto action = parse_action(j.at("action").get<std::string>());
    if (!action) throw std::invalid_argument("unknown action in log: " + j.at("action").get<std::string>());
    log.push_back({j.at("tick").get<int>(), *action, j.at("reward").get<double>()});
  }
  return log;
}

GameState replay(const BoardSpec& spec, const std::vector<ActionRecord>& log) {
  GameState state = new_game(spec);
  for (const auto& r : log) {
    if (r.tick != state.tick) throw GameError("action log tick out of sequence");
    auto res = step(state, r.action);
    if (res.reward != r.reward) throw GameError("replayed reward differs at tick " + std::to_string(r.tick));
    state = std::move(res.state);
  }
  return state;
}

}  // namespace qtrust::game
