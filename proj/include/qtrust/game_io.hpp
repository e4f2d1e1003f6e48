#pragma once

// JSON schema for BoardSpec and the newline-delimited action log used for
// episode replay.

#include <iosfwd>
#include <json.hpp>
#include <vector>

#include "qtrust/game.hpp"

namespace qtrust::game {

inline constexpr int kBoardSchemaVersion = 1;

nlohmann::json to_json(const BoardSpec& spec);
BoardSpec board_spec_from_json(const nlohmann::json& j);

struct ActionRecord {
  int tick = 0;
  Action action = Action::NoOp;
  double reward = 0.0;
  bool operator==(const ActionRecord&) const = default;
};

void write_action_log(std::ostream& out, const std::vector<ActionRecord>& log);
std::vector<ActionRecord> read_action_log(std::istream& in);

// Replays a log from new_game(spec). Throws GameError if a recorded reward
// disagrees with the emulator.
GameState replay(const BoardSpec& spec, const std::vector<ActionRecord>& log);

}  // namespace qtrust::game
