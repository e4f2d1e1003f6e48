#pragma once

// Rule-preserving edits to a live game state: add a ladder, fill a segment,
// move the player, remove an enemy.

#include <json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qtrust/game.hpp"

namespace qtrust::interventions {

struct AddLineSegment {
  int column = 0;
  int row_a = 0;
  int row_b = 0;
  bool operator==(const AddLineSegment&) const = default;
};

// Indexes Board::segments() of the state it is applied to.
struct FillSegment {
  int segment_id = 0;
  bool operator==(const FillSegment&) const = default;
};

struct MovePlayer {
  game::Tile target;
  bool operator==(const MovePlayer&) const = default;
};

struct RemoveEnemy {
  int enemy_index = 0;
  bool operator==(const RemoveEnemy&) const = default;
};

using Intervention = std::variant<AddLineSegment, FillSegment, MovePlayer, RemoveEnemy>;

enum class Kind { AddLineSegment, FillSegment, MovePlayer, RemoveEnemy };

inline constexpr std::array<Kind, 3> kPanelKinds = {Kind::AddLineSegment, Kind::FillSegment,
                                                    Kind::MovePlayer};

Kind kind_of(const Intervention& iv);
std::string_view kind_name(Kind kind);
std::optional<Kind> parse_kind(std::string_view name);

class InvalidIntervention : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// std::nullopt when the intervention is valid against `state`; otherwise a
// description of the violated rule.
std::optional<std::string> validate(const game::GameState& state, const Intervention& iv);

// Throws InvalidIntervention carrying the validate() description.
game::GameState apply(const game::GameState& state, const Intervention& iv);

// Every valid intervention of `kind`, in a fixed order.
std::vector<Intervention> enumerate(const game::GameState& state, Kind kind);

std::string describe(const Intervention& iv);

nlohmann::json to_json(const Intervention& iv);
Intervention intervention_from_json(const nlohmann::json& j);

}  // namespace qtrust::interventions
