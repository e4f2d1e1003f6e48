#include "qtrust/interventions.hpp"

#include <algorithm>

namespace qtrust::interventions {
namespace {

using game::GameState;
using nlohmann::json;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

std::vector<int> sorted_levels(const game::BoardSpec& spec) {
  std::vector<int> levels = spec.horizontal_levels;
  std::sort(levels.begin(), levels.end());
  return levels;
}

bool column_occupied(const game::BoardSpec& spec, int column, int lo, int hi) {
  return std::any_of(spec.vertical_segments.begin(), spec.vertical_segments.end(), [&](const auto& v) {
    return v.column == column && std::min(v.row_a, v.row_b) < hi && lo < std::max(v.row_a, v.row_b);
  });
}

std::optional<std::string> check(const GameState& state, const AddLineSegment& iv) {
  const auto& spec = state.spec();
  if (iv.column < 0 || iv.column >= spec.width) return "column outside the board";
  const int lo = std::min(iv.row_a, iv.row_b);
  const int hi = std::max(iv.row_a, iv.row_b);
  const auto levels = sorted_levels(spec);
  const auto it = std::find(levels.begin(), levels.end(), lo);
  if (it == levels.end() || std::next(it) == levels.end() || *std::next(it) != hi)
    return "segment must connect two adjacent horizontal levels";
  if (column_occupied(spec, iv.column, lo, hi)) return "duplicates an existing vertical segment";
  auto next = spec;
  next.vertical_segments.push_back({iv.column, lo, hi});
  try {
    game::Board::build(next);
  } catch (const game::InvalidSpec& e) {
    return std::string("board would break: ") + e.what();
  }
  return std::nullopt;
}

std::optional<std::string> check(const GameState& state, const FillSegment& iv) {
  const auto& segments = state.board->segments();
  if (iv.segment_id < 0 || static_cast<std::size_t>(iv.segment_id) >= segments.size())
    return "no such segment";
  const auto& cells = segments[iv.segment_id].cells;
  if (std::all_of(cells.begin(), cells.end(), [&](int c) { return state.painted[c] != 0; }))
    return "segment already painted";
  return std::nullopt;
}

std::optional<std::string> check(const GameState& state, const MovePlayer& iv) {
  if (!state.board->on_track(iv.target)) return "target is not on the track";
  const auto legal = game::legal_player_positions(state);
  if (!std::binary_search(legal.begin(), legal.end(), iv.target, [](game::Tile a, game::Tile b) {
        return std::pair(a.y, a.x) < std::pair(b.y, b.x);
      }))
    return "immediate death";
  return std::nullopt;
}

std::optional<std::string> check(const GameState& state, const RemoveEnemy& iv) {
  if (iv.enemy_index < 0 || static_cast<std::size_t>(iv.enemy_index) >= state.enemies.size())
    return "no such enemy";
  return std::nullopt;
}

}  // namespace

Kind kind_of(const Intervention& iv) { return static_cast<Kind>(iv.index()); }

std::string_view kind_name(Kind kind) {
  switch (kind) {
    case Kind::AddLineSegment: return "AddLineSegment";
    case Kind::FillSegment: return "FillSegment";
    case Kind::MovePlayer: return "MovePlayer";
    case Kind::RemoveEnemy: return "RemoveEnemy";
  }
  return "";
}

std::optional<Kind> parse_kind(std::string_view name) {
  for (Kind k : {Kind::AddLineSegment, Kind::FillSegment, Kind::MovePlayer, Kind::RemoveEnemy})
    if (kind_name(k) == name) return k;
  return std::nullopt;
}

std::optional<std::string> validate(const GameState& state, const Intervention& iv) {
  return std::visit([&](const auto& v) { return check(state, v); }, iv);
}

GameState apply(const GameState& state, const Intervention& iv) {
  if (auto violation = validate(state, iv)) throw InvalidIntervention(*violation);
  return std::visit(
      overloaded{
          [&](const AddLineSegment& v) {
            auto spec = state.spec();
            spec.vertical_segments.push_back({v.column, std::min(v.row_a, v.row_b), std::max(v.row_a, v.row_b)});
            return game::rebase(state, game::Board::build(std::move(spec)));
          },
          [&](const FillSegment& v) {
            GameState out = state;
            for (int c : state.board->segments()[v.segment_id].cells) out.painted[c] = 1;
            out.terminal = out.terminal || out.all_painted();
            return out;
          },
          [&](const MovePlayer& v) {
            GameState out = state;
            out.player = v.target;
            return out;
          },
          [&](const RemoveEnemy& v) {
            GameState out = state;
            out.enemies.erase(out.enemies.begin() + v.enemy_index);
            return out;
          },
      },
      iv);
}

std::vector<Intervention> enumerate(const GameState& state, Kind kind) {
  std::vector<Intervention> out;
  const auto& spec = state.spec();
  switch (kind) {
    case Kind::AddLineSegment: {
      const auto levels = sorted_levels(spec);
      for (std::size_t i = 0; i + 1 < levels.size(); ++i)
        for (int x = 0; x < spec.width; ++x) {
          AddLineSegment iv{x, levels[i], levels[i + 1]};
          if (!check(state, iv)) out.emplace_back(iv);
        }
      break;
    }
    case Kind::FillSegment:
      for (std::size_t k = 0; k < state.board->segments().size(); ++k) {
        FillSegment iv{static_cast<int>(k)};
        if (!check(state, iv)) out.emplace_back(iv);
      }
      break;
    case Kind::MovePlayer:
      for (game::Tile t : game::legal_player_positions(state)) out.emplace_back(MovePlayer{t});
      break;
    case Kind::RemoveEnemy:
      for (std::size_t i = 0; i < state.enemies.size(); ++i) out.emplace_back(RemoveEnemy{static_cast<int>(i)});
      break;
  }
  return out;
}

std::string describe(const Intervention& iv) {
  return std::visit(
      overloaded{
          [](const AddLineSegment& v) {
            return "add ladder at column " + std::to_string(v.column) + " between rows " +
                   std::to_string(v.row_a) + " and " + std::to_string(v.row_b);
          },
          [](const FillSegment& v) { return "fill segment " + std::to_string(v.segment_id); },
          [](const MovePlayer& v) {
            return "move player to (" + std::to_string(v.target.x) + ", " + std::to_string(v.target.y) + ")";
          },
          [](const RemoveEnemy& v) { return "remove enemy " + std::to_string(v.enemy_index); },
      },
      iv);
}

json to_json(const Intervention& iv) {
  json j = std::visit(
      overloaded{
          [](const AddLineSegment& v) { return json{{"column", v.column}, {"row_a", v.row_a}, {"row_b", v.row_b}}; },
          [](const FillSegment& v) { return json{{"segment_id", v.segment_id}}; },
          [](const MovePlayer& v) { return json{{"x", v.target.x}, {"y", v.target.y}}; },
          [](const RemoveEnemy& v) { return json{{"enemy_index", v.enemy_index}}; },
      },
      iv);
  j["type"] = kind_name(kind_of(iv));
  return j;
}

Intervention intervention_from_json(const json& j) {
  try {
    const auto kind = parse_kind(j.at("type").get<std::string>());
    if (!kind) throw InvalidIntervention("unknown intervention type " + j.at("type").dump());
    switch (*kind) {
      case Kind::AddLineSegment:
        return AddLineSegment{j.at("column").get<int>(), j.at("row_a").get<int>(), j.at("row_b").get<int>()};
      case Kind::FillSegment: return FillSegment{j.at("segment_id").get<int>()};
      case Kind::MovePlayer: return MovePlayer{{j.at("x").get<int>(), j.at("y").get<int>()}};
      case Kind::RemoveEnemy: return RemoveEnemy{j.at("enemy_index").get<int>()};
    }
  } catch (const json::exception& e) {
    throw InvalidIntervention(std::string("malformed intervention: ") + e.what());
  }
  throw InvalidIntervention("malformed intervention");
}

}  // namespace qtrust::interventions
