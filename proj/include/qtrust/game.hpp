#pragma once

// Deterministic Amidar-style grid game. A player paints track tiles for
// points while enemies patrol the track. Every state is a plain value, and
// step/observe are pure functions of their arguments.

#include <array>
#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qtrust::game {

struct Tile {
  int x = 0;  // column
  int y = 0;  // row, grows downward
  auto operator<=>(const Tile&) const = default;
};

enum class Action : std::uint8_t { Up, Down, Left, Right, NoOp };

inline constexpr int kActionCount = 5;
inline constexpr std::array<Action, kActionCount> kAllActions = {
    Action::Up, Action::Down, Action::Left, Action::Right, Action::NoOp};

std::string_view action_name(Action a);
std::optional<Action> parse_action(std::string_view name);

struct VerticalSegment {
  int column = 0;
  int row_a = 0;
  int row_b = 0;
  bool operator==(const VerticalSegment&) const = default;
};

inline constexpr double kPaintReward = 1.0;
inline constexpr double kBoxBonus = 10.0;

struct BoardSpec {
  int width = 16;
  int height = 14;
  std::vector<int> horizontal_levels;
  std::vector<VerticalSegment> vertical_segments;
  int enemy_count = 3;
  Tile player_start;
  std::uint64_t rng_seed = 0;
  int starting_lives = 3;
  int tick_limit = 3000;

  // 16x14 board, five levels, two full-height border columns and four
  // staggered interior ladders.
  static BoardSpec standard(std::uint64_t seed = 7);

  bool operator==(const BoardSpec&) const = default;
};

class InvalidSpec : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class GameError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Maximal straight run of track between junctions. Painting is tracked per
// tile; a segment is "painted" once all of its tiles are.
struct Segment {
  bool vertical = false;
  std::vector<int> cells;  // tile indices, ordered along the run
};

// Rectangle enclosed by two adjacent levels and two consecutive ladders.
struct Box {
  std::vector<int> perimeter;  // sorted tile indices
};

// Immutable track topology derived from a validated BoardSpec.
class Board {
 public:
  // Throws InvalidSpec naming the violated invariant.
  static std::shared_ptr<const Board> build(BoardSpec spec);

  const BoardSpec& spec() const { return spec_; }
  int width() const { return spec_.width; }
  int height() const { return spec_.height; }
  int tile_count() const { return spec_.width * spec_.height; }

  int index(Tile t) const { return t.y * spec_.width + t.x; }
  Tile tile(int idx) const { return {idx % spec_.width, idx / spec_.width}; }
  bool in_bounds(Tile t) const {
    return t.x >= 0 && t.y >= 0 && t.x < spec_.width && t.y < spec_.height;
  }
  bool on_track(Tile t) const { return in_bounds(t) && track_[index(t)] != 0; }
  bool on_track(int idx) const { return track_[idx] != 0; }

  // Neighbouring tile index reached by `a`, or -1 when the move leaves the
  // track. NoOp returns `idx`.
  int neighbor(int idx, Action a) const;
  int degree(int idx) const;

  const std::vector<int>& track_cells() const { return cells_; }
  const std::vector<Segment>& segments() const { return segments_; }
  const std::vector<Box>& boxes() const { return boxes_; }
  const std::vector<int>& boxes_at(int idx) const { return boxes_at_[idx]; }

  // Breadth-first distances over the track from `from`; -1 for unreachable.
  std::vector<int> distances_from(int from) const;

 private:
  explicit Board(BoardSpec spec) : spec_(std::move(spec)) {}

  BoardSpec spec_;
  std::vector<std::uint8_t> track_;
  std::vector<std::uint8_t> moves_;  // bit per Action direction
  std::vector<int> cells_;
  std::vector<Segment> segments_;
  std::vector<Box> boxes_;
  std::vector<std::vector<int>> boxes_at_;
};

// Enemy patrol cursor: current heading plus the junction-preference phase.
struct Enemy {
  Tile pos;
  Action heading = Action::Left;
  std::uint8_t phase = 0;
  bool operator==(const Enemy&) const = default;
};

struct GameState {
  std::shared_ptr<const Board> board;
  std::vector<std::uint8_t> painted;  // one flag per tile
  Tile player;
  std::vector<Enemy> enemies;
  std::int64_t score = 0;
  int lives = 0;
  int tick = 0;
  bool terminal = false;

  const BoardSpec& spec() const { return board->spec(); }
  std::size_t painted_count() const;
  bool all_painted() const;
  std::uint64_t hash() const;

  friend bool operator==(const GameState& a, const GameState& b);
};

struct StepResult {
  GameState state;
  double reward = 0.0;
  bool terminal = false;
};

enum Channel : int { kSegmentChannel = 0, kPaintedChannel, kPlayerChannel, kEnemyChannel };
inline constexpr int kChannelCount = 4;

// Binary per-tile channels (channel-major) plus normalized tick.
struct Observation {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> channels;
  double tick_fraction = 0.0;

  std::size_t feature_size() const { return channels.size() + 1; }
  std::uint8_t at(int channel, Tile t) const {
    return channels[static_cast<std::size_t>(channel) * width * height + t.y * width + t.x];
  }
  std::size_t count_nonzero(int channel) const;
  void write_features(std::span<double> out) const;
  std::vector<double> features() const;

  bool operator==(const Observation&) const = default;
};

inline std::size_t observation_size(const BoardSpec& spec) {
  return static_cast<std::size_t>(kChannelCount) * spec.width * spec.height + 1;
}

GameState new_game(const BoardSpec& spec);

// Throws GameError on a terminal state.
StepResult step(const GameState& state, Action action);

Observation observe(const GameState& state);

// On-track tiles where the player can be placed without being caught this
// tick or the next.
std::vector<Tile> legal_player_positions(const GameState& state);

// One tick of the deterministic patrol policy.
Enemy advance_enemy(const Board& board, const Enemy& enemy);

// Rebuilds `state` around a new board (e.g. after adding a ladder). Tile
// positions carry over unchanged.
GameState rebase(const GameState& state, std::shared_ptr<const Board> board);

}  // namespace qtrust::game
