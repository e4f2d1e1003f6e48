#include "qtrust/game.hpp"

#include <algorithm>
#include <bit>
#include <deque>
#include <set>

#include "qtrust/rng.hpp"

namespace qtrust::game {
namespace {

constexpr int kMinEnemyStartDistance = 6;

constexpr std::uint8_t bit(Action a) { return static_cast<std::uint8_t>(1u << static_cast<int>(a)); }

Tile offset(Tile t, Action a) {
  switch (a) {
    case Action::Up: return {t.x, t.y - 1};
    case Action::Down: return {t.x, t.y + 1};
    case Action::Left: return {t.x - 1, t.y};
    case Action::Right: return {t.x + 1, t.y};
    case Action::NoOp: return t;
  }
  return t;
}

Action reverse(Action a) {
  switch (a) {
    case Action::Up: return Action::Down;
    case Action::Down: return Action::Up;
    case Action::Left: return Action::Right;
    case Action::Right: return Action::Left;
    case Action::NoOp: return Action::NoOp;
  }
  return Action::NoOp;
}

Action turn_left(Action a) {
  switch (a) {
    case Action::Up: return Action::Left;
    case Action::Left: return Action::Down;
    case Action::Down: return Action::Right;
    case Action::Right: return Action::Up;
    case Action::NoOp: return Action::NoOp;
  }
  return Action::NoOp;
}

Action turn_right(Action a) { return reverse(turn_left(a)); }

bool is_level(const BoardSpec& spec, int row) {
  return std::find(spec.horizontal_levels.begin(), spec.horizontal_levels.end(), row) !=
         spec.horizontal_levels.end();
}

// True when a ladder at `column` covers both rows.
bool ladder_covers(const BoardSpec& spec, int column, int r0, int r1) {
  for (const auto& v : spec.vertical_segments) {
    const int lo = std::min(v.row_a, v.row_b);
    const int hi = std::max(v.row_a, v.row_b);
    if (v.column == column && lo <= std::min(r0, r1) && hi >= std::max(r0, r1)) return true;
  }
  return false;
}

void validate_spec(const BoardSpec& spec) {
  if (spec.width < 2 || spec.height < 1) throw InvalidSpec("board dimensions must be at least 2x1");
  if (spec.horizontal_levels.empty()) throw InvalidSpec("horizontal_levels must be non-empty");
  std::set<int> levels;
  for (int row : spec.horizontal_levels) {
    if (row < 0 || row >= spec.height) throw InvalidSpec("horizontal level outside the board");
    if (!levels.insert(row).second) throw InvalidSpec("duplicate horizontal level");
  }
  for (std::size_t i = 0; i < spec.vertical_segments.size(); ++i) {
    const auto& v = spec.vertical_segments[i];
    if (v.column < 0 || v.column >= spec.width) throw InvalidSpec("vertical segment column outside the board");
    if (v.row_a == v.row_b)
      throw InvalidSpec("vertical segment must connect two distinct horizontal levels");
    if (!levels.contains(v.row_a) || !levels.contains(v.row_b))
      throw InvalidSpec("vertical segment endpoint is not a horizontal level");
    const int lo = std::min(v.row_a, v.row_b);
    const int hi = std::max(v.row_a, v.row_b);
    for (std::size_t j = 0; j < i; ++j) {
      const auto& w = spec.vertical_segments[j];
      const int wlo = std::min(w.row_a, w.row_b);
      const int whi = std::max(w.row_a, w.row_b);
      if (w.column == v.column && lo < whi && wlo < hi)
        throw InvalidSpec("overlapping vertical segments in one column");
    }
  }
  if (spec.enemy_count < 0) throw InvalidSpec("enemy_count must be non-negative");
  if (spec.starting_lives < 1) throw InvalidSpec("starting_lives must be positive");
  if (spec.tick_limit < 1) throw InvalidSpec("tick_limit must be positive");
}

}  // namespace

std::string_view action_name(Action a) {
  switch (a) {
    case Action::Up: return "Up";
    case Action::Down: return "Down";
    case Action::Left: return "Left";
    case Action::Right: return "Right";
    case Action::NoOp: return "NoOp";
  }
  return "NoOp";
}

std::optional<Action> parse_action(std::string_view name) {
  for (Action a : kAllActions)
    if (action_name(a) == name) return a;
  return std::nullopt;
}

BoardSpec BoardSpec::standard(std::uint64_t seed) {
  BoardSpec spec;
  spec.width = 16;
  spec.height = 14;
  spec.horizontal_levels = {0, 3, 7, 10, 13};
  spec.vertical_segments = {{0, 0, 13}, {15, 0, 13}, {5, 0, 3}, {10, 3, 7}, {5, 7, 10}, {10, 10, 13}};
  spec.enemy_count = 3;
  spec.player_start = {7, 13};
  spec.rng_seed = seed;
  return spec;
}

std::shared_ptr<const Board> Board::build(BoardSpec spec) {
  validate_spec(spec);
  std::shared_ptr<Board> b(new Board(std::move(spec)));
  const BoardSpec& s = b->spec_;
  const int n = s.width * s.height;
  b->track_.assign(n, 0);
  b->moves_.assign(n, 0);
  for (int row : s.horizontal_levels)
    for (int x = 0; x < s.width; ++x) b->track_[row * s.width + x] = 1;
  for (const auto& v : s.vertical_segments)
    for (int y = std::min(v.row_a, v.row_b); y <= std::max(v.row_a, v.row_b); ++y)
      b->track_[y * s.width + v.column] = 1;

  for (int idx = 0; idx < n; ++idx) {
    if (!b->track_[idx]) continue;
    b->cells_.push_back(idx);
    const Tile t = b->tile(idx);
    if (is_level(s, t.y)) {
      if (t.x > 0) b->moves_[idx] |= bit(Action::Left);
      if (t.x + 1 < s.width) b->moves_[idx] |= bit(Action::Right);
    }
    if (t.y > 0 && ladder_covers(s, t.x, t.y - 1, t.y)) b->moves_[idx] |= bit(Action::Up);
    if (t.y + 1 < s.height && ladder_covers(s, t.x, t.y, t.y + 1)) b->moves_[idx] |= bit(Action::Down);
  }

  if (!b->on_track(s.player_start)) throw InvalidSpec("player_start is not on a traversable segment");
  const auto dist = b->distances_from(b->index(s.player_start));
  for (int idx : b->cells_)
    if (dist[idx] < 0) throw InvalidSpec("traversable graph is not connected");
  if (static_cast<std::size_t>(s.enemy_count) >= b->cells_.size())
    throw InvalidSpec("enemy_count exceeds available track tiles");

  // Horizontal runs split at every ladder attachment, then ladder runs split
  // at every level they cross.
  std::vector<int> levels = s.horizontal_levels;
  std::sort(levels.begin(), levels.end());
  for (int row : levels) {
    std::set<int> breaks = {0, s.width - 1};
    for (const auto& v : s.vertical_segments)
      if (std::min(v.row_a, v.row_b) <= row && std::max(v.row_a, v.row_b) >= row) breaks.insert(v.column);
    std::vector<int> cols(breaks.begin(), breaks.end());
    for (std::size_t i = 0; i + 1 < cols.size(); ++i) {
      Segment seg;
      for (int x = cols[i]; x <= cols[i + 1]; ++x) seg.cells.push_back(row * s.width + x);
      b->segments_.push_back(std::move(seg));
    }
  }
  std::vector<VerticalSegment> ladders = s.vertical_segments;
  std::sort(ladders.begin(), ladders.end(), [](const auto& l, const auto& r) {
    return std::pair(l.column, std::min(l.row_a, l.row_b)) < std::pair(r.column, std::min(r.row_a, r.row_b));
  });
  for (const auto& v : ladders) {
    const int lo = std::min(v.row_a, v.row_b);
    const int hi = std::max(v.row_a, v.row_b);
    std::vector<int> stops;
    for (int row : levels)
      if (row >= lo && row <= hi) stops.push_back(row);
    for (std::size_t i = 0; i + 1 < stops.size(); ++i) {
      Segment seg;
      seg.vertical = true;
      for (int y = stops[i]; y <= stops[i + 1]; ++y) seg.cells.push_back(y * s.width + v.column);
      b->segments_.push_back(std::move(seg));
    }
  }

  b->boxes_at_.assign(n, {});
  for (std::size_t li = 0; li + 1 < levels.size(); ++li) {
    const int top = levels[li];
    const int bottom = levels[li + 1];
    std::vector<int> cols;
    for (int x = 0; x < s.width; ++x)
      if (ladder_covers(s, x, top, bottom)) cols.push_back(x);
    for (std::size_t i = 0; i + 1 < cols.size(); ++i) {
      std::set<int> perim;
      for (int x = cols[i]; x <= cols[i + 1]; ++x) {
        perim.insert(top * s.width + x);
        perim.insert(bottom * s.width + x);
      }
      for (int y = top; y <= bottom; ++y) {
        perim.insert(y * s.width + cols[i]);
        perim.insert(y * s.width + cols[i + 1]);
      }
      const int box_id = static_cast<int>(b->boxes_.size());
      for (int idx : perim) b->boxes_at_[idx].push_back(box_id);
      b->boxes_.push_back(Box{{perim.begin(), perim.end()}});
    }
  }
  return b;
}

int Board::neighbor(int idx, Action a) const {
  if (a == Action::NoOp) return idx;
  if (!(moves_[idx] & bit(a))) return -1;
  return index(offset(tile(idx), a));
}

int Board::degree(int idx) const { return std::popcount(static_cast<unsigned>(moves_[idx])); }

std::vector<int> Board::distances_from(int from) const {
  std::vector<int> dist(tile_count(), -1);
  std::deque<int> queue{from};
  dist[from] = 0;
  while (!queue.empty()) {
    const int cur = queue.front();
    queue.pop_front();
    for (Action a : {Action::Up, Action::Down, Action::Left, Action::Right}) {
      const int nb = neighbor(cur, a);
      if (nb >= 0 && dist[nb] < 0) {
        dist[nb] = dist[cur] + 1;
        queue.push_back(nb);
      }
    }
  }
  return dist;
}

std::size_t GameState::painted_count() const {
  return static_cast<std::size_t>(std::count(painted.begin(), painted.end(), std::uint8_t{1}));
}

bool GameState::all_painted() const {
  for (int idx : board->track_cells())
    if (!painted[idx]) return false;
  return true;
}

std::uint64_t GameState::hash() const {
  Fnv1a h;
  const BoardSpec& s = spec();
  h.value(s.width);
  h.value(s.height);
  for (int row : s.horizontal_levels) h.value(row);
  for (const auto& v : s.vertical_segments) {
    h.value(v.column);
    h.value(v.row_a);
    h.value(v.row_b);
  }
  h.value(s.enemy_count);
  h.value(s.player_start.x);
  h.value(s.player_start.y);
  h.value(s.rng_seed);
  h.value(s.starting_lives);
  h.value(s.tick_limit);
  h.bytes(painted.data(), painted.size());
  h.value(player.x);
  h.value(player.y);
  for (const auto& e : enemies) {
    h.value(e.pos.x);
    h.value(e.pos.y);
    h.value(e.heading);
    h.value(e.phase);
  }
  h.value(score);
  h.value(lives);
  h.value(tick);
  h.value(terminal);
  return h.digest();
}

bool operator==(const GameState& a, const GameState& b) {
  return a.spec() == b.spec() && a.painted == b.painted && a.player == b.player && a.enemies == b.enemies &&
         a.score == b.score && a.lives == b.lives && a.tick == b.tick && a.terminal == b.terminal;
}

GameState new_game(const BoardSpec& spec) {
  GameState state;
  state.board = Board::build(spec);
  const Board& board = *state.board;
  state.painted.assign(board.tile_count(), 0);
  state.player = spec.player_start;
  state.lives = spec.starting_lives;

  Rng rng(derive_seed(spec.rng_seed, "enemy-origins"));
  const auto dist = board.distances_from(board.index(spec.player_start));
  std::vector<int> candidates;
  for (int idx : board.track_cells())
    if (dist[idx] >= kMinEnemyStartDistance) candidates.push_back(idx);
  if (candidates.size() < static_cast<std::size_t>(spec.enemy_count)) {
    // Small boards: fall back to the farthest tiles.
    candidates = board.track_cells();
    candidates.erase(std::remove(candidates.begin(), candidates.end(), board.index(spec.player_start)),
                     candidates.end());
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](int l, int r) { return dist[l] > dist[r]; });
    candidates.resize(spec.enemy_count);
  }
  for (int i = 0; i < spec.enemy_count; ++i) {
    const auto pick = rng.uniform_index(candidates.size());
    const int idx = candidates[pick];
    candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(pick));
    std::vector<Action> headings;
    for (Action a : {Action::Up, Action::Down, Action::Left, Action::Right})
      if (board.neighbor(idx, a) >= 0) headings.push_back(a);
    Enemy e;
    e.pos = board.tile(idx);
    e.heading = headings[rng.uniform_index(headings.size())];
    e.phase = static_cast<std::uint8_t>(rng.uniform_index(3));
    state.enemies.push_back(e);
  }
  return state;
}

Enemy advance_enemy(const Board& board, const Enemy& enemy) {
  const int idx = board.index(enemy.pos);
  const std::array<Action, 3> prefs = {turn_left(enemy.heading), enemy.heading, turn_right(enemy.heading)};
  int options = 0;
  for (Action a : prefs)
    if (board.neighbor(idx, a) >= 0) ++options;

  Enemy next = enemy;
  if (options == 0) {
    const Action back = reverse(enemy.heading);
    if (board.neighbor(idx, back) >= 0) {
      next.heading = back;
      next.pos = board.tile(board.neighbor(idx, back));
    }
    return next;
  }
  if (options == 1) {
    for (Action a : prefs)
      if (board.neighbor(idx, a) >= 0) {
        next.heading = a;
        next.pos = board.tile(board.neighbor(idx, a));
      }
    return next;
  }
  // Junction: rotate through left/straight/right preferences.
  for (int k = 0; k < 3; ++k) {
    const Action a = prefs[(enemy.phase + k) % 3];
    if (board.neighbor(idx, a) >= 0) {
      next.heading = a;
      next.pos = board.tile(board.neighbor(idx, a));
      break;
    }
  }
  next.phase = static_cast<std::uint8_t>((enemy.phase + 1) % 3);
  return next;
}

StepResult step(const GameState& state, Action action) {
  if (state.terminal) throw GameError("step called on a terminal state");
  const Board& board = *state.board;
  StepResult out{state, 0.0, false};
  GameState& next = out.state;

  const int from = board.index(state.player);
  int to = board.neighbor(from, action);
  if (to < 0) to = from;
  next.player = board.tile(to);

  if (to != from && !next.painted[to]) {
    next.painted[to] = 1;
    out.reward += kPaintReward;
    for (int box_id : board.boxes_at(to)) {
      const auto& perim = board.boxes()[box_id].perimeter;
      if (std::all_of(perim.begin(), perim.end(), [&](int c) { return next.painted[c] != 0; }))
        out.reward += kBoxBonus;
    }
  }

  bool caught = false;
  for (auto& e : next.enemies) {
    const Tile before = e.pos;
    e = advance_enemy(board, e);
    if (e.pos == next.player || (e.pos == state.player && before == next.player)) caught = true;
  }
  if (caught) {
    next.lives -= 1;
    next.player = state.spec().player_start;
  }

  next.tick += 1;
  next.score += static_cast<std::int64_t>(out.reward);
  next.terminal = next.lives <= 0 || next.all_painted() || next.tick >= state.spec().tick_limit;
  out.terminal = next.terminal;
  return out;
}

std::size_t Observation::count_nonzero(int channel) const {
  const std::size_t plane = static_cast<std::size_t>(width) * height;
  const auto first = channels.begin() + static_cast<std::ptrdiff_t>(plane * channel);
  return static_cast<std::size_t>(std::count_if(first, first + static_cast<std::ptrdiff_t>(plane),
                                                [](std::uint8_t v) { return v != 0; }));
}

void Observation::write_features(std::span<double> out) const {
  if (out.size() != feature_size()) throw std::invalid_argument("feature buffer size mismatch");
  for (std::size_t i = 0; i < channels.size(); ++i) out[i] = channels[i];
  out[channels.size()] = tick_fraction;
}

std::vector<double> Observation::features() const {
  std::vector<double> out(feature_size());
  write_features(out);
  return out;
}

Observation observe(const GameState& state) {
  const Board& board = *state.board;
  const int plane = board.tile_count();
  Observation obs;
  obs.width = board.width();
  obs.height = board.height();
  obs.channels.assign(static_cast<std::size_t>(kChannelCount) * plane, 0);
  for (int idx : board.track_cells()) {
    obs.channels[kSegmentChannel * plane + idx] = 1;
    obs.channels[kPaintedChannel * plane + idx] = state.painted[idx];
  }
  obs.channels[kPlayerChannel * plane + board.index(state.player)] = 1;
  for (const auto& e : state.enemies) obs.channels[kEnemyChannel * plane + board.index(e.pos)] = 1;
  obs.tick_fraction = std::clamp(static_cast<double>(state.tick) / state.spec().tick_limit, 0.0, 1.0);
  return obs;
}

std::vector<Tile> legal_player_positions(const GameState& state) {
  const Board& board = *state.board;
  std::vector<std::uint8_t> danger(board.tile_count(), 0);
  for (const auto& e : state.enemies) {
    danger[board.index(e.pos)] = 1;
    danger[board.index(advance_enemy(board, e).pos)] = 1;
  }
  std::vector<Tile> out;
  for (int idx : board.track_cells())
    if (!danger[idx]) out.push_back(board.tile(idx));
  return out;
}

GameState rebase(const GameState& state, std::shared_ptr<const Board> board) {
  GameState out = state;
  out.board = std::move(board);
  out.painted.resize(out.board->tile_count(), 0);
  out.terminal = out.lives <= 0 || out.all_painted() || out.tick >= out.spec().tick_limit;
  return out;
}

}  // namespace qtrust::game
