#pragma once

#include <deque>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "qtrust/game.hpp"
#include "qtrust/qagent.hpp"
#include "qtrust/trust_metrics.hpp"

namespace qtrust::fixtures {

// 6x3 board: two levels joined at both ends and in the middle, no enemies.
inline game::BoardSpec small_spec(int enemies = 0) {
  game::BoardSpec s;
  s.width = 6;
  s.height = 3;
  s.horizontal_levels = {0, 2};
  s.vertical_segments = {{0, 0, 2}, {5, 0, 2}, {3, 0, 2}};
  s.enemy_count = enemies;
  s.player_start = {1, 2};
  s.rng_seed = 3;
  return s;
}

inline game::BoardSpec enemy_free_standard() {
  auto s = game::BoardSpec::standard();
  s.enemy_count = 0;
  return s;
}

// First move on a shortest track path from the player to an unpainted tile.
inline game::Action toward_unpainted(const game::GameState& s) {
  const auto& board = *s.board;
  const int from = board.index(s.player);
  std::vector<int> first(board.tile_count(), -1);
  std::vector<char> seen(board.tile_count(), 0);
  std::deque<int> queue{from};
  seen[from] = 1;
  while (!queue.empty()) {
    const int cur = queue.front();
    queue.pop_front();
    if (cur != from && !s.painted[cur]) return static_cast<game::Action>(first[cur]);
    for (int a = 0; a < 4; ++a) {
      const int nb = board.neighbor(cur, static_cast<game::Action>(a));
      if (nb < 0 || seen[nb]) continue;
      seen[nb] = 1;
      first[nb] = cur == from ? a : first[cur];
      queue.push_back(nb);
    }
  }
  return game::Action::NoOp;
}

inline game::Action random_action(std::mt19937_64& rng) {
  return game::kAllActions[rng() % game::kActionCount];
}

// Zero network whose output bias makes `preferred` the greedy action.
inline agent::QFunction constant_policy(const game::BoardSpec& spec, game::Action preferred,
                                        std::vector<int> hidden = {4}) {
  agent::QFunction q(static_cast<int>(game::observation_size(spec)), std::move(hidden), game::kActionCount);
  auto p = q.parameters();
  p[q.layers().back().bias_offset + static_cast<std::size_t>(preferred)] = 1.0;
  return q;
}

// Discounted return of playing `policy` from `s` to the end, by simulation.
template <class Policy>
inline double rollout_value(game::GameState s, game::Action first, Policy policy, double gamma) {
  double value = 0.0;
  double discount = 1.0;
  game::Action a = first;
  while (true) {
    auto r = game::step(s, a);
    value += discount * r.reward;
    discount *= gamma;
    if (r.terminal) return value;
    s = std::move(r.state);
    a = policy(s);
  }
}

// Scripted painter whose value head reports the exact return of what it is
// about to do.
inline metrics::EpisodeTrace oracle_agent_trace(double gamma) {
  const auto spec = small_spec(1);
  auto s = game::new_game(spec);
  metrics::EpisodeTrace tr;
  tr.gamma = gamma;
  for (int t = 0;; ++t) {
    metrics::TraceRecord rec;
    rec.t = t;
    rec.state = s;
    rec.action = toward_unpainted(s);
    rec.q_value = rollout_value(s, rec.action, toward_unpainted, gamma);
    rec.embedding = {static_cast<double>(s.player.x), static_cast<double>(s.player.y)};
    auto r = game::step(s, rec.action);
    rec.reward = r.reward;
    tr.records.push_back(std::move(rec));
    if (r.terminal) break;
    s = std::move(r.state);
  }
  tr.complete = true;
  return tr;
}

// Trace with the given per-tick rewards and value estimates on a fixed state.
inline metrics::EpisodeTrace synthetic_trace(const std::vector<double>& rewards, const std::vector<double>& q,
                                             double gamma, bool complete = true) {
  metrics::EpisodeTrace tr;
  tr.gamma = gamma;
  tr.complete = complete;
  const auto state = game::new_game(small_spec());
  for (std::size_t t = 0; t < rewards.size(); ++t) {
    metrics::TraceRecord r;
    r.t = static_cast<int>(t);
    r.state = state;
    r.reward = rewards[t];
    r.q_value = q[t];
    r.embedding = {static_cast<double>(t), 1.0};
    tr.records.push_back(std::move(r));
  }
  return tr;
}

// rewards [1, 0, 2, 0, 10], gamma 0.5, estimates [3, 4, 5, 6, 7].
inline metrics::EpisodeTrace hand_trace() { return synthetic_trace({1, 0, 2, 0, 10}, {3, 4, 5, 6, 7}, 0.5); }

// Expected values for hand_trace(), by hand.
inline constexpr double kHandInstant[] = {0.875, 1.75, 0.5, 1.0, 3.0};
inline constexpr double kHandSuffix[] = {7.125, 6.25, 4.5, 4.0, 3.0};
inline constexpr double kHandCumulative[] = {2.0, 6.0, 7.5, 13.5, 7.125};

inline std::vector<std::vector<double>> random_rows(std::mt19937_64& rng, int n, int dim) {
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> rows(n, std::vector<double>(dim));
  for (auto& r : rows)
    for (double& v : r) v = g(rng);
  return rows;
}

inline metrics::EmbeddingSet to_set(const std::vector<std::vector<double>>& rows) {
  metrics::EmbeddingSet set;
  for (const auto& r : rows) set.add_row(r);
  return set;
}

// Observation whose features are the channel bytes followed by tick_fraction.
inline game::Observation raw_obs(std::vector<std::uint8_t> channels, double tick_fraction) {
  game::Observation o;
  o.width = static_cast<int>(channels.size());
  o.height = 1;
  o.channels = std::move(channels);
  o.tick_fraction = tick_fraction;
  return o;
}

inline agent::QFunction random_network(int inputs, std::vector<int> hidden, std::uint64_t seed) {
  agent::QFunction q(inputs, std::move(hidden), game::kActionCount);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& p : q.parameters()) p = u(rng);
  return q;
}

// Tiny trained bundle shared by slower tests.
inline agent::Hyperparams tiny_hyperparams(std::uint64_t seed = 5) {
  agent::Hyperparams hp;
  hp.train_steps = 300;
  hp.learning_starts = 100;
  hp.buffer_capacity = 500;
  hp.batch_size = 8;
  hp.hidden_layer_sizes = {16, 8};
  hp.epsilon.decay_steps = 200;
  hp.target_sync_interval = 50;
  hp.embedding_set_limit = 200;
  hp.baseline_episodes = 4;
  hp.seed = seed;
  return hp;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("qtrust-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace qtrust::fixtures
