#pragma once

// Desk-scale deep Q-learning over the grid game: an MLP value network
// trained from an experience-replay buffer with epsilon-greedy exploration
// and an optional target network.

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qtrust/game.hpp"
#include "qtrust/mlp.hpp"
#include "qtrust/narrative.hpp"
#include "qtrust/rng.hpp"
#include "qtrust/trust_metrics.hpp"

namespace qtrust::agent {

enum class Variant { Standard, RandomLadders, RandomStart };

inline constexpr std::array<Variant, 3> kAllVariants = {Variant::Standard, Variant::RandomLadders,
                                                        Variant::RandomStart};

std::string_view variant_name(Variant v);
std::optional<Variant> parse_variant(std::string_view name);

// Board for training or evaluation episode `episode_seed` of a variant.
// random-ladders adds one to three seeded ladders; random-start draws the
// player start from the track.
game::BoardSpec episode_board(Variant v, std::uint64_t episode_seed);

class InvalidConfig : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  int decay_steps = 50000;
  double at(long step) const;
  bool operator==(const EpsilonSchedule&) const = default;
};

enum class Optimizer { Sgd, Adam };

struct Hyperparams {
  double gamma = 0.99;
  double learning_rate = 1e-3;
  EpsilonSchedule epsilon;
  int buffer_capacity = 50000;
  int batch_size = 32;
  std::vector<int> hidden_layer_sizes = {256, 64};
  int target_sync_interval = 1000;
  int train_steps = 150000;
  std::uint64_t seed = 1;
  bool use_target_network = true;
  int learning_starts = 1000;
  Optimizer optimizer = Optimizer::Adam;
  double grad_clip = 10.0;  // global L2 norm; <= 0 disables
  int embedding_set_limit = 10000;
  int baseline_episodes = 30;
  double rollout_epsilon = 0.0;
  // Bootstrap with the target network's value of the online network's
  // argmax instead of the target network's own max.
  bool double_q = false;

  // Throws InvalidConfig naming the offending field.
  void validate() const;
  bool operator==(const Hyperparams&) const = default;
};

nlohmann::json to_json(const Hyperparams& hp);
// Fields absent from `j` keep their defaults; unknown fields are rejected.
Hyperparams hyperparams_from_json(const nlohmann::json& j);

struct Transition {
  game::Observation obs;
  game::Action action = game::Action::NoOp;
  double reward = 0.0;
  game::Observation next_obs;
  bool terminal = false;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t insertions() const { return insertions_; }
  // i = 0 is the oldest transition still held.
  const Transition& at(std::size_t i) const;

  // Uniform with replacement.
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::vector<Transition> items_;
  std::size_t head_ = 0;  // slot of the oldest item once full
  std::uint64_t insertions_ = 0;
};

using QFunction = nn::Mlp;

QFunction make_qfunction(const game::BoardSpec& spec, const Hyperparams& hp);

// Action values for an observation; throws nn::ShapeError on a size mismatch.
std::vector<double> forward(const QFunction& q, const game::Observation& obs);
std::vector<double> embed(const QFunction& q, const game::Observation& obs);

// Argmax with ties resolved in Up < Down < Left < Right < NoOp order.
game::Action act_greedy(std::span<const double> values);
game::Action act_greedy(const QFunction& q, const game::Observation& obs);

// r for terminal transitions (next_obs is never read), otherwise
// r + gamma * max_a' q_target(next_obs, a').
double td_target(const Transition& t, const QFunction& q_target, double gamma);
// r + gamma * q_target(next_obs, argmax_a' q_online(next_obs, a')).
double double_td_target(const Transition& t, const QFunction& q_online, const QFunction& q_target, double gamma);

// Adam moment estimates; unused by plain SGD.
struct OptimizerState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

// Mean squared TD error over the listed transitions and its gradient with
// respect to q's parameters (only the taken action contributes).
double batch_loss(const QFunction& q, const QFunction& q_target, const ReplayBuffer& buffer,
                  std::span<const std::size_t> indices, double gamma, std::span<double> grad,
                  bool double_q = false);

// One optimizer update on a uniformly sampled batch. Returns the batch loss
// measured before the update. Throws std::logic_error when the buffer holds
// fewer than batch_size transitions.
double train_step(QFunction& q, const QFunction& q_target, const ReplayBuffer& buffer, const Hyperparams& hp,
                  Rng& rng, OptimizerState& opt);

struct AgentBundle {
  std::string id;
  Variant variant = Variant::Standard;
  Hyperparams hyperparams;
  QFunction q;
  metrics::EmbeddingSet embeddings;
  double baseline_mean_reward = 0.0;
  int baseline_episodes = 0;
  std::uint64_t baseline_seed = 0;
  std::optional<narrative::NarrativeCalibration> calibration;
};

struct TrainReport {
  std::vector<double> episode_returns;
  std::vector<double> losses;  // one per 1000 updates, mean over the window
  long env_steps = 0;
  long updates = 0;
};

// Fully seed-deterministic.
AgentBundle train(Variant variant, const Hyperparams& hp, TrainReport* report = nullptr);

// Play from `state` until terminal with an epsilon-greedy policy; returns
// the final score (points banked before `state` included).
double play_out(const QFunction& q, game::GameState state, double epsilon, std::uint64_t seed);
double play_out_random(game::GameState state, std::uint64_t seed);

std::vector<double> play_out_many(const QFunction& q, const std::vector<game::GameState>& starts, double epsilon,
                                  const std::vector<std::uint64_t>& seeds,
                                  metrics::Execution exec = metrics::Execution::Parallel);

// Fresh evaluation boards of a variant; episode i uses derive_seed(seed, "eval", i).
std::vector<game::GameState> evaluation_starts(Variant v, int n, std::uint64_t seed);
std::vector<std::uint64_t> evaluation_policy_seeds(int n, std::uint64_t seed);

// One greedy tick: records Q(s_t, a_t) and the embedding of s_t, then
// advances `state` to s_{t+1}.
metrics::TraceRecord greedy_step(const QFunction& q, game::GameState& state, int t);

// Greedy episode trace with Q(s_t, a_t) and embeddings recorded per tick.
metrics::EpisodeTrace record_trace(const QFunction& q, game::GameState state, double gamma);

// Bundle directory: params.json + params.bin, embeddings.json +
// embeddings.bin (little-endian float64), bundle.json.
inline constexpr int kBundleFormatVersion = 1;
void save_bundle(const AgentBundle& bundle, const std::filesystem::path& dir);
AgentBundle load_bundle(const std::filesystem::path& dir);

}  // namespace qtrust::agent
