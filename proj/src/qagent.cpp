#include "qtrust/qagent.hpp"

#include <omp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <fstream>
#include <set>

#include "qtrust/game_io.hpp"
#include "qtrust/kernels.hpp"

namespace qtrust::agent {

using game::Action;
using game::GameState;
using game::Observation;
using nlohmann::json;

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::Standard: return "standard";
    case Variant::RandomLadders: return "random-ladders";
    case Variant::RandomStart: return "random-start";
  }
  return "";
}

std::optional<Variant> parse_variant(std::string_view name) {
  for (Variant v : kAllVariants)
    if (variant_name(v) == name) return v;
  return std::nullopt;
}

game::BoardSpec episode_board(Variant v, std::uint64_t episode_seed) {
  game::BoardSpec spec = game::BoardSpec::standard(episode_seed);
  switch (v) {
    case Variant::Standard: break;
    case Variant::RandomLadders: {
      Rng rng(derive_seed(episode_seed, "ladders"));
      std::vector<int> levels = spec.horizontal_levels;
      std::sort(levels.begin(), levels.end());
      const auto count = 1 + rng.uniform_index(3);
      for (std::uint64_t k = 0; k < count; ++k) {
        const auto gap = rng.uniform_index(levels.size() - 1);
        const int top = levels[gap];
        const int bottom = levels[gap + 1];
        std::vector<int> free;
        for (int x = 1; x + 1 < spec.width; ++x) {
          bool blocked = false;
          for (const auto& l : spec.vertical_segments)
            if (std::abs(l.column - x) <= 1 && l.row_a < bottom && top < l.row_b) blocked = true;
          if (!blocked) free.push_back(x);
        }
        if (free.empty()) continue;
        spec.vertical_segments.push_back({free[rng.uniform_index(free.size())], top, bottom});
      }
      break;
    }
    case Variant::RandomStart: {
      Rng rng(derive_seed(episode_seed, "start"));
      const auto board = game::Board::build(spec);
      const auto& cells = board->track_cells();
      spec.player_start = board->tile(cells[rng.uniform_index(cells.size())]);
      break;
    }
  }
  return spec;
}

double EpsilonSchedule::at(long step) const {
  if (decay_steps <= 0 || step >= decay_steps) return end;
  const double frac = static_cast<double>(step) / decay_steps;
  return start + (end - start) * frac;
}

void Hyperparams::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidConfig("gamma must lie in (0, 1)");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw InvalidConfig("learning_rate must be a non-negative finite number");
  if (!(epsilon.start >= 0.0 && epsilon.start <= 1.0 && epsilon.end >= 0.0 && epsilon.end <= 1.0))
    throw InvalidConfig("epsilon_schedule values must lie in [0, 1]");
  if (epsilon.decay_steps < 0) throw InvalidConfig("epsilon_schedule.decay_steps must be non-negative");
  if (buffer_capacity < 1) throw InvalidConfig("buffer_capacity must be positive");
  if (batch_size < 1) throw InvalidConfig("batch_size must be positive");
  if (batch_size > buffer_capacity) throw InvalidConfig("batch_size must not exceed buffer_capacity");
  if (hidden_layer_sizes.empty()) throw InvalidConfig("hidden_layer_sizes must be non-empty");
  for (int h : hidden_layer_sizes)
    if (h < 1) throw InvalidConfig("hidden_layer_sizes entries must be positive");
  if (target_sync_interval < 1) throw InvalidConfig("target_sync_interval must be positive");
  if (train_steps < 0) throw InvalidConfig("train_steps must be non-negative");
  if (learning_starts < 0) throw InvalidConfig("learning_starts must be non-negative");
  if (embedding_set_limit < 1) throw InvalidConfig("embedding_set_limit must be positive");
  if (baseline_episodes < 1) throw InvalidConfig("baseline_episodes must be positive");
  if (!(rollout_epsilon >= 0.0 && rollout_epsilon <= 1.0)) throw InvalidConfig("rollout_epsilon must lie in [0, 1]");
}

json to_json(const Hyperparams& hp) {
  return {{"gamma", hp.gamma},
          {"learning_rate", hp.learning_rate},
          {"epsilon_schedule",
           {{"start", hp.epsilon.start}, {"end", hp.epsilon.end}, {"decay_steps", hp.epsilon.decay_steps}}},
          {"buffer_capacity", hp.buffer_capacity},
          {"batch_size", hp.batch_size},
          {"hidden_layer_sizes", hp.hidden_layer_sizes},
          {"target_sync_interval", hp.target_sync_interval},
          {"train_steps", hp.train_steps},
          {"seed", hp.seed},
          {"use_target_network", hp.use_target_network},
          {"learning_starts", hp.learning_starts},
          {"optimizer", hp.optimizer == Optimizer::Adam ? "adam" : "sgd"},
          {"grad_clip", hp.grad_clip},
          {"embedding_set_limit", hp.embedding_set_limit},
          {"baseline_episodes", hp.baseline_episodes},
          {"rollout_epsilon", hp.rollout_epsilon},
          {"double_q", hp.double_q}};
}

Hyperparams hyperparams_from_json(const json& j) {
  if (!j.is_object()) throw InvalidConfig("hyperparameters must be a JSON object");
  Hyperparams hp;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "gamma") hp.gamma = value.get<double>();
      else if (key == "learning_rate") hp.learning_rate = value.get<double>();
      else if (key == "epsilon_schedule") {
        for (const auto& [k, v] : value.items()) {
          if (k == "start") hp.epsilon.start = v.get<double>();
          else if (k == "end") hp.epsilon.end = v.get<double>();
          else if (k == "decay_steps") hp.epsilon.decay_steps = v.get<int>();
          else throw InvalidConfig("unknown field epsilon_schedule." + k);
        }
      } else if (key == "buffer_capacity") hp.buffer_capacity = value.get<int>();
      else if (key == "batch_size") hp.batch_size = value.get<int>();
      else if (key == "hidden_layer_sizes") hp.hidden_layer_sizes = value.get<std::vector<int>>();
      else if (key == "target_sync_interval") hp.target_sync_interval = value.get<int>();
      else if (key == "train_steps") hp.train_steps = value.get<int>();
      else if (key == "seed") hp.seed = value.get<std::uint64_t>();
      else if (key == "use_target_network") hp.use_target_network = value.get<bool>();
      else if (key == "learning_starts") hp.learning_starts = value.get<int>();
      else if (key == "optimizer") {
        const auto name = value.get<std::string>();
        if (name == "adam") hp.optimizer = Optimizer::Adam;
        else if (name == "sgd") hp.optimizer = Optimizer::Sgd;
        else throw InvalidConfig("optimizer must be \"sgd\" or \"adam\"");
      } else if (key == "grad_clip") hp.grad_clip = value.get<double>();
      else if (key == "embedding_set_limit") hp.embedding_set_limit = value.get<int>();
      else if (key == "baseline_episodes") hp.baseline_episodes = value.get<int>();
      else if (key == "rollout_epsilon") hp.rollout_epsilon = value.get<double>();
      else if (key == "double_q") hp.double_q = value.get<bool>();
      else throw InvalidConfig("unknown field " + key);
    } catch (const json::exception&) {
      throw InvalidConfig("field " + key + " has the wrong type");
    }
  }
  hp.validate();
  return hp;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
  if (!std::isfinite(t.reward)) throw std::invalid_argument("transition reward must be finite");
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
  }
  ++insertions_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= items_.size()) throw std::out_of_range("replay index out of range");
  return items_[(head_ + i) % items_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, Rng& rng) const {
  if (items_.empty()) throw std::logic_error("cannot sample from an empty replay buffer");
  std::vector<std::size_t> out(n);
  for (auto& i : out) i = rng.uniform_index(items_.size());
  return out;
}

QFunction make_qfunction(const game::BoardSpec& spec, const Hyperparams& hp) {
  return nn::Mlp::initialized(static_cast<int>(game::observation_size(spec)), hp.hidden_layer_sizes,
                              game::kActionCount, derive_seed(hp.seed, "init"));
}

std::vector<double> forward(const QFunction& q, const Observation& obs) {
  if (obs.feature_size() != static_cast<std::size_t>(q.input_size()))
    throw nn::ShapeError("observation size does not match the network input");
  return q.forward(obs.features());
}

std::vector<double> embed(const QFunction& q, const Observation& obs) {
  if (obs.feature_size() != static_cast<std::size_t>(q.input_size()))
    throw nn::ShapeError("observation size does not match the network input");
  return q.embed(obs.features());
}

Action act_greedy(std::span<const double> values) {
  if (values.size() != game::kActionCount) throw nn::ShapeError("expected one value per action");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return game::kAllActions[best];
}

Action act_greedy(const QFunction& q, const Observation& obs) { return act_greedy(forward(q, obs)); }

double td_target(const Transition& t, const QFunction& q_target, double gamma) {
  if (t.terminal) return t.reward;
  if (gamma == 0.0) return t.reward;
  const auto next = forward(q_target, t.next_obs);
  return t.reward + gamma * *std::max_element(next.begin(), next.end());
}

double double_td_target(const Transition& t, const QFunction& q_online, const QFunction& q_target, double gamma) {
  if (t.terminal || gamma == 0.0) return t.reward;
  const auto pick = static_cast<std::size_t>(act_greedy(q_online, t.next_obs));
  return t.reward + gamma * forward(q_target, t.next_obs)[pick];
}

double batch_loss(const QFunction& q, const QFunction& q_target, const ReplayBuffer& buffer,
                  std::span<const std::size_t> indices, double gamma, std::span<double> grad, bool double_q) {
  if (indices.empty()) throw std::invalid_argument("empty batch");
  const double scale = 1.0 / static_cast<double>(indices.size());
  std::vector<double> features(static_cast<std::size_t>(q.input_size()));
  std::vector<double> out_grad(game::kActionCount);
  nn::Activations acts;
  double loss = 0.0;
  for (std::size_t idx : indices) {
    const Transition& tr = buffer.at(idx);
    const double target = double_q ? double_td_target(tr, q, q_target, gamma) : td_target(tr, q_target, gamma);
    tr.obs.write_features(features);
    q.forward_into(features, acts);
    const auto a = static_cast<std::size_t>(tr.action);
    const double err = acts.values.back()[a] - target;
    loss += scale * err * err;
    std::fill(out_grad.begin(), out_grad.end(), 0.0);
    out_grad[a] = 2.0 * scale * err;
    q.backward(features, acts, out_grad, grad);
  }
  return loss;
}

double train_step(QFunction& q, const QFunction& q_target, const ReplayBuffer& buffer, const Hyperparams& hp,
                  Rng& rng, OptimizerState& opt) {
  if (buffer.size() < static_cast<std::size_t>(hp.batch_size))
    throw std::logic_error("replay buffer holds fewer transitions than batch_size");
  const auto indices = buffer.sample_indices(static_cast<std::size_t>(hp.batch_size), rng);
  std::vector<double> grad(q.parameter_count(), 0.0);
  const double loss = batch_loss(q, q_target, buffer, indices, hp.gamma, grad, hp.double_q);

  if (hp.grad_clip > 0.0) {
    double norm2 = 0.0;
    for (double g : grad) norm2 += g * g;
    const double norm = std::sqrt(norm2);
    if (norm > hp.grad_clip)
      for (double& g : grad) g *= hp.grad_clip / norm;
  }

  auto params = q.parameters();
  if (hp.optimizer == Optimizer::Sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= hp.learning_rate * grad[i];
    return loss;
  }
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  constexpr double kTiny = 1e-250;
  if (opt.m.size() != params.size()) {
    opt.m.assign(params.size(), 0.0);
    opt.v.assign(params.size(), 0.0);
    opt.step = 0;
  }
  ++opt.step;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(opt.step));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(opt.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    opt.m[i] = kBeta1 * opt.m[i] + (1.0 - kBeta1) * grad[i];
    opt.v[i] = kBeta2 * opt.v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
    // Moments of parameters that never see gradient decay into subnormals,
    // which are very slow to compute with.
    if (std::abs(opt.m[i]) < kTiny) opt.m[i] = 0.0;
    if (opt.v[i] < kTiny) opt.v[i] = 0.0;
    params[i] -= hp.learning_rate * (opt.m[i] / c1) / (std::sqrt(opt.v[i] / c2) + kEps);
  }
  return loss;
}

namespace {

Action epsilon_greedy(const QFunction* q, const Observation& obs, double epsilon, Rng& rng) {
  if (q == nullptr || (epsilon > 0.0 && rng.bernoulli(epsilon)))
    return game::kAllActions[rng.uniform_index(game::kActionCount)];
  return act_greedy(*q, obs);
}

double play(const QFunction* q, GameState state, double epsilon, std::uint64_t seed) {
  Rng rng(seed);
  while (!state.terminal) state = game::step(state, epsilon_greedy(q, game::observe(state), epsilon, rng)).state;
  return static_cast<double>(state.score);
}

metrics::EmbeddingSet build_embedding_set(const QFunction& q, const ReplayBuffer& buffer, int limit,
                                          std::uint64_t seed) {
  std::vector<std::size_t> chosen(buffer.size());
  for (std::size_t i = 0; i < chosen.size(); ++i) chosen[i] = i;
  if (chosen.size() > static_cast<std::size_t>(limit)) {
    Rng rng(seed);
    for (std::size_t i = 0; i < static_cast<std::size_t>(limit); ++i)
      std::swap(chosen[i], chosen[i + rng.uniform_index(chosen.size() - i)]);
    chosen.resize(static_cast<std::size_t>(limit));
    std::sort(chosen.begin(), chosen.end());
  }
  const auto width = static_cast<std::size_t>(q.input_size());
  std::vector<double> inputs(chosen.size() * width);
  for (std::size_t r = 0; r < chosen.size(); ++r)
    buffer.at(chosen[r]).obs.write_features(std::span(inputs).subspan(r * width, width));
  return metrics::EmbeddingSet(static_cast<std::size_t>(q.embedding_size()),
                               kernels::parallel::forward_batch(q, inputs, kernels::Output::Embedding));
}

}  // namespace

double play_out(const QFunction& q, GameState state, double epsilon, std::uint64_t seed) {
  return play(&q, std::move(state), epsilon, seed);
}

double play_out_random(GameState state, std::uint64_t seed) { return play(nullptr, std::move(state), 1.0, seed); }

std::vector<double> play_out_many(const QFunction& q, const std::vector<GameState>& starts, double epsilon,
                                  const std::vector<std::uint64_t>& seeds, metrics::Execution exec) {
  if (starts.size() != seeds.size()) throw std::invalid_argument("one seed per start state is required");
  std::vector<double> out(starts.size());
  const auto n = static_cast<std::ptrdiff_t>(starts.size());
  if (exec == metrics::Execution::Serial) {
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = play_out(q, starts[i], epsilon, seeds[i]);
  } else {
    // Exceptions may not leave an OpenMP region; keep the first and rethrow.
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      try {
        out[i] = play_out(q, starts[i], epsilon, seeds[i]);
      } catch (...) {
#pragma omp critical(qtrust_play_out_failure)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  }
  return out;
}

std::vector<GameState> evaluation_starts(Variant v, int n, std::uint64_t seed) {
  std::vector<GameState> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(game::new_game(episode_board(v, derive_seed(seed, "eval", i))));
  return out;
}

std::vector<std::uint64_t> evaluation_policy_seeds(int n, std::uint64_t seed) {
  std::vector<std::uint64_t> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[i] = derive_seed(seed, "policy", i);
  return out;
}

metrics::TraceRecord greedy_step(const QFunction& q, GameState& state, int t) {
  if (state.terminal) throw game::GameError("episode already finished");
  metrics::TraceRecord rec;
  rec.t = t;
  rec.obs = game::observe(state);
  if (rec.obs.feature_size() != static_cast<std::size_t>(q.input_size()))
    throw nn::ShapeError("observation size does not match the network input");
  nn::Activations acts;
  q.forward_into(rec.obs.features(), acts);
  rec.action = act_greedy(acts.values.back());
  rec.q_value = acts.values.back()[static_cast<std::size_t>(rec.action)];
  rec.embedding = acts.values[acts.values.size() - 2];
  auto res = game::step(state, rec.action);
  rec.reward = res.reward;
  rec.state = std::move(state);
  state = std::move(res.state);
  return rec;
}

metrics::EpisodeTrace record_trace(const QFunction& q, GameState state, double gamma) {
  metrics::EpisodeTrace trace;
  trace.gamma = gamma;
  while (!state.terminal) trace.records.push_back(greedy_step(q, state, static_cast<int>(trace.records.size())));
  trace.complete = true;
  return trace;
}

AgentBundle train(Variant variant, const Hyperparams& hp, TrainReport* report) {
  hp.validate();
  TrainReport local;
  TrainReport& rep = report ? *report : local;
  rep = {};

  long episode = 0;
  GameState state = game::new_game(episode_board(variant, derive_seed(hp.seed, "episode", episode)));
  QFunction q = make_qfunction(state.spec(), hp);
  QFunction target = q;
  ReplayBuffer buffer(static_cast<std::size_t>(hp.buffer_capacity));
  Rng explore(derive_seed(hp.seed, "explore"));
  Rng sampler(derive_seed(hp.seed, "sample"));
  OptimizerState opt;

  Observation obs = game::observe(state);
  double episode_return = 0.0;
  double loss_window = 0.0;
  long step = 0;
  while (rep.updates < hp.train_steps) {
    const double eps = hp.epsilon.at(step);
    const bool random = explore.bernoulli(eps);
    const Action a =
        random ? game::kAllActions[explore.uniform_index(game::kActionCount)] : act_greedy(q, obs);
    auto res = game::step(state, a);
    Observation next_obs = game::observe(res.state);
    episode_return += res.reward;
    buffer.push({obs, a, res.reward, next_obs, res.terminal});
    if (res.terminal) {
      rep.episode_returns.push_back(episode_return);
      episode_return = 0.0;
      ++episode;
      state = game::new_game(episode_board(variant, derive_seed(hp.seed, "episode", episode)));
      obs = game::observe(state);
    } else {
      state = std::move(res.state);
      obs = std::move(next_obs);
    }
    ++step;

    if (step >= hp.learning_starts && buffer.size() >= static_cast<std::size_t>(hp.batch_size)) {
      loss_window += train_step(q, hp.use_target_network ? target : q, buffer, hp, sampler, opt);
      ++rep.updates;
      if (rep.updates % 1000 == 0) {
        rep.losses.push_back(loss_window / 1000.0);
        loss_window = 0.0;
      }
      if (hp.use_target_network && rep.updates % hp.target_sync_interval == 0) target = q;
    }
  }
  rep.env_steps = step;

  AgentBundle bundle;
  bundle.id = std::string(variant_name(variant));
  bundle.variant = variant;
  bundle.hyperparams = hp;
  bundle.embeddings = build_embedding_set(q, buffer, hp.embedding_set_limit, derive_seed(hp.seed, "embedding-set"));
  const std::uint64_t baseline_seed = derive_seed(hp.seed, "baseline");
  const auto rewards =
      play_out_many(q, evaluation_starts(variant, hp.baseline_episodes, baseline_seed), hp.rollout_epsilon,
                    evaluation_policy_seeds(hp.baseline_episodes, baseline_seed));
  double sum = 0.0;
  for (double r : rewards) sum += r;
  bundle.baseline_mean_reward = sum / static_cast<double>(rewards.size());
  bundle.baseline_episodes = hp.baseline_episodes;
  bundle.baseline_seed = baseline_seed;
  bundle.q = std::move(q);
  return bundle;
}

namespace {

void write_f64(const std::filesystem::path& path, std::span<const double> values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    out.write(bytes, 8);
  }
}

std::vector<double> read_f64(const std::filesystem::path& path, std::size_t count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<double> values(count);
  for (auto& v : values) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw std::runtime_error("truncated " + path.string());
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    v = std::bit_cast<double>(bits);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw std::runtime_error("trailing bytes in " + path.string());
  return values;
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return json::parse(in);
}

}  // namespace

void save_bundle(const AgentBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json layers = json::array();
  for (const auto& l : bundle.q.layers()) layers.push_back({{"in", l.in}, {"out", l.out}});
  write_json(dir / "params.json", {{"format_version", kBundleFormatVersion},
                                   {"dtype", "float64"},
                                   {"byte_order", "little"},
                                   {"input_size", bundle.q.input_size()},
                                   {"hidden_layer_sizes", bundle.q.hidden_sizes()},
                                   {"output_size", bundle.q.output_size()},
                                   {"layers", layers},
                                   {"layout", "per layer: weights [in][out] then bias [out]"},
                                   {"parameter_count", bundle.q.parameter_count()},
                                   {"variant", variant_name(bundle.variant)},
                                   {"hyperparams", to_json(bundle.hyperparams)}});
  write_f64(dir / "params.bin", bundle.q.parameters());
  write_json(dir / "embeddings.json", {{"format_version", kBundleFormatVersion},
                                       {"dtype", "float64"},
                                       {"byte_order", "little"},
                                       {"rows", bundle.embeddings.rows()},
                                       {"dim", bundle.embeddings.dim()}});
  write_f64(dir / "embeddings.bin", bundle.embeddings.data());
  json manifest{{"format_version", kBundleFormatVersion},
                {"id", bundle.id},
                {"variant", variant_name(bundle.variant)},
                {"baseline_mean_reward", bundle.baseline_mean_reward},
                {"baseline_episodes", bundle.baseline_episodes},
                {"baseline_seed", bundle.baseline_seed},
                {"board", game::to_json(episode_board(bundle.variant, 0))}};
  manifest["calibration"] = bundle.calibration ? narrative::to_json(*bundle.calibration) : json(nullptr);
  write_json(dir / "bundle.json", manifest);
}

AgentBundle load_bundle(const std::filesystem::path& dir) {
  const json params = read_json(dir / "params.json");
  if (params.at("format_version").get<int>() != kBundleFormatVersion)
    throw std::runtime_error("unsupported bundle format in " + dir.string());
  AgentBundle bundle;
  const auto variant = parse_variant(params.at("variant").get<std::string>());
  if (!variant) throw std::runtime_error("unknown variant in " + dir.string());
  bundle.variant = *variant;
  bundle.hyperparams = hyperparams_from_json(params.at("hyperparams"));
  bundle.q = nn::Mlp(params.at("input_size").get<int>(), params.at("hidden_layer_sizes").get<std::vector<int>>(),
                     params.at("output_size").get<int>());
  if (bundle.q.parameter_count() != params.at("parameter_count").get<std::size_t>())
    throw std::runtime_error("parameter count disagrees with layer shapes in " + dir.string());
  bundle.q.set_parameters(read_f64(dir / "params.bin", bundle.q.parameter_count()));

  const json emb = read_json(dir / "embeddings.json");
  const auto rows = emb.at("rows").get<std::size_t>();
  const auto dim = emb.at("dim").get<std::size_t>();
  if (dim != static_cast<std::size_t>(bundle.q.embedding_size()))
    throw std::runtime_error("embedding dimension disagrees with the network in " + dir.string());
  bundle.embeddings = metrics::EmbeddingSet(dim, read_f64(dir / "embeddings.bin", rows * dim));

  const json manifest = read_json(dir / "bundle.json");
  bundle.id = manifest.at("id").get<std::string>();
  bundle.baseline_mean_reward = manifest.at("baseline_mean_reward").get<double>();
  bundle.baseline_episodes = manifest.at("baseline_episodes").get<int>();
  bundle.baseline_seed = manifest.at("baseline_seed").get<std::uint64_t>();
  if (!manifest.at("calibration").is_null())
    bundle.calibration = narrative::calibration_from_json(manifest.at("calibration"));
  return bundle;
}

}  // namespace qtrust::agent
