#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "oracles.hpp"
#include "qtrust/qagent.hpp"
#include "support.hpp"

using namespace qtrust;
using namespace qtrust::agent;
using game::Action;

namespace {

using fixtures::random_network;
using fixtures::raw_obs;

// Any value read through this network is NaN.
QFunction poisoned_network(int inputs) {
  QFunction q(inputs, {2}, game::kActionCount);
  for (double& p : q.parameters()) p = std::numeric_limits<double>::quiet_NaN();
  return q;
}

std::vector<std::uint8_t> random_bits(std::mt19937_64& rng, int n) {
  std::vector<std::uint8_t> out(n);
  for (auto& b : out) b = static_cast<std::uint8_t>(rng() & 1u);
  return out;
}

}  // namespace

TEST(Forward, ZeroFinalLayerGivesZeros) {
  const auto spec = fixtures::small_spec();
  Hyperparams hp;
  hp.hidden_layer_sizes = {8};
  auto q = make_qfunction(spec, hp);
  const auto& last = q.layers().back();
  auto p = q.parameters();
  std::fill(p.begin() + static_cast<std::ptrdiff_t>(last.weight_offset), p.end(), 0.0);
  const auto obs = game::observe(game::new_game(spec));
  for (double v : forward(q, obs)) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(forward(q, obs), forward(q, obs));
}

TEST(Forward, OneHiddenUnitByHand) {
  // in 2 -> 1 hidden -> 5 outputs. Features: [1, 0.5] (channel byte 1, tick 0.5).
  QFunction q(2, {1}, game::kActionCount);
  auto p = q.parameters();
  const auto& h = q.layers()[0];
  const auto& o = q.layers()[1];
  p[h.weight_offset + 0] = 2.0;
  p[h.weight_offset + 1] = -1.0;
  p[h.bias_offset] = 0.25;  // hidden = relu(2 - 0.5 + 0.25) = 1.75
  for (int a = 0; a < game::kActionCount; ++a) {
    p[o.weight_offset + a] = a - 2.0;
    p[o.bias_offset + a] = 0.1 * a;
  }
  const auto v = forward(q, raw_obs({1}, 0.5));
  for (int a = 0; a < game::kActionCount; ++a) EXPECT_NEAR(v[a], 1.75 * (a - 2.0) + 0.1 * a, 1e-9);
  const auto e = embed(q, raw_obs({1}, 0.5));
  ASSERT_EQ(e.size(), 1u);
  EXPECT_NEAR(e[0], 1.75, 1e-9);
}

TEST(Forward, ShapeMismatchRejected) {
  QFunction q(3, {2}, game::kActionCount);
  EXPECT_THROW(forward(q, raw_obs({1}, 0.0)), nn::ShapeError);
  EXPECT_THROW(embed(q, raw_obs({1, 0, 1, 0}, 0.0)), nn::ShapeError);
}

TEST(Embed, OutputLayerIdentity) {
  std::mt19937_64 rng(3);
  const auto q = random_network(9, {6, 4}, 3);
  const auto& out = q.layers().back();
  const auto p = q.parameters();
  for (int trial = 0; trial < 20; ++trial) {
    const auto obs = raw_obs(random_bits(rng, 8), 0.3);
    const auto e = embed(q, obs);
    ASSERT_EQ(e.size(), 4u);
    const auto v = forward(q, obs);
    for (int a = 0; a < game::kActionCount; ++a) {
      double acc = p[out.bias_offset + a];
      for (int i = 0; i < out.in; ++i) acc += e[i] * p[out.weight_offset + static_cast<std::size_t>(i) * out.out + a];
      EXPECT_NEAR(v[a], acc, 1e-12);
    }
  }
}

TEST(ActGreedy, Examples) {
  const std::vector<double> last = {0, 0, 0, 0, 1};
  EXPECT_EQ(act_greedy(last), Action::NoOp);
  const std::vector<double> flat = {2, 2, 2, 2, 2};
  EXPECT_EQ(act_greedy(flat), Action::Up);
  const std::vector<double> tie = {0, 3, 1, 3, 0};
  EXPECT_EQ(act_greedy(tie), Action::Down);
  const std::vector<double> wrong = {1, 2};
  EXPECT_THROW(act_greedy(wrong), nn::ShapeError);
}

TEST(ActGreedy, PositiveAffineInvariance) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> v(game::kActionCount);
    for (double& x : v) x = std::round(u(rng));  // rounding makes ties common
    const double a = scale(rng), b = u(rng);
    std::vector<double> w(v);
    for (double& x : w) x = a * x + b;
    ASSERT_EQ(act_greedy(v), act_greedy(w));
    std::vector<double> shifted(v);
    for (double& x : shifted) x += 7.0;
    ASSERT_EQ(act_greedy(v), act_greedy(shifted));
  }
}

TEST(TdTarget, TerminalIsReward) {
  Transition t{raw_obs({0}, 0.0), Action::Up, 5.0, raw_obs({1}, 1.0), true};
  EXPECT_EQ(td_target(t, random_network(2, {3}, 1), 0.9), 5.0);
}

TEST(TdTarget, TerminalNeverReadsNextObs) {
  // A NaN network would turn any read into NaN; a malformed next_obs would throw.
  Transition t{raw_obs({0}, 0.0), Action::Up, 5.0, raw_obs({}, 0.0), true};
  t.next_obs.channels.clear();
  t.next_obs.width = 0;
  const auto q = poisoned_network(2);
  EXPECT_EQ(td_target(t, q, 0.99), 5.0);
  EXPECT_EQ(double_td_target(t, q, q, 0.99), 5.0);
}

TEST(TdTarget, GammaZeroIsReward) {
  Transition t{raw_obs({0}, 0.0), Action::Up, 2.5, raw_obs({1}, 0.5), false};
  EXPECT_EQ(td_target(t, random_network(2, {3}, 2), 0.0), 2.5);
}

TEST(TdTarget, BootstrapsFromMax) {
  // Output bias 10 on Right, everything else zero: max next value 10.
  QFunction q(2, {1}, game::kActionCount);
  q.parameters()[q.layers().back().bias_offset + 3] = 10.0;
  Transition t{raw_obs({0}, 0.0), Action::Up, 1.0, raw_obs({1}, 0.5), false};
  EXPECT_NEAR(td_target(t, q, 0.9), 1.0 + 0.9 * 10.0, 1e-12);
  EXPECT_NEAR(td_target(t, q, 0.9), 10.0, 1e-12);
}

TEST(TdTarget, DoubleUsesOnlineArgmax) {
  QFunction online(2, {1}, game::kActionCount);
  online.parameters()[online.layers().back().bias_offset + 1] = 1.0;  // picks Down
  QFunction target(2, {1}, game::kActionCount);
  auto p = target.parameters();
  p[target.layers().back().bias_offset + 1] = 4.0;
  p[target.layers().back().bias_offset + 3] = 10.0;
  Transition t{raw_obs({0}, 0.0), Action::Up, 1.0, raw_obs({1}, 0.5), false};
  EXPECT_NEAR(double_td_target(t, online, target, 0.5), 3.0, 1e-12);
  EXPECT_NEAR(td_target(t, target, 0.5), 6.0, 1e-12);
}

TEST(TdTarget, ConstantBetweenSyncs) {
  // Updating q leaves a target computed from the frozen copy unchanged.
  std::mt19937_64 rng(6);
  const int n = 6;
  auto q = random_network(n + 1, {4}, 9);
  const QFunction frozen = q;
  ReplayBuffer buf(16);
  for (int i = 0; i < 16; ++i)
    buf.push({raw_obs(random_bits(rng, n), 0.1), Action::Left, 1.0, raw_obs(random_bits(rng, n), 0.2), false});
  const double before = td_target(buf.at(3), frozen, 0.9);
  Hyperparams hp;
  hp.batch_size = 8;
  Rng sampler(1);
  OptimizerState opt;
  for (int i = 0; i < 20; ++i) train_step(q, frozen, buf, hp, sampler, opt);
  EXPECT_NE(q.parameters()[0], frozen.parameters()[0]);
  EXPECT_EQ(td_target(buf.at(3), frozen, 0.9), before);
}

TEST(ReplayBuffer, RingOrderAndCapacity) {
  ReplayBuffer buf(3);
  for (int i = 0; i < 5; ++i) buf.push({raw_obs({0}, 0.0), Action::Up, static_cast<double>(i), raw_obs({0}, 0.0), false});
  EXPECT_EQ(buf.size(), 3u);
  EXPECT_EQ(buf.insertions(), 5u);
  EXPECT_EQ(buf.at(0).reward, 2.0);
  EXPECT_EQ(buf.at(2).reward, 4.0);
  EXPECT_THROW(buf.at(3), std::out_of_range);
  EXPECT_THROW(ReplayBuffer(0), std::invalid_argument);
}

TEST(ReplayBuffer, SamplingIsSeededAndInRange) {
  ReplayBuffer buf(10);
  for (int i = 0; i < 7; ++i) buf.push({raw_obs({0}, 0.0), Action::Up, 0.0, raw_obs({0}, 0.0), false});
  Rng a(42), b(42);
  const auto x = buf.sample_indices(500, a);
  EXPECT_EQ(x, buf.sample_indices(500, b));
  std::vector<int> hits(7, 0);
  for (auto i : x) {
    ASSERT_LT(i, 7u);
    ++hits[i];
  }
  for (int h : hits) EXPECT_GT(h, 0);
}

TEST(BatchLoss, GradientMatchesFiniteDifferences) {
  // 1 -> 1 -> 5: twelve parameters.
  std::mt19937_64 rng(7);
  ReplayBuffer buf(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 8; ++i)
    buf.push({raw_obs({}, u(rng)), game::kAllActions[i % 5], static_cast<double>(i % 3), raw_obs({}, u(rng)),
              i % 4 == 0});
  std::vector<std::size_t> idx = {0, 1, 2, 3, 4, 5, 6, 7, 2};
  for (std::uint64_t point = 0; point < 50; ++point) {
    auto q = random_network(1, {1}, 100 + point);
    q.parameters()[q.layers()[0].bias_offset] = 0.5;  // keep the unit away from its kink
    const auto target = random_network(1, {1}, 200 + point);
    ASSERT_EQ(q.parameter_count(), 12u);
    std::vector<double> analytic(q.parameter_count(), 0.0);
    batch_loss(q, target, buf, idx, 0.9, analytic);
    auto loss = [&](std::span<const double> p) {
      QFunction probe = q;
      probe.set_parameters(p);
      std::vector<double> scratch(p.size(), 0.0);
      return batch_loss(probe, target, buf, idx, 0.9, scratch);
    };
    const std::vector<double> params(q.parameters().begin(), q.parameters().end());
    EXPECT_LT(oracle::relative_error(analytic, oracle::numeric_gradient(loss, params, 1e-5)), 1e-4) << point;
  }
}

TEST(BatchLoss, OnlyTakenActionHasGradient) {
  QFunction q = random_network(3, {4}, 11);
  const auto target = random_network(3, {4}, 12);
  ReplayBuffer buf(1);
  buf.push({raw_obs({1, 0}, 0.4), Action::Left, 1.0, raw_obs({0, 1}, 0.5), false});
  std::vector<double> grad(q.parameter_count(), 0.0);
  const std::vector<std::size_t> idx = {0};
  batch_loss(q, target, buf, idx, 0.9, grad);
  const auto& out = q.layers().back();
  for (int a = 0; a < game::kActionCount; ++a) {
    const bool taken = a == static_cast<int>(Action::Left);
    EXPECT_EQ(grad[out.bias_offset + a] != 0.0, taken) << a;
  }
}

TEST(TrainStep, LossNonNegativeAndLearningRateZeroIsNoOp) {
  std::mt19937_64 rng(8);
  auto q = random_network(5, {3}, 13);
  const QFunction before = q;
  ReplayBuffer buf(40);
  for (int i = 0; i < 40; ++i)
    buf.push({raw_obs(random_bits(rng, 4), 0.1), game::kAllActions[i % 5], 1.0, raw_obs(random_bits(rng, 4), 0.2),
              false});
  for (auto optimizer : {Optimizer::Sgd, Optimizer::Adam}) {
    Hyperparams hp;
    hp.learning_rate = 0.0;
    hp.optimizer = optimizer;
    Rng sampler(2);
    OptimizerState opt;
    for (int i = 0; i < 10; ++i) EXPECT_GE(train_step(q, q, buf, hp, sampler, opt), 0.0);
    EXPECT_EQ(q, before);
  }
}

TEST(TrainStep, RejectsSmallBuffer) {
  auto q = random_network(2, {2}, 1);
  ReplayBuffer buf(8);
  buf.push({raw_obs({0}, 0.0), Action::Up, 0.0, raw_obs({0}, 0.0), true});
  Hyperparams hp;
  hp.batch_size = 2;
  Rng sampler(1);
  OptimizerState opt;
  EXPECT_THROW(train_step(q, q, buf, hp, sampler, opt), std::logic_error);
}

TEST(TrainStep, SingleTransitionConverges) {
  auto q = random_network(3, {4}, 21);
  const QFunction target = q;
  ReplayBuffer buf(1);
  buf.push({raw_obs({1, 1}, 0.5), Action::Right, 3.0, raw_obs({0, 1}, 0.6), false});
  Hyperparams hp;
  hp.batch_size = 1;
  hp.optimizer = Optimizer::Sgd;
  hp.learning_rate = 0.01;
  Rng sampler(1);
  OptimizerState opt;
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 300; ++i) {
    const double loss = train_step(q, target, buf, hp, sampler, opt);
    if (i >= 50) {
      EXPECT_LE(loss, prev) << i;
    }
    prev = loss;
  }
  EXPECT_LT(prev, 1e-6);
}

TEST(Hyperparams, ValidationNamesField) {
  Hyperparams hp;
  EXPECT_NO_THROW(hp.validate());
  auto expect_invalid = [](Hyperparams h, const std::string& field) {
    try {
      h.validate();
      ADD_FAILURE() << field;
    } catch (const InvalidConfig& e) {
      EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
    }
  };
  Hyperparams h = hp;
  h.gamma = 1.0;
  expect_invalid(h, "gamma");
  h = hp;
  h.batch_size = 0;
  expect_invalid(h, "batch_size");
  h = hp;
  h.hidden_layer_sizes = {};
  expect_invalid(h, "hidden_layer_sizes");
  h = hp;
  h.learning_rate = -1.0;
  expect_invalid(h, "learning_rate");
  h = hp;
  h.epsilon.end = 2.0;
  expect_invalid(h, "epsilon_schedule");
}

TEST(Hyperparams, JsonRoundTripAndUnknownFields) {
  Hyperparams hp = fixtures::tiny_hyperparams(9);
  hp.optimizer = Optimizer::Sgd;
  hp.double_q = true;
  EXPECT_EQ(hyperparams_from_json(to_json(hp)), hp);
  EXPECT_EQ(hyperparams_from_json(nlohmann::json::object()), Hyperparams{});
  EXPECT_THROW(hyperparams_from_json({{"gama", 0.9}}), InvalidConfig);
  EXPECT_THROW(hyperparams_from_json({{"gamma", "high"}}), InvalidConfig);
  EXPECT_THROW(hyperparams_from_json({{"optimizer", "rmsprop"}}), InvalidConfig);
}

TEST(Epsilon, LinearDecay) {
  EpsilonSchedule e{1.0, 0.1, 100};
  EXPECT_EQ(e.at(0), 1.0);
  EXPECT_NEAR(e.at(50), 0.55, 1e-12);
  EXPECT_EQ(e.at(100), 0.1);
  EXPECT_EQ(e.at(1000), 0.1);
}

TEST(Variants, RandomLaddersAddSeededSegments) {
  const auto standard = game::BoardSpec::standard();
  std::set<std::vector<int>> layouts;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto spec = episode_board(Variant::RandomLadders, s);
    EXPECT_GT(spec.vertical_segments.size(), standard.vertical_segments.size());
    EXPECT_LE(spec.vertical_segments.size(), standard.vertical_segments.size() + 3);
    EXPECT_NO_THROW(game::Board::build(spec));
    std::vector<int> key;
    for (const auto& v : spec.vertical_segments) key.insert(key.end(), {v.column, v.row_a, v.row_b});
    layouts.insert(key);
    EXPECT_EQ(episode_board(Variant::RandomLadders, s).vertical_segments, spec.vertical_segments);
  }
  EXPECT_GT(layouts.size(), 10u);
}

TEST(Variants, RandomStartOnTrack) {
  std::set<std::pair<int, int>> starts;
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto spec = episode_board(Variant::RandomStart, s);
    const auto board = game::Board::build(spec);
    EXPECT_TRUE(board->on_track(spec.player_start));
    starts.insert({spec.player_start.x, spec.player_start.y});
  }
  EXPECT_GT(starts.size(), 5u);
  EXPECT_EQ(episode_board(Variant::Standard, 3).vertical_segments, game::BoardSpec::standard().vertical_segments);
}

TEST(Train, SeedDeterministic) {
  const auto hp = fixtures::tiny_hyperparams(4);
  TrainReport ra, rb;
  const auto a = train(Variant::Standard, hp, &ra);
  const auto b = train(Variant::Standard, hp, &rb);
  EXPECT_EQ(a.q, b.q);
  EXPECT_EQ(a.embeddings, b.embeddings);
  EXPECT_EQ(a.baseline_mean_reward, b.baseline_mean_reward);
  EXPECT_EQ(ra.episode_returns, rb.episode_returns);
  EXPECT_EQ(ra.updates, hp.train_steps);
  const auto c = train(Variant::Standard, fixtures::tiny_hyperparams(5));
  EXPECT_NE(a.q, c.q);
}

TEST(Train, BundleContents) {
  const auto hp = fixtures::tiny_hyperparams(6);
  const auto b = train(Variant::RandomLadders, hp);
  EXPECT_EQ(b.id, "random-ladders");
  EXPECT_EQ(b.variant, Variant::RandomLadders);
  EXPECT_EQ(b.embeddings.dim(), static_cast<std::size_t>(hp.hidden_layer_sizes.back()));
  EXPECT_EQ(b.embeddings.rows(), static_cast<std::size_t>(hp.embedding_set_limit));
  EXPECT_EQ(b.baseline_episodes, hp.baseline_episodes);
  // The stored baseline replays from its seed.
  const auto rewards = play_out_many(b.q, evaluation_starts(b.variant, b.baseline_episodes, b.baseline_seed), 0.0,
                                     evaluation_policy_seeds(b.baseline_episodes, b.baseline_seed));
  double sum = 0.0;
  for (double r : rewards) sum += r;
  EXPECT_EQ(b.baseline_mean_reward, sum / rewards.size());
}

TEST(PlayOut, SerialMatchesParallel) {
  const auto q = make_qfunction(game::BoardSpec::standard(), fixtures::tiny_hyperparams(2));
  const auto starts = evaluation_starts(Variant::RandomStart, 8, 77);
  const auto seeds = evaluation_policy_seeds(8, 77);
  EXPECT_EQ(play_out_many(q, starts, 0.2, seeds, metrics::Execution::Serial),
            play_out_many(q, starts, 0.2, seeds, metrics::Execution::Parallel));
  EXPECT_EQ(play_out(q, starts[3], 0.2, seeds[3]), play_out(q, starts[3], 0.2, seeds[3]));
  EXPECT_THROW(play_out_many(q, starts, 0.0, {1, 2}), std::invalid_argument);
}

TEST(Bundle, SaveLoadRoundTrip) {
  auto b = train(Variant::RandomStart, fixtures::tiny_hyperparams(8));
  b.id = "probe";
  b.calibration = narrative::NarrativeCalibration{1.5, 0.25, 0.75, 0.8, 3, 120};
  const auto dir = fixtures::temp_dir("bundle");
  save_bundle(b, dir / "probe");
  const auto c = load_bundle(dir / "probe");
  EXPECT_EQ(c.id, b.id);
  EXPECT_EQ(c.variant, b.variant);
  EXPECT_EQ(c.hyperparams, b.hyperparams);
  EXPECT_EQ(c.q, b.q);
  EXPECT_EQ(c.embeddings, b.embeddings);
  EXPECT_EQ(c.baseline_mean_reward, b.baseline_mean_reward);
  EXPECT_EQ(c.baseline_episodes, b.baseline_episodes);
  EXPECT_EQ(c.baseline_seed, b.baseline_seed);
  ASSERT_TRUE(c.calibration.has_value());
  EXPECT_EQ(*c.calibration, *b.calibration);
  std::filesystem::remove_all(dir);
}

TEST(Bundle, LoadRejectsCorruption) {
  const auto b = train(Variant::Standard, fixtures::tiny_hyperparams(3));
  const auto dir = fixtures::temp_dir("bundle-bad");
  save_bundle(b, dir);
  std::filesystem::resize_file(dir / "params.bin", 16);
  EXPECT_THROW(load_bundle(dir), std::exception);
  EXPECT_THROW(load_bundle(dir / "missing"), std::exception);
  std::filesystem::remove_all(dir);
}
