#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "support.hpp"

using namespace qtrust;
using namespace qtrust::cli;
using nlohmann::json;

namespace {

const TrainResult& trained() {
  static const TrainResult r = [] {
    TrainOptions o;
    o.variant = agent::Variant::RandomStart;
    o.hyperparams = fixtures::tiny_hyperparams(15);
    o.calibration_episodes = 3;
    o.id = "cli-probe";
    return cmd_train(o);
  }();
  return r;
}

int run(const std::string& args) {
  const int rc = std::system((std::string(QTRUST_BIN) + " " + args + " >/dev/null 2>&1").c_str());
  return WEXITSTATUS(rc);
}

}  // namespace

TEST(Train, CalibratesAndBaselines) {
  const auto& r = trained();
  EXPECT_EQ(r.bundle.id, "cli-probe");
  ASSERT_TRUE(r.bundle.calibration.has_value());
  EXPECT_EQ(r.bundle.calibration->trace_count, 3u);
  EXPECT_GE(r.bundle.calibration->vee_threshold, 0.0);
  EXPECT_EQ(r.report.updates, r.bundle.hyperparams.train_steps);
  const auto j = to_json(r);
  EXPECT_EQ(j["agent_id"], "cli-probe");
  EXPECT_FALSE(format(r).empty());
}

TEST(Train, WritesLoadableBundle) {
  const auto dir = fixtures::temp_dir("cli-train");
  TrainOptions o;
  o.hyperparams = fixtures::tiny_hyperparams(16);
  o.calibration_episodes = 2;
  o.out = dir / "agent";
  const auto r = cmd_train(o);
  const auto loaded = agent::load_bundle(dir / "agent");
  EXPECT_EQ(loaded.id, "standard");
  EXPECT_EQ(loaded.q, r.bundle.q);
  EXPECT_EQ(loaded.calibration, r.bundle.calibration);
  std::filesystem::remove_all(dir);
}

TEST(Calibrate, DeterministicGivenSeed) {
  const auto& b = trained().bundle;
  EXPECT_EQ(calibrate_bundle(b, 2, 7), calibrate_bundle(b, 2, 7));
  const auto c = calibrate_bundle(b, 2, 7, 1.0, 1.0);
  EXPECT_GE(c.vee_threshold, calibrate_bundle(b, 2, 7).vee_threshold);
}

TEST(Evaluate, SharedBoardsAndRatio) {
  const auto r = cmd_evaluate(trained().bundle, 6, 21);
  EXPECT_EQ(r.episodes, 6);
  EXPECT_EQ(r.seed, 21u);
  if (r.random_mean > 0.0) {
    EXPECT_DOUBLE_EQ(r.ratio, r.greedy_mean / r.random_mean);
  }
  const auto again = cmd_evaluate(trained().bundle, 6, 21);
  EXPECT_EQ(again.greedy_mean, r.greedy_mean);
  EXPECT_EQ(again.random_mean, r.random_mean);
  EXPECT_EQ(to_json(r)["episodes"], 6);
  EXPECT_NE(format(r).find("ratio"), std::string::npos);
}

TEST(Brittleness, Runs) {
  const auto r = cmd_brittleness(trained().bundle, 2, 3, 4);
  EXPECT_EQ(r.rows.size(), 3u);
  EXPECT_EQ(r.comparisons.size(), 2u);
}

TEST(Trace, WritesOneLinePerTick) {
  std::stringstream out;
  const auto s = cmd_trace(trained().bundle, 3, metrics::VeeMode::SuffixSum, out);
  const auto file = metrics::read_trace_jsonl(out);
  EXPECT_EQ(file.rows.size(), s.ticks);
  EXPECT_EQ(file.header.mode, metrics::VeeMode::SuffixSum);
  EXPECT_LE(s.vee_min, s.vee_mean);
  EXPECT_LE(s.vee_mean, s.vee_max);
  EXPECT_LE(s.dnts_min, s.dnts_max);
  EXPECT_EQ(to_json(s)["ticks"], s.ticks);
}

TEST(Executable, ExitCodes) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_NE(run(""), 0);
  EXPECT_NE(run("evaluate --bundle /nonexistent"), 0);
  const auto dir = fixtures::temp_dir("cli-exe");
  std::ofstream(dir / "hp.json") << R"({"gamma": 2.0})";
  EXPECT_EQ(run("train --hyperparams " + (dir / "hp.json").string() + " --out " + (dir / "a").string()), 2);
  std::ofstream(dir / "hp.json") << R"({"train_steps": 200, "learning_starts": 50, "batch_size": 8,
    "hidden_layer_sizes": [8], "buffer_capacity": 200, "embedding_set_limit": 50, "baseline_episodes": 2})";
  const auto bundle = (dir / "a").string();
  ASSERT_EQ(run("train --hyperparams " + (dir / "hp.json").string() + " --out " + bundle +
                " --calibration-episodes 2 --json " + (dir / "train.json").string()),
            0);
  std::ifstream in(dir / "train.json");
  const auto j = json::parse(in);
  EXPECT_EQ(j["agent_id"], "standard");
  EXPECT_EQ(run("evaluate --bundle " + bundle + " --episodes 3"), 0);
  EXPECT_EQ(run("baseline --bundle " + bundle + " --write"), 0);
  EXPECT_EQ(run("calibrate --bundle " + bundle + " --episodes 2"), 0);
  EXPECT_EQ(run("brittleness --bundle " + bundle + " --episodes 3 --k-max 1"), 0);
  EXPECT_EQ(run("trace --bundle " + bundle + " --out " + (dir / "t.jsonl").string()), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "t.jsonl"));
  EXPECT_NE(run("trace --bundle " + bundle + " --mode sideways --out /dev/null"), 0);
  std::filesystem::remove_all(dir);
}
