#pragma once

// Headless experiment commands behind the qtrust executable.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <json.hpp>
#include <string>

#include "qtrust/narrative.hpp"
#include "qtrust/qagent.hpp"
#include "qtrust/study.hpp"

namespace qtrust::cli {

inline constexpr int kDefaultCalibrationEpisodes = 20;
inline constexpr std::uint64_t kDefaultEvaluationSeed = 12345;

struct TrainOptions {
  agent::Variant variant = agent::Variant::Standard;
  agent::Hyperparams hyperparams;
  std::filesystem::path out;
  std::string id;  // variant name when empty
  int calibration_episodes = kDefaultCalibrationEpisodes;
  double vee_quantile = 0.75;
  double dnts_quantile = 0.75;
};

struct TrainResult {
  agent::AgentBundle bundle;
  agent::TrainReport report;
  double seconds = 0.0;
};

// Train, baseline and calibrate, then write the bundle to options.out (if set).
TrainResult cmd_train(const TrainOptions& options);

// Greedy traces on fresh boards of the bundle's variant, seeded by `seed`.
narrative::NarrativeCalibration calibrate_bundle(const agent::AgentBundle& bundle, int episodes, std::uint64_t seed,
                                                 double vee_quantile = 0.75, double dnts_quantile = 0.75);

struct EvaluationReport {
  int episodes = 0;
  std::uint64_t seed = 0;
  double greedy_mean = 0.0;
  double greedy_stddev = 0.0;
  double random_mean = 0.0;
  double random_stddev = 0.0;
  double ratio = 0.0;  // greedy_mean / random_mean
};

// Greedy agent against the uniform-random policy on the same boards and
// policy seeds.
EvaluationReport cmd_evaluate(const agent::AgentBundle& bundle, int episodes, std::uint64_t seed);

study::StudyReport cmd_brittleness(const agent::AgentBundle& bundle, int k_max, int episodes, std::uint64_t seed);

struct TraceSummary {
  std::size_t ticks = 0;
  double final_score = 0.0;
  double vee_min = 0.0, vee_mean = 0.0, vee_max = 0.0;
  double dnts_min = 0.0, dnts_mean = 0.0, dnts_max = 0.0;
};

// One greedy episode on board `seed` of the bundle's variant; writes the
// JSON-lines trace to `out`.
TraceSummary cmd_trace(const agent::AgentBundle& bundle, std::uint64_t seed, metrics::VeeMode mode,
                       std::ostream& out);

nlohmann::json to_json(const TrainResult& r);
nlohmann::json to_json(const EvaluationReport& r);
nlohmann::json to_json(const TraceSummary& s);
std::string format(const TrainResult& r);
std::string format(const EvaluationReport& r);
std::string format(const TraceSummary& s);

}  // namespace qtrust::cli
