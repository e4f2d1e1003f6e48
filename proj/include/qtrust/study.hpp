#pragma once

// Enemy-removal sweep: how does an agent's reward move as enemies are taken
// off the board?

#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include "qtrust/qagent.hpp"
#include "qtrust/stats.hpp"

namespace qtrust::study {

struct BrittlenessConfig {
  int k_max = 3;
  int episodes = 100;
  std::uint64_t seed = 1;
  double epsilon = 0.0;  // 0 plays greedily
};

struct SweepRow {
  int k = 0;
  int n = 0;
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> rewards;  // by episode index
};

struct Comparison {
  int k = 0;
  double mean_difference = 0.0;  // mean(k) - mean(0)
  stats::TestResult rank_sum;
  stats::TestResult welch;
  bool expected_direction = false;  // mean(k) < mean(0)
};

struct StudyReport {
  std::string agent_id;
  agent::Variant variant = agent::Variant::Standard;
  BrittlenessConfig config;
  double stored_baseline = 0.0;  // from the bundle, for reference
  std::vector<SweepRow> rows;    // k = 0..k_max
  std::vector<Comparison> comparisons;  // k = 1..k_max against k = 0
  bool direction_observed = false;      // every k >= 1 below k = 0
  bool magnified = false;               // row means strictly decreasing in k
};

// Episode i of every row starts from evaluation board i of the variant
// (the same boards and policy seeds whatif::baseline uses) with the first k
// enemies of a seeded per-episode permutation removed. Throws
// std::invalid_argument when k_max exceeds the board's enemy count.
StudyReport brittleness(const agent::AgentBundle& bundle, const BrittlenessConfig& cfg,
                        metrics::Execution exec = metrics::Execution::Parallel);

// State for episode `episode` of row `k`.
game::GameState sweep_start(const game::GameState& fresh, int k, std::uint64_t seed, int episode);

nlohmann::json to_json(const StudyReport& r);
std::string format_report(const StudyReport& r);

}  // namespace qtrust::study
