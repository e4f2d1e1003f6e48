#pragma once

// How would the agent do if the live state were intervened on? Rollouts
// continue from the intervened state and are compared against 75% of the
// agent's unintervened baseline.

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qtrust/interventions.hpp"
#include "qtrust/qagent.hpp"

namespace qtrust::whatif {

inline constexpr double kGreenFraction = 0.75;
inline constexpr int kDefaultBaselineEpisodes = 30;
inline constexpr int kDefaultSampleCount = 10;

enum class Classification { Green, Red };

std::string_view classification_name(Classification c);

// Green iff mean_reward > 0.75 * baseline (strict).
Classification classify(double mean_reward, double baseline);

class NotApplicable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct WhatIfQuery {
  std::string agent_id;
  game::GameState base;
  interventions::Kind kind = interventions::Kind::MovePlayer;
  // When absent, one instance is drawn from enumerate(base, kind) with rollout_seed.
  std::optional<interventions::Intervention> instance;
  int sample_count = kDefaultSampleCount;
  std::uint64_t rollout_seed = 0;
  double rollout_epsilon = 0.0;  // 0 is greedy
};

struct WhatIfResult {
  interventions::Intervention instance;
  double mean_reward = 0.0;  // includes points banked before the intervention
  double baseline = 0.0;
  Classification classification = Classification::Red;
  std::vector<double> rollout_rewards;
};

// One slot of the three-card panel; `result` is empty when no valid
// instance of the kind exists.
struct PanelEntry {
  interventions::Kind kind = interventions::Kind::AddLineSegment;
  std::optional<WhatIfResult> result;
};

// Mean final score over n episodes played with agent.hyperparams.rollout_epsilon (greedy by default)
// on fresh boards of the agent's variant.
double baseline(const agent::AgentBundle& agent, int n, std::uint64_t seed,
                metrics::Execution exec = metrics::Execution::Parallel);
double baseline(const agent::QFunction& q, agent::Variant variant, int n, std::uint64_t seed, double epsilon,
                metrics::Execution exec = metrics::Execution::Parallel);

// Throws interventions::InvalidIntervention for an invalid instance and
// NotApplicable when no instance of the kind exists.
WhatIfResult evaluate(const agent::AgentBundle& agent, const WhatIfQuery& query,
                      metrics::Execution exec = metrics::Execution::Parallel);

// AddLineSegment, FillSegment and MovePlayer, in that order.
std::vector<PanelEntry> panel(const agent::AgentBundle& agent, const game::GameState& state, std::uint64_t seed,
                              int sample_count = kDefaultSampleCount,
                              metrics::Execution exec = metrics::Execution::Parallel);

// The instance panel() picks for `kind`, if any.
std::optional<interventions::Intervention> panel_instance(const game::GameState& state, interventions::Kind kind,
                                                          std::uint64_t seed);
std::uint64_t panel_rollout_seed(std::uint64_t seed, interventions::Kind kind);

nlohmann::json to_json(const WhatIfResult& r);
nlohmann::json to_json(const PanelEntry& e);

}  // namespace qtrust::whatif
