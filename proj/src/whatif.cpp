#include "qtrust/whatif.hpp"

namespace qtrust::whatif {

using nlohmann::json;

std::string_view classification_name(Classification c) { return c == Classification::Green ? "green" : "red"; }

Classification classify(double mean_reward, double baseline) {
  return mean_reward > kGreenFraction * baseline ? Classification::Green : Classification::Red;
}

double baseline(const agent::QFunction& q, agent::Variant variant, int n, std::uint64_t seed, double epsilon,
                metrics::Execution exec) {
  if (n < 1) throw std::invalid_argument("baseline needs at least one episode");
  const auto rewards = agent::play_out_many(q, agent::evaluation_starts(variant, n, seed), epsilon,
                                            agent::evaluation_policy_seeds(n, seed), exec);
  double sum = 0.0;
  for (double r : rewards) sum += r;
  return sum / static_cast<double>(n);
}

double baseline(const agent::AgentBundle& agent, int n, std::uint64_t seed, metrics::Execution exec) {
  return baseline(agent.q, agent.variant, n, seed, agent.hyperparams.rollout_epsilon, exec);
}

std::optional<interventions::Intervention> panel_instance(const game::GameState& state, interventions::Kind kind,
                                                          std::uint64_t seed) {
  const auto candidates = interventions::enumerate(state, kind);
  if (candidates.empty()) return std::nullopt;
  Rng rng(derive_seed(seed, interventions::kind_name(kind)));
  return candidates[rng.uniform_index(candidates.size())];
}

std::uint64_t panel_rollout_seed(std::uint64_t seed, interventions::Kind kind) {
  return derive_seed(seed, "rollouts", static_cast<std::uint64_t>(kind));
}

WhatIfResult evaluate(const agent::AgentBundle& agent, const WhatIfQuery& query, metrics::Execution exec) {
  if (query.sample_count < 1) throw std::invalid_argument("sample_count must be at least 1");
  auto instance = query.instance ? query.instance : panel_instance(query.base, query.kind, query.rollout_seed);
  if (!instance)
    throw NotApplicable("no valid " + std::string(interventions::kind_name(query.kind)) + " intervention");

  WhatIfResult result;
  result.instance = *instance;
  const game::GameState start = interventions::apply(query.base, *instance);
  if (start.terminal) {
    result.rollout_rewards.assign(static_cast<std::size_t>(query.sample_count), static_cast<double>(start.score));
  } else {
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(query.sample_count));
    for (std::size_t k = 0; k < seeds.size(); ++k) seeds[k] = derive_seed(query.rollout_seed, "rollout", k);
    result.rollout_rewards = agent::play_out_many(agent.q, std::vector<game::GameState>(seeds.size(), start),
                                                  query.rollout_epsilon, seeds, exec);
  }
  double sum = 0.0;
  for (double r : result.rollout_rewards) sum += r;
  result.mean_reward = sum / static_cast<double>(result.rollout_rewards.size());
  result.baseline = agent.baseline_mean_reward;
  result.classification = classify(result.mean_reward, result.baseline);
  return result;
}

std::vector<PanelEntry> panel(const agent::AgentBundle& agent, const game::GameState& state, std::uint64_t seed,
                              int sample_count, metrics::Execution exec) {
  std::vector<PanelEntry> out;
  for (auto kind : interventions::kPanelKinds) {
    PanelEntry entry{kind, std::nullopt};
    if (auto instance = panel_instance(state, kind, seed)) {
      WhatIfQuery q;
      q.agent_id = agent.id;
      q.base = state;
      q.kind = kind;
      q.instance = instance;
      q.sample_count = sample_count;
      q.rollout_seed = panel_rollout_seed(seed, kind);
      q.rollout_epsilon = agent.hyperparams.rollout_epsilon;
      entry.result = evaluate(agent, q, exec);
    }
    out.push_back(std::move(entry));
  }
  return out;
}

json to_json(const WhatIfResult& r) {
  return {{"intervention", interventions::to_json(r.instance)},
          {"description", interventions::describe(r.instance)},
          {"mean_reward", r.mean_reward},
          {"baseline", r.baseline},
          {"threshold", kGreenFraction * r.baseline},
          {"classification", classification_name(r.classification)},
          {"rollout_rewards", r.rollout_rewards}};
}

json to_json(const PanelEntry& e) {
  json j{{"kind", interventions::kind_name(e.kind)}, {"applicable", e.result.has_value()}};
  j["result"] = e.result ? to_json(*e.result) : json(nullptr);
  return j;
}

}  // namespace qtrust::whatif
