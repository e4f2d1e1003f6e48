#include "qtrust/study.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "qtrust/interventions.hpp"

namespace qtrust::study {

using nlohmann::json;

game::GameState sweep_start(const game::GameState& fresh, int k, std::uint64_t seed, int episode) {
  const int count = static_cast<int>(fresh.enemies.size());
  if (k < 0 || k > count) throw std::invalid_argument("cannot remove " + std::to_string(k) + " enemies");
  std::vector<int> order(static_cast<std::size_t>(count));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "remove", static_cast<std::uint64_t>(episode)));
  for (int i = count - 1; i > 0; --i)
    std::swap(order[static_cast<std::size_t>(i)], order[rng.uniform_index(static_cast<std::uint64_t>(i) + 1)]);
  std::vector<int> chosen(order.begin(), order.begin() + k);
  // Highest index first so the remaining indices stay valid.
  std::sort(chosen.rbegin(), chosen.rend());
  game::GameState state = fresh;
  for (int idx : chosen) state = interventions::apply(state, interventions::RemoveEnemy{idx});
  return state;
}

StudyReport brittleness(const agent::AgentBundle& bundle, const BrittlenessConfig& cfg, metrics::Execution exec) {
  if (cfg.episodes < 2) throw std::invalid_argument("brittleness needs at least two episodes per row");
  if (cfg.k_max < 0) throw std::invalid_argument("k_max must be non-negative");
  const auto fresh = agent::evaluation_starts(bundle.variant, cfg.episodes, cfg.seed);
  const auto policy_seeds = agent::evaluation_policy_seeds(cfg.episodes, cfg.seed);
  for (const auto& s : fresh)
    if (cfg.k_max > static_cast<int>(s.enemies.size()))
      throw std::invalid_argument("k_max exceeds the enemy count");

  StudyReport report;
  report.agent_id = bundle.id;
  report.variant = bundle.variant;
  report.config = cfg;
  report.stored_baseline = bundle.baseline_mean_reward;
  for (int k = 0; k <= cfg.k_max; ++k) {
    std::vector<game::GameState> starts;
    starts.reserve(fresh.size());
    for (int i = 0; i < cfg.episodes; ++i) starts.push_back(sweep_start(fresh[i], k, cfg.seed, i));
    SweepRow row;
    row.k = k;
    row.n = cfg.episodes;
    row.rewards = agent::play_out_many(bundle.q, starts, cfg.epsilon, policy_seeds, exec);
    row.mean = stats::mean(row.rewards);
    row.stddev = stats::stddev(row.rewards);
    report.rows.push_back(std::move(row));
  }
  const auto& base = report.rows.front();
  report.direction_observed = cfg.k_max > 0;
  report.magnified = cfg.k_max > 0;
  for (int k = 1; k <= cfg.k_max; ++k) {
    const auto& row = report.rows[static_cast<std::size_t>(k)];
    Comparison c;
    c.k = k;
    c.mean_difference = row.mean - base.mean;
    c.rank_sum = stats::rank_sum_test(row.rewards, base.rewards);
    c.welch = stats::welch_t_test(row.rewards, base.rewards);
    c.expected_direction = row.mean < base.mean;
    report.direction_observed = report.direction_observed && c.expected_direction;
    report.magnified = report.magnified && row.mean < report.rows[static_cast<std::size_t>(k - 1)].mean;
    report.comparisons.push_back(c);
  }
  return report;
}

json to_json(const StudyReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"k", row.k}, {"n", row.n}, {"mean", row.mean}, {"stddev", row.stddev}, {"rewards", row.rewards}});
  json tests = json::array();
  for (const auto& c : r.comparisons)
    tests.push_back({{"k", c.k},
                     {"mean_difference", c.mean_difference},
                     {"rank_sum", {{"z", c.rank_sum.statistic}, {"p_value", c.rank_sum.p_value}}},
                     {"welch", {{"t", c.welch.statistic}, {"df", c.welch.df}, {"p_value", c.welch.p_value}}},
                     {"expected_direction", c.expected_direction}});
  return {{"kind", "brittleness"},
          {"agent_id", r.agent_id},
          {"variant", agent::variant_name(r.variant)},
          {"config",
           {{"k_max", r.config.k_max},
            {"episodes", r.config.episodes},
            {"seed", r.config.seed},
            {"epsilon", r.config.epsilon}}},
          {"stored_baseline", r.stored_baseline},
          {"rows", rows},
          {"comparisons", tests},
          {"direction_observed", r.direction_observed},
          {"magnified", r.magnified}};
}

std::string format_report(const StudyReport& r) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "brittleness  agent=%s variant=%s episodes=%d seed=%llu epsilon=%g\n",
                r.agent_id.c_str(), std::string(agent::variant_name(r.variant)).c_str(), r.config.episodes,
                static_cast<unsigned long long>(r.config.seed), r.config.epsilon);
  out += buf;
  out += "  k      n      mean    stddev\n";
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof(buf), "  %d  %5d  %8.2f  %8.2f\n", row.k, row.n, row.mean, row.stddev);
    out += buf;
  }
  for (const auto& c : r.comparisons) {
    std::snprintf(buf, sizeof(buf),
                  "  k=%d vs k=0: diff %+.2f  rank-sum z=%.3f p=%.4f  welch t=%.3f df=%.1f p=%.4f%s\n", c.k,
                  c.mean_difference, c.rank_sum.statistic, c.rank_sum.p_value, c.welch.statistic, c.welch.df,
                  c.welch.p_value, c.expected_direction ? "" : "  [expected drop not observed]");
    out += buf;
  }
  if (!r.comparisons.empty()) {
    out += r.direction_observed ? "  reward dropped for every k >= 1\n"
                                : "  FLAG: reward did not drop for every k >= 1\n";
    out += r.magnified ? "  drop grows with k\n" : "  FLAG: drop does not grow monotonically with k\n";
  }
  return out;
}

}  // namespace qtrust::study
