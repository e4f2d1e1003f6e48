#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ostream>

#include "qtrust/stats.hpp"
#include "qtrust/whatif.hpp"

namespace qtrust::cli {

using nlohmann::json;

narrative::NarrativeCalibration calibrate_bundle(const agent::AgentBundle& bundle, int episodes, std::uint64_t seed,
                                                 double vee_quantile, double dnts_quantile) {
  if (episodes < 1) throw std::invalid_argument("calibration needs at least one episode");
  std::vector<metrics::EpisodeTrace> traces;
  for (const auto& start : agent::evaluation_starts(bundle.variant, episodes, seed))
    traces.push_back(agent::record_trace(bundle.q, start, bundle.hyperparams.gamma));
  return narrative::calibrate(traces, bundle.embeddings, vee_quantile, dnts_quantile);
}

TrainResult cmd_train(const TrainOptions& options) {
  TrainResult r;
  const auto t0 = std::chrono::steady_clock::now();
  r.bundle = agent::train(options.variant, options.hyperparams, &r.report);
  r.bundle.id = options.id.empty() ? std::string(agent::variant_name(options.variant)) : options.id;
  r.bundle.calibration = calibrate_bundle(r.bundle, options.calibration_episodes,
                                          derive_seed(options.hyperparams.seed, "calibration"), options.vee_quantile,
                                          options.dnts_quantile);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!options.out.empty()) agent::save_bundle(r.bundle, options.out);
  return r;
}

EvaluationReport cmd_evaluate(const agent::AgentBundle& bundle, int episodes, std::uint64_t seed) {
  if (episodes < 2) throw std::invalid_argument("evaluation needs at least two episodes");
  const auto starts = agent::evaluation_starts(bundle.variant, episodes, seed);
  const auto seeds = agent::evaluation_policy_seeds(episodes, seed);
  const auto greedy = agent::play_out_many(bundle.q, starts, 0.0, seeds);
  std::vector<double> random(starts.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(starts.size()); ++i)
    random[i] = agent::play_out_random(starts[i], seeds[i]);
  EvaluationReport r;
  r.episodes = episodes;
  r.seed = seed;
  r.greedy_mean = stats::mean(greedy);
  r.greedy_stddev = stats::stddev(greedy);
  r.random_mean = stats::mean(random);
  r.random_stddev = stats::stddev(random);
  r.ratio = r.random_mean > 0.0 ? r.greedy_mean / r.random_mean : 0.0;
  return r;
}

study::StudyReport cmd_brittleness(const agent::AgentBundle& bundle, int k_max, int episodes, std::uint64_t seed) {
  study::BrittlenessConfig cfg;
  cfg.k_max = k_max;
  cfg.episodes = episodes;
  cfg.seed = seed;
  return study::brittleness(bundle, cfg);
}

TraceSummary cmd_trace(const agent::AgentBundle& bundle, std::uint64_t seed, metrics::VeeMode mode,
                       std::ostream& out) {
  const auto start = game::new_game(agent::episode_board(bundle.variant, seed));
  const auto trace = agent::record_trace(bundle.q, start, bundle.hyperparams.gamma);
  const auto points = metrics::trace_curve(trace, bundle.embeddings, mode);
  metrics::write_trace_jsonl(out, trace, points, bundle.id);

  TraceSummary s;
  s.ticks = trace.size();
  s.final_score = trace.size() == 0 ? static_cast<double>(start.score)
                                    : static_cast<double>(trace.records.back().state.score) + trace.records.back().reward;
  if (points.empty()) return s;
  s.vee_min = s.dnts_min = std::numeric_limits<double>::infinity();
  s.vee_max = s.dnts_max = -std::numeric_limits<double>::infinity();
  for (const auto& p : points) {
    s.vee_min = std::min(s.vee_min, p.vee);
    s.vee_max = std::max(s.vee_max, p.vee);
    s.vee_mean += p.vee;
    s.dnts_min = std::min(s.dnts_min, p.dnts);
    s.dnts_max = std::max(s.dnts_max, p.dnts);
    s.dnts_mean += p.dnts;
  }
  s.vee_mean /= static_cast<double>(points.size());
  s.dnts_mean /= static_cast<double>(points.size());
  return s;
}

json to_json(const TrainResult& r) {
  return {{"kind", "train"},
          {"agent_id", r.bundle.id},
          {"variant", agent::variant_name(r.bundle.variant)},
          {"hyperparams", agent::to_json(r.bundle.hyperparams)},
          {"episodes", r.report.episode_returns.size()},
          {"env_steps", r.report.env_steps},
          {"updates", r.report.updates},
          {"baseline_mean_reward", r.bundle.baseline_mean_reward},
          {"baseline_episodes", r.bundle.baseline_episodes},
          {"embedding_rows", r.bundle.embeddings.rows()},
          {"calibration", r.bundle.calibration ? narrative::to_json(*r.bundle.calibration) : json(nullptr)},
          {"seconds", r.seconds}};
}

json to_json(const EvaluationReport& r) {
  return {{"kind", "evaluate"},         {"episodes", r.episodes},           {"seed", r.seed},
          {"greedy_mean", r.greedy_mean}, {"greedy_stddev", r.greedy_stddev}, {"random_mean", r.random_mean},
          {"random_stddev", r.random_stddev}, {"ratio", r.ratio}};
}

json to_json(const TraceSummary& s) {
  return {{"kind", "trace"},
          {"ticks", s.ticks},
          {"final_score", s.final_score},
          {"vee", {{"min", s.vee_min}, {"mean", s.vee_mean}, {"max", s.vee_max}}},
          {"dnts", {{"min", s.dnts_min}, {"mean", s.dnts_mean}, {"max", s.dnts_max}}}};
}

std::string format(const TrainResult& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "trained %s (%s): %zu episodes, %ld env steps, %ld updates in %.1fs\n"
                "  baseline %.2f over %d episodes, %zu embedding rows\n",
                r.bundle.id.c_str(), std::string(agent::variant_name(r.bundle.variant)).c_str(),
                r.report.episode_returns.size(), r.report.env_steps, r.report.updates, r.seconds,
                r.bundle.baseline_mean_reward, r.bundle.baseline_episodes, r.bundle.embeddings.rows());
  std::string out = buf;
  if (r.bundle.calibration) {
    std::snprintf(buf, sizeof(buf), "  thresholds vee %.4f (q=%.2f)  dnts %.4f (q=%.2f)\n",
                  r.bundle.calibration->vee_threshold, r.bundle.calibration->vee_quantile,
                  r.bundle.calibration->dnts_threshold, r.bundle.calibration->dnts_quantile);
    out += buf;
  }
  return out;
}

std::string format(const EvaluationReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "evaluate  episodes=%d seed=%llu\n  greedy %.2f (sd %.2f)  random %.2f (sd %.2f)  ratio %.2f\n",
                r.episodes, static_cast<unsigned long long>(r.seed), r.greedy_mean, r.greedy_stddev, r.random_mean,
                r.random_stddev, r.ratio);
  return buf;
}

std::string format(const TraceSummary& s) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "trace  ticks=%zu score=%.0f\n  vee   min %.4f  mean %.4f  max %.4f\n"
                "  dnts  min %.4f  mean %.4f  max %.4f\n",
                s.ticks, s.final_score, s.vee_min, s.vee_mean, s.vee_max, s.dnts_min, s.dnts_mean, s.dnts_max);
  return buf;
}

}  // namespace qtrust::cli
