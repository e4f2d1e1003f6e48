#include <CLI11.hpp>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include "commands.hpp"
#include "qtrust/server.hpp"
#include "qtrust/whatif.hpp"

using namespace qtrust;
using nlohmann::json;

namespace {

std::atomic<bool> g_interrupted{false};

void write_json(const std::string& path, const json& j) {
  if (path.empty()) return;
  if (path == "-") {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

// Text goes to stdout unless the JSON report does.
void report(const std::string& json_path, const std::string& text, const json& j) {
  if (json_path != "-") std::cout << text;
  write_json(json_path, j);
}

agent::Variant variant_or_throw(const std::string& name) {
  auto v = agent::parse_variant(name);
  if (!v) throw CLI::ValidationError("--variant", "must be standard, random-ladders or random-start");
  return *v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qtrust: train and inspect grid-game Q agents, run studies, serve live sessions"};
  app.set_config("--config", "", "TOML/INI file supplying default flag values");
  app.require_subcommand(1);

  std::string json_path;
  std::string bundle_dir;
  std::uint64_t seed = 1;
  int episodes = 0;

  // train
  auto* train = app.add_subcommand("train", "train an agent and write its bundle");
  std::string variant_name = "standard";
  std::string hp_file;
  std::string out_dir;
  std::string agent_id;
  int train_steps = 0;
  std::vector<int> hidden;
  double learning_rate = 0.0;
  double gamma = 0.0;
  std::uint64_t train_seed = 0;
  int calibration_episodes = cli::kDefaultCalibrationEpisodes;
  double vee_q = 0.75;
  double dnts_q = 0.75;
  train->add_option("--variant", variant_name, "standard | random-ladders | random-start")
      ->check(CLI::IsMember({"standard", "random-ladders", "random-start"}));
  train->add_option("--hyperparams", hp_file, "JSON hyperparameter file")->check(CLI::ExistingFile);
  train->add_option("--out", out_dir, "bundle directory")->required();
  train->add_option("--id", agent_id, "agent id (default: variant name)");
  train->add_option("--train-steps", train_steps, "override train_steps")->check(CLI::PositiveNumber);
  train->add_option("--hidden", hidden, "override hidden_layer_sizes");
  train->add_option("--learning-rate", learning_rate, "override learning_rate");
  train->add_option("--gamma", gamma, "override gamma");
  train->add_option("--seed", train_seed, "override seed");
  train->add_option("--calibration-episodes", calibration_episodes)->check(CLI::PositiveNumber);
  train->add_option("--vee-quantile", vee_q)->check(CLI::Range(0.0, 1.0));
  train->add_option("--dnts-quantile", dnts_q)->check(CLI::Range(0.0, 1.0));
  train->add_option("--json", json_path, "write the JSON report here ('-' for stdout)");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "greedy agent against the uniform-random policy");
  evaluate->add_option("--bundle", bundle_dir)->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--episodes", episodes, "default 100")->check(CLI::PositiveNumber);
  evaluate->add_option("--seed", seed, "default 12345");
  evaluate->add_option("--json", json_path);

  // baseline
  auto* baseline = app.add_subcommand("baseline", "recompute the unintervened baseline");
  bool write_back = false;
  baseline->add_option("--bundle", bundle_dir)->required()->check(CLI::ExistingDirectory);
  baseline->add_option("--episodes", episodes, "default: the bundle's baseline_episodes")
      ->check(CLI::PositiveNumber);
  baseline->add_option("--seed", seed, "default: the bundle's baseline seed");
  baseline->add_flag("--write", write_back, "store the result in the bundle");
  baseline->add_option("--json", json_path);

  // calibrate
  auto* calibrate = app.add_subcommand("calibrate", "recompute narrative thresholds and store them in the bundle");
  calibrate->add_option("--bundle", bundle_dir)->required()->check(CLI::ExistingDirectory);
  calibrate->add_option("--episodes", calibration_episodes)->check(CLI::PositiveNumber);
  calibrate->add_option("--seed", seed, "default: derived from the training seed");
  calibrate->add_option("--vee-quantile", vee_q)->check(CLI::Range(0.0, 1.0));
  calibrate->add_option("--dnts-quantile", dnts_q)->check(CLI::Range(0.0, 1.0));
  calibrate->add_option("--json", json_path);

  // brittleness
  auto* brittle = app.add_subcommand("brittleness", "enemy-removal sweep with significance tests");
  int k_max = 3;
  brittle->add_option("--bundle", bundle_dir)->required()->check(CLI::ExistingDirectory);
  brittle->add_option("--k-max", k_max)->check(CLI::NonNegativeNumber);
  brittle->add_option("--episodes", episodes, "per k, default 100")->check(CLI::PositiveNumber);
  brittle->add_option("--seed", seed);
  brittle->add_option("--json", json_path);

  // trace
  auto* trace = app.add_subcommand("trace", "record one greedy episode as a JSON-lines trace");
  std::string mode_name = "instantaneous";
  std::string trace_out;
  trace->add_option("--bundle", bundle_dir)->required()->check(CLI::ExistingDirectory);
  trace->add_option("--seed", seed);
  trace->add_option("--mode", mode_name, "instantaneous | suffix-sum | cumulative")
      ->check(CLI::IsMember({"instantaneous", "suffix-sum", "cumulative"}));
  trace->add_option("--out", trace_out, "trace file")->required();
  trace->add_option("--json", json_path);

  // serve
  auto* serve = app.add_subcommand("serve", "run the session service");
  std::string service_config;
  int port = -1;
  std::string agent_dir;
  std::string templates;
  serve->add_option("--service-config", service_config, "JSON service config")->check(CLI::ExistingFile);
  serve->add_option("--port", port)->check(CLI::Range(0, 65535));
  serve->add_option("--agent-dir", agent_dir);
  serve->add_option("--templates", templates, "narrative template file")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      cli::TrainOptions opt;
      opt.variant = variant_or_throw(variant_name);
      if (!hp_file.empty()) {
        std::ifstream in(hp_file);
        opt.hyperparams = agent::hyperparams_from_json(json::parse(in));
      }
      if (train_steps > 0) opt.hyperparams.train_steps = train_steps;
      if (!hidden.empty()) opt.hyperparams.hidden_layer_sizes = hidden;
      if (learning_rate > 0.0) opt.hyperparams.learning_rate = learning_rate;
      if (gamma > 0.0) opt.hyperparams.gamma = gamma;
      if (train_seed > 0) opt.hyperparams.seed = train_seed;
      opt.out = out_dir;
      opt.id = agent_id;
      opt.calibration_episodes = calibration_episodes;
      opt.vee_quantile = vee_q;
      opt.dnts_quantile = dnts_q;
      const auto r = cli::cmd_train(opt);
      report(json_path, cli::format(r), cli::to_json(r));
    } else if (evaluate->parsed()) {
      const auto bundle = agent::load_bundle(bundle_dir);
      const auto r = cli::cmd_evaluate(bundle, episodes > 0 ? episodes : 100,
                                       evaluate->count("--seed") ? seed : cli::kDefaultEvaluationSeed);
      report(json_path, cli::format(r), cli::to_json(r));
    } else if (baseline->parsed()) {
      auto bundle = agent::load_bundle(bundle_dir);
      const int n = episodes > 0 ? episodes : bundle.baseline_episodes;
      const std::uint64_t s = baseline->count("--seed") ? seed : bundle.baseline_seed;
      const double value = whatif::baseline(bundle, n, s);
      if (write_back) {
        bundle.baseline_mean_reward = value;
        bundle.baseline_episodes = n;
        bundle.baseline_seed = s;
        agent::save_bundle(bundle, bundle_dir);
      }
      char buf[160];
      std::snprintf(buf, sizeof(buf), "baseline %.4f over %d episodes (seed %llu, epsilon %g)%s\n", value, n,
                    static_cast<unsigned long long>(s), bundle.hyperparams.rollout_epsilon,
                    write_back ? ", written" : "");
      report(json_path, buf,
             {{"kind", "baseline"},
              {"agent_id", bundle.id},
              {"mean_reward", value},
              {"episodes", n},
              {"seed", s},
              {"epsilon", bundle.hyperparams.rollout_epsilon}});
    } else if (calibrate->parsed()) {
      auto bundle = agent::load_bundle(bundle_dir);
      const std::uint64_t s = calibrate->count("--seed") ? seed : derive_seed(bundle.hyperparams.seed, "calibration");
      bundle.calibration = cli::calibrate_bundle(bundle, calibration_episodes, s, vee_q, dnts_q);
      agent::save_bundle(bundle, bundle_dir);
      char buf[200];
      std::snprintf(buf, sizeof(buf), "calibrated %s: vee threshold %.4f, dnts threshold %.4f (%zu ticks)\n",
                    bundle.id.c_str(), bundle.calibration->vee_threshold, bundle.calibration->dnts_threshold,
                    bundle.calibration->sample_count);
      json j = narrative::to_json(*bundle.calibration);
      j["kind"] = "calibrate";
      j["seed"] = s;
      report(json_path, buf, j);
    } else if (brittle->parsed()) {
      const auto bundle = agent::load_bundle(bundle_dir);
      const auto r = cli::cmd_brittleness(bundle, k_max, episodes > 0 ? episodes : 100, seed);
      report(json_path, study::format_report(r), study::to_json(r));
    } else if (trace->parsed()) {
      const auto bundle = agent::load_bundle(bundle_dir);
      std::ofstream out(trace_out);
      if (!out) throw std::runtime_error("cannot write " + trace_out);
      const auto s = cli::cmd_trace(bundle, seed, *metrics::parse_mode(mode_name), out);
      report(json_path, cli::format(s), cli::to_json(s));
    } else if (serve->parsed()) {
      service::ServiceConfig cfg =
          service_config.empty() ? service::ServiceConfig{} : service::load_service_config(service_config);
      service::apply_env_overrides(cfg);
      if (port >= 0) cfg.port = port;
      if (!agent_dir.empty()) cfg.agent_dir = agent_dir;
      if (!templates.empty()) cfg.templates = templates;
      auto tmpl = std::make_shared<const narrative::Templates>(
          cfg.templates ? narrative::Templates::load(*cfg.templates) : narrative::Templates::builtin());
      service::SessionManager manager(service::Registry::load(cfg.agent_dir), tmpl, cfg.whatif_samples);
      service::Server server(manager, cfg);
      const int bound = server.bind();
      if (bound < 0) throw std::runtime_error("cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
      std::printf("serving %zu agents from %s on http://%s:%d\n", manager.registry().list().size(),
                  cfg.agent_dir.string().c_str(), cfg.host.c_str(), bound);
      std::fflush(stdout);
      std::signal(SIGINT, [](int) { g_interrupted = true; });
      std::signal(SIGTERM, [](int) { g_interrupted = true; });
      std::thread watcher([&] {
        while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
        manager.shutdown();
        server.stop();
      });
      server.serve();
      g_interrupted = true;
      watcher.join();
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const agent::InvalidConfig& e) {
    std::fprintf(stderr, "invalid config: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
