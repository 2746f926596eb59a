// Command-line front end for the full pipeline: excitation data generation,
// plant identification, RL training, validation, export, and the UDP
// control service.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "h2df/config.hpp"
#include "h2df/evaluate.hpp"
#include "h2df/policy_io.hpp"
#include "h2df/runtime.hpp"

namespace fs = std::filesystem;
using namespace h2df;

namespace {

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop.store(true); }

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : fallback;
}

struct Common {
  std::string config_path;
  std::string out_root;
  std::string run_name = "default";
  std::int64_t seed = -1;  // -1: keep configured seeds

  RunConfig resolve() const {
    RunConfig cfg = load_run_config(config_path);
    if (seed >= 0) {
      const auto s = std::uint64_t(seed);
      cfg.seed = s;
      cfg.prbs.seed = s;
      cfg.plant_train.seed = s;
      cfg.noise.seed = s + 1;
      cfg.episode.seed = s + 2;
      cfg.agent.seed = s + 3;
    }
    return cfg;
  }

  fs::path run_dir() const {
    fs::path dir = fs::path(out_root) / run_name;
    fs::create_directories(dir);
    return dir;
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON config file");
  cmd->add_option("--out-root", c.out_root, "output root directory")
      ->default_val(env_or("H2DF_OUT_ROOT", "runs"));
  cmd->add_option("--run", c.run_name, "run name (subdirectory of out root)");
  cmd->add_option("--seed", c.seed, "global seed override")
      ->default_val(std::stoll(env_or("H2DF_SEED", "-1")));
}

EngineEnv make_env(const PlantModel& plant, const RunConfig& cfg,
                   bool augmented) {
  return EngineEnv(plant, cfg.reward, cfg.polytope, cfg.noise, cfg.episode,
                   augmented, cfg.episode.seed);
}

// cascade table: {"hysteresis": h, "bins": [{"lo":..,"hi":..,"policy_path":..}]}
PolicyRuntime load_runtime_from_cascade(const std::string& cascade_path,
                                        const PlantModel& plant) {
  std::ifstream f(cascade_path);
  if (!f) throw std::runtime_error("cannot open cascade table: " + cascade_path);
  json j = json::parse(f);
  CascadeConfig cascade;
  cascade.bins.clear();
  cascade.hysteresis = j.value("hysteresis", 0.5);
  std::vector<ActorNetwork> policies;
  const fs::path base = fs::path(cascade_path).parent_path();
  for (const auto& b : j.at("bins")) {
    fs::path p = b.at("policy_path").get<std::string>();
    if (p.is_relative()) p = base / p;
    policies.push_back(load_policy(p.string()));
    cascade.bins.push_back({b.at("lo").get<double>(), b.at("hi").get<double>(),
                            int(policies.size()) - 1});
  }
  const bool augmented =
      policies.front().net.input_size() == std::size_t(kObservationSize);
  return PolicyRuntime(std::move(policies), std::move(cascade), plant,
                       augmented);
}

PolicyRuntime load_runtime_single(const std::string& policy_path,
                                  const PlantModel& plant) {
  std::vector<ActorNetwork> policies;
  policies.push_back(load_policy(policy_path));
  CascadeConfig cascade;
  cascade.bins = {{0.0, 17.0, 0}};
  const bool augmented =
      policies.front().net.input_size() == std::size_t(kObservationSize);
  return PolicyRuntime(std::move(policies), std::move(cascade), plant,
                       augmented);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"h2df: dual-fuel engine load-tracking control pipeline"};
  app.require_subcommand(1);

  // gen-data -----------------------------------------------------------
  Common gd_common;
  int gd_cycles = 20000;
  bool gd_no_noise = false;
  auto* gen_data = app.add_subcommand("gen-data",
                                      "generate excitation dataset");
  add_common(gen_data, gd_common);
  gen_data->add_option("--cycles", gd_cycles, "number of engine cycles");
  gen_data->add_flag("--no-noise", gd_no_noise, "disable measurement noise");

  // train-plant --------------------------------------------------------
  Common tp_common;
  std::string tp_data;
  int tp_epochs = -1;
  auto* train_plant_cmd =
      app.add_subcommand("train-plant", "identify the plant model");
  add_common(train_plant_cmd, tp_common);
  train_plant_cmd->add_option("--data", tp_data, "dataset CSV path");
  train_plant_cmd->add_option("--epochs", tp_epochs, "max epochs override");

  // train-agent --------------------------------------------------------
  Common ta_common;
  std::string ta_algo = "td3", ta_plant;
  int ta_episodes = -1;
  bool ta_no_augment = false;
  auto* train_agent_cmd =
      app.add_subcommand("train-agent", "train an RL policy on the plant model");
  add_common(train_agent_cmd, ta_common);
  train_agent_cmd->add_option("--algo", ta_algo, "td3 or ppo")
      ->check(CLI::IsMember({"td3", "ppo"}));
  train_agent_cmd->add_option("--plant", ta_plant, "plant artifact path");
  train_agent_cmd->add_option("--episodes", ta_episodes, "max episodes override");
  train_agent_cmd->add_flag("--no-augment", ta_no_augment,
                            "drop the plant hidden state from observations");

  // ablate --------------------------------------------------------------
  Common ab_common;
  std::string ab_plant;
  int ab_seeds = 3, ab_episodes = -1;
  bool ab_serial = false;
  auto* ablate_cmd = app.add_subcommand(
      "ablate", "state-augmentation study (td3/ppo x with/without)");
  add_common(ablate_cmd, ab_common);
  ablate_cmd->add_option("--plant", ab_plant, "plant artifact path");
  ablate_cmd->add_option("--seeds", ab_seeds, "number of paired seeds");
  ablate_cmd->add_option("--episodes", ab_episodes, "max episodes override");
  ablate_cmd->add_flag("--serial", ab_serial, "disable parallel arms");

  // validate -------------------------------------------------------------
  Common va_common;
  std::string va_policy, va_plant;
  int va_steps = 5000;
  auto* validate_cmd = app.add_subcommand(
      "validate", "run a policy on the long validation trajectory");
  add_common(validate_cmd, va_common);
  validate_cmd->add_option("--policy", va_policy, "policy artifact")->required();
  validate_cmd->add_option("--plant", va_plant, "plant artifact path");
  validate_cmd->add_option("--steps", va_steps, "validation length");

  // export ---------------------------------------------------------------
  Common ex_common;
  std::vector<std::string> ex_policies;
  std::string ex_plant, ex_dir;
  auto* export_cmd = app.add_subcommand(
      "export", "assemble a verified deployment bundle with a cascade table");
  add_common(export_cmd, ex_common);
  export_cmd->add_option("--policy", ex_policies, "policy artifact(s), low to high load")
      ->required();
  export_cmd->add_option("--plant", ex_plant, "plant artifact path");
  export_cmd->add_option("--deploy-dir", ex_dir, "bundle output directory");

  // serve ------------------------------------------------------------------
  Common sv_common;
  std::string sv_bind = "127.0.0.1", sv_cascade, sv_policy, sv_plant,
              sv_metrics;
  int sv_port = 8700, sv_deadline = 50;
  auto* serve_cmd = app.add_subcommand("serve", "UDP policy control service");
  add_common(serve_cmd, sv_common);
  serve_cmd->add_option("--bind", sv_bind, "bind address");
  serve_cmd->add_option("--port", sv_port, "UDP port");
  serve_cmd->add_option("--cascade", sv_cascade, "cascade table JSON");
  serve_cmd->add_option("--policy", sv_policy, "single policy artifact");
  serve_cmd->add_option("--plant", sv_plant, "plant artifact (observer)");
  serve_cmd->add_option("--deadline-ms", sv_deadline, "request deadline");
  serve_cmd->add_option("--metrics-log", sv_metrics, "metrics CSV log path");

  // sim-client --------------------------------------------------------------
  Common sc_common;
  std::string sc_server = "127.0.0.1";
  int sc_port = 8700, sc_steps = 625;
  auto* sim_client_cmd = app.add_subcommand(
      "sim-client", "virtual-engine loopback client for a running server");
  add_common(sim_client_cmd, sc_common);
  sim_client_cmd->add_option("--server", sc_server, "server address");
  sim_client_cmd->add_option("--port", sc_port, "server UDP port");
  sim_client_cmd->add_option("--steps", sc_steps, "closed-loop cycles");

  // bench ---------------------------------------------------------------
  Common be_common;
  std::string be_policy, be_plant;
  int be_iters = 10000;
  auto* bench_cmd = app.add_subcommand(
      "bench", "latency benchmark of the per-request compute path");
  add_common(bench_cmd, be_common);
  bench_cmd->add_option("--policy", be_policy, "policy artifact")->required();
  bench_cmd->add_option("--plant", be_plant, "plant artifact path");
  bench_cmd->add_option("--iters", be_iters, "iterations");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen_data) {
      RunConfig cfg = gd_common.resolve();
      cfg.cycles = gd_cycles;
      if (gd_no_noise) cfg.engine_noise.enabled = false;
      const fs::path dir = gd_common.run_dir();
      echo_config(cfg, dir);
      Dataset ds = collect_dataset(cfg.cycles, cfg.prbs, {}, cfg.engine_noise,
                                   cfg.seed);
      save_dataset_csv(ds, (dir / "dataset.csv").string());
      std::cout << "wrote " << (dir / "dataset.csv").string() << " ("
                << ds.train_size << "/" << ds.val_size << "/" << ds.test_size
                << " train/val/test)\n";
    } else if (*train_plant_cmd) {
      RunConfig cfg = tp_common.resolve();
      if (tp_epochs > 0) cfg.plant_train.max_epochs = tp_epochs;
      const fs::path dir = tp_common.run_dir();
      echo_config(cfg, dir);
      const std::string data_path =
          tp_data.empty() ? (dir / "dataset.csv").string() : tp_data;
      Dataset ds = load_dataset_csv(data_path);
      PlantModel model = make_plant_model(cfg.plant_train.seed);
      const auto history = train_plant(model, ds, cfg.plant_train);
      save_history_csv(history, (dir / "history.csv").string());
      save_plant_artifact((dir / "plant.rlpa").string(), model,
                          cfg.plant_train.seed);

      const auto pred = predict_sequence(model, ds.test_begin(), ds.test_size,
                                         PredictMode::TeacherForced);
      std::vector<EngineOutputs> targets;
      for (std::size_t i = 0; i < ds.test_size; ++i)
        targets.push_back(ds.test_begin()[i].y);
      const auto err = rmspe(pred.outputs, targets);
      std::printf("epochs=%zu test RMSPE%% imep=%.3f nox=%.3f soot=%.3f mprr=%.3f\n",
                  history.size(), err[0], err[1], err[2], err[3]);
    } else if (*train_agent_cmd) {
      RunConfig cfg = ta_common.resolve();
      if (ta_episodes > 0) cfg.agent.max_episodes = ta_episodes;
      const fs::path dir = ta_common.run_dir();
      echo_config(cfg, dir);
      const std::string plant_path =
          ta_plant.empty() ? (dir / "plant.rlpa").string() : ta_plant;
      PlantModel plant = load_plant_artifact(plant_path);
      EngineEnv env = make_env(plant, cfg, !ta_no_augment);
      std::cout << "training " << ta_algo << " (obs "
                << env.observation_size() << ", max "
                << cfg.agent.max_episodes << " episodes)\n";
      TrainResult result =
          train_agent(ta_algo == "td3" ? Algo::Td3 : Algo::Ppo, env, cfg.agent);
      save_curve_csv(result.curve, (dir / "curves.csv").string());
      export_policy((dir / ("policy-" + ta_algo + ".rlpa")).string(),
                    result.policy, cfg.agent.seed, ta_algo);
      std::printf("episodes=%zu final_avg=%.4f threshold_at=%d\n",
                  result.curve.size(),
                  result.curve.empty() ? 0.0 : result.curve.back().moving_avg,
                  result.episodes_to_threshold);
    } else if (*ablate_cmd) {
      RunConfig cfg = ab_common.resolve();
      if (ab_episodes > 0) cfg.agent.max_episodes = ab_episodes;
      const fs::path dir = ab_common.run_dir();
      echo_config(cfg, dir);
      const std::string plant_path =
          ab_plant.empty() ? (dir / "plant.rlpa").string() : ab_plant;
      PlantModel plant = load_plant_artifact(plant_path);
      AblationConfig acfg;
      acfg.seeds.clear();
      for (int s = 1; s <= ab_seeds; ++s)
        acfg.seeds.push_back(cfg.agent.seed + std::uint64_t(s));
      acfg.env_seed = cfg.episode.seed;
      acfg.parallel = !ab_serial;
      const auto rows = ablate_state_augmentation(
          [&](bool augmented, std::uint64_t env_seed) {
            RunConfig c = cfg;
            c.episode.seed = env_seed;
            return make_env(plant, c, augmented);
          },
          cfg.agent, acfg);
      save_ablation_csv(rows, (dir / "ablation.csv").string());
      for (const auto& r : rows)
        std::printf("%s-%s seed=%llu episodes_to_threshold=%d final=%.4f\n",
                    algo_name(r.algo), r.augmented ? "augmented" : "truncated",
                    static_cast<unsigned long long>(r.seed),
                    r.episodes_to_threshold, r.final_avg_reward);
    } else if (*validate_cmd) {
      RunConfig cfg = va_common.resolve();
      const fs::path dir = va_common.run_dir();
      echo_config(cfg, dir);
      const std::string plant_path =
          va_plant.empty() ? (dir / "plant.rlpa").string() : va_plant;
      PlantModel plant = load_plant_artifact(plant_path);
      ActorNetwork policy = load_policy(va_policy);
      const bool augmented =
          policy.net.input_size() == std::size_t(kObservationSize);
      EngineEnv env = make_env(plant, cfg, augmented);
      const auto ref =
          validation_reference(cfg.episode, cfg.episode.seed + 1000, va_steps);
      const auto metrics =
          evaluate_policy(policy, env, ref, cfg.agent.reward_scale);
      save_trace_csv(metrics.trace, (dir / "trace.csv").string());
      std::printf(
          "tracking_rmse_bar=%.4f violation_fraction=%.4f mean_reward=%.4f\n",
          metrics.tracking_rmse, metrics.violation_fraction_total,
          metrics.mean_reward);
    } else if (*export_cmd) {
      RunConfig cfg = ex_common.resolve();
      const fs::path dir =
          ex_dir.empty() ? ex_common.run_dir() / "deploy" : fs::path(ex_dir);
      fs::create_directories(dir);
      const std::string plant_path =
          ex_plant.empty() ? (ex_common.run_dir() / "plant.rlpa").string()
                           : ex_plant;
      load_plant_artifact(plant_path);  // verify before copying
      fs::copy_file(plant_path, dir / "plant.rlpa",
                    fs::copy_options::overwrite_existing);

      json bins = json::array();
      const double span = (cfg.cascade.bins.size() == ex_policies.size())
                              ? 0.0
                              : 17.0 / double(ex_policies.size());
      for (std::size_t i = 0; i < ex_policies.size(); ++i) {
        load_policy(ex_policies[i]);  // verify
        const std::string name = "policy-" + std::to_string(i) + ".rlpa";
        fs::copy_file(ex_policies[i], dir / name,
                      fs::copy_options::overwrite_existing);
        double lo, hi;
        if (span == 0.0) {
          lo = cfg.cascade.bins[i].lo;
          hi = cfg.cascade.bins[i].hi;
        } else {
          lo = span * double(i);
          hi = span * double(i + 1);
        }
        bins.push_back({{"lo", lo}, {"hi", hi}, {"policy_path", name}});
      }
      json table = {{"hysteresis", cfg.cascade.hysteresis}, {"bins", bins}};
      std::ofstream f(dir / "cascade.json");
      f << table.dump(2) << '\n';
      std::cout << "wrote bundle to " << dir.string() << '\n';
    } else if (*serve_cmd) {
      RunConfig cfg = sv_common.resolve();
      const std::string plant_path =
          sv_plant.empty() ? (sv_common.run_dir() / "plant.rlpa").string()
                           : sv_plant;
      PlantModel plant = load_plant_artifact(plant_path);
      if (sv_cascade.empty() && sv_policy.empty())
        throw std::runtime_error("serve: need --cascade or --policy");
      PolicyRuntime runtime =
          !sv_cascade.empty() ? load_runtime_from_cascade(sv_cascade, plant)
                              : load_runtime_single(sv_policy, plant);
      UdpPolicyServer server(sv_bind, std::uint16_t(sv_port),
                             std::move(runtime), sv_deadline, sv_metrics);
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      std::cout << "serving on " << sv_bind << ":" << server.port()
                << " (deadline " << sv_deadline << " ms)\n";
      server.run(g_stop);
      std::cout << "replies=" << server.stats().replies
                << " drops=" << server.stats().drops << '\n';
    } else if (*sim_client_cmd) {
      RunConfig cfg = sc_common.resolve();
      const fs::path dir = sc_common.run_dir();
      echo_config(cfg, dir);
      Rng rng(cfg.episode.seed);
      const auto ref = generate_reference(cfg.episode, rng, sc_steps);
      const auto result = sim_engine_client(
          sc_server, std::uint16_t(sc_port), ref, cfg.seed, cfg.engine_noise,
          100, 3, cfg.reward, cfg.polytope);
      save_trace_csv(result.trace, (dir / "trace.csv").string());
      if (!result.completed)
        throw std::runtime_error("sim-client: aborted after retries (partial trace saved)");
      double sq = 0.0;
      for (const auto& row : result.trace) {
        const double e = row.ref - row.y.imep;
        sq += e * e;
      }
      std::printf("steps=%zu drops=%ld closed_loop_rmse_bar=%.4f\n",
                  result.trace.size(), result.drops,
                  std::sqrt(sq / double(result.trace.size())));
    } else if (*bench_cmd) {
      RunConfig cfg = be_common.resolve();
      const fs::path dir = be_common.run_dir();
      const std::string plant_path =
          be_plant.empty() ? (dir / "plant.rlpa").string() : be_plant;
      PlantModel plant = load_plant_artifact(plant_path);
      PolicyRuntime runtime = load_runtime_single(be_policy, plant);
      const auto report = benchmark_latency(runtime, be_iters);
      save_latency_csv(report, (dir / "bench.csv").string());
      std::printf("median_us=%.2f p99_us=%.2f max_us=%.2f\n", report.median_us,
                  report.p99_us, report.max_us);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
