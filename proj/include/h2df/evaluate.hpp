#pragma once

#include <functional>
#include <thread>

#include "h2df/ppo.hpp"
#include "h2df/td3.hpp"

namespace h2df {

struct EvalMetrics {
  double tracking_rmse = 0.0;  // bar
  std::array<double, 4> violation_fraction{};  // per output channel
  double violation_fraction_total = 0.0;       // any-channel violations
  double mean_reward = 0.0;                    // scaled per-step mean
  std::vector<TraceRow> trace;
};

// Runs `policy` on `env` over the given reference trajectory with
// exploration disabled and aggregates tracking and safety metrics.
inline EvalMetrics evaluate_policy(const ActorNetwork& policy, EngineEnv& env,
                                   const std::vector<double>& reference,
                                   double reward_scale, int episode_index = 0) {
  Vec o = env.reset(episode_index);
  env.set_reference(reference);
  EvalMetrics m;
  m.trace.reserve(reference.size());

  double sq = 0.0, reward_sum = 0.0;
  std::array<long, 4> channel_violations{};
  long any_violations = 0;
  const SafePolytope& poly = env.polytope();

  for (std::size_t t = 0; t < reference.size(); ++t) {
    const std::array<double, 4> a = policy.act(o);
    auto res = env.step(a);
    o = std::move(res.observation);
    const StepInfo& info = res.info;

    const double err = info.ref - info.y.imep;
    sq += err * err;
    reward_sum += res.reward * reward_scale;
    bool any = false;
    for (int c = 0; c < 4; ++c) {
      if (info.y[c] < poly.lower[std::size_t(c)] ||
          info.y[c] > poly.upper[std::size_t(c)]) {
        ++channel_violations[std::size_t(c)];
        any = true;
      }
    }
    if (any) ++any_violations;

    m.trace.push_back({int(t), info.ref, info.y, info.u_plant, res.reward,
                       info.breakdown});
  }

  const double n = double(reference.size());
  m.tracking_rmse = std::sqrt(sq / n);
  for (int c = 0; c < 4; ++c)
    m.violation_fraction[std::size_t(c)] =
        double(channel_violations[std::size_t(c)]) / n;
  m.violation_fraction_total = double(any_violations) / n;
  m.mean_reward = reward_sum / n;
  return m;
}

// The long validation trajectory: roughly eight training episodes long.
inline std::vector<double> validation_reference(const EpisodeConfig& cfg,
                                                std::uint64_t seed,
                                                int length = 5000) {
  Rng rng(seed);
  return generate_reference(cfg, rng, length);
}

// ---------------------------------------------------------------------------
// State-augmentation study

enum class Algo { Td3, Ppo };

inline const char* algo_name(Algo a) { return a == Algo::Td3 ? "td3" : "ppo"; }

struct AblationRow {
  Algo algo;
  bool augmented;
  std::uint64_t seed;
  int episodes_to_threshold;  // max_episodes + 1 when never reached
  double final_avg_reward;
};

struct AblationConfig {
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::uint64_t env_seed = 100;
  bool parallel = true;
};

using EnvFactory = std::function<EngineEnv(bool augmented, std::uint64_t env_seed)>;

inline TrainResult train_agent(Algo algo, EngineEnv& env,
                               const AgentConfig& cfg) {
  return algo == Algo::Td3 ? td3_train(env, cfg) : ppo_train(env, cfg);
}

// Matched-seed comparison of hidden-state augmented vs truncated
// observations, for both algorithms.
inline std::vector<AblationRow> ablate_state_augmentation(
    const EnvFactory& make_env, const AgentConfig& agent_cfg,
    const AblationConfig& cfg) {
  struct Job {
    Algo algo;
    bool augmented;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (Algo algo : {Algo::Td3, Algo::Ppo})
    for (bool augmented : {true, false})
      for (auto seed : cfg.seeds) jobs.push_back({algo, augmented, seed});

  std::vector<AblationRow> rows(jobs.size());
  auto run = [&](std::size_t j) {
    AgentConfig ac = agent_cfg;
    ac.seed = jobs[j].seed;
    EngineEnv env = make_env(jobs[j].augmented, cfg.env_seed);
    TrainResult r = train_agent(jobs[j].algo, env, ac);
    rows[j] = {jobs[j].algo, jobs[j].augmented, jobs[j].seed,
               r.episodes_to_threshold,
               r.curve.empty() ? 0.0 : r.curve.back().moving_avg};
  };

  if (cfg.parallel) {
    std::vector<std::thread> threads;
    threads.reserve(jobs.size());
    for (std::size_t j = 0; j < jobs.size(); ++j)
      threads.emplace_back(run, j);
    for (auto& t : threads) t.join();
  } else {
    for (std::size_t j = 0; j < jobs.size(); ++j) run(j);
  }
  return rows;
}

inline void save_ablation_csv(const std::vector<AblationRow>& rows,
                              const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << "arm,seed,episodes_to_threshold,final_avg_reward\n";
  for (const auto& r : rows)
    f << algo_name(r.algo) << (r.augmented ? "-augmented" : "-truncated")
      << ',' << r.seed << ',' << r.episodes_to_threshold << ','
      << format_double(r.final_avg_reward) << '\n';
}

}  // namespace h2df
