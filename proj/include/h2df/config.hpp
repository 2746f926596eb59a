#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "h2df/agent_common.hpp"
#include "h2df/envrl.hpp"
#include "h2df/plant.hpp"
#include "h2df/runtime.hpp"

namespace h2df {

// Layered run configuration: struct defaults <- config file <- CLI flags.
// The resolved config is echoed into the run directory.
struct RunConfig {
  std::uint64_t seed = 42;
  int cycles = 20000;
  PrbsConfig prbs;
  EngineNoise engine_noise;
  PlantTrainConfig plant_train;
  RewardConfig reward;
  SafePolytope polytope;
  NoiseConfig noise;
  EpisodeConfig episode;
  AgentConfig agent;
  CascadeConfig cascade;
};

namespace cfgio {

template <typename T>
void get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

template <typename T, std::size_t N>
void get_array(const json& j, const char* key, std::array<T, N>& out) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  for (std::size_t i = 0; i < N && i < a.size(); ++i) out[i] = a.at(i).get<T>();
}

}  // namespace cfgio

inline void apply_json(const json& j, PrbsConfig& c) {
  cfgio::get(j, "hold_min", c.hold_min);
  cfgio::get(j, "hold_max", c.hold_max);
  cfgio::get(j, "levels", c.levels);
  cfgio::get(j, "seed", c.seed);
}

inline void apply_json(const json& j, EngineNoise& c) {
  cfgio::get_array(j, "std", c.std);
  cfgio::get(j, "enabled", c.enabled);
}

inline void apply_json(const json& j, PlantTrainConfig& c) {
  cfgio::get(j, "max_epochs", c.max_epochs);
  cfgio::get(j, "batch_size", c.batch_size);
  cfgio::get(j, "grad_threshold", c.grad_threshold);
  cfgio::get(j, "l2", c.l2);
  cfgio::get(j, "initial_lr", c.initial_lr);
  cfgio::get(j, "lr_drop_epoch", c.lr_drop_epoch);
  cfgio::get(j, "lr_drop_factor", c.lr_drop_factor);
  cfgio::get(j, "validation_patience", c.validation_patience);
  cfgio::get(j, "bptt_length", c.bptt_length);
  cfgio::get(j, "window_stride", c.window_stride);
  cfgio::get(j, "washin", c.washin);
  cfgio::get(j, "seed", c.seed);
}

inline void apply_json(const json& j, RewardConfig& c) {
  cfgio::get_array(j, "q", c.q);
  cfgio::get_array(j, "r", c.r);
  cfgio::get(j, "alpha", c.alpha);
  cfgio::get(j, "beta", c.beta);
  cfgio::get(j, "zeta", c.zeta);
  cfgio::get_array(j, "out_scale", c.out_scale);
  if (j.contains("staging")) {
    const auto& s = j.at("staging");
    cfgio::get(s, "coefficient", c.staging.coefficient);
    cfgio::get(s, "offset", c.staging.offset);
    cfgio::get(s, "delta_floor", c.staging.delta_floor);
    cfgio::get(s, "exponent_cap", c.staging.exponent_cap);
    cfgio::get(s, "enabled", c.staging.enabled);
  }
}

inline void apply_json(const json& j, SafePolytope& c) {
  cfgio::get_array(j, "lower", c.lower);
  cfgio::get_array(j, "upper", c.upper);
  cfgio::get_array(j, "norm", c.norm);
}

inline void apply_json(const json& j, NoiseConfig& c) {
  cfgio::get_array(j, "std", c.std);
  cfgio::get(j, "seed", c.seed);
}

inline void apply_json(const json& j, EpisodeConfig& c) {
  cfgio::get(j, "length", c.length);
  cfgio::get(j, "level_min", c.level_min);
  cfgio::get(j, "level_max", c.level_max);
  cfgio::get(j, "segment_min", c.segment_min);
  cfgio::get(j, "segment_max", c.segment_max);
  cfgio::get(j, "sample_time", c.sample_time);
  cfgio::get(j, "seed", c.seed);
}

inline void apply_json(const json& j, AgentConfig& c) {
  cfgio::get(j, "lr", c.lr);
  cfgio::get(j, "grad_threshold", c.grad_threshold);
  cfgio::get(j, "gamma", c.gamma);
  cfgio::get(j, "stop_threshold", c.stop_threshold);
  cfgio::get(j, "stop_window", c.stop_window);
  cfgio::get(j, "max_episodes", c.max_episodes);
  cfgio::get(j, "seed", c.seed);
  cfgio::get(j, "reward_scale", c.reward_scale);
  cfgio::get(j, "batch_size", c.batch_size);
  cfgio::get(j, "tau", c.tau);
  cfgio::get(j, "policy_delay", c.policy_delay);
  cfgio::get(j, "target_noise_std", c.target_noise_std);
  cfgio::get(j, "target_noise_clip", c.target_noise_clip);
  cfgio::get(j, "exploration_noise_std", c.exploration_noise_std);
  cfgio::get(j, "warmup_steps", c.warmup_steps);
  cfgio::get(j, "updates_per_step", c.updates_per_step);
  cfgio::get(j, "buffer_capacity", c.buffer_capacity);
  cfgio::get(j, "clip_epsilon", c.clip_epsilon);
  cfgio::get(j, "gae_lambda", c.gae_lambda);
  cfgio::get(j, "entropy_coef", c.entropy_coef);
  cfgio::get(j, "value_coef", c.value_coef);
  cfgio::get(j, "ppo_epochs", c.ppo_epochs);
  cfgio::get(j, "minibatch_size", c.minibatch_size);
  cfgio::get(j, "rollout_length", c.rollout_length);
  cfgio::get(j, "init_log_std", c.init_log_std);
}

inline void apply_json(const json& j, CascadeConfig& c) {
  if (j.contains("bins")) {
    c.bins.clear();
    for (const auto& b : j.at("bins"))
      c.bins.push_back({b.at("lo").get<double>(), b.at("hi").get<double>(),
                        b.value("policy", 0)});
  }
  cfgio::get(j, "hysteresis", c.hysteresis);
}

inline void apply_json(const json& j, RunConfig& c) {
  cfgio::get(j, "seed", c.seed);
  cfgio::get(j, "cycles", c.cycles);
  if (j.contains("prbs")) apply_json(j.at("prbs"), c.prbs);
  if (j.contains("engine_noise")) apply_json(j.at("engine_noise"), c.engine_noise);
  if (j.contains("plant_train")) apply_json(j.at("plant_train"), c.plant_train);
  if (j.contains("reward")) apply_json(j.at("reward"), c.reward);
  if (j.contains("polytope")) apply_json(j.at("polytope"), c.polytope);
  if (j.contains("noise")) apply_json(j.at("noise"), c.noise);
  if (j.contains("episode")) apply_json(j.at("episode"), c.episode);
  if (j.contains("agent")) apply_json(j.at("agent"), c.agent);
  if (j.contains("cascade")) apply_json(j.at("cascade"), c.cascade);
}

inline json to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["cycles"] = c.cycles;
  j["prbs"] = {{"hold_min", c.prbs.hold_min},
               {"hold_max", c.prbs.hold_max},
               {"levels", c.prbs.levels},
               {"seed", c.prbs.seed}};
  j["engine_noise"] = {{"std", c.engine_noise.std},
                       {"enabled", c.engine_noise.enabled}};
  j["plant_train"] = {{"max_epochs", c.plant_train.max_epochs},
                      {"batch_size", c.plant_train.batch_size},
                      {"grad_threshold", c.plant_train.grad_threshold},
                      {"l2", c.plant_train.l2},
                      {"initial_lr", c.plant_train.initial_lr},
                      {"lr_drop_epoch", c.plant_train.lr_drop_epoch},
                      {"lr_drop_factor", c.plant_train.lr_drop_factor},
                      {"validation_patience", c.plant_train.validation_patience},
                      {"bptt_length", c.plant_train.bptt_length},
                      {"window_stride", c.plant_train.window_stride},
                      {"washin", c.plant_train.washin},
                      {"seed", c.plant_train.seed}};
  j["reward"] = {{"q", c.reward.q},
                 {"r", c.reward.r},
                 {"alpha", c.reward.alpha},
                 {"beta", c.reward.beta},
                 {"zeta", c.reward.zeta},
                 {"out_scale", c.reward.out_scale},
                 {"staging",
                  {{"coefficient", c.reward.staging.coefficient},
                   {"offset", c.reward.staging.offset},
                   {"delta_floor", c.reward.staging.delta_floor},
                   {"exponent_cap", c.reward.staging.exponent_cap},
                   {"enabled", c.reward.staging.enabled}}}};
  j["polytope"] = {{"lower", c.polytope.lower},
                   {"upper", c.polytope.upper},
                   {"norm", c.polytope.norm}};
  j["noise"] = {{"std", c.noise.std}, {"seed", c.noise.seed}};
  j["episode"] = {{"length", c.episode.length},
                  {"level_min", c.episode.level_min},
                  {"level_max", c.episode.level_max},
                  {"segment_min", c.episode.segment_min},
                  {"segment_max", c.episode.segment_max},
                  {"sample_time", c.episode.sample_time},
                  {"seed", c.episode.seed}};
  j["agent"] = {{"lr", c.agent.lr},
                {"grad_threshold", c.agent.grad_threshold},
                {"gamma", c.agent.gamma},
                {"stop_threshold", c.agent.stop_threshold},
                {"stop_window", c.agent.stop_window},
                {"max_episodes", c.agent.max_episodes},
                {"seed", c.agent.seed},
                {"reward_scale", c.agent.reward_scale},
                {"batch_size", c.agent.batch_size},
                {"tau", c.agent.tau},
                {"policy_delay", c.agent.policy_delay},
                {"target_noise_std", c.agent.target_noise_std},
                {"target_noise_clip", c.agent.target_noise_clip},
                {"exploration_noise_std", c.agent.exploration_noise_std},
                {"warmup_steps", c.agent.warmup_steps},
                {"updates_per_step", c.agent.updates_per_step},
                {"buffer_capacity", c.agent.buffer_capacity},
                {"clip_epsilon", c.agent.clip_epsilon},
                {"gae_lambda", c.agent.gae_lambda},
                {"entropy_coef", c.agent.entropy_coef},
                {"value_coef", c.agent.value_coef},
                {"ppo_epochs", c.agent.ppo_epochs},
                {"minibatch_size", c.agent.minibatch_size},
                {"rollout_length", c.agent.rollout_length},
                {"init_log_std", c.agent.init_log_std}};
  json bins = json::array();
  for (const auto& b : c.cascade.bins)
    bins.push_back({{"lo", b.lo}, {"hi", b.hi}, {"policy", b.policy}});
  j["cascade"] = {{"bins", bins}, {"hysteresis", c.cascade.hysteresis}};
  return j;
}

inline RunConfig load_run_config(const std::string& path) {
  RunConfig c;
  if (!path.empty()) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file: " + path);
    json j = json::parse(f);
    apply_json(j, c);
  }
  return c;
}

inline void echo_config(const RunConfig& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream f(dir / "config.json");
  f << to_json(c).dump(2) << '\n';
}

}  // namespace h2df
