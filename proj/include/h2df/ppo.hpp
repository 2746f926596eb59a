#pragma once

#include <chrono>
#include <numbers>

#include "h2df/agent_common.hpp"

namespace h2df {

namespace detail {

struct PpoSample {
  Vec o;
  std::array<double, 4> a;  // raw Gaussian sample, pre-clipping
  double logp;
  double value;
  double reward;  // scaled
  bool done;
};

inline double gaussian_logp(const std::array<double, 4>& a, const Vec& mean,
                            const Vec& log_std) {
  double lp = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double s = std::exp(log_std[std::size_t(i)]);
    const double z = (a[std::size_t(i)] - mean[std::size_t(i)]) / s;
    lp += -0.5 * z * z - log_std[std::size_t(i)] -
          0.5 * std::log(2.0 * std::numbers::pi);
  }
  return lp;
}

}  // namespace detail

// Proximal policy optimization: full-episode rollouts, generalized advantage
// estimation, clipped surrogate objective with an entropy bonus.
inline TrainResult ppo_train(EngineEnv& env, const AgentConfig& cfg) {
  const int obs_size = env.observation_size();
  Rng rng(cfg.seed);

  ActorNetwork actor = make_actor(obs_size, rng, cfg.init_log_std);
  Network value_net = make_critic(obs_size, rng);

  auto actor_params = param_views(actor.net);
  actor_params.push_back(
      {actor.log_std.data(), actor.log_std.size(), false});
  auto value_params = param_views(value_net);
  AdamState actor_adam = AdamState::for_params(actor_params);
  AdamState value_adam = AdamState::for_params(value_params);

  GradientTape tape;
  long total_steps = 0;

  TrainResult result;
  result.episodes_to_threshold = cfg.max_episodes + 1;
  const auto t0 = std::chrono::steady_clock::now();

  for (int ep = 1; ep <= cfg.max_episodes; ++ep) {
    // one on-policy rollout (one full episode)
    std::vector<detail::PpoSample> rollout;
    rollout.reserve(std::size_t(cfg.rollout_length));
    Vec o = env.reset();
    double ep_reward = 0.0;
    bool done = false;
    Vec last_obs;
    while (!done) {
      detail::PpoSample s;
      s.o = o;
      const Vec mean = actor.net.forward(o);
      for (int i = 0; i < 4; ++i)
        s.a[std::size_t(i)] =
            mean[std::size_t(i)] +
            std::exp(actor.log_std[std::size_t(i)]) * rng.normal();
      s.logp = detail::gaussian_logp(s.a, mean, actor.log_std);
      s.value = value_net.forward(o)[0];
      std::array<double, 4> a_env{};
      for (int i = 0; i < 4; ++i)
        a_env[std::size_t(i)] = std::clamp(s.a[std::size_t(i)], -1.0, 1.0);
      auto res = env.step(a_env);
      s.reward = res.reward * cfg.reward_scale;
      s.done = res.done;
      ep_reward += s.reward;
      o = std::move(res.observation);
      done = s.done;
      if (done) last_obs = o;
      rollout.push_back(std::move(s));
      ++total_steps;
    }

    // GAE and returns
    const std::size_t T = rollout.size();
    std::vector<double> adv(T), ret(T);
    double next_value = value_net.forward(last_obs)[0];
    double carry = 0.0;
    for (std::size_t t = T; t-- > 0;) {
      const double not_done = rollout[t].done ? 0.0 : 1.0;
      const double delta = rollout[t].reward +
                           cfg.gamma * not_done * next_value -
                           rollout[t].value;
      carry = delta + cfg.gamma * cfg.gae_lambda * not_done * carry;
      adv[t] = carry;
      ret[t] = adv[t] + rollout[t].value;
      next_value = rollout[t].value;
    }
    double mean_adv = 0.0, var_adv = 0.0;
    for (double a : adv) mean_adv += a;
    mean_adv /= double(T);
    for (double a : adv) var_adv += (a - mean_adv) * (a - mean_adv);
    const double std_adv = std::sqrt(var_adv / double(T)) + 1e-8;
    for (double& a : adv) a = (a - mean_adv) / std_adv;

    // clipped-surrogate updates
    std::vector<std::size_t> order(T);
    for (std::size_t i = 0; i < T; ++i) order[i] = i;
    for (int epoch = 0; epoch < cfg.ppo_epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng.generator());
      for (std::size_t m0 = 0; m0 < T; m0 += std::size_t(cfg.minibatch_size)) {
        const std::size_t m1 =
            std::min(T, m0 + std::size_t(cfg.minibatch_size));
        const double inv_n = 1.0 / double(m1 - m0);

        NetworkGrads actor_grads = NetworkGrads::zeros(actor.net);
        Vec log_std_grad(kActionSize, 0.0);
        NetworkGrads value_grads = NetworkGrads::zeros(value_net);

        for (std::size_t k = m0; k < m1; ++k) {
          const auto& s = rollout[order[k]];

          // policy term
          Network::Hidden h = actor.net.initial_hidden();
          forward_sequence(actor.net, {s.o}, tape, &h);
          const Vec& mean = std::get<DenseCache>(tape.steps[0].back()).y;
          const double logp = detail::gaussian_logp(s.a, mean, actor.log_std);
          const double ratio = std::exp(logp - s.logp);
          const double A = adv[order[k]];
          // d(surrogate)/d(ratio): zero when the clipped branch is active
          double dratio;
          if (A >= 0.0)
            dratio = ratio > 1.0 + cfg.clip_epsilon ? 0.0 : A;
          else
            dratio = ratio < 1.0 - cfg.clip_epsilon ? 0.0 : A;
          const double dlogp = dratio * ratio;  // d(ratio)/d(logp) = ratio

          Vec dmean(kActionSize);
          for (int i = 0; i < 4; ++i) {
            const double s2 = std::exp(2.0 * actor.log_std[std::size_t(i)]);
            const double diff = s.a[std::size_t(i)] - mean[std::size_t(i)];
            // maximize surrogate + entropy: accumulate negative gradient
            dmean[std::size_t(i)] = -inv_n * dlogp * diff / s2;
            const double dlogp_dlogstd = diff * diff / s2 - 1.0;
            log_std_grad[std::size_t(i)] +=
                -inv_n * (dlogp * dlogp_dlogstd + cfg.entropy_coef);
          }
          backward(actor.net, tape, {dmean}, actor_grads);

          // value term
          Network::Hidden hv = value_net.initial_hidden();
          forward_sequence(value_net, {s.o}, tape, &hv);
          const double v = std::get<DenseCache>(tape.steps[0].back()).y[0];
          if (!std::isfinite(v) || !std::isfinite(ratio))
            throw std::runtime_error("ppo_train: non-finite loss term");
          backward(value_net, tape,
                   {Vec{cfg.value_coef * 2.0 * (v - ret[order[k]]) * inv_n}},
                   value_grads);
        }

        auto agv = grad_views(actor_grads);
        agv.push_back({log_std_grad.data(), log_std_grad.size(), false});
        clip_gradients(agv, cfg.grad_threshold);
        adam_step(actor_adam, actor_params, agv, cfg.lr);

        auto vgv = grad_views(value_grads);
        clip_gradients(vgv, cfg.grad_threshold);
        adam_step(value_adam, value_params, vgv, cfg.lr);
      }
    }

    EpisodeStats stats;
    stats.episode = ep;
    stats.reward = ep_reward / double(T);
    stats.steps = total_steps;
    stats.wall_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    result.curve.push_back(stats);
    result.curve.back().moving_avg = moving_average(result.curve, cfg.stop_window);
    // the stop rule needs a full moving-average window before it can fire
    const bool crossed = int(result.curve.size()) >= cfg.stop_window &&
                         result.curve.back().moving_avg >= cfg.stop_threshold;
    if (crossed && result.episodes_to_threshold > cfg.max_episodes)
      result.episodes_to_threshold = ep;
    if (crossed) break;
  }

  result.policy = std::move(actor);
  return result;
}

}  // namespace h2df
