#pragma once

#include <chrono>

#include "h2df/agent_common.hpp"
#include "h2df/replay.hpp"

namespace h2df {

inline void soft_update(Network& target, Network& main, double tau) {
  auto tv = param_views(target);
  auto mv = param_views(main);
  for (std::size_t b = 0; b < tv.size(); ++b)
    for (std::size_t i = 0; i < tv[b].size; ++i)
      tv[b].data[i] = (1.0 - tau) * tv[b].data[i] + tau * mv[b].data[i];
}

namespace detail {

// Single-sample forward/backward on a feed-forward net; returns the input
// gradient when requested.
inline Vec net_backward_sample(Network& net, const Vec& x, const Vec& dy,
                               NetworkGrads& grads, GradientTape& tape,
                               bool want_input_grad) {
  Network::Hidden h = net.initial_hidden();
  forward_sequence(net, {x}, tape, &h);
  std::vector<Vec> igrads;
  backward(net, tape, {dy}, grads, want_input_grad ? &igrads : nullptr);
  return want_input_grad ? std::move(igrads[0]) : Vec{};
}

inline Vec concat_obs_action(const Vec& o, const std::array<double, 4>& a) {
  Vec x = o;
  x.insert(x.end(), a.begin(), a.end());
  return x;
}

}  // namespace detail

// Twin delayed deterministic policy gradient with clipped double-Q targets,
// target policy smoothing, and delayed actor updates.
inline TrainResult td3_train(EngineEnv& env, const AgentConfig& cfg) {
  const int obs_size = env.observation_size();
  Rng rng(cfg.seed);

  ActorNetwork actor = make_actor(obs_size, rng);
  Network critic1 = make_critic(obs_size + kActionSize, rng);
  Network critic2 = make_critic(obs_size + kActionSize, rng);
  Network actor_target = actor.net;
  Network critic1_target = critic1;
  Network critic2_target = critic2;

  auto actor_params = param_views(actor.net);
  auto c1_params = param_views(critic1);
  auto c2_params = param_views(critic2);
  AdamState actor_adam = AdamState::for_params(actor_params);
  AdamState c1_adam = AdamState::for_params(c1_params);
  AdamState c2_adam = AdamState::for_params(c2_params);

  ReplayBuffer buffer(cfg.buffer_capacity);
  GradientTape tape;
  long total_steps = 0;
  long updates = 0;

  TrainResult result;
  result.episodes_to_threshold = cfg.max_episodes + 1;
  const auto t0 = std::chrono::steady_clock::now();

  auto update = [&]() {
    const auto idx = buffer.sample_indices(std::size_t(cfg.batch_size), rng);
    const double inv_n = 1.0 / double(idx.size());

    // targets
    std::vector<double> targets(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const Transition& tr = buffer[idx[k]];
      std::array<double, 4> a2 = {0, 0, 0, 0};
      const Vec mu = actor_target.forward(tr.o2);
      for (int i = 0; i < 4; ++i) {
        const double noise =
            std::clamp(rng.normal(0.0, cfg.target_noise_std),
                       -cfg.target_noise_clip, cfg.target_noise_clip);
        a2[std::size_t(i)] = std::clamp(mu[std::size_t(i)] + noise, -1.0, 1.0);
      }
      const Vec x2 = detail::concat_obs_action(tr.o2, a2);
      const double q = std::min(critic1_target.forward(x2)[0],
                                critic2_target.forward(x2)[0]);
      targets[k] = tr.r + cfg.gamma * (tr.done ? 0.0 : 1.0) * q;
    }

    // critic regression
    for (auto* pair : {&c1_params, &c2_params}) {
      Network& critic = (pair == &c1_params) ? critic1 : critic2;
      AdamState& adam = (pair == &c1_params) ? c1_adam : c2_adam;
      NetworkGrads grads = NetworkGrads::zeros(critic);
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const Transition& tr = buffer[idx[k]];
        const Vec x = detail::concat_obs_action(tr.o, tr.a);
        Network::Hidden h = critic.initial_hidden();
        forward_sequence(critic, {x}, tape, &h);
        const double q = std::get<DenseCache>(tape.steps[0].back()).y[0];
        if (!std::isfinite(q))
          throw std::runtime_error("td3_train: non-finite critic output");
        backward(critic, tape, {Vec{2.0 * (q - targets[k]) * inv_n}}, grads);
      }
      auto gv = grad_views(grads);
      clip_gradients(gv, cfg.grad_threshold);
      adam_step(adam, *pair, gv, cfg.lr);
    }

    ++updates;
    if (updates % cfg.policy_delay == 0) {
      // deterministic policy gradient through critic1
      NetworkGrads actor_grads = NetworkGrads::zeros(actor.net);
      NetworkGrads scratch = NetworkGrads::zeros(critic1);
      GradientTape actor_tape;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const Transition& tr = buffer[idx[k]];
        Network::Hidden h = actor.net.initial_hidden();
        forward_sequence(actor.net, {tr.o}, actor_tape, &h);
        const Vec& mu = std::get<DenseCache>(actor_tape.steps[0].back()).y;
        const Vec x = detail::concat_obs_action(
            tr.o, {mu[0], mu[1], mu[2], mu[3]});
        const Vec dx = detail::net_backward_sample(critic1, x, {-inv_n},
                                                   scratch, tape, true);
        Vec da(dx.end() - kActionSize, dx.end());
        backward(actor.net, actor_tape, {da}, actor_grads);
      }
      auto gv = grad_views(actor_grads);
      clip_gradients(gv, cfg.grad_threshold);
      adam_step(actor_adam, actor_params, gv, cfg.lr);

      soft_update(actor_target, actor.net, cfg.tau);
      soft_update(critic1_target, critic1, cfg.tau);
      soft_update(critic2_target, critic2, cfg.tau);
    }
  };

  for (int ep = 1; ep <= cfg.max_episodes; ++ep) {
    Vec o = env.reset();
    double ep_reward = 0.0;
    long ep_steps = 0;
    bool done = false;
    while (!done) {
      std::array<double, 4> a{};
      if (total_steps < cfg.warmup_steps) {
        for (auto& v : a) v = rng.uniform(-1.0, 1.0);
      } else {
        const Vec mu = actor.net.forward(o);
        for (int i = 0; i < 4; ++i)
          a[std::size_t(i)] = std::clamp(
              mu[std::size_t(i)] + rng.normal(0.0, cfg.exploration_noise_std),
              -1.0, 1.0);
      }
      auto res = env.step(a);
      const double r = res.reward * cfg.reward_scale;
      buffer.add({o, a, r, res.observation, res.done});
      o = std::move(res.observation);
      done = res.done;
      ep_reward += r;
      ++ep_steps;
      ++total_steps;
      if (total_steps >= cfg.warmup_steps &&
          buffer.size() >= std::size_t(cfg.batch_size))
        for (int k = 0; k < cfg.updates_per_step; ++k) update();
    }

    EpisodeStats stats;
    stats.episode = ep;
    stats.reward = ep_reward / double(ep_steps);
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
