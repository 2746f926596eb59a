#include <catch2/catch_amalgamated.hpp>

#include "h2df/evaluate.hpp"

using namespace h2df;

namespace {

PlantModel shared_plant() { return make_plant_model(21); }

EngineEnv tiny_env(const PlantModel& plant, bool augmented = true,
                   std::uint64_t seed = 5, int length = 50) {
  EpisodeConfig ep;
  ep.length = length;
  return EngineEnv(plant, RewardConfig{}, SafePolytope{}, NoiseConfig{}, ep,
                   augmented, seed);
}

AgentConfig tiny_td3_config() {
  AgentConfig cfg;
  cfg.max_episodes = 2;
  cfg.warmup_steps = 30;
  cfg.batch_size = 16;
  cfg.stop_threshold = 1e9;  // never stop early in the smoke test
  return cfg;
}

AgentConfig tiny_ppo_config() {
  AgentConfig cfg;
  cfg.max_episodes = 2;
  cfg.ppo_epochs = 2;
  cfg.minibatch_size = 25;
  cfg.stop_threshold = 1e9;
  return cfg;
}

}  // namespace

TEST_CASE("gaussian log probability matches the closed form at the mean") {
  const Vec mean{0.1, -0.2, 0.3, 0.0};
  const Vec log_std{-0.7, -0.7, 0.0, 0.5};
  const std::array<double, 4> a{0.1, -0.2, 0.3, 0.0};
  double expected = 0.0;
  for (double ls : log_std)
    expected += -ls - 0.5 * std::log(2.0 * std::numbers::pi);
  CHECK(detail::gaussian_logp(a, mean, log_std) ==
        Catch::Approx(expected).epsilon(1e-14));
}

TEST_CASE("moving average uses the trailing window") {
  std::vector<EpisodeStats> curve;
  for (int e = 1; e <= 5; ++e)
    curve.push_back({e, double(e), 0.0, 0, 0.0});
  CHECK(moving_average(curve, 3) == Catch::Approx((3.0 + 4.0 + 5.0) / 3.0));
  CHECK(moving_average(curve, 10) == Catch::Approx(3.0));
  CHECK(moving_average({}, 3) == 0.0);
}

TEST_CASE("td3 smoke run produces a finite curve and a usable policy") {
  PlantModel plant = shared_plant();
  EngineEnv env = tiny_env(plant);
  const TrainResult r = td3_train(env, tiny_td3_config());
  REQUIRE(r.curve.size() == 2);
  for (const auto& s : r.curve) CHECK(std::isfinite(s.reward));
  CHECK(r.episodes_to_threshold == 3);  // sentinel: never reached
  CHECK(r.policy.net.input_size() == 16);

  const auto a = r.policy.act(env.reset(0));
  for (double v : a) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("ppo smoke run produces a finite curve and a usable policy") {
  PlantModel plant = shared_plant();
  EngineEnv env = tiny_env(plant);
  const TrainResult r = ppo_train(env, tiny_ppo_config());
  REQUIRE(r.curve.size() == 2);
  for (const auto& s : r.curve) CHECK(std::isfinite(s.reward));
  CHECK(r.policy.log_std.size() == 4);
}

TEST_CASE("training is deterministic in its seeds") {
  PlantModel plant = shared_plant();
  SECTION("td3") {
    EngineEnv e1 = tiny_env(plant), e2 = tiny_env(plant);
    const TrainResult a = td3_train(e1, tiny_td3_config());
    const TrainResult b = td3_train(e2, tiny_td3_config());
    REQUIRE(a.curve.size() == b.curve.size());
    for (std::size_t i = 0; i < a.curve.size(); ++i)
      CHECK(a.curve[i].reward == b.curve[i].reward);
  }
  SECTION("ppo") {
    EngineEnv e1 = tiny_env(plant), e2 = tiny_env(plant);
    const TrainResult a = ppo_train(e1, tiny_ppo_config());
    const TrainResult b = ppo_train(e2, tiny_ppo_config());
    REQUIRE(a.curve.size() == b.curve.size());
    for (std::size_t i = 0; i < a.curve.size(); ++i)
      CHECK(a.curve[i].reward == b.curve[i].reward);
  }
}

TEST_CASE("truncated-observation training uses 8-wide policies") {
  PlantModel plant = shared_plant();
  EngineEnv env = tiny_env(plant, false);
  const TrainResult r = td3_train(env, tiny_td3_config());
  CHECK(r.policy.net.input_size() == 8);
}

TEST_CASE("evaluate_policy aggregates tracking error and violations") {
  PlantModel plant = shared_plant();
  EngineEnv env = tiny_env(plant);
  Rng rng(3);
  ActorNetwork actor = make_actor(16, rng);
  EpisodeConfig ep;
  const auto ref = validation_reference(ep, 123, 80);
  const auto m = evaluate_policy(actor, env, ref, 0.04);
  CHECK(m.trace.size() == 80);
  CHECK(std::isfinite(m.tracking_rmse));
  CHECK(m.tracking_rmse > 0.0);
  CHECK(m.violation_fraction_total >= 0.0);
  CHECK(m.violation_fraction_total <= 1.0);
  // any-channel fraction dominates each per-channel fraction
  for (double f : m.violation_fraction) CHECK(f <= m.violation_fraction_total);
}

TEST_CASE("ablation harness runs matched arms") {
  PlantModel plant = shared_plant();
  AgentConfig cfg = tiny_td3_config();
  cfg.max_episodes = 1;
  cfg.warmup_steps = 1000000;  // keep the smoke test on random actions
  AblationConfig acfg;
  acfg.seeds = {1};
  acfg.parallel = false;
  const auto rows = ablate_state_augmentation(
      [&](bool augmented, std::uint64_t env_seed) {
        return tiny_env(plant, augmented, env_seed, 30);
      },
      cfg, acfg);
  REQUIRE(rows.size() == 4);  // 2 algorithms x {augmented, truncated}
  int augmented = 0;
  for (const auto& r : rows) {
    CHECK(r.episodes_to_threshold == 2);
    if (r.augmented) ++augmented;
  }
  CHECK(augmented == 2);
}
