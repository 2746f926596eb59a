#pragma once

#include <array>
#include <fstream>
#include <string>
#include <vector>

#include "h2df/plant.hpp"
#include "h2df/reward.hpp"

namespace h2df {

inline constexpr int kObservationSize = 16;
inline constexpr int kTruncatedObservationSize = 8;  // without plant hidden
inline constexpr int kActionSize = 4;

struct NoiseConfig {
  // imep, nox, soot, mprr; defaults are 1% of the nominal channel ranges
  std::array<double, 4> std{0.17, 5.0, 0.4, 0.1};
  std::uint64_t seed = 7;
};

struct EpisodeConfig {
  int length = 625;
  double level_min = 3.0;   // bar
  double level_max = 12.0;  // bar
  int segment_min = 30;     // steps
  int segment_max = 80;     // steps
  double sample_time = 0.08;  // seconds per cycle, metadata only
  std::uint64_t seed = 11;
};

// ŷ + ε with per-channel Gaussian noise. σ = 0 is the identity.
inline EngineOutputs augment(const EngineOutputs& y_hat,
                             const NoiseConfig& noise, Rng& rng) {
  EngineOutputs y = y_hat;
  for (int c = 0; c < 4; ++c) {
    const double s = noise.std[std::size_t(c)];
    if (s > 0.0) y[c] += rng.normal(0.0, s);
  }
  // concentrations cannot be measured negative
  y.nox = std::max(0.0, y.nox);
  y.soot = std::max(0.0, y.soot);
  return y;
}

// Random mix of holds, steps, and ramps within the level range.
inline std::vector<double> generate_reference(const EpisodeConfig& cfg,
                                              Rng& rng, int length = 0) {
  const int n = length > 0 ? length : cfg.length;
  std::vector<double> ref;
  ref.reserve(std::size_t(n));
  double level = rng.uniform(cfg.level_min, cfg.level_max);
  while (int(ref.size()) < n) {
    const int kind = int(rng.integer(0, 2));  // 0 hold, 1 step, 2 ramp
    const int len = int(rng.integer(cfg.segment_min, cfg.segment_max));
    const double target = (kind == 0)
                              ? level
                              : rng.uniform(cfg.level_min, cfg.level_max);
    for (int k = 0; k < len && int(ref.size()) < n; ++k) {
      double v;
      if (kind == 2) {
        v = level + (target - level) * double(k + 1) / double(len);
      } else {
        v = target;  // step jumps immediately, hold stays
      }
      ref.push_back(std::clamp(v, cfg.level_min, cfg.level_max));
    }
    level = target;
  }
  return ref;
}

inline std::vector<double> generate_reference(const EpisodeConfig& cfg) {
  Rng rng(cfg.seed);
  return generate_reference(cfg, rng);
}

// Normalization scales for observation assembly.
struct ObservationNorm {
  NormRange imep{0.0, 17.0};
  NormRange nox{0.0, 500.0};
  NormRange mprr{0.0, 10.0};
  double delta_imep_scale = 2.0;  // bar per unit
  double delta_nox_scale = 50.0;  // ppm per unit
  double err_scale = 2.0;         // bar per unit
};

struct StepInfo {
  EngineOutputs y;               // noisy outputs ỹ(t)
  double ref = 0.0;              // r_IMEP,ref(t)
  std::array<double, 4> u_plant{};  // applied action in [0,1] plant space
  RewardBreakdown breakdown;
  bool violated = false;
};

// Model-based environment: free-running trained plant with measurement
// noise, polytope-aware reward, and hidden-state augmented observations.
class EngineEnv {
 public:
  EngineEnv(const PlantModel& plant, RewardConfig reward, SafePolytope poly,
            NoiseConfig noise, EpisodeConfig episode, bool augment_observation,
            std::uint64_t seed)
      : plant_(&plant), reward_(std::move(reward)), poly_(std::move(poly)),
        noise_(noise), episode_(episode),
        augment_observation_(augment_observation), base_seed_(seed) {
    poly_.validate();
  }

  int observation_size() const {
    return augment_observation_ ? kObservationSize : kTruncatedObservationSize;
  }
  int action_size() const { return kActionSize; }
  int episode_length() const { return episode_.length; }
  const std::vector<double>& reference() const { return ref_; }
  const RewardConfig& reward_config() const { return reward_; }
  const SafePolytope& polytope() const { return poly_; }
  const StepInfo& last_info() const { return info_; }
  int step_index() const { return step_; }

  // Starts episode `episode_index` (reference and noise streams are pure
  // functions of base seed and index, so paired runs can be matched).
  Vec reset(int episode_index) {
    Rng seeder(base_seed_ + 0x9e3779b97f4a7c15ULL * std::uint64_t(episode_index + 1));
    ref_rng_ = Rng(seeder.next_seed());
    noise_rng_ = Rng(seeder.next_seed());
    ref_ = generate_reference(episode_, ref_rng_, episode_.length);
    hidden_ = plant_->net.initial_hidden();
    step_ = 0;
    done_ = false;
    // documented initial condition: surrogate idle
    y_prev_ = EngineOutputs{kIdleImep, 0.0, 0.0, 1.0};
    y_prev2_ = y_prev_;
    info_ = StepInfo{};
    return observation();
  }

  Vec reset() { return reset(episode_counter_++); }

  // Overrides the reference trajectory (validation runs); call after reset.
  void set_reference(std::vector<double> ref) {
    ref_ = std::move(ref);
    episode_.length = int(ref_.size());
  }

  struct StepResult {
    Vec observation;
    double reward;
    bool done;
    StepInfo info;
  };

  StepResult step(const std::array<double, 4>& action) {
    if (done_)
      throw std::logic_error("env_step: episode is done; call reset first");

    std::array<double, 4> u{};
    for (int i = 0; i < 4; ++i)
      u[std::size_t(i)] =
          std::clamp((action[std::size_t(i)] + 1.0) * 0.5, 0.0, 1.0);
    const EngineInputs plant_u{u[0], u[1], u[2], u[3]};

    const EngineOutputs y_hat =
        plant_step(*plant_, hidden_, plant_u, y_prev_.imep);
    const EngineOutputs y = augment(y_hat, noise_, noise_rng_);

    const double ref = ref_[std::size_t(step_)];
    RewardBreakdown breakdown;
    const double reward = compute_reward(y, ref, u, reward_, poly_, &breakdown);

    info_.y = y;
    info_.ref = ref;
    info_.u_plant = u;
    info_.breakdown = breakdown;
    info_.violated = !poly_.contains(y);

    y_prev2_ = y_prev_;
    y_prev_ = y;
    ++step_;
    done_ = step_ >= episode_.length;
    return {observation(), reward, done_, info_};
  }

  // o(t): previous outputs, their deltas, the load reference context, and
  // the plant model's current hidden state (when augmentation is on).
  Vec observation() const {
    Vec o;
    o.reserve(std::size_t(observation_size()));
    o.push_back(obs_norm_.imep.normalize(y_prev_.imep));
    o.push_back(obs_norm_.nox.normalize(y_prev_.nox));
    o.push_back(obs_norm_.mprr.normalize(y_prev_.mprr));
    o.push_back((y_prev_.imep - y_prev2_.imep) / obs_norm_.delta_imep_scale);
    o.push_back((y_prev_.nox - y_prev2_.nox) / obs_norm_.delta_nox_scale);
    const double ref_now = ref_[std::size_t(std::min(step_, episode_.length - 1))];
    const double ref_prev = step_ > 0 ? ref_[std::size_t(step_ - 1)] : ref_now;
    o.push_back(obs_norm_.imep.normalize(ref_now));
    o.push_back(obs_norm_.imep.normalize(ref_prev));
    o.push_back((ref_prev - y_prev_.imep) / obs_norm_.err_scale);
    if (augment_observation_) {
      const Vec& h = hidden_[0];
      o.insert(o.end(), h.begin(), h.end());
    }
    return o;
  }

 private:
  const PlantModel* plant_;
  RewardConfig reward_;
  SafePolytope poly_;
  NoiseConfig noise_;
  EpisodeConfig episode_;
  ObservationNorm obs_norm_;
  bool augment_observation_;
  std::uint64_t base_seed_;
  int episode_counter_ = 0;

  Rng ref_rng_{0}, noise_rng_{0};
  std::vector<double> ref_;
  Network::Hidden hidden_;
  EngineOutputs y_prev_, y_prev2_;
  StepInfo info_;
  int step_ = 0;
  bool done_ = true;
};

// Trace row in the standard export schema.
struct TraceRow {
  int step;
  double ref;
  EngineOutputs y;
  std::array<double, 4> action;  // plant space
  double reward;
  RewardBreakdown breakdown;
};

inline void save_trace_csv(const std::vector<TraceRow>& trace,
                           const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << "step,ref,imep,nox,soot,mprr,a1,a2,a3,a4,reward,q1,q2,q3,r,staging,W\n";
  for (const auto& t : trace) {
    f << t.step << ',' << format_double(t.ref) << ','
      << format_double(t.y.imep) << ',' << format_double(t.y.nox) << ','
      << format_double(t.y.soot) << ',' << format_double(t.y.mprr);
    for (double a : t.action) f << ',' << format_double(a);
    f << ',' << format_double(t.reward) << ','
      << format_double(t.breakdown.q1) << ',' << format_double(t.breakdown.q2)
      << ',' << format_double(t.breakdown.q3) << ','
      << format_double(t.breakdown.r) << ','
      << format_double(t.breakdown.staging) << ','
      << format_double(t.breakdown.w) << '\n';
  }
}

}  // namespace h2df
