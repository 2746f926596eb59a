#pragma once

#include <array>
#include <cmath>

#include "h2df/engine.hpp"

namespace h2df {

// Box of admissible outputs. Excesses are reported in channel-normalized
// units (excess divided by the channel's norm scale).
struct SafePolytope {
  // imep, nox, soot, mprr
  std::array<double, 4> lower{0.5, 0.0, 0.0, 0.0};
  std::array<double, 4> upper{14.0, 400.0, 35.0, 7.0};
  std::array<double, 4> norm{17.0, 500.0, 40.0, 10.0};

  void validate() const {
    for (int c = 0; c < 4; ++c)
      if (!(lower[std::size_t(c)] < upper[std::size_t(c)]))
        throw std::invalid_argument("SafePolytope: lower must be < upper");
  }

  bool contains(const EngineOutputs& y) const {
    for (int c = 0; c < 4; ++c)
      if (y[c] < lower[std::size_t(c)] || y[c] > upper[std::size_t(c)])
        return false;
    return true;
  }
};

struct StagingConfig {
  double coefficient = 0.0025;
  double offset = 5.0;
  double delta_floor = 1e-3;  // bar
  double exponent_cap = 8.0;
  bool enabled = true;
};

struct RewardConfig {
  // diagonal output weights: load tracking, combustion noise, nox, soot
  std::array<double, 4> q{1.0, 0.1, 0.05, 0.05};
  // diagonal control-effort weights per actuator
  std::array<double, 4> r{0.05, 0.02, 0.02, 0.05};
  double alpha = 1.0;
  double beta = 0.1;
  // Sized so that leaving the polytope strictly outweighs the staging bonus:
  // even a 0.01 normalized excess (one sensor-noise standard deviation on
  // MPRR) costs more than the capped staging jackpot, so safety dominates
  // the tracking incentive everywhere during policy optimization.
  double zeta = 200000.0;
  StagingConfig staging;
  // channel normalization scales for the output terms: imep, nox, soot, mprr
  std::array<double, 4> out_scale{17.0, 500.0, 40.0, 10.0};
};

// Exponential tracking bonus, sharpest at zero load error. The delta floor
// and exponent cap keep it finite.
inline double staging_bonus(double delta_imep, const StagingConfig& cfg) {
  if (!cfg.enabled) return 0.0;
  const double d = std::max(delta_imep, cfg.delta_floor);
  const double expo =
      std::min(std::floor(cfg.offset - std::log10(d)), cfg.exponent_cap);
  return cfg.coefficient * std::pow(10.0, expo);
}

// L1 excess outside the polytope, summed over channels in normalized units.
inline double constraint_penalty(const EngineOutputs& y,
                                 const SafePolytope& poly) {
  poly.validate();
  double w = 0.0;
  for (int c = 0; c < 4; ++c) {
    const double below = std::max(0.0, poly.lower[std::size_t(c)] - y[c]);
    const double above = std::max(0.0, y[c] - poly.upper[std::size_t(c)]);
    w += (below + above) / poly.norm[std::size_t(c)];
  }
  return w;
}

struct RewardBreakdown {
  double q1 = 0.0;       // load tracking
  double q2 = 0.0;       // combustion noise
  double q3 = 0.0;       // emissions
  double r = 0.0;        // control effort
  double staging = 0.0;  // tracking bonus
  double w = 0.0;        // constraint violation
};

// Per-step reward: negated weighted penalty sum plus the staging bonus.
// `u` is the applied action in plant space ([0,1] per channel).
inline double compute_reward(const EngineOutputs& y, double ref_imep,
                             const std::array<double, 4>& u,
                             const RewardConfig& cfg, const SafePolytope& poly,
                             RewardBreakdown* breakdown = nullptr) {
  const double e_imep = (ref_imep - y.imep) / cfg.out_scale[0];
  const double n_nox = y.nox / cfg.out_scale[1];
  const double n_soot = y.soot / cfg.out_scale[2];
  const double n_mprr = y.mprr / cfg.out_scale[3];

  RewardBreakdown b;
  b.q1 = cfg.q[0] * e_imep * e_imep;
  b.q2 = cfg.q[1] * n_mprr * n_mprr;
  b.q3 = cfg.q[2] * n_nox * n_nox + cfg.q[3] * n_soot * n_soot;
  for (int i = 0; i < 4; ++i)
    b.r += cfg.r[std::size_t(i)] * u[std::size_t(i)] * u[std::size_t(i)];
  b.w = constraint_penalty(y, poly);
  b.staging = staging_bonus(std::abs(ref_imep - y.imep), cfg.staging);

  const double reward = -(cfg.alpha * (b.q1 + b.q2 + b.q3) + cfg.beta * b.r +
                          cfg.zeta * b.w) +
                        b.staging;
  if (breakdown) *breakdown = b;
  return reward;
}

}  // namespace h2df
