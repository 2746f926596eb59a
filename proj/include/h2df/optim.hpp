#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "h2df/network.hpp"

namespace h2df {

inline double global_norm(const std::vector<ParamView>& grads) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (std::size_t i = 0; i < g.size; ++i) sq += g.data[i] * g.data[i];
  return std::sqrt(sq);
}

// Scales all gradients by threshold/norm when the global L2 norm exceeds
// the threshold; identity otherwise.
inline void clip_gradients(const std::vector<ParamView>& grads,
                           double threshold) {
  if (threshold <= 0.0)
    throw std::invalid_argument("clip_gradients: threshold must be > 0");
  const double norm = global_norm(grads);
  if (norm <= threshold || norm == 0.0) return;
  const double scale = threshold / norm;
  for (const auto& g : grads)
    for (std::size_t i = 0; i < g.size; ++i) g.data[i] *= scale;
}

struct AdamState {
  std::vector<Vec> m, v;  // one block per ParamView
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const std::vector<ParamView>& params) {
    AdamState s;
    for (const auto& p : params) {
      s.m.emplace_back(p.size, 0.0);
      s.v.emplace_back(p.size, 0.0);
    }
    return s;
  }
};

// Standard Adam with bias correction. L2 regularization is decoupled
// weight decay (AdamW): it is applied directly to the weights, outside the
// moment estimates, so the adaptive step sizes are driven by the loss
// gradient alone. Biases are not regularized.
inline void adam_step(AdamState& state, const std::vector<ParamView>& params,
                      const std::vector<ParamView>& grads, double lr,
                      double l2 = 0.0) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step: block count mismatch");
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, double(state.step));
  for (std::size_t b = 0; b < params.size(); ++b) {
    const auto& p = params[b];
    const auto& g = grads[b];
    Vec& m = state.m[b];
    Vec& v = state.v[b];
    for (std::size_t i = 0; i < p.size; ++i) {
      const double gi = g.data[i];
      if (l2 != 0.0 && p.is_weight) p.data[i] -= lr * l2 * p.data[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.data[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

}  // namespace h2df
