#pragma once

#include <cmath>
#include <string>

#include "h2df/rng.hpp"
#include "h2df/tensor.hpp"

namespace h2df {

enum class Activation { Linear, Tanh, Relu, Sigmoid };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "?";
}

inline Activation activation_from_name(const std::string& s) {
  if (s == "linear") return Activation::Linear;
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  if (s == "sigmoid") return Activation::Sigmoid;
  throw std::invalid_argument("unknown activation: " + s);
}

inline double apply_activation(Activation a, double x) {
  switch (a) {
    case Activation::Linear: return x;
    case Activation::Tanh: return std::tanh(x);
    case Activation::Relu: return x > 0.0 ? x : 0.0;
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
  }
  return x;
}

// derivative expressed through the post-activation value y
inline double activation_grad_from_output(Activation a, double y) {
  switch (a) {
    case Activation::Linear: return 1.0;
    case Activation::Tanh: return 1.0 - y * y;
    case Activation::Relu: return y > 0.0 ? 1.0 : 0.0;
    case Activation::Sigmoid: return y * (1.0 - y);
  }
  return 1.0;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// ---------------------------------------------------------------------------
// Dense layer: y = act(W x + b)

struct DenseCache {
  Vec x;  // input
  Vec y;  // post-activation output
};

struct DenseGrads {
  Tensor dW;
  Vec db;
};

struct DenseLayer {
  Tensor W;  // (out x in)
  Vec b;     // (out)
  Activation activation = Activation::Linear;

  DenseLayer() = default;
  DenseLayer(std::size_t out, std::size_t in, Activation act)
      : W({out, in}), b(out, 0.0), activation(act) {}

  std::size_t in_size() const { return W.cols(); }
  std::size_t out_size() const { return W.rows(); }

  void init_glorot(Rng& rng) {
    const double limit = std::sqrt(6.0 / double(in_size() + out_size()));
    for (double& w : W.data) w = rng.uniform(-limit, limit);
    std::fill(b.begin(), b.end(), 0.0);
  }

  Vec forward(const Vec& x, DenseCache* cache = nullptr) const {
    if (x.size() != in_size())
      throw std::invalid_argument("dense_forward: input size mismatch");
    Vec y;
    matvec(W, x, y);
    for (std::size_t i = 0; i < y.size(); ++i)
      y[i] = apply_activation(activation, y[i] + b[i]);
    if (cache) {
      cache->x = x;
      cache->y = y;
    }
    return y;
  }

  // dy is d(loss)/d(output); accumulates parameter grads, returns d(loss)/dx
  Vec backward(const DenseCache& cache, const Vec& dy, DenseGrads& grads) const {
    Vec dpre(out_size());
    for (std::size_t i = 0; i < dpre.size(); ++i)
      dpre[i] = dy[i] * activation_grad_from_output(activation, cache.y[i]);
    outer_add(grads.dW, dpre, cache.x);
    for (std::size_t i = 0; i < dpre.size(); ++i) grads.db[i] += dpre[i];
    Vec dx(in_size(), 0.0);
    matvec_transpose_add(W, dpre, dx);
    return dx;
  }

  DenseGrads zero_grads() const {
    return DenseGrads{Tensor({out_size(), in_size()}), Vec(out_size(), 0.0)};
  }
};

inline Vec dense_forward(const DenseLayer& layer, const Vec& x,
                         DenseCache* cache = nullptr) {
  return layer.forward(x, cache);
}

// ---------------------------------------------------------------------------
// GRU cell:
//   z = sigmoid(W_hz h_prev + W_uz u + b_z)
//   r = sigmoid(W_hr h_prev + W_ur u + b_r)
//   hc = tanh(W_uh u + W_hh (r . h_prev) + b_h)
//   h  = (1 - z) . h_prev + z . hc

struct GruCache {
  Vec h_prev, u;
  Vec z, r, hc;
};

struct GruGrads {
  Tensor dW_hz, dW_uz;
  Vec db_z;
  Tensor dW_hr, dW_ur;
  Vec db_r;
  Tensor dW_uh, dW_hh;
  Vec db_h;
};

struct GruCell {
  Tensor W_hz, W_uz;  // (hidden x hidden), (hidden x input)
  Vec b_z;
  Tensor W_hr, W_ur;
  Vec b_r;
  Tensor W_uh, W_hh;  // (hidden x input), (hidden x hidden)
  Vec b_h;
  std::size_t hidden_size = 0;
  std::size_t input_size = 0;

  GruCell() = default;
  GruCell(std::size_t hidden, std::size_t input)
      : W_hz({hidden, hidden}), W_uz({hidden, input}), b_z(hidden, 0.0),
        W_hr({hidden, hidden}), W_ur({hidden, input}), b_r(hidden, 0.0),
        W_uh({hidden, input}), W_hh({hidden, hidden}), b_h(hidden, 0.0),
        hidden_size(hidden), input_size(input) {}

  // Glorot for input weights, scaled uniform 1/sqrt(hidden) for recurrent
  // weights, zero biases.
  void init(Rng& rng) {
    const double lim_in = std::sqrt(6.0 / double(input_size + hidden_size));
    const double lim_rec = 1.0 / std::sqrt(double(hidden_size));
    for (Tensor* t : {&W_uz, &W_ur, &W_uh})
      for (double& w : t->data) w = rng.uniform(-lim_in, lim_in);
    for (Tensor* t : {&W_hz, &W_hr, &W_hh})
      for (double& w : t->data) w = rng.uniform(-lim_rec, lim_rec);
    for (Vec* v : {&b_z, &b_r, &b_h}) std::fill(v->begin(), v->end(), 0.0);
  }

  Vec step(const Vec& h_prev, const Vec& u, GruCache* cache = nullptr) const {
    if (h_prev.size() != hidden_size || u.size() != input_size)
      throw std::invalid_argument("gru_step: dimension mismatch");
    check_finite(h_prev, "gru_step h_prev");
    check_finite(u, "gru_step u");

    Vec z, r, tmp;
    matvec(W_hz, h_prev, z);
    matvec(W_uz, u, tmp);
    for (std::size_t i = 0; i < hidden_size; ++i)
      z[i] = sigmoid(z[i] + tmp[i] + b_z[i]);

    matvec(W_hr, h_prev, r);
    matvec(W_ur, u, tmp);
    for (std::size_t i = 0; i < hidden_size; ++i)
      r[i] = sigmoid(r[i] + tmp[i] + b_r[i]);

    Vec rh(hidden_size);
    for (std::size_t i = 0; i < hidden_size; ++i) rh[i] = r[i] * h_prev[i];

    Vec hc;
    matvec(W_hh, rh, hc);
    matvec(W_uh, u, tmp);
    for (std::size_t i = 0; i < hidden_size; ++i)
      hc[i] = std::tanh(hc[i] + tmp[i] + b_h[i]);

    Vec h(hidden_size);
    for (std::size_t i = 0; i < hidden_size; ++i)
      h[i] = (1.0 - z[i]) * h_prev[i] + z[i] * hc[i];

    if (cache) {
      cache->h_prev = h_prev;
      cache->u = u;
      cache->z = z;
      cache->r = r;
      cache->hc = hc;
    }
    return h;
  }

  // dh is d(loss)/dh(t); accumulates parameter grads, returns
  // (d(loss)/dh_prev, d(loss)/du).
  std::pair<Vec, Vec> backward(const GruCache& c, const Vec& dh,
                               GruGrads& grads) const {
    const std::size_t n = hidden_size;
    Vec dh_prev(n, 0.0), du(input_size, 0.0);

    Vec dz(n), dhc(n);
    for (std::size_t i = 0; i < n; ++i) {
      dz[i] = dh[i] * (c.hc[i] - c.h_prev[i]);
      dhc[i] = dh[i] * c.z[i];
      dh_prev[i] += dh[i] * (1.0 - c.z[i]);
    }

    // candidate branch
    Vec dhc_pre(n);
    for (std::size_t i = 0; i < n; ++i)
      dhc_pre[i] = dhc[i] * (1.0 - c.hc[i] * c.hc[i]);
    Vec rh(n);
    for (std::size_t i = 0; i < n; ++i) rh[i] = c.r[i] * c.h_prev[i];
    outer_add(grads.dW_uh, dhc_pre, c.u);
    outer_add(grads.dW_hh, dhc_pre, rh);
    for (std::size_t i = 0; i < n; ++i) grads.db_h[i] += dhc_pre[i];
    matvec_transpose_add(W_uh, dhc_pre, du);
    Vec drh(n, 0.0);
    matvec_transpose_add(W_hh, dhc_pre, drh);
    Vec dr(n);
    for (std::size_t i = 0; i < n; ++i) {
      dr[i] = drh[i] * c.h_prev[i];
      dh_prev[i] += drh[i] * c.r[i];
    }

    // gate branches
    Vec dz_pre(n), dr_pre(n);
    for (std::size_t i = 0; i < n; ++i) {
      dz_pre[i] = dz[i] * c.z[i] * (1.0 - c.z[i]);
      dr_pre[i] = dr[i] * c.r[i] * (1.0 - c.r[i]);
    }
    outer_add(grads.dW_hz, dz_pre, c.h_prev);
    outer_add(grads.dW_uz, dz_pre, c.u);
    for (std::size_t i = 0; i < n; ++i) grads.db_z[i] += dz_pre[i];
    matvec_transpose_add(W_hz, dz_pre, dh_prev);
    matvec_transpose_add(W_uz, dz_pre, du);

    outer_add(grads.dW_hr, dr_pre, c.h_prev);
    outer_add(grads.dW_ur, dr_pre, c.u);
    for (std::size_t i = 0; i < n; ++i) grads.db_r[i] += dr_pre[i];
    matvec_transpose_add(W_hr, dr_pre, dh_prev);
    matvec_transpose_add(W_ur, dr_pre, du);

    return {dh_prev, du};
  }

  GruGrads zero_grads() const {
    return GruGrads{Tensor({hidden_size, hidden_size}),
                    Tensor({hidden_size, input_size}),
                    Vec(hidden_size, 0.0),
                    Tensor({hidden_size, hidden_size}),
                    Tensor({hidden_size, input_size}),
                    Vec(hidden_size, 0.0),
                    Tensor({hidden_size, input_size}),
                    Tensor({hidden_size, hidden_size}),
                    Vec(hidden_size, 0.0)};
  }
};

inline Vec gru_step(const GruCell& cell, const Vec& h_prev, const Vec& u,
                    GruCache* cache = nullptr) {
  return cell.step(h_prev, u, cache);
}

}  // namespace h2df
