#pragma once

#include <variant>
#include <vector>

#include "h2df/layers.hpp"

namespace h2df {

// A feed-forward stack of dense layers with optional GRU layers in between.
// Hidden state is caller-owned: one vector per GRU layer, in layer order.
struct Network {
  std::vector<std::variant<DenseLayer, GruCell>> layers;

  using Hidden = std::vector<Vec>;
  using StepCache = std::vector<std::variant<DenseCache, GruCache>>;

  void add_dense(std::size_t out, std::size_t in, Activation act, Rng& rng) {
    DenseLayer l(out, in, act);
    l.init_glorot(rng);
    layers.push_back(std::move(l));
  }

  void add_gru(std::size_t hidden, std::size_t input, Rng& rng) {
    GruCell c(hidden, input);
    c.init(rng);
    layers.push_back(std::move(c));
  }

  std::size_t input_size() const {
    if (layers.empty()) return 0;
    if (auto* d = std::get_if<DenseLayer>(&layers.front())) return d->in_size();
    return std::get<GruCell>(layers.front()).input_size;
  }

  std::size_t output_size() const {
    if (layers.empty()) return 0;
    if (auto* d = std::get_if<DenseLayer>(&layers.back())) return d->out_size();
    return std::get<GruCell>(layers.back()).hidden_size;
  }

  Hidden initial_hidden() const {
    Hidden h;
    for (const auto& l : layers)
      if (auto* g = std::get_if<GruCell>(&l)) h.emplace_back(g->hidden_size, 0.0);
    return h;
  }

  // One time step. Advances `hidden` in place; fills `cache` when given.
  Vec forward(const Vec& x, Hidden& hidden, StepCache* cache = nullptr) const {
    Vec cur = x;
    std::size_t gi = 0;
    if (cache) cache->clear();
    for (const auto& l : layers) {
      if (auto* d = std::get_if<DenseLayer>(&l)) {
        DenseCache c;
        cur = d->forward(cur, cache ? &c : nullptr);
        if (cache) cache->push_back(std::move(c));
      } else {
        const auto& g = std::get<GruCell>(l);
        GruCache c;
        Vec h = g.step(hidden[gi], cur, cache ? &c : nullptr);
        hidden[gi] = h;
        cur = std::move(h);
        if (cache) cache->push_back(std::move(c));
        ++gi;
      }
    }
    return cur;
  }

  // Stateless convenience for pure-dense networks.
  Vec forward(const Vec& x) const {
    Hidden h = initial_hidden();
    return forward(x, h);
  }
};

struct NetworkGrads {
  std::vector<std::variant<DenseGrads, GruGrads>> layers;

  static NetworkGrads zeros(const Network& net) {
    NetworkGrads g;
    for (const auto& l : net.layers) {
      if (auto* d = std::get_if<DenseLayer>(&l))
        g.layers.push_back(d->zero_grads());
      else
        g.layers.push_back(std::get<GruCell>(l).zero_grads());
    }
    return g;
  }
};

// Recorded forward caches for a sequence, enough to run exact reverse-mode
// backpropagation through time.
struct GradientTape {
  std::vector<Network::StepCache> steps;

  void clear() { steps.clear(); }
  std::size_t length() const { return steps.size(); }
};

// Runs the network over a sequence, recording the tape. Hidden state starts
// from `hidden` (zero state by default) and is advanced across steps.
inline std::vector<Vec> forward_sequence(const Network& net,
                                         const std::vector<Vec>& inputs,
                                         GradientTape& tape,
                                         Network::Hidden* hidden = nullptr) {
  Network::Hidden local = net.initial_hidden();
  Network::Hidden& h = hidden ? *hidden : local;
  tape.clear();
  std::vector<Vec> outputs;
  outputs.reserve(inputs.size());
  for (const Vec& x : inputs) {
    Network::StepCache cache;
    outputs.push_back(net.forward(x, h, &cache));
    tape.steps.push_back(std::move(cache));
  }
  return outputs;
}

// Reverse-mode pass over a recorded tape. `output_grads[t]` is
// d(loss)/d(output at step t); accumulates into `grads` and optionally
// returns d(loss)/d(input) per step via `input_grads`.
inline void backward(const Network& net, const GradientTape& tape,
                     const std::vector<Vec>& output_grads, NetworkGrads& grads,
                     std::vector<Vec>* input_grads = nullptr) {
  if (tape.steps.size() != output_grads.size())
    throw std::invalid_argument("backward: tape/loss length mismatch");
  const std::size_t T = tape.steps.size();
  // carried d(loss)/dh for each GRU layer
  std::vector<Vec> dh_carry;
  for (const auto& l : net.layers)
    if (auto* g = std::get_if<GruCell>(&l))
      dh_carry.emplace_back(g->hidden_size, 0.0);
  if (input_grads) input_grads->assign(T, Vec{});

  for (std::size_t ti = T; ti-- > 0;) {
    Vec dcur = output_grads[ti];
    std::size_t gi = dh_carry.size();
    for (std::size_t li = net.layers.size(); li-- > 0;) {
      const auto& l = net.layers[li];
      if (auto* d = std::get_if<DenseLayer>(&l)) {
        dcur = d->backward(std::get<DenseCache>(tape.steps[ti][li]), dcur,
                           std::get<DenseGrads>(grads.layers[li]));
      } else {
        --gi;
        const auto& g = std::get<GruCell>(l);
        Vec dh = std::move(dcur);
        for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += dh_carry[gi][i];
        auto [dh_prev, du] = g.backward(std::get<GruCache>(tape.steps[ti][li]),
                                        dh, std::get<GruGrads>(grads.layers[li]));
        dh_carry[gi] = std::move(dh_prev);
        dcur = std::move(du);
      }
    }
    if (input_grads) (*input_grads)[ti] = std::move(dcur);
  }
}

// Flat view over a parameter (or gradient) block.
struct ParamView {
  double* data;
  std::size_t size;
  bool is_weight;  // L2 applies to weights only
};

inline void collect_views(std::vector<std::variant<DenseLayer, GruCell>>& layers,
                          std::vector<ParamView>& out) {
  for (auto& l : layers) {
    if (auto* d = std::get_if<DenseLayer>(&l)) {
      out.push_back({d->W.data.data(), d->W.size(), true});
      out.push_back({d->b.data(), d->b.size(), false});
    } else {
      auto& g = std::get<GruCell>(l);
      for (Tensor* t : {&g.W_hz, &g.W_uz})
        out.push_back({t->data.data(), t->size(), true});
      out.push_back({g.b_z.data(), g.b_z.size(), false});
      for (Tensor* t : {&g.W_hr, &g.W_ur})
        out.push_back({t->data.data(), t->size(), true});
      out.push_back({g.b_r.data(), g.b_r.size(), false});
      for (Tensor* t : {&g.W_uh, &g.W_hh})
        out.push_back({t->data.data(), t->size(), true});
      out.push_back({g.b_h.data(), g.b_h.size(), false});
    }
  }
}

inline void collect_views(std::vector<std::variant<DenseGrads, GruGrads>>& layers,
                          std::vector<ParamView>& out) {
  for (auto& l : layers) {
    if (auto* d = std::get_if<DenseGrads>(&l)) {
      out.push_back({d->dW.data.data(), d->dW.size(), true});
      out.push_back({d->db.data(), d->db.size(), false});
    } else {
      auto& g = std::get<GruGrads>(l);
      for (Tensor* t : {&g.dW_hz, &g.dW_uz})
        out.push_back({t->data.data(), t->size(), true});
      out.push_back({g.db_z.data(), g.db_z.size(), false});
      for (Tensor* t : {&g.dW_hr, &g.dW_ur})
        out.push_back({t->data.data(), t->size(), true});
      out.push_back({g.db_r.data(), g.db_r.size(), false});
      for (Tensor* t : {&g.dW_uh, &g.dW_hh})
        out.push_back({t->data.data(), t->size(), true});
      out.push_back({g.db_h.data(), g.db_h.size(), false});
    }
  }
}

inline std::vector<ParamView> param_views(Network& net) {
  std::vector<ParamView> v;
  collect_views(net.layers, v);
  return v;
}

inline std::vector<ParamView> grad_views(NetworkGrads& g) {
  std::vector<ParamView> v;
  collect_views(g.layers, v);
  return v;
}

inline std::size_t param_count(Network& net) {
  std::size_t n = 0;
  for (const auto& v : param_views(net)) n += v.size;
  return n;
}

// Plain MLP: sizes = {in, h1, ..., out}.
inline Network make_mlp(const std::vector<std::size_t>& sizes,
                        Activation hidden_act, Activation out_act, Rng& rng) {
  Network net;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const bool last = (i + 2 == sizes.size());
    net.add_dense(sizes[i + 1], sizes[i], last ? out_act : hidden_act, rng);
  }
  return net;
}

}  // namespace h2df
