#include <catch2/catch_amalgamated.hpp>

#include "h2df/network.hpp"
#include "h2df/optim.hpp"

using namespace h2df;

namespace {

// Weighted-sum loss over all step outputs; used by the finite-difference
// oracle below.
double sequence_loss(const Network& net, const std::vector<Vec>& inputs,
                     const std::vector<Vec>& coeffs) {
  Network::Hidden h = net.initial_hidden();
  double loss = 0.0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const Vec y = net.forward(inputs[t], h);
    for (std::size_t i = 0; i < y.size(); ++i) loss += coeffs[t][i] * y[i];
  }
  return loss;
}

Network random_network(Rng& rng) {
  // dense -> GRU -> dense with small random sizes (well under 200 params)
  const std::size_t in = 1 + std::size_t(rng.integer(1, 3));
  const std::size_t mid = 1 + std::size_t(rng.integer(1, 3));
  const std::size_t hid = 1 + std::size_t(rng.integer(1, 3));
  const std::size_t out = 1 + std::size_t(rng.integer(0, 2));
  Network net;
  net.add_dense(mid, in, Activation::Tanh, rng);
  net.add_gru(hid, mid, rng);
  net.add_dense(out, hid, Activation::Linear, rng);
  return net;
}

double max_relative_fd_error(Network& net, Rng& rng, std::size_t T) {
  const std::size_t in = net.input_size(), out = net.output_size();
  std::vector<Vec> inputs(T, Vec(in)), coeffs(T, Vec(out));
  for (auto& x : inputs)
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
  for (auto& c : coeffs)
    for (double& v : c) v = rng.uniform(-1.0, 1.0);

  GradientTape tape;
  Network::Hidden h = net.initial_hidden();
  forward_sequence(net, inputs, tape, &h);
  NetworkGrads grads = NetworkGrads::zeros(net);
  backward(net, tape, coeffs, grads);

  auto params = param_views(net);
  auto gviews = grad_views(grads);
  const double eps = 1e-6;
  double worst = 0.0;
  for (std::size_t b = 0; b < params.size(); ++b) {
    for (std::size_t i = 0; i < params[b].size; ++i) {
      double& p = params[b].data[i];
      const double saved = p;
      p = saved + eps;
      const double lp = sequence_loss(net, inputs, coeffs);
      p = saved - eps;
      const double lm = sequence_loss(net, inputs, coeffs);
      p = saved;
      const double fd = (lp - lm) / (2.0 * eps);
      const double an = gviews[b].data[i];
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-3});
      worst = std::max(worst, std::abs(fd - an) / denom);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("dense forward matches hand computation") {
  DenseLayer layer(2, 2, Activation::Linear);
  layer.W.data = {1.0, 2.0, 3.0, 4.0};
  layer.b = {0.5, -1.0};
  const Vec y = layer.forward({1.0, -1.0});
  CHECK(y[0] == Catch::Approx(1.0 - 2.0 + 0.5).epsilon(1e-15));
  CHECK(y[1] == Catch::Approx(3.0 - 4.0 - 1.0).epsilon(1e-15));

  DenseLayer tl(1, 2, Activation::Tanh);
  tl.W.data = {0.3, -0.2};
  tl.b = {0.1};
  CHECK(tl.forward({1.0, 2.0})[0] ==
        Catch::Approx(std::tanh(0.3 - 0.4 + 0.1)).epsilon(1e-15));
}

TEST_CASE("gru_step matches a straight-line transcription of the cell") {
  Rng rng(3);
  GruCell cell(3, 2);
  cell.init(rng);
  for (Vec* b : {&cell.b_z, &cell.b_r, &cell.b_h})
    for (double& v : *b) v = rng.uniform(-0.5, 0.5);

  for (int trial = 0; trial < 50; ++trial) {
    Vec h_prev(3), u(2);
    for (double& v : h_prev) v = rng.uniform(-1.0, 1.0);
    for (double& v : u) v = rng.uniform(-1.0, 1.0);
    const Vec h = cell.step(h_prev, u);

    // independent elementwise recomputation
    for (std::size_t i = 0; i < 3; ++i) {
      double az = cell.b_z[i], ar = cell.b_r[i];
      for (std::size_t j = 0; j < 3; ++j) az += cell.W_hz(i, j) * h_prev[j];
      for (std::size_t j = 0; j < 2; ++j) az += cell.W_uz(i, j) * u[j];
      for (std::size_t j = 0; j < 3; ++j) ar += cell.W_hr(i, j) * h_prev[j];
      for (std::size_t j = 0; j < 2; ++j) ar += cell.W_ur(i, j) * u[j];
      const double z = 1.0 / (1.0 + std::exp(-az));
      const double r = 1.0 / (1.0 + std::exp(-ar));
      double ah = cell.b_h[i];
      for (std::size_t j = 0; j < 2; ++j) ah += cell.W_uh(i, j) * u[j];
      for (std::size_t j = 0; j < 3; ++j) {
        double rj = cell.b_r[j];
        for (std::size_t k = 0; k < 3; ++k) rj += cell.W_hr(j, k) * h_prev[k];
        for (std::size_t k = 0; k < 2; ++k) rj += cell.W_ur(j, k) * u[k];
        rj = 1.0 / (1.0 + std::exp(-rj));
        ah += cell.W_hh(i, j) * (rj * h_prev[j]);
      }
      const double hc = std::tanh(ah);
      const double expected = (1.0 - z) * h_prev[i] + z * hc;
      CHECK(std::abs(h[i] - expected) < 1e-12);
    }
  }
}

TEST_CASE("gru update gate gates the previous state") {
  Rng rng(5);
  GruCell cell(4, 2);
  cell.init(rng);
  // force z ~ 0: the state must barely move
  for (double& v : cell.b_z) v = -40.0;
  Vec h_prev(4), u{0.3, -0.7};
  for (double& v : h_prev) v = rng.uniform(-1.0, 1.0);
  const Vec h = cell.step(h_prev, u);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(std::abs(h[i] - h_prev[i]) < 1e-12);
}

TEST_CASE("analytic gradients match central finite differences") {
  Rng rng(42);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    Network net = random_network(rng);
    const std::size_t T = 1 + std::size_t(rng.integer(0, 4));
    worst = std::max(worst, max_relative_fd_error(net, rng, T));
  }
  INFO("max relative error " << worst);
  CHECK(worst < 1e-5);
}

TEST_CASE("input gradients from backward match finite differences") {
  Rng rng(7);
  Network net = random_network(rng);
  const std::size_t T = 3;
  std::vector<Vec> inputs(T, Vec(net.input_size())),
      coeffs(T, Vec(net.output_size()));
  for (auto& x : inputs)
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
  for (auto& c : coeffs)
    for (double& v : c) v = rng.uniform(-1.0, 1.0);

  GradientTape tape;
  Network::Hidden h = net.initial_hidden();
  forward_sequence(net, inputs, tape, &h);
  NetworkGrads grads = NetworkGrads::zeros(net);
  std::vector<Vec> igrads;
  backward(net, tape, coeffs, grads, &igrads);

  const double eps = 1e-6;
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < inputs[t].size(); ++i) {
      const double saved = inputs[t][i];
      inputs[t][i] = saved + eps;
      const double lp = sequence_loss(net, inputs, coeffs);
      inputs[t][i] = saved - eps;
      const double lm = sequence_loss(net, inputs, coeffs);
      inputs[t][i] = saved;
      const double fd = (lp - lm) / (2.0 * eps);
      const double denom = std::max({std::abs(fd), std::abs(igrads[t][i]), 1e-3});
      CHECK(std::abs(fd - igrads[t][i]) / denom < 1e-5);
    }
  }
}

TEST_CASE("global-norm clipping") {
  Vec g{3.0, 4.0};
  std::vector<ParamView> views{{g.data(), g.size(), true}};
  SECTION("above threshold: rescaled to the threshold norm") {
    clip_gradients(views, 1.0);
    CHECK(g[0] == Catch::Approx(0.6).epsilon(1e-15));
    CHECK(g[1] == Catch::Approx(0.8).epsilon(1e-15));
  }
  SECTION("below threshold: untouched") {
    clip_gradients(views, 10.0);
    CHECK(g[0] == 3.0);
    CHECK(g[1] == 4.0);
  }
  SECTION("bad threshold throws") {
    CHECK_THROWS_AS(clip_gradients(views, 0.0), std::invalid_argument);
  }
}

TEST_CASE("adam step matches hand computation") {
  Vec p{0.0}, g{1.0};
  std::vector<ParamView> pv{{p.data(), 1, true}}, gv{{g.data(), 1, true}};
  AdamState st = AdamState::for_params(pv);
  adam_step(st, pv, gv, 0.1);
  // m=0.1, v=0.001; mhat=1, vhat=1 -> update = -0.1/(1+1e-8)
  CHECK(p[0] == Catch::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-12));

  adam_step(st, pv, gv, 0.1);
  const double m = 0.9 * 0.1 + 0.1;          // 0.19
  const double v = 0.999 * 0.001 + 0.001;    // 0.001999
  const double mhat = m / (1.0 - 0.81);
  const double vhat = v / (1.0 - 0.999 * 0.999);
  const double expected =
      -0.1 / (1.0 + 1e-8) - 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
  CHECK(p[0] == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("l2 regularization applies to weights only") {
  Vec w{1.0}, b{1.0}, gw{0.0}, gb{0.0};
  std::vector<ParamView> pv{{w.data(), 1, true}, {b.data(), 1, false}};
  std::vector<ParamView> gv{{gw.data(), 1, true}, {gb.data(), 1, false}};
  AdamState st = AdamState::for_params(pv);
  adam_step(st, pv, gv, 0.01, 0.5);
  CHECK(w[0] != 1.0);
  CHECK(b[0] == 1.0);
}

TEST_CASE("network shape bookkeeping") {
  Rng rng(1);
  Network net;
  net.add_dense(32, 5, Activation::Tanh, rng);
  net.add_dense(32, 32, Activation::Tanh, rng);
  net.add_dense(16, 32, Activation::Tanh, rng);
  net.add_gru(8, 16, rng);
  net.add_dense(16, 8, Activation::Tanh, rng);
  net.add_dense(32, 16, Activation::Tanh, rng);
  net.add_dense(4, 32, Activation::Linear, rng);
  CHECK(net.input_size() == 5);
  CHECK(net.output_size() == 4);
  CHECK(net.initial_hidden().size() == 1);
  CHECK(net.initial_hidden()[0].size() == 8);
  // 6 dense + 1 gru parameter count
  const std::size_t dense = 32 * 5 + 32 + 32 * 32 + 32 + 16 * 32 + 16 +
                            16 * 8 + 16 + 32 * 16 + 32 + 4 * 32 + 4;
  const std::size_t gru = 3 * (8 * 8) + 3 * (8 * 16) + 3 * 8;
  CHECK(param_count(net) == dense + gru);
}
