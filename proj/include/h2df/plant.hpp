#pragma once

#include <array>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "h2df/engine.hpp"
#include "h2df/network.hpp"
#include "h2df/optim.hpp"

namespace h2df {

struct NormRange {
  double lo = 0.0;
  double hi = 1.0;

  double normalize(double x) const { return 2.0 * (x - lo) / (hi - lo) - 1.0; }
  double denormalize(double n) const { return lo + (n + 1.0) * 0.5 * (hi - lo); }
};

inline constexpr int kPlantInputs = 5;   // 4 actuations + previous load
inline constexpr int kPlantHidden = 8;

// GRU encoder-decoder plant model: three dense encoder layers, one GRU,
// three dense decoder layers ending in a linear 4-output head.
struct PlantModel {
  Network net;
  std::array<NormRange, kPlantInputs> in_norm;
  std::array<NormRange, kNumOutputs> out_norm;

  const GruCell& gru() const { return std::get<GruCell>(net.layers[3]); }
};

inline PlantModel make_plant_model(std::uint64_t seed) {
  Rng rng(seed);
  PlantModel m;
  m.net.add_dense(32, kPlantInputs, Activation::Tanh, rng);
  m.net.add_dense(32, 32, Activation::Tanh, rng);
  m.net.add_dense(16, 32, Activation::Tanh, rng);
  m.net.add_gru(kPlantHidden, 16, rng);
  // Multi-timescale update-gate bias: unit i starts with time constant T_i
  // log-spaced over [1, 10] cycles (sigma(b_z) = 1/T), so the cell has both
  // fast pass-through units and slow integrator units from the first epoch.
  {
    auto& gru = std::get<GruCell>(m.net.layers.back());
    const std::size_t n = gru.b_z.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double T = std::pow(10.0, double(i) / double(n - 1));
      gru.b_z[i] = -std::log(std::max(T - 1.0, 0.1));
    }
  }
  m.net.add_dense(16, kPlantHidden, Activation::Tanh, rng);
  m.net.add_dense(32, 16, Activation::Tanh, rng);
  m.net.add_dense(kNumOutputs, 32, Activation::Linear, rng);
  for (auto& r : m.in_norm) r = {0.0, 1.0};
  for (int c = 0; c < kNumOutputs; ++c)
    m.out_norm[std::size_t(c)] = {kOutputRangeLo[std::size_t(c)],
                                  kOutputRangeHi[std::size_t(c)]};
  return m;
}

// Normalization statistics come from the training split only.
inline void fit_normalization(PlantModel& m, const Dataset& ds) {
  if (ds.train_size == 0)
    throw std::invalid_argument("fit_normalization: empty train split");
  std::array<double, kPlantInputs> ilo, ihi;
  std::array<double, kNumOutputs> olo, ohi;
  ilo.fill(std::numeric_limits<double>::infinity());
  ihi.fill(-std::numeric_limits<double>::infinity());
  olo.fill(std::numeric_limits<double>::infinity());
  ohi.fill(-std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < ds.train_size; ++i) {
    const auto& s = ds.samples[i];
    const double in[kPlantInputs] = {s.u.doi_fuel, s.u.p2m, s.u.soi_fuel,
                                     s.u.doi_h2, s.imep_prev};
    for (int c = 0; c < kPlantInputs; ++c) {
      ilo[std::size_t(c)] = std::min(ilo[std::size_t(c)], in[c]);
      ihi[std::size_t(c)] = std::max(ihi[std::size_t(c)], in[c]);
    }
    for (int c = 0; c < kNumOutputs; ++c) {
      olo[std::size_t(c)] = std::min(olo[std::size_t(c)], s.y[c]);
      ohi[std::size_t(c)] = std::max(ohi[std::size_t(c)], s.y[c]);
    }
  }
  for (int c = 0; c < kPlantInputs; ++c) {
    if (ihi[std::size_t(c)] <= ilo[std::size_t(c)]) ihi[std::size_t(c)] = ilo[std::size_t(c)] + 1.0;
    m.in_norm[std::size_t(c)] = {ilo[std::size_t(c)], ihi[std::size_t(c)]};
  }
  for (int c = 0; c < kNumOutputs; ++c) {
    if (ohi[std::size_t(c)] <= olo[std::size_t(c)]) ohi[std::size_t(c)] = olo[std::size_t(c)] + 1.0;
    m.out_norm[std::size_t(c)] = {olo[std::size_t(c)], ohi[std::size_t(c)]};
  }
}

inline Vec plant_features(const PlantModel& m, const EngineInputs& u,
                          double imep_prev) {
  Vec x(kPlantInputs);
  x[0] = m.in_norm[0].normalize(u.doi_fuel);
  x[1] = m.in_norm[1].normalize(u.p2m);
  x[2] = m.in_norm[2].normalize(u.soi_fuel);
  x[3] = m.in_norm[3].normalize(u.doi_h2);
  x[4] = m.in_norm[4].normalize(imep_prev);
  return x;
}

inline EngineOutputs denormalize_outputs(const PlantModel& m, const Vec& yn) {
  EngineOutputs y;
  for (int c = 0; c < kNumOutputs; ++c)
    y[c] = m.out_norm[std::size_t(c)].denormalize(yn[std::size_t(c)]);
  return y;
}

// One plant step in physical units. `hidden` is caller-owned recurrent state;
// after the call it holds the hidden vector for this step.
inline EngineOutputs plant_step(const PlantModel& m, Network::Hidden& hidden,
                                const EngineInputs& u, double imep_prev) {
  const Vec yn = m.net.forward(plant_features(m, u, imep_prev), hidden);
  return denormalize_outputs(m, yn);
}

enum class PredictMode { TeacherForced, FreeRunning };

struct SequencePrediction {
  std::vector<EngineOutputs> outputs;
  std::vector<Vec> hidden_states;  // GRU hidden after each step
};

// Teacher-forced mode feeds the measured previous load; free-running feeds
// back the model's own previous load prediction.
inline SequencePrediction predict_sequence(const PlantModel& m,
                                           const EngineSample* samples,
                                           std::size_t n, PredictMode mode) {
  if (n == 0) throw std::invalid_argument("predict_sequence: empty sequence");
  SequencePrediction out;
  out.outputs.reserve(n);
  out.hidden_states.reserve(n);
  Network::Hidden hidden = m.net.initial_hidden();
  double fed_back = samples[0].imep_prev;
  for (std::size_t t = 0; t < n; ++t) {
    const double prev = (mode == PredictMode::TeacherForced)
                            ? samples[t].imep_prev
                            : fed_back;
    const EngineOutputs y = plant_step(m, hidden, samples[t].u, prev);
    fed_back = y.imep;
    out.outputs.push_back(y);
    out.hidden_states.push_back(hidden[0]);
  }
  return out;
}

// Range-normalized root mean squared percentage error, one value per output
// channel. The normalizer is the target range over the evaluated segment.
inline std::array<double, kNumOutputs> rmspe(
    const std::vector<EngineOutputs>& predictions,
    const std::vector<EngineOutputs>& targets) {
  if (predictions.size() != targets.size() || targets.size() < 2)
    throw std::invalid_argument("rmspe: need equal lengths >= 2");
  std::array<double, kNumOutputs> result{};
  for (int c = 0; c < kNumOutputs; ++c) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, sq = 0.0;
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const double y = targets[t][c], p = predictions[t][c];
      lo = std::min(lo, y);
      hi = std::max(hi, y);
      sq += (y - p) * (y - p);
    }
    if (hi - lo <= 0.0)
      throw std::domain_error("rmspe: zero target range on a channel");
    result[std::size_t(c)] =
        100.0 * std::sqrt(sq / double(targets.size())) / (hi - lo);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Training

struct PlantTrainConfig {
  int max_epochs = 1000;
  int batch_size = 512;
  double grad_threshold = 1.0;
  double l2 = 0.01;
  double initial_lr = 0.0005;
  int lr_drop_epoch = 250;
  double lr_drop_factor = 0.75;
  int validation_patience = 3;
  int bptt_length = 32;     // window length for truncated BPTT
  int window_stride = 4;    // spacing of window starts over the train split
  int washin = 8;           // leading window steps excluded from the loss
  std::uint64_t seed = 42;
};

struct EpochRecord {
  int epoch;
  double train_loss;
  double val_loss;
  double lr;
};

inline void save_history_csv(const std::vector<EpochRecord>& history,
                             const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << "epoch,train_loss,val_loss,lr\n";
  for (const auto& r : history)
    f << r.epoch << ',' << format_double(r.train_loss) << ','
      << format_double(r.val_loss) << ',' << format_double(r.lr) << '\n';
}

// Normalized MSE of a teacher-forced pass over a contiguous segment.
inline double segment_loss(const PlantModel& m, const EngineSample* samples,
                           std::size_t n) {
  Network::Hidden hidden = m.net.initial_hidden();
  double sq = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const Vec yn =
        m.net.forward(plant_features(m, samples[t].u, samples[t].imep_prev),
                      hidden);
    for (int c = 0; c < kNumOutputs; ++c) {
      const double e = yn[std::size_t(c)] -
                       m.out_norm[std::size_t(c)].normalize(samples[t].y[c]);
      sq += e * e;
    }
  }
  return sq / double(n * kNumOutputs);
}

inline std::vector<EpochRecord> train_plant(PlantModel& m, const Dataset& ds,
                                            const PlantTrainConfig& cfg) {
  if (ds.train_size == 0 || ds.val_size == 0)
    throw std::invalid_argument("train_plant: need nonempty train and val splits");
  fit_normalization(m, ds);

  const int W = cfg.bptt_length;
  std::vector<std::size_t> starts;
  for (std::size_t t = 0; t + std::size_t(W) <= ds.train_size;
       t += std::size_t(cfg.window_stride))
    starts.push_back(t);
  if (starts.empty())
    throw std::invalid_argument("train_plant: train split shorter than one window");

  auto params = param_views(m.net);
  AdamState adam = AdamState::for_params(params);
  Rng rng(cfg.seed);

  std::vector<EpochRecord> history;
  Network best_net = m.net;
  double best_val = std::numeric_limits<double>::infinity();
  int epochs_without_improvement = 0;

  GradientTape tape;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double lr =
        cfg.initial_lr *
        std::pow(cfg.lr_drop_factor, (epoch - 1) / cfg.lr_drop_epoch);

    std::shuffle(starts.begin(), starts.end(), rng.generator());

    double epoch_sq = 0.0;
    std::size_t epoch_terms = 0;
    for (std::size_t b0 = 0; b0 < starts.size();
         b0 += std::size_t(cfg.batch_size)) {
      const std::size_t b1 =
          std::min(starts.size(), b0 + std::size_t(cfg.batch_size));
      NetworkGrads grads = NetworkGrads::zeros(m.net);
      const std::size_t loss_terms =
          (b1 - b0) * std::size_t(W - cfg.washin) * kNumOutputs;

      for (std::size_t w = b0; w < b1; ++w) {
        const EngineSample* win = ds.samples.data() + starts[w];
        std::vector<Vec> inputs(static_cast<std::size_t>(W));
        for (int t = 0; t < W; ++t)
          inputs[std::size_t(t)] = plant_features(
              m, win[t].u, win[t].imep_prev);
        Network::Hidden hidden = m.net.initial_hidden();
        const auto outputs = forward_sequence(m.net, inputs, tape, &hidden);

        std::vector<Vec> ograds(std::size_t(W), Vec(kNumOutputs, 0.0));
        for (int t = cfg.washin; t < W; ++t) {
          for (int c = 0; c < kNumOutputs; ++c) {
            const double e =
                outputs[std::size_t(t)][std::size_t(c)] -
                m.out_norm[std::size_t(c)].normalize(win[t].y[c]);
            ograds[std::size_t(t)][std::size_t(c)] =
                2.0 * e / double(loss_terms);
            epoch_sq += e * e;
            ++epoch_terms;
          }
        }
        backward(m.net, tape, ograds, grads);
      }

      auto gviews = grad_views(grads);
      clip_gradients(gviews, cfg.grad_threshold);
      adam_step(adam, params, gviews, lr, cfg.l2);
    }

    const double train_loss = epoch_sq / double(epoch_terms);
    const double val_loss = segment_loss(m, ds.val_begin(), ds.val_size);
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
      throw std::runtime_error("train_plant: non-finite loss at epoch " +
                               std::to_string(epoch));
    history.push_back({epoch, train_loss, val_loss, lr});

    if (val_loss < best_val) {
      best_val = val_loss;
      best_net = m.net;
      epochs_without_improvement = 0;
    } else if (++epochs_without_improvement >= cfg.validation_patience) {
      break;
    }
  }

  m.net = best_net;
  return history;
}

}  // namespace h2df
