#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "h2df/rng.hpp"

namespace h2df {

// Output channel order used everywhere: imep, nox, soot, mprr.
inline constexpr int kNumOutputs = 4;
inline constexpr int kNumActuators = 4;

// Nominal output ranges for normalization and noise scaling:
// imep 0-17 bar, nox 0-500 ppm, soot 0-40 mg/m3, mprr 0-10 bar/CAD.
inline constexpr std::array<double, 4> kOutputRangeLo{0.0, 0.0, 0.0, 0.0};
inline constexpr std::array<double, 4> kOutputRangeHi{17.0, 500.0, 40.0, 10.0};

struct EngineInputs {
  double doi_fuel = 0.0;  // diesel main duration, normalized
  double p2m = 0.0;       // pre-to-main separation, normalized
  double soi_fuel = 0.0;  // start of injection, normalized
  double doi_h2 = 0.0;    // hydrogen duration, normalized

  EngineInputs clamped() const {
    auto c = [](double v) { return std::clamp(v, 0.0, 1.0); };
    return {c(doi_fuel), c(p2m), c(soi_fuel), c(doi_h2)};
  }

  double operator[](int i) const {
    switch (i) {
      case 0: return doi_fuel;
      case 1: return p2m;
      case 2: return soi_fuel;
      default: return doi_h2;
    }
  }
};

struct EngineOutputs {
  double imep = 0.0;  // bar
  double nox = 0.0;   // ppm
  double soot = 0.0;  // mg/m3
  double mprr = 0.0;  // bar/CAD

  double operator[](int i) const {
    switch (i) {
      case 0: return imep;
      case 1: return nox;
      case 2: return soot;
      default: return mprr;
    }
  }
  double& operator[](int i) {
    switch (i) {
      case 0: return imep;
      case 1: return nox;
      case 2: return soot;
      default: return mprr;
    }
  }
};

struct EngineState {
  double x_d = 0.0;  // filtered diesel charge, in [0,1]
  double x_h = 0.0;  // filtered hydrogen charge, in [0,1]
};

struct EngineNoise {
  // per-channel stds in the imep, nox, soot, mprr order; defaults are 1% of
  // the nominal channel ranges
  std::array<double, 4> std{0.17, 5.0, 0.4, 0.1};
  bool enabled = true;
};

// Synthetic dual-fuel engine surrogate. One call is one combustion cycle.
// Pure function of (state, u) when noise is disabled.
inline EngineOutputs engine_step(EngineState& state, const EngineInputs& u_raw,
                                 Rng* noise_rng = nullptr,
                                 const EngineNoise& noise = {}) {
  const EngineInputs u = u_raw.clamped();
  state.x_d = 0.7 * state.x_d + 0.3 * u.doi_fuel;
  state.x_h = 0.7 * state.x_h + 0.3 * u.doi_h2;
  const double xd = state.x_d, xh = state.x_h;

  EngineOutputs y;
  y.imep = 2.0 + 6.0 * xd + 7.0 * xh + 1.5 * xd * xh +
           0.5 * std::sin(std::numbers::pi * u.soi_fuel) + 0.2 * u.p2m;
  y.mprr = 1.0 + 3.0 * xh * xh * (1.0 + xd) + 2.0 * (1.0 - u.soi_fuel) * xh +
           0.5 * xd;
  y.nox = 100.0 * (xd + 1.8 * xh) * (1.0 + 0.5 * (1.0 - u.soi_fuel));
  y.soot = std::max(0.0, 30.0 * xd * xd * (1.0 + 0.8 * u.soi_fuel) *
                             (1.0 - 0.5 * xh));

  if (noise_rng && noise.enabled) {
    for (int c = 0; c < 4; ++c) y[c] += noise_rng->normal(0.0, noise.std[c]);
    y.nox = std::max(0.0, y.nox);
    y.soot = std::max(0.0, y.soot);
  }
  return y;
}

// ---------------------------------------------------------------------------
// Multi-level pseudo-random excitation

struct PrbsConfig {
  int hold_min = 3;
  int hold_max = 10;
  std::vector<double> levels{0.0, 0.25, 0.5, 0.75, 1.0};
  int total_cycles = 20000;
  std::uint64_t seed = 42;
};

inline std::vector<EngineInputs> generate_prbs(const PrbsConfig& cfg) {
  if (cfg.total_cycles <= 0)
    throw std::invalid_argument("generate_prbs: total cycles must be > 0");
  if (cfg.hold_min < 1 || cfg.hold_max < cfg.hold_min)
    throw std::invalid_argument("generate_prbs: bad hold-length range");
  if (cfg.levels.empty())
    throw std::invalid_argument("generate_prbs: empty level set");

  std::vector<EngineInputs> seq(cfg.total_cycles);
  Rng master(cfg.seed);
  for (int ch = 0; ch < kNumActuators; ++ch) {
    Rng rng(master.next_seed());
    int t = 0;
    while (t < cfg.total_cycles) {
      const double level =
          cfg.levels[std::size_t(rng.integer(0, std::int64_t(cfg.levels.size()) - 1))];
      const int hold = int(rng.integer(cfg.hold_min, cfg.hold_max));
      for (int k = 0; k < hold && t < cfg.total_cycles; ++k, ++t) {
        auto& u = seq[std::size_t(t)];
        switch (ch) {
          case 0: u.doi_fuel = level; break;
          case 1: u.p2m = level; break;
          case 2: u.soi_fuel = level; break;
          case 3: u.doi_h2 = level; break;
        }
      }
    }
  }
  return seq;
}

// ---------------------------------------------------------------------------
// Dataset assembly

enum class Split { Train, Val, Test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    default: return "test";
  }
}

// One combustion cycle: actuations plus the previous measured load as model
// input features, the four measured outputs as targets.
struct EngineSample {
  EngineInputs u;
  double imep_prev = 0.0;
  EngineOutputs y;
  Split split = Split::Train;
};

struct Dataset {
  std::vector<EngineSample> samples;
  std::size_t train_size = 0, val_size = 0, test_size = 0;

  std::size_t size() const { return samples.size(); }
  const EngineSample* train_begin() const { return samples.data(); }
  const EngineSample* val_begin() const { return samples.data() + train_size; }
  const EngineSample* test_begin() const {
    return samples.data() + train_size + val_size;
  }
};

inline constexpr double kIdleImep = 2.0;  // imep_prev feature before cycle 0

struct SplitFractions {
  double train = 0.80, val = 0.15, test = 0.05;
};

inline Dataset collect_dataset(int length, const PrbsConfig& prbs,
                               const SplitFractions& split = {},
                               const EngineNoise& noise = {},
                               std::uint64_t noise_seed = 1) {
  if (length < 100)
    throw std::invalid_argument("collect_dataset: length must be >= 100");
  if (std::abs(split.train + split.val + split.test - 1.0) > 1e-9)
    throw std::invalid_argument("collect_dataset: split fractions must sum to 1");

  PrbsConfig pcfg = prbs;
  pcfg.total_cycles = length;
  const auto excitation = generate_prbs(pcfg);

  Dataset ds;
  ds.train_size = std::size_t(std::llround(split.train * length));
  ds.val_size = std::size_t(std::llround(split.val * length));
  ds.test_size = std::size_t(length) - ds.train_size - ds.val_size;

  Rng noise_rng(noise_seed);
  EngineState state;
  double imep_prev = kIdleImep;
  ds.samples.reserve(std::size_t(length));
  for (int t = 0; t < length; ++t) {
    EngineSample s;
    s.u = excitation[std::size_t(t)];
    s.imep_prev = imep_prev;
    s.y = engine_step(state, s.u, noise.enabled ? &noise_rng : nullptr, noise);
    s.split = std::size_t(t) < ds.train_size ? Split::Train
              : std::size_t(t) < ds.train_size + ds.val_size ? Split::Val
                                                             : Split::Test;
    imep_prev = s.y.imep;
    ds.samples.push_back(s);
  }
  return ds;
}

// ---------------------------------------------------------------------------
// CSV round trip (schema: cycle,doi_fuel,p2m,soi_fuel,doi_h2,imep_prev,
// imep,nox,soot,mprr,split)

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void save_dataset_csv(const Dataset& ds, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << "cycle,doi_fuel,p2m,soi_fuel,doi_h2,imep_prev,imep,nox,soot,mprr,split\n";
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    f << i << ',' << format_double(s.u.doi_fuel) << ','
      << format_double(s.u.p2m) << ',' << format_double(s.u.soi_fuel) << ','
      << format_double(s.u.doi_h2) << ',' << format_double(s.imep_prev) << ','
      << format_double(s.y.imep) << ',' << format_double(s.y.nox) << ','
      << format_double(s.y.soot) << ',' << format_double(s.y.mprr) << ','
      << split_name(s.split) << '\n';
  }
}

inline Dataset load_dataset_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open for read: " + path);
  std::string line;
  if (!std::getline(f, line))
    throw std::runtime_error("empty dataset file: " + path);
  Dataset ds;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 11)
      throw std::runtime_error("bad dataset row: " + line);
    EngineSample s;
    s.u.doi_fuel = std::stod(fields[1]);
    s.u.p2m = std::stod(fields[2]);
    s.u.soi_fuel = std::stod(fields[3]);
    s.u.doi_h2 = std::stod(fields[4]);
    s.imep_prev = std::stod(fields[5]);
    s.y.imep = std::stod(fields[6]);
    s.y.nox = std::stod(fields[7]);
    s.y.soot = std::stod(fields[8]);
    s.y.mprr = std::stod(fields[9]);
    s.split = fields[10] == "train" ? Split::Train
              : fields[10] == "val" ? Split::Val
                                    : Split::Test;
    ds.samples.push_back(s);
    switch (s.split) {
      case Split::Train: ++ds.train_size; break;
      case Split::Val: ++ds.val_size; break;
      case Split::Test: ++ds.test_size; break;
    }
  }
  return ds;
}

}  // namespace h2df
