#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "h2df/envrl.hpp"
#include "h2df/policy_io.hpp"
#include "h2df/wire.hpp"

namespace h2df {

// ---------------------------------------------------------------------------
// Cascaded policy selection

struct CascadeBin {
  double lo = 0.0;   // bar, inclusive
  double hi = 0.0;   // bar, inclusive
  int policy = 0;
};

struct CascadeConfig {
  std::vector<CascadeBin> bins{{0.0, 7.5, 0}, {7.5, 17.0, 1}};
  double hysteresis = 0.5;  // bar

  void validate() const {
    if (bins.empty()) throw std::invalid_argument("cascade: no bins");
    if (hysteresis < 0.0)
      throw std::invalid_argument("cascade: hysteresis must be >= 0");
    for (const auto& b : bins)
      if (!(b.lo <= b.hi)) throw std::invalid_argument("cascade: bad interval");
  }
};

// Picks the policy whose interval contains the reference; leaves the current
// policy only when the reference exits its interval by more than the
// hysteresis width. Out-of-range references fall back to the nearest bin.
inline int cascade_select(double ref_imep, const CascadeConfig& cfg,
                          int current, bool* out_of_range = nullptr) {
  cfg.validate();
  if (out_of_range) *out_of_range = false;
  for (const auto& b : cfg.bins) {
    if (b.policy == current &&
        ref_imep >= b.lo - cfg.hysteresis &&
        ref_imep <= b.hi + cfg.hysteresis)
      return current;
  }
  for (const auto& b : cfg.bins)
    if (ref_imep >= b.lo && ref_imep <= b.hi) return b.policy;
  // nearest interval fallback
  double best_dist = std::numeric_limits<double>::infinity();
  int best = cfg.bins.front().policy;
  for (const auto& b : cfg.bins) {
    const double d = ref_imep < b.lo ? b.lo - ref_imep : ref_imep - b.hi;
    if (d < best_dist) {
      best_dist = d;
      best = b.policy;
    }
  }
  if (out_of_range) *out_of_range = true;
  return best;
}

// ---------------------------------------------------------------------------
// Policy runtime: observer + observation assembly + cascaded evaluation.
// Shared by the UDP server and the in-process equivalence path so both
// compute bit-identical actions from the same packet stream.

class PolicyRuntime {
 public:
  PolicyRuntime(std::vector<ActorNetwork> policies, CascadeConfig cascade,
                PlantModel observer_plant, bool augmented_observation = true)
      : policies_(std::move(policies)), cascade_(std::move(cascade)),
        plant_(std::move(observer_plant)),
        augmented_(augmented_observation) {
    if (policies_.empty())
      throw std::invalid_argument("PolicyRuntime: need at least one policy");
    cascade_.validate();
    reset();
  }

  void reset() {
    hidden_ = plant_.net.initial_hidden();
    prev_ = EngineOutputs{kIdleImep, 0.0, 0.0, 1.0};
    have_prev_packet_ = false;
    prev_ref_ = 0.0;
    current_policy_ = cascade_.bins.front().policy;
    last_action_ = {0.0f, 0.0f, 0.0f, 0.0f};
  }

  struct Decision {
    std::array<float, 4> action;  // plant space, wire precision
    std::uint8_t policy_id;
  };

  // Evaluates the policy for one request. When `hold` is set the last action
  // is re-issued instead, but observer and history still advance.
  Decision handle(const StatePacket& pkt, bool hold = false) {
    const EngineOutputs meas{double(pkt.imep), double(pkt.nox),
                             double(pkt.soot), double(pkt.mprr)};
    const double ref = double(pkt.ref_imep);
    if (!have_prev_packet_) prev_ref_ = ref;

    const Vec obs = assemble_observation(meas, ref);
    bool warn = false;
    current_policy_ = cascade_select(ref, cascade_, current_policy_, &warn);
    const ActorNetwork& policy =
        policies_[std::size_t(current_policy_) % policies_.size()];

    std::array<float, 4> action;
    if (hold) {
      action = last_action_;
    } else {
      const std::array<double, 4> a = policy.act(obs);
      for (int i = 0; i < 4; ++i)
        action[std::size_t(i)] = float(
            std::clamp((a[std::size_t(i)] + 1.0) * 0.5, 0.0, 1.0));
    }

    // advance the observer with the applied action and the measured load
    const EngineInputs u{double(action[0]), double(action[1]),
                         double(action[2]), double(action[3])};
    plant_step(plant_, hidden_, u, meas.imep);

    last_action_ = action;
    prev_ = meas;
    prev_ref_ = ref;
    have_prev_packet_ = true;
    return {action, std::uint8_t(current_policy_)};
  }

  const Vec& observer_hidden() const { return hidden_[0]; }
  const std::array<float, 4>& last_action() const { return last_action_; }

 private:
  Vec assemble_observation(const EngineOutputs& meas, double ref) const {
    Vec o;
    o.reserve(std::size_t(kObservationSize));
    o.push_back(obs_norm_.imep.normalize(meas.imep));
    o.push_back(obs_norm_.nox.normalize(meas.nox));
    o.push_back(obs_norm_.mprr.normalize(meas.mprr));
    const EngineOutputs& older = have_prev_packet_ ? prev_ : meas;
    o.push_back((meas.imep - older.imep) / obs_norm_.delta_imep_scale);
    o.push_back((meas.nox - older.nox) / obs_norm_.delta_nox_scale);
    o.push_back(obs_norm_.imep.normalize(ref));
    o.push_back(obs_norm_.imep.normalize(prev_ref_));
    o.push_back((prev_ref_ - meas.imep) / obs_norm_.err_scale);
    if (augmented_) {
      const Vec& h = hidden_[0];
      o.insert(o.end(), h.begin(), h.end());
    }
    return o;
  }

  std::vector<ActorNetwork> policies_;
  CascadeConfig cascade_;
  PlantModel plant_;
  ObservationNorm obs_norm_;
  bool augmented_;

  Network::Hidden hidden_;
  EngineOutputs prev_;
  bool have_prev_packet_ = false;
  double prev_ref_ = 0.0;
  std::array<float, 4> last_action_{};
  int current_policy_ = 0;
};

// ---------------------------------------------------------------------------
// UDP control service

struct ServerStats {
  long replies = 0;
  long drops = 0;       // malformed + stale/duplicate
  long deadline_misses = 0;
};

class UdpPolicyServer {
 public:
  UdpPolicyServer(const std::string& bind_addr, std::uint16_t port,
                  PolicyRuntime runtime, int deadline_ms,
                  const std::string& metrics_log = "")
      : runtime_(std::move(runtime)), deadline_ms_(deadline_ms) {
    fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd_ < 0) throw std::runtime_error("udp server: socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, bind_addr.c_str(), &addr.sin_addr) != 1)
      throw std::runtime_error("udp server: bad bind address " + bind_addr);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
      ::close(fd_);
      throw std::runtime_error("udp server: bind failed");
    }
    timeval tv{};
    tv.tv_sec = deadline_ms_ / 1000;
    tv.tv_usec = (deadline_ms_ % 1000) * 1000;
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    if (!metrics_log.empty()) {
      metrics_.open(metrics_log);
      metrics_ << "ts,seq,policy_id,latency_us,drops\n";
    }
  }

  ~UdpPolicyServer() {
    if (fd_ >= 0) ::close(fd_);
  }

  UdpPolicyServer(const UdpPolicyServer&) = delete;
  UdpPolicyServer& operator=(const UdpPolicyServer&) = delete;

  std::uint16_t port() const {
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    return ntohs(addr.sin_port);
  }

  const ServerStats& stats() const { return stats_; }

  // Strict sequential control loop: one in-flight request at a time.
  void run(const std::atomic<bool>& stop) {
    std::uint8_t buf[256];
    bool hold_pending = false;
    while (!stop.load(std::memory_order_relaxed)) {
      sockaddr_in peer{};
      socklen_t peer_len = sizeof peer;
      const ssize_t n = ::recvfrom(fd_, buf, sizeof buf, 0,
                                   reinterpret_cast<sockaddr*>(&peer),
                                   &peer_len);
      if (n < 0) {
        if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR) {
          if (have_seq_) {
            hold_pending = true;
            ++stats_.deadline_misses;
          }
          continue;
        }
        throw std::runtime_error("udp server: recvfrom failed");
      }

      const auto t0 = std::chrono::steady_clock::now();
      const auto pkt = decode_state(buf, std::size_t(n));
      if (!pkt) {
        ++stats_.drops;
        continue;
      }
      if (have_seq_ && pkt->seq <= last_seq_) {
        ++stats_.drops;
        continue;
      }
      last_seq_ = pkt->seq;
      have_seq_ = true;

      const auto decision = runtime_.handle(*pkt, hold_pending);
      ActionPacket reply;
      reply.seq = pkt->seq;
      reply.action = decision.action;
      reply.policy_id = decision.policy_id;
      reply.status =
          hold_pending ? ActionStatus::HeldLastAction : ActionStatus::Ok;
      hold_pending = false;

      const auto bytes = encode(reply);
      ::sendto(fd_, bytes.data(), bytes.size(), 0,
               reinterpret_cast<sockaddr*>(&peer), peer_len);
      ++stats_.replies;

      if (metrics_.is_open()) {
        const double latency_us =
            std::chrono::duration<double, std::micro>(
                std::chrono::steady_clock::now() - t0)
                .count();
        metrics_ << std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::system_clock::now().time_since_epoch())
                        .count()
                 << ',' << reply.seq << ',' << int(reply.policy_id) << ','
                 << format_double(latency_us) << ',' << stats_.drops << '\n';
        metrics_.flush();
      }
    }
  }

 private:
  PolicyRuntime runtime_;
  int deadline_ms_;
  int fd_ = -1;
  std::ofstream metrics_;
  std::uint32_t last_seq_ = 0;
  bool have_seq_ = false;
  ServerStats stats_;
};

// ---------------------------------------------------------------------------
// Engine-side loopback client

struct ClosedLoopResult {
  std::vector<TraceRow> trace;
  long drops = 0;  // requests that timed out after retries
  bool completed = false;
};

// Drives the virtual engine against a policy server: one request per cycle,
// returned actions applied to the surrogate.
inline ClosedLoopResult sim_engine_client(
    const std::string& server_addr, std::uint16_t port,
    const std::vector<double>& reference, std::uint64_t surrogate_seed,
    const EngineNoise& noise = {}, int timeout_ms = 100, int retries = 3,
    const RewardConfig& reward_cfg = {}, const SafePolytope& poly = {}) {
  const int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
  if (fd < 0) throw std::runtime_error("sim client: socket() failed");
  sockaddr_in server{};
  server.sin_family = AF_INET;
  server.sin_port = htons(port);
  if (::inet_pton(AF_INET, server_addr.c_str(), &server.sin_addr) != 1) {
    ::close(fd);
    throw std::runtime_error("sim client: bad server address");
  }
  timeval tv{};
  tv.tv_sec = timeout_ms / 1000;
  tv.tv_usec = (timeout_ms % 1000) * 1000;
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);

  ClosedLoopResult result;
  Rng noise_rng(surrogate_seed);
  EngineState state;
  EngineOutputs meas{kIdleImep, 0.0, 0.0, 1.0};

  for (std::size_t t = 0; t < reference.size(); ++t) {
    StatePacket pkt;
    pkt.seq = std::uint32_t(t + 1);
    pkt.imep = float(meas.imep);
    pkt.nox = float(meas.nox);
    pkt.soot = float(meas.soot);
    pkt.mprr = float(meas.mprr);
    pkt.ref_imep = float(reference[t]);
    const auto req = encode(pkt);

    std::optional<ActionPacket> reply;
    for (int attempt = 0; attempt <= retries && !reply; ++attempt) {
      if (attempt > 0) ++result.drops;
      ::sendto(fd, req.data(), req.size(), 0,
               reinterpret_cast<sockaddr*>(&server), sizeof server);
      std::uint8_t buf[256];
      const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
      if (n < 0) continue;
      auto a = decode_action(buf, std::size_t(n));
      if (a && a->seq == pkt.seq) reply = a;
    }
    if (!reply) {
      ::close(fd);
      return result;  // partial trace
    }

    const EngineInputs u{double(reply->action[0]), double(reply->action[1]),
                         double(reply->action[2]), double(reply->action[3])};
    meas = engine_step(state, u, noise.enabled ? &noise_rng : nullptr, noise);
    // wire precision on the next request's measurements
    for (int c = 0; c < 4; ++c) meas[c] = double(float(meas[c]));

    RewardBreakdown breakdown;
    const double reward = compute_reward(
        meas, reference[t],
        {u.doi_fuel, u.p2m, u.soi_fuel, u.doi_h2}, reward_cfg, poly,
        &breakdown);
    result.trace.push_back({int(t), reference[t], meas,
                            {u.doi_fuel, u.p2m, u.soi_fuel, u.doi_h2}, reward,
                            breakdown});
  }
  ::close(fd);
  result.completed = true;
  return result;
}

// In-process twin of the closed loop above: same surrogate stream, same wire
// rounding, but the runtime invoked directly instead of over UDP.
inline ClosedLoopResult run_closed_loop_inprocess(
    PolicyRuntime& runtime, const std::vector<double>& reference,
    std::uint64_t surrogate_seed, const EngineNoise& noise = {},
    const RewardConfig& reward_cfg = {}, const SafePolytope& poly = {}) {
  ClosedLoopResult result;
  Rng noise_rng(surrogate_seed);
  EngineState state;
  EngineOutputs meas{kIdleImep, 0.0, 0.0, 1.0};

  for (std::size_t t = 0; t < reference.size(); ++t) {
    StatePacket pkt;
    pkt.seq = std::uint32_t(t + 1);
    pkt.imep = float(meas.imep);
    pkt.nox = float(meas.nox);
    pkt.soot = float(meas.soot);
    pkt.mprr = float(meas.mprr);
    pkt.ref_imep = float(reference[t]);

    const auto decision = runtime.handle(pkt);
    const EngineInputs u{double(decision.action[0]), double(decision.action[1]),
                         double(decision.action[2]), double(decision.action[3])};
    meas = engine_step(state, u, noise.enabled ? &noise_rng : nullptr, noise);
    for (int c = 0; c < 4; ++c) meas[c] = double(float(meas[c]));

    RewardBreakdown breakdown;
    const double reward = compute_reward(
        meas, reference[t],
        {u.doi_fuel, u.p2m, u.soi_fuel, u.doi_h2}, reward_cfg, poly,
        &breakdown);
    result.trace.push_back({int(t), reference[t], meas,
                            {u.doi_fuel, u.p2m, u.soi_fuel, u.doi_h2}, reward,
                            breakdown});
  }
  result.completed = true;
  return result;
}

// ---------------------------------------------------------------------------
// Latency benchmark: decode -> observer step -> policy evaluate -> encode

struct LatencyReport {
  double median_us = 0.0;
  double p99_us = 0.0;
  double max_us = 0.0;
  std::vector<double> samples_us;
};

inline LatencyReport benchmark_latency(PolicyRuntime& runtime, int iterations) {
  if (iterations < 1000)
    throw std::invalid_argument("benchmark_latency: need >= 1000 iterations");
  LatencyReport report;
  report.samples_us.reserve(std::size_t(iterations));
  Rng rng(123);
  for (int i = 0; i < iterations; ++i) {
    StatePacket pkt;
    pkt.seq = std::uint32_t(i + 1);
    pkt.imep = float(rng.uniform(2.0, 14.0));
    pkt.nox = float(rng.uniform(0.0, 400.0));
    pkt.soot = float(rng.uniform(0.0, 30.0));
    pkt.mprr = float(rng.uniform(0.5, 7.0));
    pkt.ref_imep = float(rng.uniform(3.0, 12.0));
    const auto bytes = encode(pkt);

    const auto t0 = std::chrono::steady_clock::now();
    const auto decoded = decode_state(bytes.data(), bytes.size());
    const auto decision = runtime.handle(*decoded);
    ActionPacket reply;
    reply.seq = decoded->seq;
    reply.action = decision.action;
    reply.policy_id = decision.policy_id;
    const auto out = encode(reply);
    const auto t1 = std::chrono::steady_clock::now();
    // keep the encode from being optimized out
    if (out[0] == 0xff) throw std::logic_error("unreachable");

    report.samples_us.push_back(
        std::chrono::duration<double, std::micro>(t1 - t0).count());
  }
  std::vector<double> sorted = report.samples_us;
  std::sort(sorted.begin(), sorted.end());
  report.median_us = sorted[sorted.size() / 2];
  report.p99_us = sorted[std::size_t(0.99 * double(sorted.size()))];
  report.max_us = sorted.back();
  return report;
}

inline void save_latency_csv(const LatencyReport& r, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << "stat,value_us\n";
  f << "median," << format_double(r.median_us) << '\n';
  f << "p99," << format_double(r.p99_us) << '\n';
  f << "max," << format_double(r.max_us) << '\n';
}

}  // namespace h2df
