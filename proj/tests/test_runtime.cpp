#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <thread>

#include "h2df/evaluate.hpp"
#include "h2df/runtime.hpp"

using namespace h2df;

TEST_CASE("wire packets have fixed sizes and round trip exactly") {
  StatePacket s;
  s.seq = 42;
  s.imep = 7.25f;
  s.nox = 123.5f;
  s.soot = 3.75f;
  s.mprr = 4.5f;
  s.ref_imep = 8.0f;
  const auto sb = encode(s);
  CHECK(sb.size() == 32);
  const auto s2 = decode_state(sb.data(), sb.size());
  REQUIRE(s2.has_value());
  CHECK(s2->seq == 42);
  CHECK(s2->imep == 7.25f);
  CHECK(s2->nox == 123.5f);
  CHECK(s2->soot == 3.75f);
  CHECK(s2->mprr == 4.5f);
  CHECK(s2->ref_imep == 8.0f);

  ActionPacket a;
  a.seq = 42;
  a.action = {0.125f, 0.5f, 0.75f, 1.0f};
  a.policy_id = 1;
  a.status = ActionStatus::HeldLastAction;
  const auto ab = encode(a);
  CHECK(ab.size() == 36);
  const auto a2 = decode_action(ab.data(), ab.size());
  REQUIRE(a2.has_value());
  CHECK(a2->seq == 42);
  for (int i = 0; i < 4; ++i) CHECK(a2->action[std::size_t(i)] == a.action[std::size_t(i)]);
  CHECK(a2->policy_id == 1);
  CHECK(a2->status == ActionStatus::HeldLastAction);
}

TEST_CASE("wire layout is little-endian with the documented magic") {
  StatePacket s;
  s.seq = 0x01020304;
  const auto b = encode(s);
  // magic 0x48324446 little-endian
  CHECK(b[0] == 0x46);
  CHECK(b[1] == 0x44);
  CHECK(b[2] == 0x32);
  CHECK(b[3] == 0x48);
  CHECK(b[8] == 0x04);
  CHECK(b[11] == 0x01);
}

TEST_CASE("malformed packets are rejected") {
  StatePacket s;
  auto b = encode(s);
  CHECK_FALSE(decode_state(b.data(), b.size() - 1).has_value());
  b[0] ^= 0xff;
  CHECK_FALSE(decode_state(b.data(), b.size()).has_value());
  // a state packet is not an action packet
  const auto sb = encode(StatePacket{});
  CHECK_FALSE(decode_action(sb.data(), sb.size()).has_value());
}

TEST_CASE("cascade selection switches exactly twice over an up-down sweep") {
  CascadeConfig cfg;  // [0,7.5] -> 0, [7.5,17] -> 1, hysteresis 0.5
  int current = 0;
  int switches = 0;
  auto track = [&](double ref) {
    const int next = cascade_select(ref, cfg, current);
    if (next != current) ++switches;
    current = next;
  };
  for (double ref = 3.0; ref <= 12.0; ref += 0.1) track(ref);
  for (double ref = 12.0; ref >= 3.0; ref -= 0.1) track(ref);
  CHECK(switches == 2);
  CHECK(current == 0);
}

TEST_CASE("cascade hysteresis holds the current policy near the boundary") {
  CascadeConfig cfg;
  // inside the stay-band above the bin edge: no switch
  CHECK(cascade_select(7.9, cfg, 0) == 0);
  // beyond the band: switch
  CHECK(cascade_select(8.1, cfg, 0) == 1);
  // symmetric on the way down
  CHECK(cascade_select(7.1, cfg, 1) == 1);
  CHECK(cascade_select(6.9, cfg, 1) == 0);
}

TEST_CASE("out-of-range references fall back to the nearest bin") {
  CascadeConfig cfg;
  cfg.bins = {{3.0, 7.0, 0}, {8.0, 12.0, 1}};
  cfg.hysteresis = 0.0;
  bool oor = false;
  CHECK(cascade_select(20.0, cfg, 0, &oor) == 1);
  CHECK(oor);
  CHECK(cascade_select(1.0, cfg, 1, &oor) == 0);
  CHECK(oor);
  CHECK(cascade_select(7.5, cfg, 0, &oor) == 0);  // nearest in the gap
}

TEST_CASE("policy artifact round trip preserves actions") {
  Rng rng(31);
  ActorNetwork actor = make_actor(16, rng);
  const auto path = (std::filesystem::temp_directory_path() /
                     "h2df_policy_test.rlpa")
                        .string();
  export_policy(path, actor, 31, "td3");

  json meta;
  const ActorNetwork back = load_policy(path, &meta);
  CHECK(meta.at("algo") == "td3");
  CHECK(meta.at("observation_size") == 16);
  Vec o(16);
  for (double& v : o) v = rng.uniform(-1.0, 1.0);
  const auto a1 = actor.act(o);
  const auto a2 = back.act(o);
  for (int i = 0; i < 4; ++i) CHECK(a1[std::size_t(i)] == a2[std::size_t(i)]);
  for (int i = 0; i < 4; ++i)
    CHECK(back.log_std[std::size_t(i)] == actor.log_std[std::size_t(i)]);
  std::remove(path.c_str());
}

namespace {

PolicyRuntime make_runtime(std::uint64_t seed = 31) {
  Rng rng(seed);
  std::vector<ActorNetwork> policies;
  policies.push_back(make_actor(16, rng));
  policies.push_back(make_actor(16, rng));
  return PolicyRuntime(std::move(policies), CascadeConfig{},
                       make_plant_model(21), true);
}

}  // namespace

TEST_CASE("udp loopback closed loop matches in-process evaluation") {
  EpisodeConfig ep;
  Rng ref_rng(55);
  const auto reference = generate_reference(ep, ref_rng, 100);

  UdpPolicyServer server("127.0.0.1", 0, make_runtime(), 1000);
  const std::uint16_t port = server.port();
  std::atomic<bool> stop{false};
  std::thread srv([&] { server.run(stop); });

  const auto over_udp = sim_engine_client("127.0.0.1", port, reference, 77);
  stop.store(true);
  srv.join();

  PolicyRuntime twin = make_runtime();
  const auto in_proc = run_closed_loop_inprocess(twin, reference, 77);

  REQUIRE(over_udp.completed);
  CHECK(over_udp.drops == 0);
  REQUIRE(over_udp.trace.size() == reference.size());
  REQUIRE(in_proc.trace.size() == reference.size());
  for (std::size_t t = 0; t < reference.size(); ++t) {
    for (int i = 0; i < 4; ++i) {
      const double d = std::abs(over_udp.trace[t].action[std::size_t(i)] -
                                in_proc.trace[t].action[std::size_t(i)]);
      CHECK(d <= 1e-4);
    }
    CHECK(over_udp.trace[t].y.imep == in_proc.trace[t].y.imep);
  }
  CHECK(server.stats().replies == long(reference.size()));
}

TEST_CASE("stale and duplicate sequence numbers are dropped") {
  UdpPolicyServer server("127.0.0.1", 0, make_runtime(), 200);
  const std::uint16_t port = server.port();
  std::atomic<bool> stop{false};
  std::thread srv([&] { server.run(stop); });

  const int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
  REQUIRE(fd >= 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
  timeval tv{0, 100000};
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);

  auto send_seq = [&](std::uint32_t seq) {
    StatePacket s;
    s.seq = seq;
    s.imep = 5.0f;
    s.ref_imep = 6.0f;
    const auto b = encode(s);
    ::sendto(fd, b.data(), b.size(), 0, reinterpret_cast<sockaddr*>(&addr),
             sizeof addr);
    std::uint8_t buf[64];
    return ::recv(fd, buf, sizeof buf, 0);
  };

  CHECK(send_seq(5) == ssize_t(kActionPacketSize));
  CHECK(send_seq(5) < 0);  // duplicate: dropped, no reply
  CHECK(send_seq(3) < 0);  // stale: dropped
  CHECK(send_seq(6) == ssize_t(kActionPacketSize));
  ::close(fd);

  stop.store(true);
  srv.join();
  CHECK(server.stats().drops == 2);
}

TEST_CASE("latency benchmark reports ordered statistics") {
  PolicyRuntime rt = make_runtime();
  const auto report = benchmark_latency(rt, 2000);
  CHECK(report.samples_us.size() == 2000);
  CHECK(report.median_us > 0.0);
  CHECK(report.median_us <= report.p99_us);
  CHECK(report.p99_us <= report.max_us);
  PolicyRuntime rt2 = make_runtime();
  CHECK_THROWS_AS(benchmark_latency(rt2, 10), std::invalid_argument);
}
