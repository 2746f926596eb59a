#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <optional>

namespace h2df {

inline constexpr std::uint32_t kWireMagic = 0x48324446;  // "H2DF" tag
inline constexpr std::uint16_t kWireVersion = 1;
inline constexpr std::uint16_t kTypeState = 1;
inline constexpr std::uint16_t kTypeAction = 2;
inline constexpr std::size_t kStatePacketSize = 32;
inline constexpr std::size_t kActionPacketSize = 36;

enum class ActionStatus : std::uint8_t { Ok = 0, HeldLastAction = 1, Fault = 2 };

// Engine-side request: measured outputs plus the current load reference.
struct StatePacket {
  std::uint32_t seq = 0;
  float imep = 0.0f;
  float nox = 0.0f;
  float soot = 0.0f;
  float mprr = 0.0f;
  float ref_imep = 0.0f;
};

// Controller-side reply: actions in plant space.
struct ActionPacket {
  std::uint32_t seq = 0;
  std::array<float, 4> action{};
  std::uint8_t policy_id = 0;
  ActionStatus status = ActionStatus::Ok;
};

namespace wire {

inline void put_u16(std::uint8_t* p, std::uint16_t v) {
  p[0] = std::uint8_t(v & 0xff);
  p[1] = std::uint8_t(v >> 8);
}

inline void put_u32(std::uint8_t* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = std::uint8_t((v >> (8 * i)) & 0xff);
}

inline std::uint16_t get_u16(const std::uint8_t* p) {
  return std::uint16_t(p[0] | (p[1] << 8));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
         (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

inline void put_f32(std::uint8_t* p, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(p, bits);
}

inline float get_f32(const std::uint8_t* p) {
  const std::uint32_t bits = get_u32(p);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace wire

inline std::array<std::uint8_t, kStatePacketSize> encode(const StatePacket& s) {
  std::array<std::uint8_t, kStatePacketSize> b{};
  wire::put_u32(&b[0], kWireMagic);
  wire::put_u16(&b[4], kWireVersion);
  wire::put_u16(&b[6], kTypeState);
  wire::put_u32(&b[8], s.seq);
  wire::put_f32(&b[12], s.imep);
  wire::put_f32(&b[16], s.nox);
  wire::put_f32(&b[20], s.soot);
  wire::put_f32(&b[24], s.mprr);
  wire::put_f32(&b[28], s.ref_imep);
  return b;
}

inline std::array<std::uint8_t, kActionPacketSize> encode(const ActionPacket& a) {
  std::array<std::uint8_t, kActionPacketSize> b{};
  wire::put_u32(&b[0], kWireMagic);
  wire::put_u16(&b[4], kWireVersion);
  wire::put_u16(&b[6], kTypeAction);
  wire::put_u32(&b[8], a.seq);
  for (int i = 0; i < 4; ++i)
    wire::put_f32(&b[12 + 4 * i], a.action[std::size_t(i)]);
  b[28] = a.policy_id;
  b[29] = std::uint8_t(a.status);
  // b[30], b[31] are pad
  return b;
}

inline std::optional<StatePacket> decode_state(const std::uint8_t* data,
                                               std::size_t len) {
  if (len != kStatePacketSize) return std::nullopt;
  if (wire::get_u32(data) != kWireMagic) return std::nullopt;
  if (wire::get_u16(data + 4) != kWireVersion) return std::nullopt;
  if (wire::get_u16(data + 6) != kTypeState) return std::nullopt;
  StatePacket s;
  s.seq = wire::get_u32(data + 8);
  s.imep = wire::get_f32(data + 12);
  s.nox = wire::get_f32(data + 16);
  s.soot = wire::get_f32(data + 20);
  s.mprr = wire::get_f32(data + 24);
  s.ref_imep = wire::get_f32(data + 28);
  return s;
}

inline std::optional<ActionPacket> decode_action(const std::uint8_t* data,
                                                 std::size_t len) {
  if (len != kActionPacketSize) return std::nullopt;
  if (wire::get_u32(data) != kWireMagic) return std::nullopt;
  if (wire::get_u16(data + 4) != kWireVersion) return std::nullopt;
  if (wire::get_u16(data + 6) != kTypeAction) return std::nullopt;
  ActionPacket a;
  a.seq = wire::get_u32(data + 8);
  for (int i = 0; i < 4; ++i)
    a.action[std::size_t(i)] = wire::get_f32(data + 12 + 4 * i);
  a.policy_id = data[28];
  a.status = ActionStatus(data[29]);
  return a;
}

}  // namespace h2df
