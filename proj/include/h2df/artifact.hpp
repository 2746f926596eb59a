#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <openssl/sha.h>

#include <json.hpp>

#include "h2df/plant.hpp"

namespace h2df {

using nlohmann::json;

inline constexpr char kArtifactMagic[4] = {'R', 'L', 'P', 'A'};
inline constexpr std::uint16_t kArtifactVersion = 1;
inline constexpr std::uint8_t kKindPolicy = 1;
inline constexpr std::uint8_t kKindPlant = 2;

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(std::uint8_t(v & 0xff));
  b.push_back(std::uint8_t(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(std::uint8_t((v >> (8 * i)) & 0xff));
}

inline std::uint16_t get_u16(const std::uint8_t* p) {
  return std::uint16_t(p[0] | (p[1] << 8));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
         (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

inline std::string sha256_hex(const std::uint8_t* data, std::size_t n) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(data, n, digest);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char c : digest) {
    out.push_back(hex[c >> 4]);
    out.push_back(hex[c & 0xf]);
  }
  return out;
}

inline void append_doubles(std::vector<std::uint8_t>& b, const double* v,
                           std::size_t n) {
  const std::size_t off = b.size();
  b.resize(off + 8 * n);
  std::memcpy(b.data() + off, v, 8 * n);  // host is little-endian IEEE-754
}

// Parameter blocks in declared layer order.
inline std::vector<std::uint8_t> parameter_bytes(const Network& net,
                                                 const Vec* log_std) {
  std::vector<std::uint8_t> bytes;
  for (const auto& l : net.layers) {
    if (auto* d = std::get_if<DenseLayer>(&l)) {
      append_doubles(bytes, d->W.data.data(), d->W.size());
      append_doubles(bytes, d->b.data(), d->b.size());
    } else {
      const auto& g = std::get<GruCell>(l);
      append_doubles(bytes, g.W_hz.data.data(), g.W_hz.size());
      append_doubles(bytes, g.W_uz.data.data(), g.W_uz.size());
      append_doubles(bytes, g.b_z.data(), g.b_z.size());
      append_doubles(bytes, g.W_hr.data.data(), g.W_hr.size());
      append_doubles(bytes, g.W_ur.data.data(), g.W_ur.size());
      append_doubles(bytes, g.b_r.data(), g.b_r.size());
      append_doubles(bytes, g.W_uh.data.data(), g.W_uh.size());
      append_doubles(bytes, g.W_hh.data.data(), g.W_hh.size());
      append_doubles(bytes, g.b_h.data(), g.b_h.size());
    }
  }
  if (log_std) append_doubles(bytes, log_std->data(), log_std->size());
  return bytes;
}

}  // namespace detail

inline json network_layout(const Network& net) {
  json layers = json::array();
  for (const auto& l : net.layers) {
    if (auto* d = std::get_if<DenseLayer>(&l)) {
      layers.push_back({{"type", "dense"},
                        {"out", d->out_size()},
                        {"in", d->in_size()},
                        {"activation", activation_name(d->activation)}});
    } else {
      const auto& g = std::get<GruCell>(l);
      layers.push_back(
          {{"type", "gru"}, {"hidden", g.hidden_size}, {"input", g.input_size}});
    }
  }
  return layers;
}

inline void save_artifact(const std::string& path, std::uint8_t kind,
                          const Network& net, json metadata,
                          const Vec* log_std = nullptr) {
  const auto params = detail::parameter_bytes(net, log_std);
  metadata["layers"] = network_layout(net);
  metadata["has_log_std"] = (log_std != nullptr);
  metadata["content_hash"] = detail::sha256_hex(params.data(), params.size());

  const std::string meta = metadata.dump();
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kArtifactMagic, kArtifactMagic + 4);
  detail::put_u16(out, kArtifactVersion);
  out.push_back(kind);
  detail::put_u32(out, std::uint32_t(meta.size()));
  out.insert(out.end(), meta.begin(), meta.end());
  out.insert(out.end(), params.begin(), params.end());

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f.write(reinterpret_cast<const char*>(out.data()),
          std::streamsize(out.size()));
}

struct LoadedArtifact {
  std::uint8_t kind = 0;
  json metadata;
  Network net;
  Vec log_std;
};

inline LoadedArtifact load_artifact(const std::string& path,
                                    std::uint8_t expected_kind = 0) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for read: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < 11 || std::memcmp(bytes.data(), kArtifactMagic, 4) != 0)
    throw std::runtime_error("artifact: bad magic in " + path);
  const std::uint16_t version = detail::get_u16(bytes.data() + 4);
  if (version != kArtifactVersion)
    throw std::runtime_error("artifact: unknown version " +
                             std::to_string(version));
  LoadedArtifact art;
  art.kind = bytes[6];
  if (expected_kind != 0 && art.kind != expected_kind)
    throw std::runtime_error("artifact: kind mismatch in " + path);
  const std::uint32_t meta_len = detail::get_u32(bytes.data() + 7);
  if (bytes.size() < 11 + meta_len)
    throw std::runtime_error("artifact: truncated metadata in " + path);
  art.metadata = json::parse(bytes.begin() + 11, bytes.begin() + 11 + meta_len);

  const std::uint8_t* params = bytes.data() + 11 + meta_len;
  const std::size_t param_bytes = bytes.size() - 11 - meta_len;
  const std::string hash = detail::sha256_hex(params, param_bytes);
  if (hash != art.metadata.at("content_hash").get<std::string>())
    throw std::runtime_error("artifact: content hash mismatch in " + path);

  std::size_t off = 0;
  auto read_block = [&](double* dst, std::size_t n) {
    if (off + 8 * n > param_bytes)
      throw std::runtime_error("artifact: parameter block overruns payload");
    std::memcpy(dst, params + off, 8 * n);
    off += 8 * n;
  };

  for (const auto& jl : art.metadata.at("layers")) {
    const std::string type = jl.at("type");
    if (type == "dense") {
      DenseLayer d(jl.at("out").get<std::size_t>(),
                   jl.at("in").get<std::size_t>(),
                   activation_from_name(jl.at("activation")));
      read_block(d.W.data.data(), d.W.size());
      read_block(d.b.data(), d.b.size());
      art.net.layers.push_back(std::move(d));
    } else if (type == "gru") {
      GruCell g(jl.at("hidden").get<std::size_t>(),
                jl.at("input").get<std::size_t>());
      read_block(g.W_hz.data.data(), g.W_hz.size());
      read_block(g.W_uz.data.data(), g.W_uz.size());
      read_block(g.b_z.data(), g.b_z.size());
      read_block(g.W_hr.data.data(), g.W_hr.size());
      read_block(g.W_ur.data.data(), g.W_ur.size());
      read_block(g.b_r.data(), g.b_r.size());
      read_block(g.W_uh.data.data(), g.W_uh.size());
      read_block(g.W_hh.data.data(), g.W_hh.size());
      read_block(g.b_h.data(), g.b_h.size());
      art.net.layers.push_back(std::move(g));
    } else {
      throw std::runtime_error("artifact: unknown layer type " + type);
    }
  }
  if (art.metadata.value("has_log_std", false)) {
    art.log_std.assign(art.net.output_size(), 0.0);
    read_block(art.log_std.data(), art.log_std.size());
  }
  if (off != param_bytes)
    throw std::runtime_error("artifact: declared shapes do not match payload");
  return art;
}

// ---------------------------------------------------------------------------
// Typed wrappers

inline void save_plant_artifact(const std::string& path, const PlantModel& m,
                                std::uint64_t training_seed) {
  json meta;
  meta["kind_name"] = "plant";
  meta["training_seed"] = training_seed;
  json in_norm = json::array(), out_norm = json::array();
  for (const auto& r : m.in_norm) in_norm.push_back({{"lo", r.lo}, {"hi", r.hi}});
  for (const auto& r : m.out_norm)
    out_norm.push_back({{"lo", r.lo}, {"hi", r.hi}});
  meta["input_norm"] = in_norm;
  meta["output_norm"] = out_norm;
  save_artifact(path, kKindPlant, m.net, std::move(meta));
}

inline PlantModel load_plant_artifact(const std::string& path) {
  LoadedArtifact art = load_artifact(path, kKindPlant);
  PlantModel m;
  m.net = std::move(art.net);
  const auto& in_norm = art.metadata.at("input_norm");
  const auto& out_norm = art.metadata.at("output_norm");
  for (std::size_t i = 0; i < m.in_norm.size(); ++i)
    m.in_norm[i] = {in_norm.at(i).at("lo"), in_norm.at(i).at("hi")};
  for (std::size_t i = 0; i < m.out_norm.size(); ++i)
    m.out_norm[i] = {out_norm.at(i).at("lo"), out_norm.at(i).at("hi")};
  return m;
}

}  // namespace h2df
