#pragma once

#include "h2df/agent_common.hpp"
#include "h2df/artifact.hpp"

namespace h2df {

inline void export_policy(const std::string& path, const ActorNetwork& policy,
                          std::uint64_t training_seed,
                          const std::string& algo = "",
                          json extra = json::object()) {
  json meta = std::move(extra);
  meta["kind_name"] = "policy";
  meta["observation_size"] = policy.net.input_size();
  meta["action_size"] = policy.net.output_size();
  meta["training_seed"] = training_seed;
  if (!algo.empty()) meta["algo"] = algo;
  save_artifact(path, kKindPolicy, policy.net, std::move(meta),
                policy.log_std.empty() ? nullptr : &policy.log_std);
}

inline ActorNetwork load_policy(const std::string& path,
                                json* metadata = nullptr) {
  LoadedArtifact art = load_artifact(path, kKindPolicy);
  if (metadata) *metadata = art.metadata;
  ActorNetwork a;
  a.net = std::move(art.net);
  a.log_std = std::move(art.log_std);
  return a;
}

}  // namespace h2df
