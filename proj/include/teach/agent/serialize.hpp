#pragma once

#include "teach/agent/agent.hpp"
#include "teach/common/json_util.hpp"

namespace teach::agent {

inline constexpr int kModelVersion = 1;

json to_json(const AgentConfig& config);
AgentConfig config_from_json(const json& doc, AgentConfig base = {});

/// {"w1":[[...]],"b1":[...],"w2":[[...]],"b2":[...]}
json to_json(const Mlp& net);
Mlp mlp_from_json(const json& doc, int inputs, int hidden, int outputs);

/// {"kind":"agent","version":1,"config","policy","value"}
json model_to_json(const AgentConfig& config, const Params& params);
std::pair<AgentConfig, Params> model_from_json(const json& doc);

}  // namespace teach::agent
