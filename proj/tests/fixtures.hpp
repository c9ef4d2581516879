#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "relform/scenario_io.hpp"

namespace fixtures {

inline std::filesystem::path scenario_dir() {
  return std::filesystem::path(RELFORM_SOURCE_DIR) / "scenarios";
}

/// The ten-agent formation shipped in scenarios/, with optional overrides.
inline relform::Scenario ten_agents(const std::vector<std::string>& overrides = {}) {
  return relform::load_scenario(scenario_dir() / "formation10.ini", overrides);
}

/// Four agents: a leader triangle and one follower inside it.
inline const char* small_text = R"(
[graph]
nodes = 4
links = 1-2 1-3 2-3 1-4 2-4 3-4
leaders = 1 2 3

[target]
1 = 0 0
2 = 2 0
3 = 0 2
4 = 0.5 0.5

[weights]
mode = solve
scale = 5

[noise]
sigma_w = 0.001
sigma_v = 0.1

[filter]
estimator = crkf

[sim]
dt = 0.001
horizon = 200
T = 5
leader_gain = 2
seed = 11
runs = 3
threads = 1
)";

inline relform::Scenario small(const std::vector<std::string>& overrides = {}) {
  return relform::parse_scenario(small_text, overrides);
}

}  // namespace fixtures
