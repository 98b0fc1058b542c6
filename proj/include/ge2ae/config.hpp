#pragma once

#include <string>
#include <vector>

#include "ge2ae/pretrain.hpp"

namespace ge2ae::config {

// Flat `key = value` config covering every TrainRunConfig / ModelConfig /
// LossConfig field under dotted names. Unknown keys are rejected; every key
// has a default.
train::TrainRunConfig defaults();

// defaults <- file <- overrides, in that precedence. Overrides use the same
// `key=value` syntax. An empty path applies overrides to the defaults.
train::TrainRunConfig parse_config(const std::string& path,
                                   const std::vector<std::string>& overrides);

// Sorted, fully-enumerated form; re-parsing it reproduces the same config.
std::string serialize(const train::TrainRunConfig& cfg);

// Loss-term toggle presets: pix-only, no-fd, freq-only, no-pd, no-con, full.
void apply_preset(train::TrainRunConfig& cfg, const std::string& name);

// Parses the config text embedded in a checkpoint.
train::TrainRunConfig from_snapshot(const std::string& text);

}  // namespace ge2ae::config
