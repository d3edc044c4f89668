#pragma once

#include <string>

#include "trisplat/matcher.hpp"
#include "trisplat/scene.hpp"
#include "trisplat/train.hpp"

namespace trisplat {

// Everything the CLI needs, with desk-scale defaults. The JSON schema mirrors
// the struct fields one-to-one (see README); unknown keys are rejected so
// typos fail loudly.
struct WorkbenchConfig {
  TrainConfig train;  // carries model/loss/optim/noise sub-configs
  MatchConfig match;
  RigConfig rig;
};

WorkbenchConfig load_config(const std::string& path);
WorkbenchConfig parse_config_json(const std::string& text);

}  // namespace trisplat
