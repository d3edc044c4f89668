#pragma once

#include <map>
#include <string>

#include "trisplat/ad/tensor.hpp"
#include "trisplat/optim.hpp"

namespace trisplat {

// Binary checkpoint: magic "FLXR", u32 format version, u64 manifest length,
// JSON manifest (tensor names/shapes/offsets plus run metadata), then a
// little-endian float32 payload. Training state is float32-quantized after
// every optimizer step, so save/load round-trips bitwise.
struct CheckpointMeta {
  long step = 0;
  long opt_t = 0;
  std::string phase = "init";
  std::string rng_state;
  std::map<std::string, std::string> extra;
};

struct Checkpoint {
  ad::ParamStore params;
  GradMap opt_m;
  GradMap opt_v;
  CheckpointMeta meta;
};

void save_checkpoint(const std::string& path, const ad::ParamStore& params, const GradMap& opt_m,
                     const GradMap& opt_v, const CheckpointMeta& meta);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace trisplat
