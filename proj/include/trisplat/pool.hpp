#pragma once

#include "trisplat/core/random.hpp"
#include "trisplat/imperfect.hpp"
#include "trisplat/scene.hpp"
#include "trisplat/select.hpp"

namespace trisplat {

// Synthesized 20-view candidate pool standing in for the generation stage:
// 4 elevation-sweep views (azimuth 0; -18/6/18/30 degrees) plus 16 azimuth
// orbit views at 6 degrees. corrupt_count candidates (never the front/back
// anchors) are re-rendered from a heavily perturbed copy of the source
// cloud, and the per-view corruption flags give the selection pipeline an
// objective ground truth.
struct PoolOptions {
  RigConfig rig;
  Eigen::Vector3d background{1.0, 1.0, 1.0};
  int corrupt_count = 0;
  // Heavy corruption defaults: every effect fires, strong levels, large cubes.
  NoiseConfig heavy{1.0, 1.0, 1.0, 1.0, 0.45, 0.5, 0.6, 0.08, 0.35, 0.75};
};

struct SynthPool {
  CandidateSet set;
  std::vector<char> corrupted;  // per candidate
};

// source_cloud is typically the scene's ground truth; pass a model
// reconstruction instead to emulate a weaker generator. Corruption applies
// the sub-cube noise effects with cube membership taken spatially (these
// clouds are not grid-indexed).
SynthPool synth_candidate_pool(const GaussianCloud& source_cloud, Rng& rng,
                               const PoolOptions& opt = {});

}  // namespace trisplat
