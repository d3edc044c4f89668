#pragma once

#include <string>
#include <vector>

#include "trisplat/camera.hpp"
#include "trisplat/gaussian.hpp"
#include "trisplat/render.hpp"

namespace trisplat {

enum class SceneKind { kSphereShell = 0, kBox, kTwoBlob, kRing };

SceneKind scene_kind_from_string(const std::string& s);
std::string to_string(SceneKind k);

// Procedural ground-truth object. Colors are smooth functions of position so
// reconstructions are not edge-limited; all generated Gaussians satisfy the
// activation range invariants.
struct SceneSpec {
  SceneKind kind = SceneKind::kSphereShell;
  int gaussian_count = 400;
  int color_scheme = 0;
  uint64_t seed = 1;
};

GaussianCloud gen_cloud(const SceneSpec& spec);

// The standard rig: 16 azimuths x 4 elevations (-18, 6, 18, 30 degrees).
struct RigConfig {
  int width = 64;
  int height = 64;
  double fov_deg = 50.0;
  double radius = 2.4;
};
std::vector<Camera> standard_orbit_cameras(const RigConfig& rig = {});

std::vector<PosedView> render_views(const GaussianCloud& cloud, const std::vector<Camera>& cams,
                                    const Eigen::Vector3d& background,
                                    const RasterizeOptions& opt = {});

// In-memory scene: views plus the ground-truth cloud they came from.
struct SceneData {
  std::string name;
  std::vector<PosedView> views;
  GaussianCloud gt_cloud;
};
using Dataset = std::vector<SceneData>;

// Deterministic procedural scene family for training/eval; index seeds the
// spec and cycles the object kinds.
SceneData make_scene(int index, const RigConfig& rig = {},
                     const Eigen::Vector3d& background = {1, 1, 1});

}  // namespace trisplat
