#pragma once

#include <vector>

#include "trisplat/core/random.hpp"
#include "trisplat/gaussian.hpp"
#include "trisplat/model.hpp"
#include "trisplat/render.hpp"

namespace trisplat {

// Sub-cube Gaussian-parameter noise. Cube sides are fractions of the grid
// side (the reference setup perturbs 10-40 cells of a 100-cell grid);
// position/color/opacity noise level 0.1, scale 0.02, each effect fired
// independently with probability 0.2. Rotation is never touched.
struct NoiseConfig {
  double p_position = 0.2;
  double p_color = 0.2;
  double p_opacity = 0.2;
  double p_scale = 0.2;
  double level_position = 0.1;
  double level_color = 0.1;
  double level_opacity = 0.1;
  double level_scale = 0.02;
  double cube_frac_min = 0.1;
  double cube_frac_max = 0.4;

  void validate() const {
    for (double p : {p_position, p_color, p_opacity, p_scale})
      TS_CHECK(p >= 0.0 && p <= 1.0, "NoiseConfig: probability outside [0,1]");
    for (double l : {level_position, level_color, level_opacity, level_scale})
      TS_CHECK(l >= 0.0, "NoiseConfig: negative noise level");
    TS_CHECK(cube_frac_min > 0.0 && cube_frac_min <= cube_frac_max && cube_frac_max <= 1.0,
             "NoiseConfig: bad cube fraction range");
  }
};

struct SubCube {
  int x0 = 0, y0 = 0, z0 = 0;
  int side = 0;
  bool contains(int ix, int iy, int iz) const {
    return ix >= x0 && ix < x0 + side && iy >= y0 && iy < y0 + side && iz >= z0 &&
           iz < z0 + side;
  }
};

// Side uniform over [ceil(frac_min*n), floor(frac_max*n)] clamped to >= 1,
// placement uniform over valid positions.
SubCube sample_subcube(Rng& rng, int n, const NoiseConfig& cfg = {});

enum class NoiseEffect { kPosition = 0, kColor, kOpacity, kScale };

struct PerturbReport {
  struct Applied {
    NoiseEffect effect;
    SubCube cube;
  };
  std::vector<Applied> applied;
};

// Adds uniform noise in [-level, +level] to one parameter class inside a
// freshly drawn sub-cube per fired effect; results re-clamp to the Gaussian
// ranges and everything outside the cubes stays bitwise identical. The cloud
// must be in init-grid order (count == n^3).
GaussianCloud perturb_cloud(const GaussianCloud& cloud, int grid_n, Rng& rng,
                            const NoiseConfig& cfg = {}, PerturbReport* report = nullptr,
                            const ActivationConfig& act = {});

struct SimulateConfig {
  int k_min = 1, k_max = 8;    // inputs for the self-reconstruction pass
  int m_min = 1, m_max = 32;   // corrupted renders produced
  int target_count = 4;        // clean supervision views per batch
  double replace_prob = 0.5;
  Eigen::Vector3d background{1.0, 1.0, 1.0};
  RasterizeOptions raster;
};

struct ImperfectBatch {
  std::vector<PosedView> inputs;    // mixed clean / corrupted at clean-view poses
  std::vector<char> corrupted;      // per-input flag
  std::vector<int> input_indices;   // indices into the clean view list
  std::vector<PosedView> targets;   // always clean renders
  std::vector<int> target_indices;
};

// The self-feeding corruption procedure: reconstruct from k ~ U[1,8] clean
// views with the current weights, perturb the cloud, re-render m ~ U[1,32]
// clean poses, then swap each clean view for its corrupted render with
// probability 0.5. The gradient-enabled re-run on the mixed set belongs to
// the training loop, not here.
ImperfectBatch simulate_imperfect_inputs(const ReconModel& model, const ad::ParamStore& store,
                                         const std::vector<PosedView>& clean_views, Rng& rng,
                                         const NoiseConfig& ncfg = {},
                                         const SimulateConfig& scfg = {});

}  // namespace trisplat
