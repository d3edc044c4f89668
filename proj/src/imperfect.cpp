#include "trisplat/imperfect.hpp"

#include <algorithm>
#include <cmath>

namespace trisplat {

SubCube sample_subcube(Rng& rng, int n, const NoiseConfig& cfg) {
  TS_CHECK(n >= 1, "sample_subcube: grid side must be positive");
  cfg.validate();
  int lo = std::max(1, static_cast<int>(std::ceil(cfg.cube_frac_min * n)));
  int hi = std::max(lo, static_cast<int>(std::floor(cfg.cube_frac_max * n)));
  hi = std::min(hi, n);
  SubCube c;
  c.side = rand_int(rng, lo, hi);
  c.x0 = rand_int(rng, 0, n - c.side);
  c.y0 = rand_int(rng, 0, n - c.side);
  c.z0 = rand_int(rng, 0, n - c.side);
  return c;
}

GaussianCloud perturb_cloud(const GaussianCloud& cloud, int grid_n, Rng& rng,
                            const NoiseConfig& cfg, PerturbReport* report,
                            const ActivationConfig& act) {
  cfg.validate();
  TS_CHECK(grid_n >= 1 && cloud.count() == static_cast<size_t>(grid_n) * grid_n * grid_n,
           "perturb_cloud: cloud is not indexed by an init grid of this side");
  GaussianCloud out = cloud;
  const double opacity_eps = 1e-6;

  struct EffectDef {
    NoiseEffect effect;
    double prob;
    double level;
  };
  const EffectDef defs[] = {{NoiseEffect::kPosition, cfg.p_position, cfg.level_position},
                            {NoiseEffect::kColor, cfg.p_color, cfg.level_color},
                            {NoiseEffect::kOpacity, cfg.p_opacity, cfg.level_opacity},
                            {NoiseEffect::kScale, cfg.p_scale, cfg.level_scale}};

  for (const EffectDef& def : defs) {
    if (!rand_bernoulli(rng, def.prob)) continue;
    const SubCube cube = sample_subcube(rng, grid_n, cfg);
    if (report) report->applied.push_back({def.effect, cube});
    for (int ix = cube.x0; ix < cube.x0 + cube.side; ++ix)
      for (int iy = cube.y0; iy < cube.y0 + cube.side; ++iy)
        for (int iz = cube.z0; iz < cube.z0 + cube.side; ++iz) {
          Gaussian& g = out.gaussians[(static_cast<size_t>(ix) * grid_n + iy) * grid_n + iz];
          switch (def.effect) {
            case NoiseEffect::kPosition:
              for (int k = 0; k < 3; ++k)
                g.position[k] = std::clamp(
                    g.position[k] + rand_uniform(rng, -def.level, def.level), -1.0, 1.0);
              break;
            case NoiseEffect::kColor:
              for (int k = 0; k < 3; ++k)
                g.color[k] = std::clamp(g.color[k] + rand_uniform(rng, -def.level, def.level),
                                        -act.color_bias, act.color_gain - act.color_bias);
              break;
            case NoiseEffect::kOpacity:
              g.opacity = std::clamp(g.opacity + rand_uniform(rng, -def.level, def.level),
                                     opacity_eps, 1.0 - opacity_eps);
              break;
            case NoiseEffect::kScale:
              for (int k = 0; k < 3; ++k)
                g.scale[k] = std::clamp(g.scale[k] + rand_uniform(rng, -def.level, def.level),
                                        act.scale_min, act.scale_max);
              break;
          }
        }
  }
  return out;
}

namespace {

std::vector<int> sample_distinct(Rng& rng, int count, int total) {
  std::vector<int> idx(total);
  for (int i = 0; i < total; ++i) idx[i] = i;
  for (int i = 0; i < count; ++i) {
    const int j = rand_int(rng, i, total - 1);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  return idx;
}

PosedView render_as_view(const GaussianCloud& cloud, const Camera& cam,
                         const SimulateConfig& scfg) {
  RenderedImage img = rasterize(cloud, cam, scfg.background, scfg.raster);
  PosedView v;
  v.camera = cam;
  v.image = Image(cam.width, cam.height, 4);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const int p = y * cam.width + x;
      for (int c = 0; c < 3; ++c) v.image.at(x, y, c) = img.rgb[p * 3 + c];
      v.image.at(x, y, 3) = img.alpha[p];
    }
  return v;
}

}  // namespace

ImperfectBatch simulate_imperfect_inputs(const ReconModel& model, const ad::ParamStore& store,
                                         const std::vector<PosedView>& clean_views, Rng& rng,
                                         const NoiseConfig& ncfg, const SimulateConfig& scfg) {
  const int n_views = static_cast<int>(clean_views.size());
  TS_CHECK(n_views >= 8, "simulate_imperfect_inputs: need at least 8 clean views");

  // Step 1: self-reconstruction from a few clean views, then perturb + render.
  const int k = rand_int(rng, scfg.k_min, std::min(scfg.k_max, n_views));
  std::vector<int> recon_idx = sample_distinct(rng, k, n_views);
  std::vector<PosedView> recon_inputs;
  for (int i : recon_idx) recon_inputs.push_back(clean_views[i]);
  GaussianCloud cloud = model.reconstruct(recon_inputs, store);
  cloud = perturb_cloud(cloud, model.cfg.grid_n, rng, ncfg);

  const int m = rand_int(rng, scfg.m_min, std::min(scfg.m_max, n_views));
  std::vector<int> pose_idx = sample_distinct(rng, m, n_views);

  // Step 2: coin-flip replacement of clean views by the corrupted renders.
  ImperfectBatch batch;
  for (int i : pose_idx) {
    const bool replace = rand_bernoulli(rng, scfg.replace_prob);
    if (replace)
      batch.inputs.push_back(render_as_view(cloud, clean_views[i].camera, scfg));
    else
      batch.inputs.push_back(clean_views[i]);
    batch.corrupted.push_back(replace ? 1 : 0);
    batch.input_indices.push_back(i);
  }

  // Supervision stays clean.
  std::vector<int> target_idx = sample_distinct(rng, std::min(scfg.target_count, n_views), n_views);
  for (int i : target_idx) {
    batch.targets.push_back(clean_views[i]);
    batch.target_indices.push_back(i);
  }
  return batch;
}

}  // namespace trisplat
