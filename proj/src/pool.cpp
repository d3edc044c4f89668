#include "trisplat/pool.hpp"

#include <algorithm>

namespace trisplat {

namespace {

// Sub-cube noise with spatial membership over [-1,1]^3, mirroring the
// grid-indexed perturbation for clouds that do not live on an init grid.
GaussianCloud perturb_spatial(const GaussianCloud& cloud, Rng& rng, const NoiseConfig& cfg) {
  cfg.validate();
  GaussianCloud out = cloud;
  const ActivationConfig act;
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
    const double side = 2.0 * rand_uniform(rng, cfg.cube_frac_min, cfg.cube_frac_max);
    Eigen::Vector3d lo;
    for (int k = 0; k < 3; ++k) lo[k] = rand_uniform(rng, -1.0, 1.0 - side);
    for (Gaussian& g : out.gaussians) {
      bool inside = true;
      for (int k = 0; k < 3; ++k)
        inside = inside && g.position[k] >= lo[k] && g.position[k] < lo[k] + side;
      if (!inside) continue;
      switch (def.effect) {
        case NoiseEffect::kPosition:
          for (int k = 0; k < 3; ++k)
            g.position[k] =
                std::clamp(g.position[k] + rand_uniform(rng, -def.level, def.level), -1.0, 1.0);
          break;
        case NoiseEffect::kColor:
          for (int k = 0; k < 3; ++k)
            g.color[k] = std::clamp(g.color[k] + rand_uniform(rng, -def.level, def.level),
                                    -act.color_bias, act.color_gain - act.color_bias);
          break;
        case NoiseEffect::kOpacity:
          g.opacity =
              std::clamp(g.opacity + rand_uniform(rng, -def.level, def.level), 1e-6, 1.0 - 1e-6);
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

PosedView view_of(const GaussianCloud& cloud, const Camera& cam, const Eigen::Vector3d& bg) {
  RenderedImage img = rasterize(cloud, cam, bg);
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

SynthPool synth_candidate_pool(const GaussianCloud& source_cloud, Rng& rng,
                               const PoolOptions& opt) {
  SynthPool pool;
  const double elevations[] = {-18.0, 6.0, 18.0, 30.0};
  std::vector<Camera> cams;
  for (double el : elevations)
    cams.push_back(make_orbit_camera(0.0, el, opt.rig.radius, opt.rig.width, opt.rig.height,
                                     opt.rig.fov_deg));
  for (int a = 0; a < 16; ++a)
    cams.push_back(make_orbit_camera(a * 22.5, 6.0, opt.rig.radius, opt.rig.width,
                                     opt.rig.height, opt.rig.fov_deg));

  pool.set.front_index = 4;      // azimuth 0 at 6 degrees
  pool.set.back_index = 4 + 8;   // azimuth 180 at 6 degrees
  for (int i = 0; i < 4; ++i) pool.set.provenance.push_back("elevation");
  for (int i = 0; i < 16; ++i) pool.set.provenance.push_back("azimuth");

  // Pick which candidates to corrupt, sparing the query anchors.
  std::vector<int> eligible;
  for (int i = 0; i < 20; ++i)
    if (i != pool.set.front_index && i != pool.set.back_index) eligible.push_back(i);
  TS_CHECK(opt.corrupt_count <= static_cast<int>(eligible.size()),
           "synth_candidate_pool: too many corrupted views requested");
  for (int i = 0; i < opt.corrupt_count; ++i) {
    const int j = rand_int(rng, i, static_cast<int>(eligible.size()) - 1);
    std::swap(eligible[i], eligible[j]);
  }
  std::vector<char> corrupt_flag(20, 0);
  for (int i = 0; i < opt.corrupt_count; ++i) corrupt_flag[eligible[i]] = 1;

  pool.corrupted.assign(20, 0);
  for (int i = 0; i < 20; ++i) {
    if (corrupt_flag[i]) {
      // Fresh heavy perturbation per corrupted view for diversity.
      GaussianCloud bad = perturb_spatial(source_cloud, rng, opt.heavy);
      pool.set.views.push_back(view_of(bad, cams[i], opt.background));
      pool.corrupted[i] = 1;
    } else {
      pool.set.views.push_back(view_of(source_cloud, cams[i], opt.background));
    }
  }
  pool.set.validate();
  return pool;
}

}  // namespace trisplat
