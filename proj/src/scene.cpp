#include "trisplat/scene.hpp"

#include <cmath>

#include "trisplat/core/random.hpp"

namespace trisplat {

SceneKind scene_kind_from_string(const std::string& s) {
  if (s == "sphere-shell") return SceneKind::kSphereShell;
  if (s == "box") return SceneKind::kBox;
  if (s == "two-blob") return SceneKind::kTwoBlob;
  if (s == "ring") return SceneKind::kRing;
  fail("unknown scene kind: " + s);
}

std::string to_string(SceneKind k) {
  switch (k) {
    case SceneKind::kSphereShell: return "sphere-shell";
    case SceneKind::kBox: return "box";
    case SceneKind::kTwoBlob: return "two-blob";
    case SceneKind::kRing: return "ring";
  }
  return "?";
}

namespace {

// Smooth palette over a phase variable; stays well inside [0,1].
Eigen::Vector3d palette(double t, int scheme) {
  const double s = 0.35 + 0.13 * (scheme % 4);
  return {0.5 + 0.4 * std::sin(t + s), 0.5 + 0.4 * std::sin(1.7 * t + 2.0 * s + 1.3),
          0.5 + 0.4 * std::sin(2.3 * t + 3.1 * s + 2.9)};
}

Eigen::Vector4d random_unit_quat(Rng& rng) {
  Eigen::Vector4d q;
  for (int i = 0; i < 4; ++i) q[i] = rand_normal(rng, 0.0, 1.0);
  if (q.norm() < 1e-9) q = {1, 0, 0, 0};
  return q.normalized();
}

}  // namespace

GaussianCloud gen_cloud(const SceneSpec& spec) {
  TS_CHECK(spec.gaussian_count > 0, "gen_cloud: empty spec");
  Rng rng(spec.seed * 22695477ULL + 1);
  GaussianCloud cloud;
  cloud.gaussians.reserve(spec.gaussian_count);
  const double golden = EIGEN_PI * (3.0 - std::sqrt(5.0));

  for (int i = 0; i < spec.gaussian_count; ++i) {
    Gaussian g;
    double phase = 0.0;
    switch (spec.kind) {
      case SceneKind::kSphereShell: {
        // Fibonacci sphere with a little radial jitter.
        const double y = 1.0 - 2.0 * (i + 0.5) / spec.gaussian_count;
        const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
        const double th = golden * i;
        const double rad = 0.55 + rand_uniform(rng, -0.03, 0.03);
        g.position = rad * Eigen::Vector3d(r * std::cos(th), y, r * std::sin(th));
        phase = 2.0 * th + 3.0 * y;
        break;
      }
      case SceneKind::kBox: {
        const int face = rand_int(rng, 0, 5);
        const double u = rand_uniform(rng, -0.5, 0.5), v = rand_uniform(rng, -0.5, 0.5);
        const double side = 0.48;
        switch (face % 3) {
          case 0: g.position = {side * (face < 3 ? 1 : -1), u, v}; break;
          case 1: g.position = {u, side * (face < 3 ? 1 : -1), v}; break;
          default: g.position = {u, v, side * (face < 3 ? 1 : -1)}; break;
        }
        phase = 2.5 * g.position.sum() + face;
        break;
      }
      case SceneKind::kTwoBlob: {
        const bool second = i % 2 == 1;
        const Eigen::Vector3d center = second ? Eigen::Vector3d(0.32, 0.12, 0.05)
                                              : Eigen::Vector3d(-0.3, -0.1, -0.08);
        g.position = center + Eigen::Vector3d(rand_normal(rng, 0, 0.16), rand_normal(rng, 0, 0.13),
                                              rand_normal(rng, 0, 0.16));
        for (int k = 0; k < 3; ++k) g.position[k] = std::clamp(g.position[k], -0.75, 0.75);
        phase = (second ? 2.2 : 0.0) + 1.8 * g.position.x();
        break;
      }
      case SceneKind::kRing: {
        const double th = 2.0 * EIGEN_PI * (i + 0.5) / spec.gaussian_count;
        const double phi = rand_uniform(rng, 0, 2.0 * EIGEN_PI);
        const double major = 0.5, minor = 0.13;
        Eigen::Vector3d p(std::cos(th) * (major + minor * std::cos(phi)),
                          minor * std::sin(phi),
                          std::sin(th) * (major + minor * std::cos(phi)));
        // Tilt the ring so elevation changes matter.
        const double tilt = 0.45;
        g.position = {p.x(), std::cos(tilt) * p.y() - std::sin(tilt) * p.z(),
                      std::sin(tilt) * p.y() + std::cos(tilt) * p.z()};
        phase = 3.0 * th;
        break;
      }
    }
    g.color = palette(phase, spec.color_scheme);
    g.opacity = rand_uniform(rng, 0.55, 0.9);
    const double base = rand_uniform(rng, 0.045, 0.08);
    g.scale = {base * rand_uniform(rng, 0.8, 1.25), base * rand_uniform(rng, 0.8, 1.25),
               base * rand_uniform(rng, 0.8, 1.25)};
    g.rotation = random_unit_quat(rng);
    cloud.gaussians.push_back(g);
  }
  return cloud;
}

std::vector<Camera> standard_orbit_cameras(const RigConfig& rig) {
  const double elevations[] = {-18.0, 6.0, 18.0, 30.0};
  std::vector<Camera> cams;
  cams.reserve(64);
  for (double el : elevations)
    for (int a = 0; a < 16; ++a)
      cams.push_back(
          make_orbit_camera(a * 22.5, el, rig.radius, rig.width, rig.height, rig.fov_deg));
  return cams;
}

std::vector<PosedView> render_views(const GaussianCloud& cloud, const std::vector<Camera>& cams,
                                    const Eigen::Vector3d& background,
                                    const RasterizeOptions& opt) {
  std::vector<PosedView> views;
  views.reserve(cams.size());
  for (const Camera& cam : cams) {
    RenderedImage img = rasterize(cloud, cam, background, opt);
    PosedView v;
    v.camera = cam;
    v.image = Image(cam.width, cam.height, 4);
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x) {
        const int p = y * cam.width + x;
        for (int c = 0; c < 3; ++c) v.image.at(x, y, c) = img.rgb[p * 3 + c];
        v.image.at(x, y, 3) = img.alpha[p];
      }
    views.push_back(std::move(v));
  }
  return views;
}

SceneData make_scene(int index, const RigConfig& rig, const Eigen::Vector3d& background) {
  SceneSpec spec;
  spec.kind = static_cast<SceneKind>(index % 4);
  spec.gaussian_count = 320 + 60 * (index % 5);
  spec.color_scheme = index % 7;
  spec.seed = static_cast<uint64_t>(index) + 101;
  SceneData scene;
  scene.name = "scene_" + std::to_string(index);
  scene.gt_cloud = gen_cloud(spec);
  scene.views = render_views(scene.gt_cloud, standard_orbit_cameras(rig), background);
  return scene;
}

}  // namespace trisplat
