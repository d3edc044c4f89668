#include "trisplat/gaussian.hpp"

#include <cmath>

namespace trisplat {

std::array<double, RawGaussianParams::kChannels> RawGaussianParams::flatten() const {
  return {offset_raw.x(), offset_raw.y(), offset_raw.z(), color_raw.x(),  color_raw.y(),
          color_raw.z(),  opacity_raw,    scale_raw.x(),  scale_raw.y(),  scale_raw.z(),
          rotation_raw(0), rotation_raw(1), rotation_raw(2), rotation_raw(3)};
}

RawGaussianParams RawGaussianParams::from_flat(const double* v) {
  RawGaussianParams r;
  r.offset_raw = Eigen::Vector3d(v[0], v[1], v[2]);
  r.color_raw = Eigen::Vector3d(v[3], v[4], v[5]);
  r.opacity_raw = v[6];
  r.scale_raw = Eigen::Vector3d(v[7], v[8], v[9]);
  r.rotation_raw = Eigen::Vector4d(v[10], v[11], v[12], v[13]);
  return r;
}

Eigen::Vector3d blend_position(const Eigen::Vector3d& p0, const Eigen::Vector3d& offset_raw,
                               const ActivationConfig& cfg) {
  cfg.validate();
  for (int i = 0; i < 3; ++i)
    TS_CHECK(p0[i] >= -1.0 && p0[i] <= 1.0, "blend_position: p0 outside [-1,1] (malformed grid)");
  Eigen::Vector3d p;
  for (int i = 0; i < 3; ++i) p[i] = cfg.alpha * p0[i] + (1.0 - cfg.alpha) * std::tanh(offset_raw[i]);
  return p;
}

Gaussian activate(const RawGaussianParams& raw, const Eigen::Vector3d& p0,
                  const ActivationConfig& cfg) {
  cfg.validate();
  for (double v : raw.flatten()) TS_CHECK(std::isfinite(v), "activate: non-finite raw channel");

  Gaussian g;
  g.position = blend_position(p0, raw.offset_raw, cfg);
  for (int i = 0; i < 3; ++i) g.color[i] = sigmoid(raw.color_raw[i]) * cfg.color_gain - cfg.color_bias;
  g.opacity = sigmoid(raw.opacity_raw - cfg.opacity_shift);
  for (int i = 0; i < 3; ++i)
    g.scale[i] = std::clamp(sigmoid(raw.scale_raw[i] - cfg.scale_shift), cfg.scale_min, cfg.scale_max);
  const double norm = raw.rotation_raw.norm();
  TS_CHECK(norm > 1e-12, "activate: rotation_raw has no direction (all-zero quaternion)");
  g.rotation = raw.rotation_raw / norm;
  return g;
}

bool gaussian_in_range(const Gaussian& g, const ActivationConfig& cfg, double quat_tol) {
  for (int i = 0; i < 3; ++i) {
    if (!(g.position[i] >= -1.0 && g.position[i] <= 1.0)) return false;
    if (!(g.color[i] >= -cfg.color_bias && g.color[i] <= cfg.color_gain - cfg.color_bias)) return false;
    if (!(g.scale[i] >= cfg.scale_min && g.scale[i] <= cfg.scale_max)) return false;
  }
  if (!(g.opacity > 0.0 && g.opacity < 1.0)) return false;
  if (std::abs(g.rotation.norm() - 1.0) > quat_tol) return false;
  return true;
}

}  // namespace trisplat
