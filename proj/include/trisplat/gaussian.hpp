#pragma once

#include <Eigen/Dense>
#include <vector>

#include "trisplat/core/check.hpp"

namespace trisplat {

// Raw 14-channel MLP output for one Gaussian, fixed channel order:
// offset(3), color(3), opacity(1), scale(3), rotation(4).
struct RawGaussianParams {
  Eigen::Vector3d offset_raw = Eigen::Vector3d::Zero();
  Eigen::Vector3d color_raw = Eigen::Vector3d::Zero();
  double opacity_raw = 0.0;
  Eigen::Vector3d scale_raw = Eigen::Vector3d::Zero();
  Eigen::Vector4d rotation_raw = Eigen::Vector4d(1, 0, 0, 0);  // (w,x,y,z)

  static constexpr int kChannels = 14;
  std::array<double, kChannels> flatten() const;
  static RawGaussianParams from_flat(const double* v);
};

// One activated 3D Gaussian. Ranges are enforced by activate():
//   position in [-1,1]^3, color in [-0.001, 1.001], opacity in (0,1),
//   scale in [1e-4, 0.3] per axis, rotation a unit quaternion (w,x,y,z).
struct Gaussian {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  double opacity = 0.0;
  Eigen::Vector3d scale = Eigen::Vector3d::Constant(1e-4);
  Eigen::Vector4d rotation = Eigen::Vector4d(1, 0, 0, 0);
};

struct GaussianCloud {
  std::vector<Gaussian> gaussians;
  size_t count() const { return gaussians.size(); }
};

// Activation constants; defaults follow the reference parameterization.
struct ActivationConfig {
  double alpha = 0.75;  // position blend weight toward the init grid
  double opacity_shift = 2.0;
  double scale_shift = 2.3;
  double scale_min = 1e-4;
  double scale_max = 0.3;
  double color_gain = 1.002;
  double color_bias = 0.001;

  void validate() const {
    TS_CHECK(alpha > 0.0 && alpha <= 1.0, "ActivationConfig: alpha outside (0,1]");
    TS_CHECK(scale_min < scale_max, "ActivationConfig: scale_min >= scale_max");
  }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// p = alpha*p0 + (1-alpha)*tanh(offset_raw), componentwise. p0 must lie in
// [-1,1]^3 (it comes from the init grid); the result stays in [-1,1] by
// convexity.
Eigen::Vector3d blend_position(const Eigen::Vector3d& p0, const Eigen::Vector3d& offset_raw,
                               const ActivationConfig& cfg = {});

// Full raw -> Gaussian activation:
//   position  blend_position(p0, offset_raw)
//   color     sigmoid(x) * color_gain - color_bias
//   opacity   sigmoid(x - opacity_shift)
//   scale     clamp(sigmoid(x - scale_shift), scale_min, scale_max)
//   rotation  raw quaternion / ||raw quaternion||
// Errors on non-finite channels and on an all-zero rotation.
Gaussian activate(const RawGaussianParams& raw, const Eigen::Vector3d& p0,
                  const ActivationConfig& cfg = {});

// Range audit used by tests and the acceptance suite.
bool gaussian_in_range(const Gaussian& g, const ActivationConfig& cfg = {},
                       double quat_tol = 1e-6);

}  // namespace trisplat
