#pragma once

#include <Eigen/Dense>
#include <vector>

#include "trisplat/ad/tensor.hpp"
#include "trisplat/camera.hpp"
#include "trisplat/gaussian.hpp"

namespace trisplat {

struct RenderedImage {
  int width = 0;
  int height = 0;
  std::vector<double> rgb;    // H*W*3, [0,1]
  std::vector<double> alpha;  // H*W, [0,1]

  RenderedImage() = default;
  RenderedImage(int w, int h)
      : width(w), height(h), rgb(static_cast<size_t>(w) * h * 3, 0.0),
        alpha(static_cast<size_t>(w) * h, 0.0) {}
};

struct RasterizeOptions {
  double near = 0.01;            // camera-space near plane; z <= near is culled
  double alpha_max = 0.99;       // per-splat alpha clamp
  double contrib_min = 1.0 / 255.0;  // splats below this alpha are skipped
  double cutoff_sigma = 3.0;     // screen-space influence truncation
  double cov_floor = 0.3;        // px^2 added to the projected covariance diagonal
  double transmittance_min = 1e-12;
  int threads = 1;               // forward-pass row parallelism
};

// EWA projection of one Gaussian. cullable is set (and the rest left zero)
// when the mean is behind the near plane.
struct ProjectedGaussian {
  Eigen::Vector2d mean2d = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov2d = Eigen::Matrix2d::Zero();
  double depth = 0.0;
  bool cullable = false;
};

ProjectedGaussian project_gaussian(const Gaussian& g, const Camera& cam,
                                   const RasterizeOptions& opt = {});

// Front-to-back alpha compositing over a depth-sorted (ties by cloud index)
// splat list; colors clamp to [0,1] at accumulation; background fills the
// remaining transmittance.
RenderedImage rasterize(const GaussianCloud& cloud, const Camera& cam,
                        const Eigen::Vector3d& background, const RasterizeOptions& opt = {});

struct RasterGrads {
  Eigen::MatrixXd position;  // N x 3
  Eigen::MatrixXd color;     // N x 3
  Eigen::VectorXd opacity;   // N
  Eigen::MatrixXd scale;     // N x 3
  Eigen::MatrixXd rotation;  // N x 4
};

// Adjoint of rasterize: loss_adjoint holds per-pixel (r,g,b,a) cotangents,
// laid out H*W x 4 row-major. Errors on non-finite adjoints.
RasterGrads rasterize_grad(const GaussianCloud& cloud, const Camera& cam,
                           const Eigen::Vector3d& background, const Eigen::ArrayXd& loss_adjoint,
                           const RasterizeOptions& opt = {});

// Tape op wrapping rasterize/rasterize_grad. Field tensors are [N,3]/[N,3]/
// [N,1]/[N,3]/[N,4]; returns a [H*W, 4] (r,g,b,a) tensor.
ad::Tensor rasterize_op(ad::Tensor position, ad::Tensor color, ad::Tensor opacity,
                        ad::Tensor scale, ad::Tensor rotation, const Camera& cam,
                        const Eigen::Vector3d& background, const RasterizeOptions& opt = {});

}  // namespace trisplat
