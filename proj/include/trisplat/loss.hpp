#pragma once

#include <Eigen/Dense>

#include "trisplat/ad/tensor.hpp"
#include "trisplat/core/image.hpp"
#include "trisplat/render.hpp"

namespace trisplat {

// Supervision weights; defaults are the reference coefficients (1, 2, 1).
struct LossConfig {
  double w_l2 = 1.0;
  double w_perceptual = 2.0;
  double w_opacity = 1.0;
  int perceptual_scales = 3;       // dyadic pyramid depth
  double charbonnier_eps = 1e-3;   // smoothing of the gradient-difference term

  void validate() const {
    TS_CHECK(w_l2 >= 0 && w_perceptual >= 0 && w_opacity >= 0, "LossConfig: negative weight");
    TS_CHECK(perceptual_scales >= 1, "LossConfig: need at least one scale");
  }
};

struct LossTerms {
  double total = 0;
  double l2 = 0;
  double perceptual = 0;
  double opacity = 0;
};

// Builds the composite loss on the tape from a rendered [H*W,4] rgba tensor
// against an RGBA target whose alpha channel is the object mask:
//   w_l2 * mse(rgb) + w_perceptual * multiscale gradient difference
//   + w_opacity * mse(alpha, mask).
// The perceptual term is a smoothed (Charbonnier) L1 over image-gradient
// differences at dyadic scales, a self-contained stand-in for a learned
// perceptual metric; swap implementations here if a different extractor is
// wanted.
ad::Tensor composite_loss_op(ad::Graph& g, ad::Tensor rgba, const Image& target,
                             const LossConfig& cfg = {}, LossTerms* terms = nullptr);

// Value-level wrapper: scalar loss plus the per-pixel (r,g,b,a) adjoint of
// the rendered image, ready to feed rasterize_grad.
struct LossWithAdjoint {
  LossTerms terms;
  Eigen::ArrayXd adjoint;  // H*W*4
};
LossWithAdjoint composite_loss(const RenderedImage& render, const Image& target,
                               const LossConfig& cfg = {});

}  // namespace trisplat
