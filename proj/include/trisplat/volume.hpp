#pragma once

#include <Eigen/Dense>

#include "trisplat/ad/tensor.hpp"
#include "trisplat/camera.hpp"
#include "trisplat/decoder.hpp"
#include "trisplat/render.hpp"
#include "trisplat/triplane.hpp"

namespace trisplat {

struct VolumeRenderOptions {
  double reference_step = 0.125;  // 2/n for the default grid; alpha scales by dt/reference_step
  double near = 0.01;
  double alpha_cap = 0.995;
};

// Ray-marching volume renderer over the tri-plane + color/opacity heads.
// Rays march the cube intersection of [-1,1]^3 with samples_per_ray uniform
// samples; rays that miss the cube return the background. Per-sample alpha is
// the opacity activation scaled by (step length / reference_step).
// Returns a [H*W, 4] (r,g,b,a) tensor so gradients reach the planes and MLP.
ad::Tensor render_volume_op(ad::Graph& g, ad::ParamBinder& bind,
                            const std::array<ad::Tensor, 3>& planes, int plane_resolution,
                            const DecoderMLP& mlp, const Camera& cam, int samples_per_ray,
                            const Eigen::Vector3d& background,
                            const VolumeRenderOptions& opt = {});

// Inference wrapper over render_volume_op.
RenderedImage render_volume(const TriPlane& tri, const DecoderMLP& mlp,
                            const ad::ParamStore& store, const Camera& cam, int samples_per_ray,
                            const Eigen::Vector3d& background, const VolumeRenderOptions& opt = {});

// Front-to-back volumetric compositing of per-sample alphas/colors into
// per-ray (r,g,b,a); rays with all-zero alphas yield the background.
ad::Tensor composite_rays_op(ad::Tensor alpha /*[rays*S,1]*/, ad::Tensor color /*[rays*S,3]*/,
                             int rays, int samples_per_ray, const Eigen::Vector3d& background);

}  // namespace trisplat
