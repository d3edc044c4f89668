#pragma once

#include <string>

#include "trisplat/ad/tensor.hpp"
#include "trisplat/core/random.hpp"
#include "trisplat/gaussian.hpp"
#include "trisplat/triplane.hpp"

namespace trisplat {

// Trunk + five-head MLP mapping a 3d-channel tri-plane sample to the raw
// 14-dim Gaussian parameter vector.
struct DecoderConfig {
  int feature_dim = 48;  // 3 * plane channels
  int hidden = 64;
  int layers = 4;  // trunk weight layers
  double leaky_slope = 0.01;
};

// Raw per-point head outputs, rows = points.
struct RawFields {
  ad::Tensor offset;    // [N,3]
  ad::Tensor color;     // [N,3]
  ad::Tensor opacity;   // [N,1]
  ad::Tensor scale;     // [N,3]
  ad::Tensor rotation;  // [N,4]
};

// Activated per-point Gaussian fields.
struct GaussianFields {
  ad::Tensor position;  // [N,3]
  ad::Tensor color;     // [N,3]
  ad::Tensor opacity;   // [N,1]
  ad::Tensor scale;     // [N,3]
  ad::Tensor rotation;  // [N,4] unit rows
};

class DecoderMLP {
 public:
  DecoderMLP() = default;
  DecoderMLP(DecoderConfig cfg, std::string prefix) : cfg_(cfg), prefix_(std::move(prefix)) {}

  const DecoderConfig& config() const { return cfg_; }
  const std::string& prefix() const { return prefix_; }

  // Fresh initialization: trunk He-scaled, offset head zero, rotation head
  // biased toward the identity quaternion, remaining heads small random.
  void init_params(ad::ParamStore& store, Rng& rng) const;

  ad::Tensor trunk_forward(ad::ParamBinder& bind, ad::Tensor features) const;
  ad::Tensor head_forward(ad::ParamBinder& bind, ad::Tensor trunk_out,
                          const std::string& head) const;
  RawFields forward(ad::ParamBinder& bind, ad::Tensor features) const;

 private:
  DecoderConfig cfg_;
  std::string prefix_ = "decoder";
};

// Copies trunk + color/opacity heads from src into dst (the volume-rendering
// pretraining seam); offset/scale/rotation heads keep dst's fresh values.
// Errors if the copied shapes disagree.
void transfer_nerf_heads(const ad::ParamStore& src, const std::string& src_prefix,
                         ad::ParamStore& dst, const std::string& dst_prefix);

// Tri-plane features for a fixed point set, as a graph op: rows = points,
// cols = 3*channels. Plane tensors must be [R*R, d].
ad::Tensor sample_features_op(const std::array<ad::Tensor, 3>& planes, int resolution,
                              const std::vector<Eigen::Vector3d>& points);

// Raw head outputs -> activated Gaussian fields (all tape ops, so gradients
// flow through every activation).
GaussianFields activate_fields(ad::Graph& g, const RawFields& raw,
                               const std::vector<Eigen::Vector3d>& p0,
                               const ActivationConfig& cfg);

// Inference-path decode: one Gaussian per grid point, grid order.
GaussianCloud decode_cloud(const TriPlane& tri, const DecoderMLP& mlp,
                           const ad::ParamStore& store, const InitGrid& grid,
                           const ActivationConfig& cfg);

// Extracts a value-level cloud from activated field tensors.
GaussianCloud fields_to_cloud(const GaussianFields& f);

}  // namespace trisplat
