#pragma once

#include <string>
#include <vector>

#include "trisplat/ad/tensor.hpp"
#include "trisplat/camera.hpp"
#include "trisplat/core/random.hpp"
#include "trisplat/triplane.hpp"

namespace trisplat {

struct EncoderConfig {
  int image_size = 64;
  int patch_size = 8;
  int dim = 64;          // token width D
  int enc_layers = 2;    // per-view self-attention layers
  int tri_layers = 2;    // tri-plane token transformer layers
  int heads = 4;
  int plane_res = 32;    // R
  int plane_channels = 16;  // d
  int plane_patch = 4;   // plane texels covered per query token side
  int max_views = 32;

  int patches_per_view() const {
    return (image_size / patch_size) * (image_size / patch_size);
  }
  int tokens_per_view() const { return patches_per_view() + 1; }  // + camera token
  int plane_token_side() const { return plane_res / plane_patch; }
  int plane_tokens() const { return 3 * plane_token_side() * plane_token_side(); }

  void validate() const {
    TS_CHECK(image_size % patch_size == 0, "EncoderConfig: image_size % patch_size != 0");
    TS_CHECK(dim % heads == 0, "EncoderConfig: dim % heads != 0");
    TS_CHECK(plane_res % plane_patch == 0, "EncoderConfig: plane_res % plane_patch != 0");
    TS_CHECK(max_views >= 1, "EncoderConfig: max_views < 1");
  }
};

// Variable-view transformer: per view, linear patch embedding + learned 2-D
// positional encoding, AdaIN modulation by the camera embedding, and the same
// embedding appended as an explicit camera token; learnable tri-plane query
// tokens then cross-attend to the concatenation of all view tokens. No
// positional encoding spans views, so the output is permutation-invariant
// over the input set (up to float reduction order).
class ViewEncoder {
 public:
  ViewEncoder() = default;
  ViewEncoder(EncoderConfig cfg, std::string prefix) : cfg_(cfg), prefix_(std::move(prefix)) {
    cfg_.validate();
  }

  const EncoderConfig& config() const { return cfg_; }
  const std::string& prefix() const { return prefix_; }

  void init_params(ad::ParamStore& store, Rng& rng) const;

  // One view's token segment: P patch tokens then 1 camera token.
  ad::Tensor tokenize_view(ad::Graph& g, ad::ParamBinder& bind, const PosedView& view) const;

  // Full forward to the three plane tensors, each [R*R, d].
  std::array<ad::Tensor, 3> forward(ad::Graph& g, ad::ParamBinder& bind,
                                    const std::vector<PosedView>& views) const;

 private:
  ad::Tensor camera_feature(ad::Graph& g, ad::ParamBinder& bind, const Camera& cam) const;
  ad::Tensor attention(ad::ParamBinder& bind, const std::string& base, ad::Tensor q_in,
                       ad::Tensor kv_in) const;
  ad::Tensor mlp_block(ad::ParamBinder& bind, const std::string& base, ad::Tensor x) const;
  ad::Tensor layer_norm(ad::ParamBinder& bind, const std::string& base, ad::Tensor x) const;

  EncoderConfig cfg_;
  std::string prefix_ = "encoder";
};

// Inference wrapper building a throwaway graph; used by the reconstruct path
// and tests. Errors on an empty view list or |views| > max_views.
TriPlane encode_views(const std::vector<PosedView>& views, const ViewEncoder& encoder,
                      const ad::ParamStore& store);

}  // namespace trisplat
