#pragma once

#include "trisplat/decoder.hpp"
#include "trisplat/encoder.hpp"
#include "trisplat/gaussian.hpp"
#include "trisplat/triplane.hpp"

namespace trisplat {

// Full reconstructor configuration: views -> tri-plane -> Gaussians.
struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
  ActivationConfig activation;
  int grid_n = 16;

  ModelConfig() { decoder.feature_dim = 3 * encoder.plane_channels; }
  void validate() const {
    encoder.validate();
    activation.validate();
    TS_CHECK(decoder.feature_dim == 3 * encoder.plane_channels,
             "ModelConfig: decoder input must equal 3 * plane channels");
    TS_CHECK(grid_n >= 1, "ModelConfig: grid_n must be positive");
  }
};

struct ReconModel {
  ModelConfig cfg;
  ViewEncoder encoder;
  DecoderMLP decoder;
  InitGrid grid;

  explicit ReconModel(const ModelConfig& c)
      : cfg(c), encoder(c.encoder, "encoder"), decoder(c.decoder, "decoder"),
        grid(make_init_grid(c.grid_n)) {
    cfg.validate();
  }

  void init_params(ad::ParamStore& store, Rng& rng) const {
    encoder.init_params(store, rng);
    decoder.init_params(store, rng);
  }

  // Feed-forward reconstruction (no gradients).
  GaussianCloud reconstruct(const std::vector<PosedView>& views,
                            const ad::ParamStore& store) const {
    TriPlane tri = encode_views(views, encoder, store);
    return decode_cloud(tri, decoder, store, grid, cfg.activation);
  }
};

}  // namespace trisplat
