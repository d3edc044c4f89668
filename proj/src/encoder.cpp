#include "trisplat/encoder.hpp"

#include <cmath>

namespace trisplat {

using ad::Tensor;

namespace {

Eigen::ArrayXd normal_array(Rng& rng, int n, double stddev) {
  Eigen::ArrayXd a(n);
  for (int i = 0; i < n; ++i) a[i] = rand_normal(rng, 0.0, stddev);
  return a;
}

void add_linear(ad::ParamStore& s, Rng& rng, const std::string& base, int in, int out) {
  s.add(base + ".w", in, out, normal_array(rng, in * out, 1.0 / std::sqrt(in)), true);
  s.add(base + ".b", 1, out, Eigen::ArrayXd::Zero(out), false);
}

void add_layer_norm(ad::ParamStore& s, const std::string& base, int dim) {
  s.add(base + ".g", 1, dim, Eigen::ArrayXd::Ones(dim), false);
  s.add(base + ".b", 1, dim, Eigen::ArrayXd::Zero(dim), false);
}

void add_attention(ad::ParamStore& s, Rng& rng, const std::string& base, int dim) {
  add_linear(s, rng, base + ".q", dim, dim);
  add_linear(s, rng, base + ".k", dim, dim);
  add_linear(s, rng, base + ".v", dim, dim);
  add_linear(s, rng, base + ".o", dim, dim);
}

Tensor linear(ad::ParamBinder& bind, const std::string& base, Tensor x) {
  return ad::add_rowvec(ad::matmul(x, bind(base + ".w")), bind(base + ".b"));
}

}  // namespace

void ViewEncoder::init_params(ad::ParamStore& store, Rng& rng) const {
  const int d = cfg_.dim;
  const int patch_dim = cfg_.patch_size * cfg_.patch_size * 4;  // RGBA patches
  add_linear(store, rng, prefix_ + ".patch", patch_dim, d);
  store.add(prefix_ + ".pos", cfg_.patches_per_view(), d,
            normal_array(rng, cfg_.patches_per_view() * d, 0.02), true);
  add_linear(store, rng, prefix_ + ".cam.0", 20, d);
  add_linear(store, rng, prefix_ + ".cam.1", d, d);
  add_linear(store, rng, prefix_ + ".adain.gamma", d, d);
  add_linear(store, rng, prefix_ + ".adain.beta", d, d);
  for (int l = 0; l < cfg_.enc_layers; ++l) {
    const std::string base = prefix_ + ".enc." + std::to_string(l);
    add_layer_norm(store, base + ".ln1", d);
    add_attention(store, rng, base + ".attn", d);
    add_layer_norm(store, base + ".ln2", d);
    add_linear(store, rng, base + ".mlp.0", d, 4 * d);
    add_linear(store, rng, base + ".mlp.1", 4 * d, d);
  }
  store.add(prefix_ + ".tri.query", cfg_.plane_tokens(), d,
            normal_array(rng, cfg_.plane_tokens() * d, 0.02), true);
  for (int l = 0; l < cfg_.tri_layers; ++l) {
    const std::string base = prefix_ + ".tri." + std::to_string(l);
    add_layer_norm(store, base + ".lnq", d);
    add_layer_norm(store, base + ".lnkv", d);
    add_attention(store, rng, base + ".cross", d);
    add_layer_norm(store, base + ".ln2", d);
    add_attention(store, rng, base + ".self", d);
    add_layer_norm(store, base + ".ln3", d);
    add_linear(store, rng, base + ".mlp.0", d, 4 * d);
    add_linear(store, rng, base + ".mlp.1", 4 * d, d);
  }
  add_layer_norm(store, prefix_ + ".tri.final_ln", d);
  const int out_dim = cfg_.plane_patch * cfg_.plane_patch * cfg_.plane_channels;
  store.add(prefix_ + ".tri.head.w", d, out_dim,
            normal_array(rng, d * out_dim, 0.02 / std::sqrt(d)), true);
  store.add(prefix_ + ".tri.head.b", 1, out_dim, Eigen::ArrayXd::Zero(out_dim), false);
}

Tensor ViewEncoder::layer_norm(ad::ParamBinder& bind, const std::string& base, Tensor x) const {
  return ad::add_rowvec(ad::mul_rowvec(ad::layer_norm_rows(x), bind(base + ".g")),
                        bind(base + ".b"));
}

Tensor ViewEncoder::attention(ad::ParamBinder& bind, const std::string& base, Tensor q_in,
                              Tensor kv_in) const {
  const int d = cfg_.dim;
  const int dh = d / cfg_.heads;
  Tensor q = linear(bind, base + ".q", q_in);
  Tensor k = linear(bind, base + ".k", kv_in);
  Tensor v = linear(bind, base + ".v", kv_in);
  std::vector<Tensor> head_out;
  head_out.reserve(cfg_.heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int h = 0; h < cfg_.heads; ++h) {
    Tensor qh = ad::slice_cols(q, h * dh, (h + 1) * dh);
    Tensor kh = ad::slice_cols(k, h * dh, (h + 1) * dh);
    Tensor vh = ad::slice_cols(v, h * dh, (h + 1) * dh);
    Tensor scores = ad::scale(ad::matmul_nt(qh, kh), scale);
    head_out.push_back(ad::matmul(ad::softmax_rows(scores), vh));
  }
  return linear(bind, base + ".o", ad::concat_cols(head_out));
}

Tensor ViewEncoder::mlp_block(ad::ParamBinder& bind, const std::string& base, Tensor x) const {
  return linear(bind, base + ".mlp.1", ad::gelu(linear(bind, base + ".mlp.0", x)));
}

Tensor ViewEncoder::camera_feature(ad::Graph& g, ad::ParamBinder& bind, const Camera& cam) const {
  CameraVec cv = camera_to_vec(cam);
  Eigen::ArrayXd flat(20);
  for (int i = 0; i < 20; ++i) flat[i] = cv[i];
  Tensor x = g.constant(1, 20, std::move(flat));
  x = ad::gelu(linear(bind, prefix_ + ".cam.0", x));
  return linear(bind, prefix_ + ".cam.1", x);
}

Tensor ViewEncoder::tokenize_view(ad::Graph& g, ad::ParamBinder& bind,
                                  const PosedView& view) const {
  const Image& img = view.image;
  TS_CHECK(img.width == cfg_.image_size && img.height == cfg_.image_size && img.channels == 4,
           "tokenize_view: image does not match encoder config");
  const int ps = cfg_.patch_size;
  const int side = cfg_.image_size / ps;
  const int patch_dim = ps * ps * 4;
  Eigen::ArrayXd patches(static_cast<Eigen::Index>(side) * side * patch_dim);
  for (int tyx = 0; tyx < side * side; ++tyx) {
    const int ty = tyx / side, tx = tyx % side;
    double* dst = patches.data() + static_cast<Eigen::Index>(tyx) * patch_dim;
    for (int dy = 0; dy < ps; ++dy)
      for (int dx = 0; dx < ps; ++dx)
        for (int c = 0; c < 4; ++c)
          dst[(dy * ps + dx) * 4 + c] = img.at(tx * ps + dx, ty * ps + dy, c);
  }
  Tensor x = linear(bind, prefix_ + ".patch",
                    g.constant(side * side, patch_dim, std::move(patches)));
  x = ad::add(x, bind(prefix_ + ".pos"));

  Tensor cam_feat = camera_feature(g, bind, view.camera);
  Tensor gamma = linear(bind, prefix_ + ".adain.gamma", cam_feat);
  Tensor beta = linear(bind, prefix_ + ".adain.beta", cam_feat);
  x = ad::add_rowvec(ad::mul_rowvec(x, ad::add_scalar(gamma, 1.0)), beta);

  return ad::concat_rows({x, cam_feat});  // P patch tokens + 1 camera token
}

std::array<Tensor, 3> ViewEncoder::forward(ad::Graph& g, ad::ParamBinder& bind,
                                           const std::vector<PosedView>& views) const {
  TS_CHECK(!views.empty(), "encode_views: empty view list");
  TS_CHECK(static_cast<int>(views.size()) <= cfg_.max_views,
           "encode_views: more views than max_views");
  std::vector<Tensor> segments;
  segments.reserve(views.size());
  for (const PosedView& v : views) {
    Tensor x = tokenize_view(g, bind, v);
    // Per-view self-attention stack (no cross-view positional encoding, so
    // the view set stays order-free).
    for (int l = 0; l < cfg_.enc_layers; ++l) {
      const std::string base = prefix_ + ".enc." + std::to_string(l);
      Tensor n1 = layer_norm(bind, base + ".ln1", x);
      x = ad::add(x, attention(bind, base + ".attn", n1, n1));
      x = ad::add(x, mlp_block(bind, base, layer_norm(bind, base + ".ln2", x)));
    }
    segments.push_back(x);
  }
  Tensor kv = segments.size() == 1 ? segments[0] : ad::concat_rows(segments);

  Tensor q = bind(prefix_ + ".tri.query");
  for (int l = 0; l < cfg_.tri_layers; ++l) {
    const std::string base = prefix_ + ".tri." + std::to_string(l);
    q = ad::add(q, attention(bind, base + ".cross", layer_norm(bind, base + ".lnq", q),
                             layer_norm(bind, base + ".lnkv", kv)));
    Tensor n2 = layer_norm(bind, base + ".ln2", q);
    q = ad::add(q, attention(bind, base + ".self", n2, n2));
    q = ad::add(q, mlp_block(bind, base, layer_norm(bind, base + ".ln3", q)));
  }
  q = layer_norm(bind, prefix_ + ".tri.final_ln", q);
  Tensor head = ad::add_rowvec(ad::matmul(q, bind(prefix_ + ".tri.head.w")),
                               bind(prefix_ + ".tri.head.b"));

  // Unfold query tokens into the three feature planes. Token t of a plane
  // covers the plane_patch x plane_patch texel block (ty*pp+dy, tx*pp+dx);
  // after reshaping rows to [T*T*pp*pp, d], texel (ix,iy) is a pure row pick.
  const int t_side = cfg_.plane_token_side();
  const int pp = cfg_.plane_patch;
  const int r = cfg_.plane_res;
  const int d = cfg_.plane_channels;
  std::array<Tensor, 3> planes;
  for (int k = 0; k < 3; ++k) {
    Tensor part = ad::slice_rows(head, k * t_side * t_side, (k + 1) * t_side * t_side);
    Tensor rows = ad::reshape(part, t_side * t_side * pp * pp, d);
    std::vector<std::vector<ad::Tap>> taps(static_cast<size_t>(r) * r);
    for (int iy = 0; iy < r; ++iy)
      for (int ix = 0; ix < r; ++ix) {
        const int t = (iy / pp) * t_side + (ix / pp);
        const int sub = (iy % pp) * pp + (ix % pp);
        taps[static_cast<size_t>(iy) * r + ix] = {ad::Tap{t * pp * pp + sub, 1.0}};
      }
    planes[k] = ad::weighted_gather_rows(rows, taps);
  }
  return planes;
}

TriPlane encode_views(const std::vector<PosedView>& views, const ViewEncoder& encoder,
                      const ad::ParamStore& store) {
  ad::Graph g(/*grad_enabled=*/false);
  ad::ParamBinder bind(g, store);
  auto planes = encoder.forward(g, bind, views);
  const EncoderConfig& cfg = encoder.config();
  TriPlane tri(cfg.plane_res, cfg.plane_channels);
  for (int k = 0; k < 3; ++k) {
    const Eigen::ArrayXd& v = planes[k].value();
    for (int row = 0; row < cfg.plane_res * cfg.plane_res; ++row)
      for (int c = 0; c < cfg.plane_channels; ++c)
        tri.planes[k](row, c) = v[static_cast<Eigen::Index>(row) * cfg.plane_channels + c];
  }
  tri.validate();
  return tri;
}

}  // namespace trisplat
