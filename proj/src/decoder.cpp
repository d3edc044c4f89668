#include "trisplat/decoder.hpp"

namespace trisplat {

using ad::Tensor;

namespace {

Eigen::ArrayXd normal_array(Rng& rng, int n, double stddev) {
  Eigen::ArrayXd a(n);
  for (int i = 0; i < n; ++i) a[i] = rand_normal(rng, 0.0, stddev);
  return a;
}

struct HeadDef {
  const char* name;
  int dim;
};
constexpr HeadDef kHeads[] = {{"offset", 3}, {"color", 3}, {"opacity", 1}, {"scale", 3},
                              {"rotation", 4}};

}  // namespace

void DecoderMLP::init_params(ad::ParamStore& store, Rng& rng) const {
  int in = cfg_.feature_dim;
  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string base = prefix_ + ".trunk." + std::to_string(l);
    double std = std::sqrt(2.0 / in);
    store.add(base + ".w", in, cfg_.hidden, normal_array(rng, in * cfg_.hidden, std), true);
    store.add(base + ".b", 1, cfg_.hidden, Eigen::ArrayXd::Zero(cfg_.hidden), false);
    in = cfg_.hidden;
  }
  for (const HeadDef& h : kHeads) {
    const std::string base = prefix_ + ".head." + h.name;
    const bool zero_weights = std::string(h.name) == "offset";
    Eigen::ArrayXd w = zero_weights ? Eigen::ArrayXd::Zero(cfg_.hidden * h.dim)
                                    : normal_array(rng, cfg_.hidden * h.dim, 0.01);
    Eigen::ArrayXd b = Eigen::ArrayXd::Zero(h.dim);
    if (std::string(h.name) == "rotation") b[0] = 1.0;  // identity quaternion direction
    store.add(base + ".w", cfg_.hidden, h.dim, std::move(w), true);
    store.add(base + ".b", 1, h.dim, std::move(b), false);
  }
}

Tensor DecoderMLP::trunk_forward(ad::ParamBinder& bind, Tensor features) const {
  TS_CHECK(features.cols() == cfg_.feature_dim,
           "DecoderMLP: feature dim mismatch (plane channels vs trunk input)");
  Tensor h = features;
  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string base = prefix_ + ".trunk." + std::to_string(l);
    h = ad::add_rowvec(ad::matmul(h, bind(base + ".w")), bind(base + ".b"));
    h = ad::leaky_relu(h, cfg_.leaky_slope);
  }
  return h;
}

Tensor DecoderMLP::head_forward(ad::ParamBinder& bind, Tensor trunk_out,
                                const std::string& head) const {
  const std::string base = prefix_ + ".head." + head;
  return ad::add_rowvec(ad::matmul(trunk_out, bind(base + ".w")), bind(base + ".b"));
}

RawFields DecoderMLP::forward(ad::ParamBinder& bind, Tensor features) const {
  Tensor h = trunk_forward(bind, features);
  return RawFields{head_forward(bind, h, "offset"), head_forward(bind, h, "color"),
                   head_forward(bind, h, "opacity"), head_forward(bind, h, "scale"),
                   head_forward(bind, h, "rotation")};
}

void transfer_nerf_heads(const ad::ParamStore& src, const std::string& src_prefix,
                         ad::ParamStore& dst, const std::string& dst_prefix) {
  std::vector<std::string> stems;
  for (const auto& [name, entry] : src.entries) {
    (void)entry;
    if (name.rfind(src_prefix + ".trunk.", 0) == 0 ||
        name.rfind(src_prefix + ".head.color.", 0) == 0 ||
        name.rfind(src_prefix + ".head.opacity.", 0) == 0)
      stems.push_back(name.substr(src_prefix.size()));
  }
  TS_CHECK(!stems.empty(), "transfer_nerf_heads: source has no transferable tensors");
  for (const std::string& stem : stems) {
    const ad::ParamEntry& s = src.at(src_prefix + stem);
    ad::ParamEntry& d = dst.at(dst_prefix + stem);
    TS_CHECK(s.rows == d.rows && s.cols == d.cols,
             "transfer_nerf_heads: shape mismatch at " + stem);
    d.value = s.value;
  }
}

Tensor sample_features_op(const std::array<Tensor, 3>& planes, int resolution,
                          const std::vector<Eigen::Vector3d>& points) {
  std::array<std::vector<std::vector<ad::Tap>>, 3> taps;
  for (auto& t : taps) t.reserve(points.size());
  for (const Eigen::Vector3d& p : points) {
    auto coords = plane_coords(p);
    for (int k = 0; k < 3; ++k) {
      auto corner = bilinear_taps(coords[k][0], coords[k][1], resolution);
      std::vector<ad::Tap> row;
      row.reserve(4);
      for (const PlaneTap& c : corner) row.push_back(ad::Tap{c.row, c.weight});
      taps[k].push_back(std::move(row));
    }
  }
  std::vector<Tensor> parts;
  for (int k = 0; k < 3; ++k) parts.push_back(ad::weighted_gather_rows(planes[k], taps[k]));
  return ad::concat_cols(parts);
}

GaussianFields activate_fields(ad::Graph& g, const RawFields& raw,
                               const std::vector<Eigen::Vector3d>& p0,
                               const ActivationConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(p0.size());
  TS_CHECK(raw.offset.rows() == n, "activate_fields: point count mismatch");
  Eigen::ArrayXd p0_scaled(static_cast<Eigen::Index>(n) * 3);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) {
      TS_CHECK(p0[i][k] >= -1.0 && p0[i][k] <= 1.0, "activate_fields: p0 outside [-1,1]");
      p0_scaled[static_cast<Eigen::Index>(i) * 3 + k] = cfg.alpha * p0[i][k];
    }
  Tensor base = g.constant(n, 3, std::move(p0_scaled));

  GaussianFields f;
  f.position = ad::add(base, ad::scale(ad::tanh_op(raw.offset), 1.0 - cfg.alpha));
  f.color = ad::add_scalar(ad::scale(ad::sigmoid(raw.color), cfg.color_gain), -cfg.color_bias);
  f.opacity = ad::sigmoid(ad::add_scalar(raw.opacity, -cfg.opacity_shift));
  f.scale = ad::clamp(ad::sigmoid(ad::add_scalar(raw.scale, -cfg.scale_shift)), cfg.scale_min,
                      cfg.scale_max);
  f.rotation = ad::l2_normalize_rows(raw.rotation);
  return f;
}

GaussianCloud fields_to_cloud(const GaussianFields& f) {
  const int n = f.position.rows();
  GaussianCloud cloud;
  cloud.gaussians.resize(n);
  const Eigen::ArrayXd& pos = f.position.value();
  const Eigen::ArrayXd& col = f.color.value();
  const Eigen::ArrayXd& opa = f.opacity.value();
  const Eigen::ArrayXd& scl = f.scale.value();
  const Eigen::ArrayXd& rot = f.rotation.value();
  for (int i = 0; i < n; ++i) {
    Gaussian& gs = cloud.gaussians[i];
    for (int k = 0; k < 3; ++k) {
      gs.position[k] = pos[i * 3 + k];
      gs.color[k] = col[i * 3 + k];
      gs.scale[k] = scl[i * 3 + k];
    }
    gs.opacity = opa[i];
    for (int k = 0; k < 4; ++k) gs.rotation[k] = rot[i * 4 + k];
  }
  return cloud;
}

GaussianCloud decode_cloud(const TriPlane& tri, const DecoderMLP& mlp,
                           const ad::ParamStore& store, const InitGrid& grid,
                           const ActivationConfig& cfg) {
  tri.validate();
  TS_CHECK(mlp.config().feature_dim == tri.feature_dim(),
           "decode_cloud: tri-plane feature dim does not match decoder input");
  ad::Graph g(/*grad_enabled=*/false);
  std::array<Tensor, 3> planes;
  for (int k = 0; k < 3; ++k) {
    Eigen::ArrayXd flat(tri.planes[k].size());
    for (Eigen::Index r = 0; r < tri.planes[k].rows(); ++r)
      for (Eigen::Index c = 0; c < tri.planes[k].cols(); ++c)
        flat[r * tri.channels + c] = tri.planes[k](r, c);
    planes[k] = g.constant(tri.resolution * tri.resolution, tri.channels, std::move(flat));
  }
  ad::ParamBinder bind(g, store);
  Tensor features = sample_features_op(planes, tri.resolution, grid.positions);
  RawFields raw = mlp.forward(bind, features);
  GaussianFields fields = activate_fields(g, raw, grid.positions, cfg);
  return fields_to_cloud(fields);
}

}  // namespace trisplat
