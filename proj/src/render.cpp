#include "trisplat/render.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace trisplat {

namespace {

// Projection intermediates kept for the backward pass.
struct Proj {
  bool valid = false;
  Eigen::Vector2d mean;     // pixel coordinates
  Eigen::Matrix2d cov;      // floored 2-D covariance
  Eigen::Matrix2d inv_cov;
  double depth = 0.0;
  double radius = 0.0;      // cutoff_sigma * sqrt(max eigenvalue)
  Eigen::Vector3d t;        // camera-space mean
  Eigen::Matrix3d rot;      // R(q_hat)
  Eigen::Vector4d q_hat;    // normalized quaternion
  double q_norm = 1.0;
  Eigen::Matrix<double, 2, 3> jac;
  Eigen::Matrix3d sigma_cam;
  Eigen::Vector3d clamped_color;
  std::array<bool, 3> color_clamped{};
};

struct FieldView {
  const double* pos;
  const double* col;
  const double* opa;
  const double* scl;
  const double* rot;
  int n;
};

Eigen::Matrix3d quat_to_rot(const Eigen::Vector4d& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Matrix3d r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Proj project_fields(const FieldView& f, int i, const Camera& cam, const RasterizeOptions& opt) {
  Proj p;
  const Eigen::Vector3d mean3(f.pos[i * 3], f.pos[i * 3 + 1], f.pos[i * 3 + 2]);
  const Eigen::Matrix3d w_rot = cam.rotation();
  p.t = w_rot * mean3 + cam.translation();
  if (p.t.z() <= opt.near) return p;  // cullable

  Eigen::Vector4d q(f.rot[i * 4], f.rot[i * 4 + 1], f.rot[i * 4 + 2], f.rot[i * 4 + 3]);
  p.q_norm = q.norm();
  TS_CHECK(p.q_norm > 1e-12, "rasterize: zero quaternion");
  p.q_hat = q / p.q_norm;
  p.rot = quat_to_rot(p.q_hat);

  const Eigen::Vector3d s(f.scl[i * 3], f.scl[i * 3 + 1], f.scl[i * 3 + 2]);
  Eigen::Matrix3d n = p.rot * s.asDiagonal();
  Eigen::Matrix3d sigma3d = n * n.transpose();
  p.sigma_cam = w_rot * sigma3d * w_rot.transpose();

  const double z = p.t.z();
  p.jac.setZero();
  p.jac(0, 0) = cam.fx / z;
  p.jac(0, 2) = -cam.fx * p.t.x() / (z * z);
  p.jac(1, 1) = cam.fy / z;
  p.jac(1, 2) = -cam.fy * p.t.y() / (z * z);

  p.cov = p.jac * p.sigma_cam * p.jac.transpose();
  p.cov(0, 0) += opt.cov_floor;
  p.cov(1, 1) += opt.cov_floor;

  const double det = p.cov(0, 0) * p.cov(1, 1) - p.cov(0, 1) * p.cov(1, 0);
  TS_CHECK(det > 0.0, "rasterize: degenerate projected covariance");
  p.inv_cov << p.cov(1, 1) / det, -p.cov(0, 1) / det, -p.cov(1, 0) / det, p.cov(0, 0) / det;

  const double mid = 0.5 * (p.cov(0, 0) + p.cov(1, 1));
  const double lam_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
  p.radius = opt.cutoff_sigma * std::sqrt(lam_max);

  p.mean = Eigen::Vector2d(cam.fx * p.t.x() / z + cam.cx, cam.fy * p.t.y() / z + cam.cy);
  p.depth = z;

  for (int c = 0; c < 3; ++c) {
    double v = f.col[i * 3 + c];
    p.color_clamped[c] = (v < 0.0 || v > 1.0);
    p.clamped_color[c] = std::clamp(v, 0.0, 1.0);
  }
  p.valid = true;
  return p;
}

struct Entry {
  int pixel;
  double depth;
  int idx;
};

// Builds the depth-sorted per-pixel splat lists (one flat array sorted by
// (pixel, depth, idx)) plus per-pixel run offsets.
void build_entries(const std::vector<Proj>& proj, const Camera& cam,
                   std::vector<Entry>& entries, std::vector<int>& offsets) {
  const int w = cam.width, h = cam.height;
  entries.clear();
  for (int i = 0; i < static_cast<int>(proj.size()); ++i) {
    const Proj& p = proj[i];
    if (!p.valid) continue;
    int x0 = std::max(0, static_cast<int>(std::floor(p.mean.x() - p.radius - 0.5)));
    int x1 = std::min(w - 1, static_cast<int>(std::ceil(p.mean.x() + p.radius - 0.5)));
    int y0 = std::max(0, static_cast<int>(std::floor(p.mean.y() - p.radius - 0.5)));
    int y1 = std::min(h - 1, static_cast<int>(std::ceil(p.mean.y() + p.radius - 0.5)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) entries.push_back(Entry{y * w + x, p.depth, i});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.pixel != b.pixel) return a.pixel < b.pixel;
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.idx < b.idx;
  });
  offsets.assign(static_cast<size_t>(w) * h + 1, 0);
  for (const Entry& e : entries) offsets[e.pixel + 1]++;
  for (size_t i = 1; i < offsets.size(); ++i) offsets[i] += offsets[i - 1];
}

void composite_pixels(const std::vector<Proj>& proj, const FieldView& f,
                      const std::vector<Entry>& entries, const std::vector<int>& offsets,
                      const Eigen::Vector3d& bg, const RasterizeOptions& opt, int width,
                      int pix0, int pix1, RenderedImage& out) {
  for (int pix = pix0; pix < pix1; ++pix) {
    const int px = pix % width, py = pix / width;
    const Eigen::Vector2d center(px + 0.5, py + 0.5);
    double trans = 1.0;
    Eigen::Vector3d color = Eigen::Vector3d::Zero();
    for (int e = offsets[pix]; e < offsets[pix + 1]; ++e) {
      const Proj& p = proj[entries[e].idx];
      const Eigen::Vector2d d = center - p.mean;
      const double power = -0.5 * d.dot(p.inv_cov * d);
      double a = f.opa[entries[e].idx] * std::exp(power);
      if (a < opt.contrib_min) continue;
      a = std::min(a, opt.alpha_max);
      color += trans * a * p.clamped_color;
      trans *= 1.0 - a;
      if (trans < opt.transmittance_min) break;
    }
    for (int c = 0; c < 3; ++c) out.rgb[static_cast<size_t>(pix) * 3 + c] = color[c] + trans * bg[c];
    out.alpha[pix] = 1.0 - trans;
  }
}

RenderedImage rasterize_fields(const FieldView& f, const Camera& cam, const Eigen::Vector3d& bg,
                               const RasterizeOptions& opt, std::vector<Proj>* proj_out,
                               std::vector<Entry>* entries_out, std::vector<int>* offsets_out) {
  cam.validate();
  std::vector<Proj> proj(f.n);
  for (int i = 0; i < f.n; ++i) proj[i] = project_fields(f, i, cam, opt);
  std::vector<Entry> entries;
  std::vector<int> offsets;
  build_entries(proj, cam, entries, offsets);

  RenderedImage out(cam.width, cam.height);
  const int total = cam.width * cam.height;
  const int nthreads = std::max(1, std::min(opt.threads, total));
  if (nthreads == 1) {
    composite_pixels(proj, f, entries, offsets, bg, opt, cam.width, 0, total, out);
  } else {
    std::vector<std::thread> workers;
    const int chunk = (total + nthreads - 1) / nthreads;
    for (int t = 0; t < nthreads; ++t) {
      const int p0 = t * chunk, p1 = std::min(total, p0 + chunk);
      if (p0 >= p1) break;
      workers.emplace_back([&, p0, p1]() {
        composite_pixels(proj, f, entries, offsets, bg, opt, cam.width, p0, p1, out);
      });
    }
    for (auto& w : workers) w.join();
  }

  if (proj_out) *proj_out = std::move(proj);
  if (entries_out) *entries_out = std::move(entries);
  if (offsets_out) *offsets_out = std::move(offsets);
  return out;
}

// dR/dq entries for a unit quaternion (w,x,y,z).
std::array<Eigen::Matrix3d, 4> rot_quat_jacobian(const Eigen::Vector4d& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  std::array<Eigen::Matrix3d, 4> j;
  j[0] << 0, -2 * z, 2 * y, 2 * z, 0, -2 * x, -2 * y, 2 * x, 0;
  j[1] << 0, 2 * y, 2 * z, 2 * y, -4 * x, -2 * w, 2 * z, 2 * w, -4 * x;
  j[2] << -4 * y, 2 * x, 2 * w, 2 * x, 0, 2 * z, -2 * w, 2 * z, -4 * y;
  j[3] << -4 * z, -2 * w, 2 * x, 2 * w, -4 * z, 2 * y, 2 * x, 2 * y, 0;
  return j;
}

struct FieldGrads {
  Eigen::ArrayXd pos, col, opa, scl, rot;
  explicit FieldGrads(int n)
      : pos(Eigen::ArrayXd::Zero(n * 3)), col(Eigen::ArrayXd::Zero(n * 3)),
        opa(Eigen::ArrayXd::Zero(n)), scl(Eigen::ArrayXd::Zero(n * 3)),
        rot(Eigen::ArrayXd::Zero(n * 4)) {}
};

FieldGrads rasterize_fields_grad(const FieldView& f, const Camera& cam, const Eigen::Vector3d& bg,
                                 const Eigen::ArrayXd& adjoint, const RasterizeOptions& opt) {
  TS_CHECK(adjoint.size() == static_cast<Eigen::Index>(cam.width) * cam.height * 4,
           "rasterize_grad: adjoint size mismatch");
  TS_CHECK(adjoint.allFinite(), "rasterize_grad: non-finite adjoint");

  std::vector<Proj> proj;
  std::vector<Entry> entries;
  std::vector<int> offsets;
  rasterize_fields(f, cam, bg, opt, &proj, &entries, &offsets);

  FieldGrads grads(f.n);
  // Per-Gaussian screen-space accumulators.
  std::vector<Eigen::Vector2d> d_mean(f.n, Eigen::Vector2d::Zero());
  std::vector<Eigen::Matrix2d> d_invcov(f.n, Eigen::Matrix2d::Zero());
  std::vector<char> touched(f.n, 0);

  struct Contrib {
    int idx;
    double alpha;
    double trans_before;
    bool alpha_clamped;
  };
  std::vector<Contrib> stack;

  const int total = cam.width * cam.height;
  for (int pix = 0; pix < total; ++pix) {
    const int px = pix % cam.width, py = pix / cam.width;
    const Eigen::Vector2d center(px + 0.5, py + 0.5);
    const Eigen::Vector3d go_rgb(adjoint[static_cast<Eigen::Index>(pix) * 4],
                                 adjoint[static_cast<Eigen::Index>(pix) * 4 + 1],
                                 adjoint[static_cast<Eigen::Index>(pix) * 4 + 2]);
    const double go_alpha = adjoint[static_cast<Eigen::Index>(pix) * 4 + 3];
    if (go_rgb.isZero(0.0) && go_alpha == 0.0) continue;

    // Re-walk the forward compositing to collect accepted contributors.
    stack.clear();
    double trans = 1.0;
    for (int e = offsets[pix]; e < offsets[pix + 1]; ++e) {
      const int idx = entries[e].idx;
      const Proj& p = proj[idx];
      const Eigen::Vector2d d = center - p.mean;
      const double power = -0.5 * d.dot(p.inv_cov * d);
      double a = f.opa[idx] * std::exp(power);
      if (a < opt.contrib_min) continue;
      const bool clamped = a > opt.alpha_max;
      a = std::min(a, opt.alpha_max);
      stack.push_back(Contrib{idx, a, trans, clamped});
      trans *= 1.0 - a;
      if (trans < opt.transmittance_min) break;
    }

    // Reverse sweep: behind[k] = radiance already weighted behind contributor k.
    Eigen::Vector3d behind = trans * bg;
    const double trans_final = trans;
    for (int k = static_cast<int>(stack.size()) - 1; k >= 0; --k) {
      const Contrib& c = stack[k];
      const Proj& p = proj[c.idx];
      touched[c.idx] = 1;

      const Eigen::Vector3d weighted = c.trans_before * c.alpha * p.clamped_color;
      // Color gradient (zero where the forward clamp was active).
      for (int ch = 0; ch < 3; ++ch)
        if (!p.color_clamped[ch])
          grads.col[c.idx * 3 + ch] += go_rgb[ch] * c.trans_before * c.alpha;

      if (!c.alpha_clamped) {
        const double one_minus = 1.0 - c.alpha;
        double d_alpha = go_rgb.dot(c.trans_before * p.clamped_color - behind / one_minus) +
                         go_alpha * (trans_final / one_minus);
        // alpha = opacity * exp(power)
        const Eigen::Vector2d d = center - p.mean;
        const double power = -0.5 * d.dot(p.inv_cov * d);
        const double expp = std::exp(power);
        grads.opa[c.idx] += d_alpha * expp;
        const double d_power = d_alpha * c.alpha;
        const Eigen::Vector2d lam_d = p.inv_cov * d;
        d_mean[c.idx] += d_power * lam_d;  // d(power)/d(mean) = +Lambda d
        d_invcov[c.idx] += d_power * (-0.5) * (d * d.transpose());
      }
      behind += weighted;
    }
  }

  // Chain per-Gaussian screen-space gradients back to the 3-D parameters.
  const Eigen::Matrix3d w_rot = cam.rotation();
  for (int i = 0; i < f.n; ++i) {
    if (!touched[i] || !proj[i].valid) continue;
    const Proj& p = proj[i];

    // inv_cov -> cov
    const Eigen::Matrix2d d_cov = -p.inv_cov * d_invcov[i] * p.inv_cov;
    // cov = J * sigma_cam * J^T + floor*I
    const Eigen::Matrix3d d_sigma_cam = p.jac.transpose() * d_cov * p.jac;
    const Eigen::Matrix<double, 2, 3> d_jac = 2.0 * d_cov * p.jac * p.sigma_cam;

    // mean = (fx tx/tz + cx, fy ty/tz + cy)
    const double z = p.t.z(), x = p.t.x(), y = p.t.y();
    Eigen::Vector3d d_t = Eigen::Vector3d::Zero();
    d_t.x() += d_mean[i].x() * cam.fx / z;
    d_t.y() += d_mean[i].y() * cam.fy / z;
    d_t.z() += -d_mean[i].x() * cam.fx * x / (z * z) - d_mean[i].y() * cam.fy * y / (z * z);
    // J entries depend on t as well.
    d_t.x() += d_jac(0, 2) * (-cam.fx / (z * z));
    d_t.y() += d_jac(1, 2) * (-cam.fy / (z * z));
    d_t.z() += d_jac(0, 0) * (-cam.fx / (z * z)) + d_jac(0, 2) * (2.0 * cam.fx * x / (z * z * z)) +
               d_jac(1, 1) * (-cam.fy / (z * z)) + d_jac(1, 2) * (2.0 * cam.fy * y / (z * z * z));

    const Eigen::Vector3d d_pos = w_rot.transpose() * d_t;
    grads.pos[i * 3] += d_pos.x();
    grads.pos[i * 3 + 1] += d_pos.y();
    grads.pos[i * 3 + 2] += d_pos.z();

    // sigma_cam = W sigma3d W^T; sigma3d = N N^T with N = R diag(s)
    const Eigen::Matrix3d d_sigma3d = w_rot.transpose() * d_sigma_cam * w_rot;
    const Eigen::Vector3d s(f.scl[i * 3], f.scl[i * 3 + 1], f.scl[i * 3 + 2]);
    const Eigen::Matrix3d n_mat = p.rot * s.asDiagonal();
    const Eigen::Matrix3d d_n = 2.0 * d_sigma3d * n_mat;
    for (int b = 0; b < 3; ++b) {
      double acc = 0.0;
      for (int a = 0; a < 3; ++a) acc += d_n(a, b) * p.rot(a, b);
      grads.scl[i * 3 + b] += acc;
    }
    Eigen::Matrix3d d_rot_mat;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) d_rot_mat(a, b) = d_n(a, b) * s[b];

    const auto jq = rot_quat_jacobian(p.q_hat);
    Eigen::Vector4d d_qhat;
    for (int k = 0; k < 4; ++k) d_qhat[k] = (d_rot_mat.array() * jq[k].array()).sum();
    // Through the normalization q_hat = q / |q|.
    const Eigen::Vector4d d_q = (d_qhat - p.q_hat * p.q_hat.dot(d_qhat)) / p.q_norm;
    for (int k = 0; k < 4; ++k) grads.rot[i * 4 + k] += d_q[k];
  }
  return grads;
}

FieldView cloud_view(const GaussianCloud& cloud, std::vector<double>& buf) {
  const int n = static_cast<int>(cloud.count());
  buf.resize(static_cast<size_t>(n) * 14);
  double* pos = buf.data();
  double* col = pos + static_cast<size_t>(n) * 3;
  double* opa = col + static_cast<size_t>(n) * 3;
  double* scl = opa + n;
  double* rot = scl + static_cast<size_t>(n) * 3;
  for (int i = 0; i < n; ++i) {
    const Gaussian& g = cloud.gaussians[i];
    for (int k = 0; k < 3; ++k) {
      pos[i * 3 + k] = g.position[k];
      col[i * 3 + k] = g.color[k];
      scl[i * 3 + k] = g.scale[k];
    }
    opa[i] = g.opacity;
    for (int k = 0; k < 4; ++k) rot[i * 4 + k] = g.rotation[k];
  }
  return FieldView{pos, col, opa, scl, rot, n};
}

}  // namespace

ProjectedGaussian project_gaussian(const Gaussian& g, const Camera& cam,
                                   const RasterizeOptions& opt) {
  GaussianCloud one;
  one.gaussians.push_back(g);
  std::vector<double> buf;
  FieldView f = cloud_view(one, buf);
  Proj p = project_fields(f, 0, cam, opt);
  ProjectedGaussian out;
  out.cullable = !p.valid;
  if (p.valid) {
    out.mean2d = p.mean;
    out.cov2d = p.cov;
    out.depth = p.depth;
  }
  return out;
}

RenderedImage rasterize(const GaussianCloud& cloud, const Camera& cam,
                        const Eigen::Vector3d& background, const RasterizeOptions& opt) {
  std::vector<double> buf;
  FieldView f = cloud_view(cloud, buf);
  return rasterize_fields(f, cam, background, opt, nullptr, nullptr, nullptr);
}

RasterGrads rasterize_grad(const GaussianCloud& cloud, const Camera& cam,
                           const Eigen::Vector3d& background, const Eigen::ArrayXd& loss_adjoint,
                           const RasterizeOptions& opt) {
  std::vector<double> buf;
  FieldView f = cloud_view(cloud, buf);
  FieldGrads fg = rasterize_fields_grad(f, cam, background, loss_adjoint, opt);
  const int n = f.n;
  RasterGrads out;
  out.position = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>>(
      fg.pos.data(), n, 3);
  out.color = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>>(
      fg.col.data(), n, 3);
  out.opacity = fg.opa.matrix();
  out.scale = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>>(
      fg.scl.data(), n, 3);
  out.rotation = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, 4, Eigen::RowMajor>>(
      fg.rot.data(), n, 4);
  return out;
}

ad::Tensor rasterize_op(ad::Tensor position, ad::Tensor color, ad::Tensor opacity,
                        ad::Tensor scale, ad::Tensor rotation, const Camera& cam,
                        const Eigen::Vector3d& background, const RasterizeOptions& opt) {
  ad::Graph* g = position.graph;
  const int n = position.rows();
  TS_CHECK(color.rows() == n && opacity.rows() == n && scale.rows() == n && rotation.rows() == n,
           "rasterize_op: field row mismatch");
  TS_CHECK(position.cols() == 3 && color.cols() == 3 && opacity.cols() == 1 &&
               scale.cols() == 3 && rotation.cols() == 4,
           "rasterize_op: field column mismatch");

  FieldView f{position.value().data(), color.value().data(), opacity.value().data(),
              scale.value().data(), rotation.value().data(), n};
  RenderedImage img = rasterize_fields(f, cam, background, opt, nullptr, nullptr, nullptr);
  const int pixels = cam.width * cam.height;
  Eigen::ArrayXd val(static_cast<Eigen::Index>(pixels) * 4);
  for (int p = 0; p < pixels; ++p) {
    for (int c = 0; c < 3; ++c) val[static_cast<Eigen::Index>(p) * 4 + c] = img.rgb[p * 3 + c];
    val[static_cast<Eigen::Index>(p) * 4 + 3] = img.alpha[p];
  }

  int out_id = static_cast<int>(g->node_count());
  return g->adopt(
      pixels, 4, std::move(val), {position, color, opacity, scale, rotation},
      [g, position, color, opacity, scale, rotation, cam, background, opt, n, out_id]() {
        FieldView f{g->node(position.id).val.data(), g->node(color.id).val.data(),
                    g->node(opacity.id).val.data(), g->node(scale.id).val.data(),
                    g->node(rotation.id).val.data(), n};
        FieldGrads fg = rasterize_fields_grad(f, cam, background, g->node(out_id).grad, opt);
        if (g->node(position.id).needs_grad) g->grad_buffer(position.id) += fg.pos;
        if (g->node(color.id).needs_grad) g->grad_buffer(color.id) += fg.col;
        if (g->node(opacity.id).needs_grad) g->grad_buffer(opacity.id) += fg.opa;
        if (g->node(scale.id).needs_grad) g->grad_buffer(scale.id) += fg.scl;
        if (g->node(rotation.id).needs_grad) g->grad_buffer(rotation.id) += fg.rot;
      });
}

}  // namespace trisplat
