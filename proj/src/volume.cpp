#include "trisplat/volume.hpp"

#include <cmath>

namespace trisplat {

using ad::Tensor;

Tensor composite_rays_op(Tensor alpha, Tensor color, int rays, int samples_per_ray,
                         const Eigen::Vector3d& background) {
  ad::Graph* g = alpha.graph;
  const int s = samples_per_ray;
  TS_CHECK(alpha.rows() == rays * s && alpha.cols() == 1, "composite_rays: alpha shape");
  TS_CHECK(color.rows() == rays * s && color.cols() == 3, "composite_rays: color shape");

  const Eigen::ArrayXd& av = alpha.value();
  const Eigen::ArrayXd& cv = color.value();
  Eigen::ArrayXd out(static_cast<Eigen::Index>(rays) * 4);
  for (int r = 0; r < rays; ++r) {
    double trans = 1.0;
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    for (int i = 0; i < s; ++i) {
      const Eigen::Index k = static_cast<Eigen::Index>(r) * s + i;
      const double a = av[k];
      for (int c = 0; c < 3; ++c) acc[c] += trans * a * cv[k * 3 + c];
      trans *= 1.0 - a;
    }
    for (int c = 0; c < 3; ++c) out[static_cast<Eigen::Index>(r) * 4 + c] = acc[c] + trans * background[c];
    out[static_cast<Eigen::Index>(r) * 4 + 3] = 1.0 - trans;
  }

  int out_id = static_cast<int>(g->node_count());
  return g->adopt(
      rays, 4, std::move(out), {alpha, color},
      [g, alpha, color, rays, s, background, out_id]() {
        const Eigen::ArrayXd& go = g->node(out_id).grad;
        const Eigen::ArrayXd& av = g->node(alpha.id).val;
        const Eigen::ArrayXd& cv = g->node(color.id).val;
        const bool need_a = g->node(alpha.id).needs_grad;
        const bool need_c = g->node(color.id).needs_grad;
        Eigen::ArrayXd* ga = need_a ? &g->grad_buffer(alpha.id) : nullptr;
        Eigen::ArrayXd* gc = need_c ? &g->grad_buffer(color.id) : nullptr;
        std::vector<double> trans_before(s);
        for (int r = 0; r < rays; ++r) {
          const Eigen::Vector3d go_rgb(go[static_cast<Eigen::Index>(r) * 4],
                                       go[static_cast<Eigen::Index>(r) * 4 + 1],
                                       go[static_cast<Eigen::Index>(r) * 4 + 2]);
          const double go_a = go[static_cast<Eigen::Index>(r) * 4 + 3];
          double trans = 1.0;
          for (int i = 0; i < s; ++i) {
            trans_before[i] = trans;
            trans *= 1.0 - av[static_cast<Eigen::Index>(r) * s + i];
          }
          const double trans_final = trans;
          Eigen::Vector3d behind = trans_final * background;
          for (int i = s - 1; i >= 0; --i) {
            const Eigen::Index k = static_cast<Eigen::Index>(r) * s + i;
            const double a = av[k];
            const Eigen::Vector3d c(cv[k * 3], cv[k * 3 + 1], cv[k * 3 + 2]);
            if (need_c)
              for (int ch = 0; ch < 3; ++ch)
                (*gc)[k * 3 + ch] += go_rgb[ch] * trans_before[i] * a;
            if (need_a) {
              const double one_minus = 1.0 - a;
              (*ga)[k] += go_rgb.dot(trans_before[i] * c - behind / one_minus) +
                          go_a * (trans_final / one_minus);
            }
            behind += trans_before[i] * a * c;
          }
        }
      });
}

namespace {

struct RaySamples {
  std::vector<Eigen::Vector3d> points;  // rays * S entries (dummies for misses)
  Eigen::ArrayXd dt_scale;              // rays * S, per-sample dt / reference_step
};

RaySamples make_ray_samples(const Camera& cam, int samples_per_ray,
                            const VolumeRenderOptions& opt) {
  cam.validate();
  const int s = samples_per_ray;
  const Eigen::Matrix3d r_cw = cam.rotation().transpose();
  const Eigen::Vector3d origin = cam.position();
  RaySamples out;
  const size_t rays = static_cast<size_t>(cam.width) * cam.height;
  out.points.assign(rays * s, Eigen::Vector3d::Zero());
  out.dt_scale = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(rays) * s);

  for (int py = 0; py < cam.height; ++py) {
    for (int px = 0; px < cam.width; ++px) {
      const size_t ray = static_cast<size_t>(py) * cam.width + px;
      Eigen::Vector3d dir_cam((px + 0.5 - cam.cx) / cam.fx, (py + 0.5 - cam.cy) / cam.fy, 1.0);
      Eigen::Vector3d dir = (r_cw * dir_cam).normalized();
      // Slab intersection with [-1,1]^3.
      double t0 = opt.near, t1 = std::numeric_limits<double>::infinity();
      bool miss = false;
      for (int a = 0; a < 3 && !miss; ++a) {
        if (std::abs(dir[a]) < 1e-12) {
          if (origin[a] < -1.0 || origin[a] > 1.0) miss = true;
          continue;
        }
        double ta = (-1.0 - origin[a]) / dir[a];
        double tb = (1.0 - origin[a]) / dir[a];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
      }
      if (miss || t1 <= t0) continue;
      const double dt = (t1 - t0) / s;
      for (int i = 0; i < s; ++i) {
        const double t = t0 + (i + 0.5) * dt;
        Eigen::Vector3d p = origin + t * dir;
        for (int a = 0; a < 3; ++a) p[a] = std::clamp(p[a], -1.0, 1.0);  // numeric edge touch
        out.points[ray * s + i] = p;
        out.dt_scale[static_cast<Eigen::Index>(ray) * s + i] = dt / opt.reference_step;
      }
    }
  }
  return out;
}

}  // namespace

Tensor render_volume_op(ad::Graph& g, ad::ParamBinder& bind,
                        const std::array<Tensor, 3>& planes, int plane_resolution,
                        const DecoderMLP& mlp, const Camera& cam, int samples_per_ray,
                        const Eigen::Vector3d& background, const VolumeRenderOptions& opt) {
  TS_CHECK(samples_per_ray >= 2, "render_volume: samples_per_ray must be >= 2");
  RaySamples rs = make_ray_samples(cam, samples_per_ray, opt);
  const int rays = cam.width * cam.height;

  Tensor features = sample_features_op(planes, plane_resolution, rs.points);
  Tensor trunk = mlp.trunk_forward(bind, features);
  Tensor color_raw = mlp.head_forward(bind, trunk, "color");
  Tensor opacity_raw = mlp.head_forward(bind, trunk, "opacity");

  ActivationConfig act;  // color / opacity activations shared with the splat path
  Tensor color = ad::clamp(
      ad::add_scalar(ad::scale(ad::sigmoid(color_raw), act.color_gain), -act.color_bias), 0.0, 1.0);
  Tensor alpha = ad::sigmoid(ad::add_scalar(opacity_raw, -act.opacity_shift));
  Tensor dt = g.constant(rays * samples_per_ray, 1, rs.dt_scale);
  alpha = ad::clamp(ad::mul(alpha, dt), 0.0, opt.alpha_cap);

  return composite_rays_op(alpha, color, rays, samples_per_ray, background);
}

RenderedImage render_volume(const TriPlane& tri, const DecoderMLP& mlp,
                            const ad::ParamStore& store, const Camera& cam, int samples_per_ray,
                            const Eigen::Vector3d& background, const VolumeRenderOptions& opt) {
  tri.validate();
  TS_CHECK(mlp.config().feature_dim == tri.feature_dim(),
           "render_volume: tri-plane feature dim does not match decoder input");
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
  Tensor rgba = render_volume_op(g, bind, planes, tri.resolution, mlp, cam, samples_per_ray,
                                 background, opt);
  RenderedImage img(cam.width, cam.height);
  const Eigen::ArrayXd& v = rgba.value();
  for (int p = 0; p < cam.width * cam.height; ++p) {
    for (int c = 0; c < 3; ++c) img.rgb[static_cast<size_t>(p) * 3 + c] = v[static_cast<Eigen::Index>(p) * 4 + c];
    img.alpha[p] = v[static_cast<Eigen::Index>(p) * 4 + 3];
  }
  return img;
}

}  // namespace trisplat
