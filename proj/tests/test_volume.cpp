#include <doctest.h>

#include "test_util.hpp"
#include "trisplat/volume.hpp"

using namespace trisplat;

namespace {

struct VolumeRig {
  DecoderMLP mlp{DecoderConfig{6, 8, 2, 0.01}, "dec"};
  ad::ParamStore store;
  TriPlane tri{4, 2};

  explicit VolumeRig(uint64_t seed) {
    Rng rng(seed);
    mlp.init_params(store, rng);
    for (auto& [name, e] : store.entries)
      for (Eigen::Index i = 0; i < e.value.size(); ++i) e.value[i] += rand_uniform(rng, -0.4, 0.4);
    for (auto& p : tri.planes)
      for (Eigen::Index i = 0; i < p.rows(); ++i)
        for (Eigen::Index j = 0; j < p.cols(); ++j) p(i, j) = rand_uniform(rng, -1.0, 1.0);
  }
};

}  // namespace

TEST_CASE("render_volume: opacity head at the transparent limit gives background") {
  VolumeRig rig(3);
  rig.store.at("dec.head.opacity.w").value.setZero();
  rig.store.at("dec.head.opacity.b").value.setConstant(-40.0);  // sigmoid -> 0
  Camera cam = make_orbit_camera(0.0, 6.0, 2.2, 12, 12, 50.0);
  RenderedImage img = render_volume(rig.tri, rig.mlp, rig.store, cam, 16, {0.3, 0.5, 0.7});
  for (int p = 0; p < 12 * 12; ++p) {
    CHECK(img.rgb[p * 3 + 0] == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(img.alpha[p] == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("render_volume: dense white medium saturates center pixels") {
  VolumeRig rig(5);
  rig.store.at("dec.head.opacity.w").value.setZero();
  rig.store.at("dec.head.opacity.b").value.setConstant(40.0);  // alpha -> cap per step
  rig.store.at("dec.head.color.w").value.setZero();
  rig.store.at("dec.head.color.b").value.setConstant(30.0);  // sigmoid -> 1 -> white
  Camera cam = make_orbit_camera(0.0, 0.0, 2.2, 13, 13, 50.0);
  RenderedImage img = render_volume(rig.tri, rig.mlp, rig.store, cam, 32, {0, 0, 0});
  const int pix = 6 * 13 + 6;
  for (int c = 0; c < 3; ++c) CHECK(std::abs(img.rgb[pix * 3 + c] - 1.0) < 0.05);
  CHECK(img.alpha[pix] > 0.95);
}

TEST_CASE("render_volume: sampling-rate refinement converges") {
  VolumeRig rig(7);
  Camera cam = make_orbit_camera(40.0, 10.0, 2.2, 16, 16, 50.0);
  const Eigen::Vector3d bg(1, 1, 1);
  RenderedImage a = render_volume(rig.tri, rig.mlp, rig.store, cam, 64, bg);
  RenderedImage b = render_volume(rig.tri, rig.mlp, rig.store, cam, 128, bg);
  double acc = 0.0;
  for (size_t i = 0; i < a.rgb.size(); ++i) acc += std::abs(a.rgb[i] - b.rgb[i]);
  CHECK(acc / a.rgb.size() < 0.01);

  CHECK_THROWS(render_volume(rig.tri, rig.mlp, rig.store, cam, 1, bg));
}

TEST_CASE("composite_rays gradients match finite differences") {
  Rng rng(11);
  const int rays = 3, s = 4;
  Eigen::ArrayXd alpha0 = testutil::random_array(rng, rays * s, 0.05, 0.6);
  Eigen::ArrayXd color0 = testutil::random_array(rng, rays * s * 3, 0.1, 0.9);
  Eigen::ArrayXd target = testutil::random_array(rng, rays * 4, 0.0, 1.0);
  const Eigen::Vector3d bg(0.8, 0.7, 0.6);

  auto build = [&](ad::Graph& g, ad::Tensor a, ad::Tensor c) {
    ad::Tensor rgba = composite_rays_op(a, c, rays, s, bg);
    return ad::mean_all(ad::square(ad::sub(rgba, g.constant(rays, 4, target))));
  };
  ad::Graph g;
  ad::Tensor a = g.param(rays * s, 1, alpha0);
  ad::Tensor c = g.param(rays * s, 3, color0);
  g.backward(build(g, a, c));
  Eigen::ArrayXd ga = g.grad_of(a), gc = g.grad_of(c);

  auto eval_a = [&](const Eigen::ArrayXd& av) {
    ad::Graph g2;
    ad::Tensor a2 = g2.param(rays * s, 1, av);
    ad::Tensor c2 = g2.constant(rays * s, 3, color0);
    return build(g2, a2, c2).scalar();
  };
  auto eval_c = [&](const Eigen::ArrayXd& cv) {
    ad::Graph g2;
    ad::Tensor a2 = g2.constant(rays * s, 1, alpha0);
    ad::Tensor c2 = g2.param(rays * s, 3, cv);
    return build(g2, a2, c2).scalar();
  };
  CHECK(testutil::grad_rel_error(ga, testutil::finite_diff(eval_a, alpha0)) < 1e-5);
  CHECK(testutil::grad_rel_error(gc, testutil::finite_diff(eval_c, color0)) < 1e-5);
}

TEST_CASE("render_volume gradients reach planes and MLP (finite differences)") {
  VolumeRig rig(13);
  Camera cam = make_orbit_camera(25.0, 6.0, 2.2, 4, 4, 50.0);
  const Eigen::Vector3d bg(1, 1, 1);
  Rng rng(17);
  Eigen::ArrayXd target = testutil::random_array(rng, 4 * 4 * 4, 0.0, 1.0);

  auto build = [&](ad::Graph& g, ad::Tensor plane0, const ad::ParamStore& ps) {
    ad::ParamBinder bind(g, ps);
    std::array<ad::Tensor, 3> planes;
    planes[0] = plane0;
    for (int k = 1; k < 3; ++k) {
      Eigen::ArrayXd flat(rig.tri.planes[k].size());
      for (Eigen::Index r = 0; r < rig.tri.planes[k].rows(); ++r)
        for (Eigen::Index c2 = 0; c2 < 2; ++c2) flat[r * 2 + c2] = rig.tri.planes[k](r, c2);
      planes[k] = g.constant(16, 2, flat);
    }
    ad::Tensor rgba = render_volume_op(g, bind, planes, 4, rig.mlp, cam, 8, bg);
    return ad::mean_all(ad::square(ad::sub(rgba, g.constant(16, 4, target))));
  };

  Eigen::ArrayXd plane0(32);
  for (Eigen::Index r = 0; r < 16; ++r)
    for (Eigen::Index c = 0; c < 2; ++c) plane0[r * 2 + c] = rig.tri.planes[0](r, c);

  ad::Graph g;
  ad::Tensor p0 = g.param(16, 2, plane0);
  g.backward(build(g, p0, rig.store));
  Eigen::ArrayXd analytic = g.grad_of(p0);
  auto eval = [&](const Eigen::ArrayXd& x) {
    ad::Graph g2;
    ad::Tensor p2 = g2.param(16, 2, x);
    return build(g2, p2, rig.store).scalar();
  };
  CHECK(testutil::grad_rel_error(analytic, testutil::finite_diff(eval, plane0, 1e-6)) < 1e-3);
}
