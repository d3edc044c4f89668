#include <doctest.h>

#include "test_util.hpp"
#include "trisplat/encoder.hpp"
#include "trisplat/model.hpp"

using namespace trisplat;

namespace {

EncoderConfig toy_encoder() {
  EncoderConfig cfg;
  cfg.image_size = 8;
  cfg.patch_size = 4;
  cfg.dim = 16;
  cfg.enc_layers = 1;
  cfg.tri_layers = 1;
  cfg.heads = 2;
  cfg.plane_res = 4;
  cfg.plane_channels = 2;
  cfg.plane_patch = 2;
  cfg.max_views = 4;
  return cfg;
}

PosedView random_view(Rng& rng, int size, double azimuth, double elevation) {
  PosedView v;
  v.camera = make_orbit_camera(azimuth, elevation, 2.2, size, size, 50.0);
  v.image = Image(size, size, 4);
  for (double& d : v.image.data) d = rand_uniform(rng, 0.0, 1.0);
  return v;
}

double plane_diff(const TriPlane& a, const TriPlane& b) {
  double worst = 0.0;
  for (int k = 0; k < 3; ++k)
    worst = std::max(worst, (a.planes[k] - b.planes[k]).cwiseAbs().maxCoeff());
  return worst;
}

}  // namespace

TEST_CASE("camera_to_vec: identity layout and round trip") {
  Camera cam;
  cam.extrinsic.setIdentity();
  cam.width = 32;
  cam.height = 32;
  cam.fx = 32;
  cam.fy = 32;
  cam.cx = 16;
  cam.cy = 16;
  CameraVec v = camera_to_vec(cam);
  CHECK(v.size() == 20);
  const double expect[20] = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 1, 1, 0.5, 0.5};
  for (int i = 0; i < 20; ++i) CHECK(v[i] == doctest::Approx(expect[i]));

  Camera cam2 = make_orbit_camera(33.0, 12.0, 2.4, 48, 48, 55.0);
  CameraVec v2 = camera_to_vec(cam2);
  Camera back = vec_to_camera(v2, 48, 48);
  CameraVec v3 = camera_to_vec(back);
  for (int i = 0; i < 20; ++i) CHECK(v2[i] == doctest::Approx(v3[i]).epsilon(1e-15));
}

TEST_CASE("tokenize_view: P+1 tokens; zero image and zero camera embedding") {
  EncoderConfig cfg = toy_encoder();
  ViewEncoder enc(cfg, "encoder");
  Rng rng(3);
  ad::ParamStore store;
  enc.init_params(store, rng);

  Rng vr(5);
  PosedView v = random_view(vr, cfg.image_size, 30.0, 6.0);
  {
    ad::Graph g(false);
    ad::ParamBinder bind(g, store);
    ad::Tensor seg = enc.tokenize_view(g, bind, v);
    CHECK(seg.rows() == cfg.patches_per_view() + 1);
    CHECK(seg.cols() == cfg.dim);
  }

  // Zero image + zeroed camera path: patch tokens must equal the positional
  // encodings and the camera token must be the zero vector.
  ad::ParamStore zeroed = store;
  for (const char* name : {"encoder.cam.1.w", "encoder.cam.1.b", "encoder.adain.gamma.w",
                           "encoder.adain.gamma.b", "encoder.adain.beta.w",
                           "encoder.adain.beta.b", "encoder.patch.b"})
    zeroed.at(name).value.setZero();
  PosedView black = v;
  for (double& d : black.image.data) d = 0.0;
  ad::Graph g(false);
  ad::ParamBinder bind(g, zeroed);
  ad::Tensor seg = enc.tokenize_view(g, bind, black);
  const Eigen::ArrayXd& pos = zeroed.at("encoder.pos").value;
  const Eigen::ArrayXd& val = seg.value();
  for (int p = 0; p < cfg.patches_per_view(); ++p)
    for (int c = 0; c < cfg.dim; ++c)
      CHECK(val[p * cfg.dim + c] == doctest::Approx(pos[p * cfg.dim + c]).epsilon(1e-12));
  for (int c = 0; c < cfg.dim; ++c)
    CHECK(val[cfg.patches_per_view() * cfg.dim + c] == doctest::Approx(0.0));

  // Two views differing only in camera produce different token segments.
  PosedView v2 = v;
  v2.camera = make_orbit_camera(90.0, 6.0, 2.2, cfg.image_size, cfg.image_size, 50.0);
  ad::Graph g2(false);
  ad::ParamBinder bind2(g2, store);
  ad::Tensor a = enc.tokenize_view(g2, bind2, v);
  ad::Tensor b = enc.tokenize_view(g2, bind2, v2);
  CHECK((a.value() - b.value()).abs().maxCoeff() > 1e-6);

  // Size mismatch is rejected.
  PosedView wrong = v;
  wrong.image = Image(cfg.image_size * 2, cfg.image_size * 2, 4);
  wrong.camera.width = cfg.image_size * 2;
  wrong.camera.height = cfg.image_size * 2;
  ad::Graph g3(false);
  ad::ParamBinder bind3(g3, store);
  CHECK_THROWS(enc.tokenize_view(g3, bind3, wrong));
}

TEST_CASE("encode_views: shape contract, permutation invariance, duplication") {
  EncoderConfig cfg = toy_encoder();
  ViewEncoder enc(cfg, "encoder");
  Rng rng(7);
  ad::ParamStore store;
  enc.init_params(store, rng);

  Rng vr(9);
  std::vector<PosedView> views;
  for (int i = 0; i < 3; ++i) views.push_back(random_view(vr, cfg.image_size, i * 100.0, 6.0));

  for (int count : {1, 2, 3}) {
    std::vector<PosedView> subset(views.begin(), views.begin() + count);
    TriPlane tri = encode_views(subset, enc, store);
    CHECK(tri.resolution == cfg.plane_res);
    CHECK(tri.channels == cfg.plane_channels);
  }

  TriPlane ab = encode_views({views[0], views[1], views[2]}, enc, store);
  TriPlane ba = encode_views({views[2], views[0], views[1]}, enc, store);
  CHECK(plane_diff(ab, ba) < 1e-5);

  TriPlane single = encode_views({views[0]}, enc, store);
  TriPlane doubled = encode_views({views[0], views[0]}, enc, store);
  CHECK(plane_diff(single, doubled) < 1e-3);

  CHECK_THROWS(encode_views({}, enc, store));
  std::vector<PosedView> too_many(cfg.max_views + 1, views[0]);
  CHECK_THROWS(encode_views(too_many, enc, store));
}

TEST_CASE("decoded cloud size is independent of the view count") {
  ModelConfig mc;
  mc.encoder = toy_encoder();
  mc.decoder.feature_dim = 3 * mc.encoder.plane_channels;
  mc.decoder.hidden = 8;
  mc.decoder.layers = 2;
  mc.grid_n = 2;
  ReconModel model(mc);
  Rng rng(11);
  ad::ParamStore store;
  model.init_params(store, rng);

  Rng vr(13);
  std::vector<PosedView> views;
  for (int i = 0; i < 4; ++i)
    views.push_back(random_view(vr, mc.encoder.image_size, i * 70.0, -10.0 + i * 12.0));
  for (int count : {1, 2, 4}) {
    std::vector<PosedView> subset(views.begin(), views.begin() + count);
    CHECK(model.reconstruct(subset, store).count() == 8);
  }
}

TEST_CASE("encoder gradients match finite differences on selected tensors") {
  EncoderConfig cfg = toy_encoder();
  ViewEncoder enc(cfg, "encoder");
  Rng rng(17);
  ad::ParamStore store;
  enc.init_params(store, rng);

  Rng vr(19);
  std::vector<PosedView> views = {random_view(vr, cfg.image_size, 20.0, 6.0),
                                  random_view(vr, cfg.image_size, 200.0, 18.0)};

  // Scalar probe: weighted mean square of the three planes.
  Rng wr(23);
  Eigen::ArrayXd probe_w =
      testutil::random_array(wr, cfg.plane_res * cfg.plane_res * cfg.plane_channels, 0.3, 1.4);

  // Analytic gradients once.
  ad::Graph g;
  ad::ParamBinder bind(g, store);
  auto planes = enc.forward(g, bind, views);
  ad::Tensor w = g.constant(cfg.plane_res * cfg.plane_res, cfg.plane_channels, probe_w);
  ad::Tensor acc = ad::mean_all(ad::square(ad::mul(planes[0], w)));
  acc = ad::add(acc, ad::mean_all(ad::square(ad::mul(planes[1], w))));
  acc = ad::add(acc, ad::mean_all(ad::square(ad::mul(planes[2], w))));
  g.backward(acc);

  auto eval = [&](const ad::ParamStore& ps) {
    ad::Graph g2;
    ad::ParamBinder bind2(g2, ps);
    auto p2 = enc.forward(g2, bind2, views);
    ad::Tensor w2 = g2.constant(cfg.plane_res * cfg.plane_res, cfg.plane_channels, probe_w);
    ad::Tensor a2 = ad::mean_all(ad::square(ad::mul(p2[0], w2)));
    a2 = ad::add(a2, ad::mean_all(ad::square(ad::mul(p2[1], w2))));
    a2 = ad::add(a2, ad::mean_all(ad::square(ad::mul(p2[2], w2))));
    return a2.scalar();
  };

  const char* tensors[] = {"encoder.patch.w", "encoder.adain.gamma.w", "encoder.enc.0.attn.q.w",
                           "encoder.tri.0.cross.k.w", "encoder.tri.head.w", "encoder.pos",
                           "encoder.tri.query", "encoder.cam.0.w", "encoder.enc.0.ln1.g"};
  for (const char* name : tensors) {
    ad::Tensor bound = bind(name);
    Eigen::ArrayXd analytic = g.grad_of(bound);
    Eigen::ArrayXd numeric(analytic.size());
    ad::ParamStore mutated = store;
    Eigen::ArrayXd& vals = mutated.at(name).value;
    const int stride = std::max<int>(1, static_cast<int>(vals.size()) / 60);  // subsample coords
    double worst = 0.0;
    for (Eigen::Index i = 0; i < vals.size(); i += stride) {
      const double orig = vals[i];
      const double h = 1e-5;
      vals[i] = orig + h;
      const double fp = eval(mutated);
      vals[i] = orig - h;
      const double fm = eval(mutated);
      vals[i] = orig;
      const double num = (fp - fm) / (2 * h);
      const double denom = std::max({std::abs(num), std::abs(analytic[i]), 1e-7});
      worst = std::max(worst, std::abs(num - analytic[i]) / denom);
    }
    INFO(name);
    CHECK(worst < 1e-3);
  }
}
