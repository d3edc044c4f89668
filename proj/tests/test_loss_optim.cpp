#include <doctest.h>

#include "test_util.hpp"
#include "trisplat/decoder.hpp"
#include "trisplat/loss.hpp"
#include "trisplat/optim.hpp"

using namespace trisplat;

namespace {

Image random_target(Rng& rng, int size) {
  Image img(size, size, 4);
  for (double& d : img.data) d = rand_uniform(rng, 0.0, 1.0);
  return img;
}

RenderedImage render_of(const Image& img) {
  RenderedImage r(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const int p = y * img.width + x;
      for (int c = 0; c < 3; ++c) r.rgb[p * 3 + c] = img.at(x, y, c);
      r.alpha[p] = img.at(x, y, 3);
    }
  return r;
}

}  // namespace

TEST_CASE("composite_loss: exact match is zero") {
  Rng rng(3);
  Image target = random_target(rng, 16);
  LossWithAdjoint out = composite_loss(render_of(target), target);
  CHECK(out.terms.total == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(out.terms.l2 == 0.0);
  CHECK(out.terms.opacity == 0.0);
}

TEST_CASE("composite_loss: constant RGB offset isolates the L2 term") {
  Rng rng(5);
  Image target = random_target(rng, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      for (int c = 0; c < 3; ++c) target.at(x, y, c) = std::clamp(target.at(x, y, c), 0.2, 0.8);
  RenderedImage render = render_of(target);
  const double delta = 0.1;
  for (double& v : render.rgb) v += delta;
  LossWithAdjoint out = composite_loss(render, target);
  // A constant offset leaves image gradients unchanged, so the perceptual
  // term vanishes and the total reduces to w_l2 * delta^2.
  CHECK(out.terms.l2 == doctest::Approx(delta * delta).epsilon(1e-9));
  CHECK(out.terms.opacity == doctest::Approx(0.0));
  CHECK(out.terms.perceptual == doctest::Approx(0.0).epsilon(1e-12));
  LossConfig cfg;
  CHECK(out.terms.total == doctest::Approx(cfg.w_l2 * delta * delta).epsilon(1e-9));
  // Default weights are (1, 2, 1).
  CHECK(cfg.w_l2 == 1.0);
  CHECK(cfg.w_perceptual == 2.0);
  CHECK(cfg.w_opacity == 1.0);
}

TEST_CASE("composite_loss adjoint matches finite differences") {
  Rng rng(7);
  Image target = random_target(rng, 8);
  Eigen::ArrayXd rgba = testutil::random_array(rng, 8 * 8 * 4, 0.05, 0.95);

  auto value_of = [&](const Eigen::ArrayXd& v) {
    RenderedImage r(8, 8);
    for (int p = 0; p < 64; ++p) {
      for (int c = 0; c < 3; ++c) r.rgb[p * 3 + c] = v[p * 4 + c];
      r.alpha[p] = v[p * 4 + 3];
    }
    return composite_loss(r, target).terms.total;
  };
  RenderedImage r(8, 8);
  for (int p = 0; p < 64; ++p) {
    for (int c = 0; c < 3; ++c) r.rgb[p * 3 + c] = rgba[p * 4 + c];
    r.alpha[p] = rgba[p * 4 + 3];
  }
  LossWithAdjoint out = composite_loss(r, target);
  Eigen::ArrayXd numeric = testutil::finite_diff(value_of, rgba, 1e-6);
  CHECK(testutil::grad_rel_error(out.adjoint, numeric) < 1e-4);

  Image wrong(4, 4, 4);
  CHECK_THROWS(composite_loss(r, wrong));
}

TEST_CASE("lr_at: ramp, peak, midpoint, floor") {
  const double lr = 2e-4;
  CHECK(lr_at(0, lr, 100, 1100) == 0.0);
  CHECK(lr_at(100, lr, 100, 1100) == doctest::Approx(lr));
  CHECK(lr_at(50, lr, 100, 1100) == doctest::Approx(lr * 0.5));
  // Midpoint of the decay span: lr * (1 + cos(pi/2)) / 2 = lr / 2.
  CHECK(lr_at(600, lr, 100, 1100) == doctest::Approx(lr / 2));
  CHECK(lr_at(1100, lr, 100, 1100) == 0.0);
  CHECK(lr_at(5000, lr, 100, 1100) == 0.0);
  CHECK_THROWS(lr_at(-1, lr, 100, 1100));
}

TEST_CASE("clip_global_norm scales to the budget and reports the pre-clip norm") {
  GradMap grads;
  grads["a"] = Eigen::ArrayXd::Constant(4, 3.0);  // norm 6
  grads["b"] = Eigen::ArrayXd::Constant(9, 0.0);
  const double norm = clip_global_norm(grads, 1.0);
  CHECK(norm == doctest::Approx(6.0));
  double post = 0.0;
  for (auto& [_, g] : grads) post += g.square().sum();
  CHECK(std::sqrt(post) == doctest::Approx(1.0));

  GradMap small;
  small["a"] = Eigen::ArrayXd::Constant(1, 0.5);
  clip_global_norm(small, 1.0);
  CHECK(small["a"][0] == doctest::Approx(0.5));  // untouched below the budget
}

TEST_CASE("AdamW: zero-gradient step only decays the decayed group") {
  ad::ParamStore store;
  store.add("w", 2, 2, Eigen::ArrayXd::Constant(4, 1.0), true);
  store.add("b", 1, 2, Eigen::ArrayXd::Constant(2, 1.0), false);
  OptimConfig cfg;
  AdamW opt(cfg);
  GradMap zero;
  zero["w"] = Eigen::ArrayXd::Zero(4);
  zero["b"] = Eigen::ArrayXd::Zero(2);
  opt.step(store, zero, 0.1);
  const double expect = static_cast<double>(static_cast<float>(1.0 - 0.1 * cfg.weight_decay));
  for (int i = 0; i < 4; ++i) CHECK(store.at("w").value[i] == doctest::Approx(expect));
  for (int i = 0; i < 2; ++i) CHECK(store.at("b").value[i] == 1.0);
}

TEST_CASE("decoder/encoder bias and normalization parameters carry no decay flag") {
  Rng rng(11);
  ad::ParamStore store;
  DecoderMLP dec(DecoderConfig{6, 8, 2, 0.01}, "decoder");
  dec.init_params(store, rng);
  for (const auto& [name, e] : store.entries) {
    const bool is_bias = name.size() >= 2 && name.substr(name.size() - 2) == ".b";
    if (is_bias) CHECK(!e.decay);
    if (name.find(".w") != std::string::npos) CHECK(e.decay);
  }
}

TEST_CASE("AdamW step is deterministic and float32-exact") {
  auto run = [] {
    ad::ParamStore store;
    store.add("w", 2, 2, Eigen::ArrayXd::LinSpaced(4, 0.1, 0.4), true);
    OptimConfig cfg;
    AdamW opt(cfg);
    GradMap g;
    g["w"] = Eigen::ArrayXd::LinSpaced(4, -0.2, 0.3);
    for (int i = 0; i < 5; ++i) opt.step(store, g, 1e-3);
    return store.at("w").value;
  };
  Eigen::ArrayXd a = run(), b = run();
  for (int i = 0; i < 4; ++i) {
    CHECK(a[i] == b[i]);
    CHECK(a[i] == static_cast<double>(static_cast<float>(a[i])));
  }
}
