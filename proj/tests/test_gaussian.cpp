#include <doctest.h>

#include "test_util.hpp"
#include "trisplat/gaussian.hpp"

using namespace trisplat;

namespace {
RawGaussianParams random_raw(Rng& rng, double span = 4.0) {
  RawGaussianParams r;
  for (int i = 0; i < 3; ++i) {
    r.offset_raw[i] = rand_uniform(rng, -span, span);
    r.color_raw[i] = rand_uniform(rng, -span, span);
    r.scale_raw[i] = rand_uniform(rng, -span, span);
  }
  r.opacity_raw = rand_uniform(rng, -span, span);
  for (int i = 0; i < 4; ++i) r.rotation_raw[i] = rand_uniform(rng, -span, span);
  if (r.rotation_raw.norm() < 1e-6) r.rotation_raw[0] = 1.0;
  return r;
}

Eigen::Vector3d random_p0(Rng& rng) {
  return {rand_uniform(rng, -1.0, 1.0), rand_uniform(rng, -1.0, 1.0),
          rand_uniform(rng, -1.0, 1.0)};
}
}  // namespace

TEST_CASE("blend_position: zero offset shrinks toward center") {
  Eigen::Vector3d p = blend_position({0.5, 0.0, -0.5}, {0.0, 0.0, 0.0});
  CHECK(p.x() == doctest::Approx(0.375));
  CHECK(p.y() == doctest::Approx(0.0));
  CHECK(p.z() == doctest::Approx(-0.375));
}

TEST_CASE("blend_position: saturated offset reaches the corner in the limit") {
  Eigen::Vector3d p = blend_position({1.0, 1.0, 1.0}, {1e3, 1e3, 1e3});
  for (int i = 0; i < 3; ++i) CHECK(p[i] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("blend_position: tanh slope case") {
  // tanh(0.5) = 0.46211715726000974 (frozen from an independent evaluation),
  // so the result is 0.25 * 0.46211715726000974.
  Eigen::Vector3d p = blend_position({0.0, 0.0, 0.0}, {0.5, 0.0, 0.0});
  CHECK(p.x() == doctest::Approx(0.11552928931500243).epsilon(1e-12));
  CHECK(p.y() == 0.0);
  CHECK(p.z() == 0.0);
}

TEST_CASE("blend_position rejects p0 outside the cube") {
  CHECK_THROWS(blend_position({1.2, 0.0, 0.0}, {0.0, 0.0, 0.0}));
}

TEST_CASE("blend_position image and monotonicity") {
  Rng rng(21);
  ActivationConfig cfg;
  for (int rep = 0; rep < 200; ++rep) {
    Eigen::Vector3d p0 = random_p0(rng);
    Eigen::Vector3d off{rand_uniform(rng, -6, 6), rand_uniform(rng, -6, 6),
                        rand_uniform(rng, -6, 6)};
    Eigen::Vector3d p = blend_position(p0, off, cfg);
    for (int i = 0; i < 3; ++i) {
      const double lo = cfg.alpha * p0[i] - (1.0 - cfg.alpha);
      const double hi = cfg.alpha * p0[i] + (1.0 - cfg.alpha);
      CHECK(p[i] >= lo);
      CHECK(p[i] <= hi);
      CHECK(p[i] >= -1.0);
      CHECK(p[i] <= 1.0);
    }
    // Componentwise monotone in the offset.
    Eigen::Vector3d off2 = off + Eigen::Vector3d(0.2, 0.0, 0.0);
    CHECK(blend_position(p0, off2, cfg).x() >= p.x());
    // Bounds are approached in the saturation limit.
    Eigen::Vector3d top = blend_position(p0, {30.0, 30.0, 30.0}, cfg);
    for (int i = 0; i < 3; ++i)
      CHECK(top[i] == doctest::Approx(cfg.alpha * p0[i] + (1.0 - cfg.alpha)).epsilon(1e-12));
  }
}

TEST_CASE("activate: documented point cases") {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  RawGaussianParams raw;

  raw.opacity_raw = 2.0;
  CHECK(activate(raw, origin).opacity == doctest::Approx(0.5));

  raw.opacity_raw = 0.0;  // initial opacity near 0.1
  CHECK(activate(raw, origin).opacity == doctest::Approx(0.11920292202211755).epsilon(1e-12));

  raw.scale_raw = {2.3, 2.3, 2.3};  // sigmoid(0)=0.5 then clipped at the max
  CHECK(activate(raw, origin).scale.x() == doctest::Approx(0.3));

  raw.color_raw = Eigen::Vector3d::Zero();  // 0.5*1.002 - 0.001
  CHECK(activate(raw, origin).color.x() == doctest::Approx(0.5).epsilon(1e-12));

  raw.rotation_raw = {2.0, 0.0, 0.0, 0.0};
  Gaussian g = activate(raw, origin);
  CHECK(g.rotation[0] == doctest::Approx(1.0));
  CHECK(g.rotation.tail<3>().norm() == doctest::Approx(0.0));
}

TEST_CASE("activate error paths") {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  RawGaussianParams raw;
  raw.rotation_raw.setZero();
  CHECK_THROWS(activate(raw, origin));
  raw.rotation_raw = {1, 0, 0, 0};
  raw.opacity_raw = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS(activate(raw, origin));
  raw.opacity_raw = std::numeric_limits<double>::infinity();
  CHECK_THROWS(activate(raw, origin));
}

TEST_CASE("activate: every finite raw with nonzero rotation satisfies the type invariants") {
  Rng rng(31);
  ActivationConfig cfg;
  for (int rep = 0; rep < 5000; ++rep) {
    RawGaussianParams raw = random_raw(rng, rep % 2 ? 12.0 : 2.0);
    Eigen::Vector3d p0 = random_p0(rng);
    Gaussian g = activate(raw, p0, cfg);
    CHECK(gaussian_in_range(g, cfg));
  }
}

TEST_CASE("activate: deterministic, bitwise") {
  Rng rng(41);
  RawGaussianParams raw = random_raw(rng);
  Eigen::Vector3d p0 = random_p0(rng);
  Gaussian a = activate(raw, p0);
  Gaussian b = activate(raw, p0);
  CHECK(std::memcmp(&a.position, &b.position, sizeof(a.position)) == 0);
  CHECK(a.opacity == b.opacity);
  CHECK(a.rotation == b.rotation);
  CHECK(a.scale == b.scale);
  CHECK(a.color == b.color);
}

TEST_CASE("opacity and scale activations strictly monotone pre-clip") {
  RawGaussianParams a, b;
  a.opacity_raw = 0.3;
  b.opacity_raw = 0.30001;
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  CHECK(activate(b, origin).opacity > activate(a, origin).opacity);
  a.scale_raw = {0.0, 0, 0};
  b.scale_raw = {0.0001, 0, 0};
  CHECK(activate(b, origin).scale.x() > activate(a, origin).scale.x());
}

TEST_CASE("flatten/from_flat round-trips the 14 channels in order") {
  Rng rng(51);
  RawGaussianParams raw = random_raw(rng);
  auto flat = raw.flatten();
  RawGaussianParams back = RawGaussianParams::from_flat(flat.data());
  CHECK(back.offset_raw == raw.offset_raw);
  CHECK(back.color_raw == raw.color_raw);
  CHECK(back.opacity_raw == raw.opacity_raw);
  CHECK(back.scale_raw == raw.scale_raw);
  CHECK(back.rotation_raw == raw.rotation_raw);
  // Channel order: offset(3), color(3), opacity(1), scale(3), rotation(4).
  CHECK(flat[0] == raw.offset_raw.x());
  CHECK(flat[6] == raw.opacity_raw);
  CHECK(flat[13] == raw.rotation_raw[3]);
}
