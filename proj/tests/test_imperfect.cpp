#include <doctest.h>

#include <cstring>

#include "test_util.hpp"
#include "trisplat/imperfect.hpp"

using namespace trisplat;

namespace {

GaussianCloud grid_cloud(int n, uint64_t seed) {
  InitGrid grid = make_init_grid(n);
  Rng rng(seed);
  GaussianCloud cloud;
  for (const auto& p : grid.positions) {
    Gaussian g;
    g.position = 0.6 * p;
    g.color = {rand_uniform(rng, 0.1, 0.9), rand_uniform(rng, 0.1, 0.9),
               rand_uniform(rng, 0.1, 0.9)};
    g.opacity = rand_uniform(rng, 0.2, 0.8);
    g.scale = {rand_uniform(rng, 0.02, 0.1), rand_uniform(rng, 0.02, 0.1),
               rand_uniform(rng, 0.02, 0.1)};
    Eigen::Vector4d q{rand_uniform(rng, -1, 1), rand_uniform(rng, -1, 1),
                      rand_uniform(rng, -1, 1), rand_uniform(rng, -1, 1)};
    g.rotation = q.normalized();
    cloud.gaussians.push_back(g);
  }
  return cloud;
}

bool gaussian_bits_equal(const Gaussian& a, const Gaussian& b) {
  return std::memcmp(&a, &b, sizeof(Gaussian)) == 0;
}

}  // namespace

TEST_CASE("sample_subcube: side ranges and placement validity") {
  Rng rng(3);
  for (int rep = 0; rep < 500; ++rep) {
    SubCube c = sample_subcube(rng, 100);
    CHECK(c.side >= 10);
    CHECK(c.side <= 40);
    CHECK(c.x0 >= 0);
    CHECK(c.x0 + c.side <= 100);
  }
  for (int rep = 0; rep < 200; ++rep) {
    SubCube c = sample_subcube(rng, 10);
    CHECK(c.side >= 1);
    CHECK(c.side <= 4);
  }
  SubCube tiny = sample_subcube(rng, 1);
  CHECK(tiny.side == 1);
  CHECK(tiny.x0 == 0);
  CHECK_THROWS(sample_subcube(rng, 0));
}

TEST_CASE("sample_subcube: empirical side distribution is uniform (chi-squared)") {
  Rng rng(5);
  const int draws = 10000;
  std::vector<int> hist(31, 0);  // sides 10..40
  for (int i = 0; i < draws; ++i) {
    SubCube c = sample_subcube(rng, 100);
    hist[c.side - 10]++;
  }
  const double expected = draws / 31.0;
  double chi2 = 0.0;
  for (int h : hist) chi2 += (h - expected) * (h - expected) / expected;
  // 99th percentile of chi-squared with 30 degrees of freedom.
  CHECK(chi2 < 50.892);
}

TEST_CASE("perturb_cloud: all-zero probabilities is a bitwise no-op") {
  GaussianCloud cloud = grid_cloud(6, 7);
  Rng rng(9);
  NoiseConfig off;
  off.p_position = off.p_color = off.p_opacity = off.p_scale = 0.0;
  GaussianCloud out = perturb_cloud(cloud, 6, rng, off);
  REQUIRE(out.count() == cloud.count());
  for (size_t i = 0; i < cloud.count(); ++i)
    CHECK(gaussian_bits_equal(out.gaussians[i], cloud.gaussians[i]));
}

TEST_CASE("perturb_cloud: forced position effect stays local and bounded") {
  const int n = 6;
  GaussianCloud cloud = grid_cloud(n, 11);
  Rng rng(13);
  NoiseConfig cfg;
  cfg.p_position = 1.0;
  cfg.p_color = cfg.p_opacity = cfg.p_scale = 0.0;
  PerturbReport report;
  GaussianCloud out = perturb_cloud(cloud, n, rng, cfg, &report);
  REQUIRE(report.applied.size() == 1);
  CHECK(report.applied[0].effect == NoiseEffect::kPosition);
  const SubCube cube = report.applied[0].cube;
  for (int ix = 0; ix < n; ++ix)
    for (int iy = 0; iy < n; ++iy)
      for (int iz = 0; iz < n; ++iz) {
        const size_t idx = (static_cast<size_t>(ix) * n + iy) * n + iz;
        const Gaussian& a = cloud.gaussians[idx];
        const Gaussian& b = out.gaussians[idx];
        if (cube.contains(ix, iy, iz)) {
          for (int k = 0; k < 3; ++k) CHECK(std::abs(a.position[k] - b.position[k]) <= 0.1);
          CHECK(a.color == b.color);
          CHECK(a.opacity == b.opacity);
        } else {
          CHECK(gaussian_bits_equal(a, b));
        }
        CHECK(a.rotation == b.rotation);
      }
}

TEST_CASE("perturb_cloud: rotation untouched, locality audited, deterministic") {
  const int n = 5;
  GaussianCloud cloud = grid_cloud(n, 17);
  NoiseConfig all_on;
  all_on.p_position = all_on.p_color = all_on.p_opacity = all_on.p_scale = 1.0;

  for (uint64_t seed : {21ULL, 22ULL, 23ULL}) {
    Rng rng(seed);
    PerturbReport report;
    GaussianCloud out = perturb_cloud(cloud, n, rng, all_on, &report);
    REQUIRE(report.applied.size() == 4);
    for (int ix = 0; ix < n; ++ix)
      for (int iy = 0; iy < n; ++iy)
        for (int iz = 0; iz < n; ++iz) {
          const size_t idx = (static_cast<size_t>(ix) * n + iy) * n + iz;
          const Gaussian& a = cloud.gaussians[idx];
          const Gaussian& b = out.gaussians[idx];
          CHECK(a.rotation == b.rotation);
          // Any changed scalar must lie inside the recorded cube of its class.
          auto cube_of = [&](NoiseEffect e) {
            for (const auto& ap : report.applied)
              if (ap.effect == e) return ap.cube;
            return SubCube{};
          };
          if (a.position != b.position)
            CHECK(cube_of(NoiseEffect::kPosition).contains(ix, iy, iz));
          if (a.color != b.color) CHECK(cube_of(NoiseEffect::kColor).contains(ix, iy, iz));
          if (a.opacity != b.opacity) CHECK(cube_of(NoiseEffect::kOpacity).contains(ix, iy, iz));
          if (a.scale != b.scale) CHECK(cube_of(NoiseEffect::kScale).contains(ix, iy, iz));
          // Ranges survive the noise.
          CHECK(gaussian_in_range(b));
        }
  }

  Rng r1(31), r2(31);
  GaussianCloud a = perturb_cloud(cloud, n, r1, all_on);
  GaussianCloud b = perturb_cloud(cloud, n, r2, all_on);
  for (size_t i = 0; i < a.count(); ++i) CHECK(gaussian_bits_equal(a.gaussians[i], b.gaussians[i]));

  GaussianCloud not_grid = cloud;
  not_grid.gaussians.pop_back();
  Rng r3(33);
  CHECK_THROWS(perturb_cloud(not_grid, n, r3, all_on));
}
