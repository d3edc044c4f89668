#include <doctest.h>

#include "test_util.hpp"
#include "trisplat/pool.hpp"
#include "trisplat/scene.hpp"
#include "trisplat/select.hpp"

using namespace trisplat;

namespace {

Image noise_image(Rng& rng, int size) {
  Image img(size, size, 4);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = rand_uniform(rng, 0.0, 1.0);
      img.at(x, y, 3) = 1.0;
    }
  return img;
}

Image translate(const Image& img, int dx, int dy) {
  Image out(img.width, img.height, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        const int sx = std::clamp(x - dx, 0, img.width - 1);
        const int sy = std::clamp(y - dy, 0, img.height - 1);
        out.at(x, y, c) = img.at(sx, sy, c);
      }
  return out;
}

// Grid-indexed cloud for opacity-speckle experiments.
GaussianCloud grid_cloud(int n) {
  InitGrid grid = make_init_grid(n);
  GaussianCloud cloud;
  for (const auto& p : grid.positions) {
    Gaussian g;
    g.position = 0.55 * p;
    g.color = {0.5 + 0.3 * std::sin(3 * p.x()), 0.5 + 0.3 * std::sin(3 * p.y() + 1),
               0.5 + 0.3 * std::sin(3 * p.z() + 2)};
    g.opacity = 0.45;
    g.scale = {0.05, 0.05, 0.05};
    g.rotation = {1, 0, 0, 0};
    cloud.gaussians.push_back(g);
  }
  return cloud;
}

}  // namespace

TEST_CASE("match_views: identical images match every keypoint") {
  Rng rng(3);
  Image img = noise_image(rng, 48);
  ViewDescriptors d = describe_view(img);
  REQUIRE(d.keypoints.size() > 20);
  CHECK(match_views(img, img) == static_cast<int>(d.keypoints.size()));
}

TEST_CASE("match_views: independent noise rarely matches, symmetric counts") {
  Rng rng(5);
  Image a = noise_image(rng, 48);
  Image b = noise_image(rng, 48);
  const int kp = static_cast<int>(describe_view(a).keypoints.size());
  const int matches = match_views(a, b);
  CHECK(matches < std::max(1, kp / 20));  // < 5% false matches
  CHECK(match_views(a, b) == match_views(b, a));
  Image small(24, 24, 4);
  CHECK_THROWS(match_views(a, small));
}

TEST_CASE("match_views: 2 px translation keeps most matches") {
  Rng rng(7);
  Image a = noise_image(rng, 48);
  Image b = translate(a, 2, 0);
  const int kp = static_cast<int>(describe_view(a).keypoints.size());
  const int matches = match_views(a, b);
  CHECK(matches > (8 * kp) / 10);
}

TEST_CASE("extract_quality_features: structure cases") {
  Rng rng(9);
  Image img = noise_image(rng, 32);
  Eigen::VectorXd f = extract_quality_features(img, img);
  const int half = static_cast<int>(f.size()) / 2;
  CHECK(f.head(half).isApprox(f.tail(half), 1e-12));

  Image black(32, 32, 4);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) black.at(x, y, 3) = 1.0;
  Eigen::VectorXd fb = extract_quality_features(black, black);
  // All intensity mass lands in bin 0 of each channel histogram.
  for (int c = 0; c < 3; ++c) {
    CHECK(fb[c * 16] == doctest::Approx(1.0));
    for (int bin = 1; bin < 16; ++bin) CHECK(fb[c * 16 + bin] == 0.0);
  }

  Image other(16, 16, 4);
  CHECK_THROWS(extract_quality_features(img, other));
}

TEST_CASE("opacity speckle shifts gradient-magnitude mass toward high bins") {
  GaussianCloud clean = grid_cloud(8);
  Rng rng(11);
  NoiseConfig heavy;
  heavy.p_position = heavy.p_color = heavy.p_scale = 0.0;
  heavy.p_opacity = 1.0;
  heavy.level_opacity = 0.5;
  heavy.cube_frac_min = 0.6;
  heavy.cube_frac_max = 0.9;
  GaussianCloud speckled = perturb_cloud(clean, 8, rng, heavy);

  Camera cam = make_orbit_camera(20.0, 6.0, 2.4, 64, 64, 50.0);
  auto render_img = [&](const GaussianCloud& c) {
    RenderedImage r = rasterize(c, cam, {1, 1, 1});
    Image img(64, 64, 4);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = r.rgb[(y * 64 + x) * 3 + ch];
        img.at(x, y, 3) = r.alpha[y * 64 + x];
      }
    return img;
  };
  Image ci = render_img(clean), si = render_img(speckled);
  Eigen::VectorXd fc = extract_quality_features(ci, ci);
  Eigen::VectorXd fs = extract_quality_features(si, si);
  // Magnitude histogram occupies the last 16 slots of each per-image block.
  const int mag_off = 3 * 16 + 8;
  double clean_high = 0, speckled_high = 0;
  for (int bin = 4; bin < 16; ++bin) {
    clean_high += fc[mag_off + bin];
    speckled_high += fs[mag_off + bin];
  }
  CHECK(speckled_high > clean_high);
}

TEST_CASE("train_quality_classifier: separable set, symmetry, error paths") {
  std::vector<Eigen::VectorXd> xs;
  std::vector<int> ys;
  Rng rng(13);
  for (int i = 0; i < 40; ++i) {
    Eigen::VectorXd x(2);
    const bool pos = i % 2 == 0;
    x << rand_uniform(rng, 0, 1) + (pos ? 1.5 : -1.5), rand_uniform(rng, -1, 1);
    xs.push_back(x);
    ys.push_back(pos ? 1 : -1);
  }
  QualityClassifier clf = train_quality_classifier(xs, ys, 1e-3, 7);
  CHECK(clf.train_accuracy == doctest::Approx(1.0));

  std::vector<int> flipped;
  for (int y : ys) flipped.push_back(-y);
  QualityClassifier neg = train_quality_classifier(xs, flipped, 1e-3, 7);
  CHECK((clf.w + neg.w).norm() < 1e-9 * std::max(1.0, clf.w.norm()));
  CHECK(clf.b + neg.b == doctest::Approx(0.0).epsilon(1e-9));

  std::vector<int> one_class(ys.size(), 1);
  CHECK_THROWS(train_quality_classifier(xs, one_class, 1e-3, 7));
}

TEST_CASE("selection_from_counts: hand case and degenerate rules") {
  // Query at index 0; candidates carry (100, 90, 80, 10).
  SelectionReport rep = selection_from_counts({0, 100, 90, 80, 10}, {0});
  CHECK(rep.mean == doctest::Approx(70.0));
  CHECK(rep.stddev == doctest::Approx(35.35533905932738).epsilon(1e-12));
  CHECK(rep.threshold == doctest::Approx(48.78679656440357).epsilon(1e-9));
  CHECK(rep.selected == std::vector<int>{0, 1, 2, 3});

  SelectionReport eq = selection_from_counts({0, 5, 5, 5}, {0});
  CHECK(eq.stddev == 0.0);
  CHECK(eq.selected == std::vector<int>{0, 1, 2, 3});

  SelectionReport single = selection_from_counts({0, 7}, {0});
  CHECK(single.selected == std::vector<int>{0, 1});
}

TEST_CASE("selection_from_counts matches a brute-force oracle on random vectors") {
  Rng rng(17);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = rand_int(rng, 3, 24);
    std::vector<long> counts(n);
    for (long& c : counts) c = rand_int(rng, 0, 200);
    std::vector<int> queries = {0};
    if (n > 2 && rand_bernoulli(rng, 0.5)) queries.push_back(1);

    SelectionReport r = selection_from_counts(counts, queries);

    // Independent re-derivation.
    std::vector<double> nq;
    for (int i = 0; i < n; ++i)
      if (std::find(queries.begin(), queries.end(), i) == queries.end())
        nq.push_back(static_cast<double>(counts[i]));
    double mu = 0;
    for (double v : nq) mu += v;
    mu /= nq.size();
    double var = 0;
    for (double v : nq) var += (v - mu) * (v - mu);
    const double sigma = std::sqrt(var / nq.size());
    const double thresh = mu - 0.6 * sigma;
    std::vector<int> expect = queries;
    for (int i = 0; i < n; ++i) {
      if (std::find(queries.begin(), queries.end(), i) != queries.end()) continue;
      const double c = static_cast<double>(counts[i]);
      if (sigma == 0.0 ? c >= thresh : c > thresh) expect.push_back(i);
    }
    std::sort(expect.begin(), expect.end());
    CHECK(r.selected == expect);
    // Scale invariance of the selected set.
    std::vector<long> scaled;
    for (long c : counts) scaled.push_back(c * 3);
    CHECK(selection_from_counts(scaled, queries).selected == r.selected);
  }
}

TEST_CASE("select_views on a clean synthetic pool keeps every candidate") {
  SceneSpec spec;
  spec.kind = SceneKind::kSphereShell;
  spec.gaussian_count = 420;
  spec.seed = 5;
  GaussianCloud cloud = gen_cloud(spec);
  Rng rng(19);
  PoolOptions popt;
  SynthPool pool = synth_candidate_pool(cloud, rng, popt);
  REQUIRE(pool.set.views.size() == 20);
  CHECK(std::count(pool.set.provenance.begin(), pool.set.provenance.end(), "elevation") == 4);
  CHECK(std::count(pool.set.provenance.begin(), pool.set.provenance.end(), "azimuth") == 16);

  QualityClassifier always_good;
  always_good.w = Eigen::VectorXd::Zero(144);
  always_good.b = 1.0;
  SelectionReport rep = select_views(pool.set, always_good);
  CHECK(rep.queries.size() == 2);
  CHECK(rep.selected.size() == 20);
}
