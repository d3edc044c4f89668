#include "trisplat/select.hpp"

#include <algorithm>
#include <cmath>

namespace trisplat {

namespace {

constexpr int kIntensityBins = 16;
constexpr int kOrientBins = 8;
constexpr int kMagnitudeBins = 16;
constexpr double kMagnitudeSpan = 0.5;  // gray-gradient magnitudes clamp here

void image_features(const Image& img, Eigen::VectorXd& out, int offset) {
  const double inv_count = 1.0 / static_cast<double>(img.pixel_count());
  // Per-channel intensity histograms.
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        const double v = std::clamp(img.at(x, y, c), 0.0, 1.0);
        int bin = std::min(kIntensityBins - 1, static_cast<int>(v * kIntensityBins));
        out[offset + c * kIntensityBins + bin] += inv_count;
      }
  // Gradient orientation (magnitude-weighted) and magnitude histograms.
  std::vector<double> gray = to_gray(img);
  auto g = [&](int x, int y) { return gray[static_cast<size_t>(y) * img.width + x]; };
  const int o_off = offset + 3 * kIntensityBins;
  const int m_off = o_off + kOrientBins;
  double mag_total = 1e-12;
  for (int y = 1; y + 1 < img.height; ++y)
    for (int x = 1; x + 1 < img.width; ++x) {
      const double gx = 0.5 * (g(x + 1, y) - g(x - 1, y));
      const double gy = 0.5 * (g(x, y + 1) - g(x, y - 1));
      const double mag = std::hypot(gx, gy);
      double angle = std::atan2(gy, gx);  // fold to [0, pi)
      if (angle < 0) angle += EIGEN_PI;
      if (angle >= EIGEN_PI) angle -= EIGEN_PI;
      const int ob = std::min(kOrientBins - 1, static_cast<int>(angle / EIGEN_PI * kOrientBins));
      out[o_off + ob] += mag;
      mag_total += mag;
      const double mn = std::min(mag / kMagnitudeSpan, 1.0);
      const int mb = std::min(kMagnitudeBins - 1, static_cast<int>(mn * kMagnitudeBins));
      out[m_off + mb] += inv_count;
    }
  for (int i = 0; i < kOrientBins; ++i) out[o_off + i] /= mag_total;
}

}  // namespace

Eigen::VectorXd extract_quality_features(const Image& front, const Image& back) {
  TS_CHECK(front.same_size(back), "extract_quality_features: image size mismatch");
  const int per_image = 3 * kIntensityBins + kOrientBins + kMagnitudeBins;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(2 * per_image);
  image_features(front, out, 0);
  image_features(back, out, per_image);
  TS_CHECK(out.allFinite(), "extract_quality_features: non-finite feature");
  return out;
}

bool assess_back_view(const CandidateSet& c, const QualityClassifier& clf) {
  c.validate();
  Eigen::VectorXd f =
      extract_quality_features(c.views[c.front_index].image, c.views[c.back_index].image);
  return clf.classify(f);
}

SelectionReport selection_from_counts(const std::vector<long>& counts,
                                      const std::vector<int>& queries) {
  SelectionReport rep;
  rep.counts = counts;
  rep.queries = queries;
  std::vector<char> is_query(counts.size(), 0);
  for (int q : queries) is_query[q] = 1;

  double sum = 0.0;
  long n = 0;
  for (size_t i = 0; i < counts.size(); ++i)
    if (!is_query[i]) {
      sum += static_cast<double>(counts[i]);
      ++n;
    }
  TS_CHECK(n > 0, "selection_from_counts: no non-query candidates");
  rep.mean = sum / n;
  double sq = 0.0;
  for (size_t i = 0; i < counts.size(); ++i)
    if (!is_query[i]) sq += std::pow(static_cast<double>(counts[i]) - rep.mean, 2);
  rep.stddev = std::sqrt(sq / n);  // population
  rep.threshold = rep.mean - 0.6 * rep.stddev;

  for (size_t i = 0; i < counts.size(); ++i) {
    if (is_query[i]) {
      rep.selected.push_back(static_cast<int>(i));
      continue;
    }
    const double c = static_cast<double>(counts[i]);
    const bool in = rep.stddev == 0.0 ? (c >= rep.threshold) : (c > rep.threshold);
    if (in) rep.selected.push_back(static_cast<int>(i));
  }
  return rep;
}

SelectionReport select_views(const CandidateSet& c, const QualityClassifier& clf,
                             const MatchConfig& mcfg) {
  c.validate();
  std::vector<int> queries = {c.front_index};
  if (assess_back_view(c, clf)) {
    queries.push_back(c.back_index);
    std::sort(queries.begin(), queries.end());
  }
  std::vector<char> is_query(c.views.size(), 0);
  for (int q : queries) is_query[q] = 1;

  std::vector<long> counts(c.views.size(), 0);
  for (size_t i = 0; i < c.views.size(); ++i)
    for (int q : queries) {
      if (static_cast<int>(i) == q) continue;
      counts[i] += match_views(c.views[i].image, c.views[q].image, mcfg);
    }
  return selection_from_counts(counts, queries);
}

}  // namespace trisplat
