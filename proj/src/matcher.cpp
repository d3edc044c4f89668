#include "trisplat/matcher.hpp"

#include <algorithm>
#include <cmath>

namespace trisplat {

namespace {

struct GrayImage {
  int w, h;
  std::vector<double> v;
  double at(int x, int y) const { return v[static_cast<size_t>(y) * w + x]; }
};

GrayImage gray_of(const Image& img) { return {img.width, img.height, to_gray(img)}; }

}  // namespace

std::vector<Keypoint> detect_corners(const Image& img, const MatchConfig& cfg) {
  GrayImage g = gray_of(img);
  const int w = g.w, h = g.h;
  std::vector<double> gx(static_cast<size_t>(w) * h, 0.0), gy(gx), response(gx);
  for (int y = 1; y + 1 < h; ++y)
    for (int x = 1; x + 1 < w; ++x) {
      gx[static_cast<size_t>(y) * w + x] = 0.5 * (g.at(x + 1, y) - g.at(x - 1, y));
      gy[static_cast<size_t>(y) * w + x] = 0.5 * (g.at(x, y + 1) - g.at(x, y - 1));
    }
  // Harris response over a 5x5 structure-tensor window.
  const int win = 2;
  const int margin = cfg.patch_radius + 1;
  double max_response = 0.0;
  for (int y = margin; y + margin < h; ++y)
    for (int x = margin; x + margin < w; ++x) {
      double xx = 0, xy = 0, yy = 0;
      for (int dy = -win; dy <= win; ++dy)
        for (int dx = -win; dx <= win; ++dx) {
          const double a = gx[static_cast<size_t>(y + dy) * w + x + dx];
          const double b = gy[static_cast<size_t>(y + dy) * w + x + dx];
          xx += a * a;
          xy += a * b;
          yy += b * b;
        }
      const double det = xx * yy - xy * xy;
      const double tr = xx + yy;
      response[static_cast<size_t>(y) * w + x] = det - cfg.harris_k * tr * tr;
      max_response = std::max(max_response, response[static_cast<size_t>(y) * w + x]);
    }
  if (max_response <= 0.0) return {};

  const double thresh = cfg.response_rel_threshold * max_response;
  std::vector<Keypoint> kps;
  const int r = cfg.nms_radius;
  for (int y = margin; y + margin < h; ++y)
    for (int x = margin; x + margin < w; ++x) {
      const double v = response[static_cast<size_t>(y) * w + x];
      if (v < thresh) continue;
      bool is_max = true;
      for (int dy = -r; dy <= r && is_max; ++dy)
        for (int dx = -r; dx <= r && is_max; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const double nv = response[static_cast<size_t>(ny) * w + nx];
          // Strict on one side of the tie so plateaus yield a single peak.
          if (nv > v || (nv == v && (ny < y || (ny == y && nx < x)))) is_max = false;
        }
      if (is_max) kps.push_back(Keypoint{x, y, v});
    }
  std::sort(kps.begin(), kps.end(), [](const Keypoint& a, const Keypoint& b) {
    if (a.response != b.response) return a.response > b.response;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  if (static_cast<int>(kps.size()) > cfg.max_keypoints) kps.resize(cfg.max_keypoints);
  return kps;
}

ViewDescriptors describe_view(const Image& img, const MatchConfig& cfg) {
  GrayImage g = gray_of(img);
  std::vector<Keypoint> kps = detect_corners(img, cfg);
  const int pr = cfg.patch_radius;
  const int dim = (2 * pr + 1) * (2 * pr + 1);
  ViewDescriptors out;
  out.descriptors.resize(static_cast<Eigen::Index>(kps.size()), dim);
  int kept = 0;
  for (const Keypoint& kp : kps) {
    Eigen::VectorXd patch(dim);
    int i = 0;
    for (int dy = -pr; dy <= pr; ++dy)
      for (int dx = -pr; dx <= pr; ++dx) patch[i++] = g.at(kp.x + dx, kp.y + dy);
    patch.array() -= patch.mean();
    const double norm = patch.norm();
    if (norm < 1e-9) continue;  // flat patch, not matchable
    out.descriptors.row(kept) = patch.transpose() / norm;
    out.keypoints.push_back(kp);
    ++kept;
  }
  out.descriptors.conservativeResize(kept, dim);
  return out;
}

namespace {

struct Nearest {
  int best = -1;
  double d1 = std::numeric_limits<double>::infinity();
  double d2 = std::numeric_limits<double>::infinity();
};

std::vector<Nearest> nearest_of(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  std::vector<Nearest> out(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    Nearest n;
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      const double d = (a.row(i) - b.row(j)).norm();
      if (d < n.d1) {
        n.d2 = n.d1;
        n.d1 = d;
        n.best = static_cast<int>(j);
      } else if (d < n.d2) {
        n.d2 = d;
      }
    }
    out[i] = n;
  }
  return out;
}

bool ratio_ok(const Nearest& n, double ratio) {
  if (n.best < 0) return false;
  if (n.d2 == std::numeric_limits<double>::infinity()) return true;  // single candidate
  return n.d1 < ratio * n.d2;
}

}  // namespace

int match_views(const Image& a, const Image& b, const MatchConfig& cfg) {
  TS_CHECK(a.same_size(b), "match_views: image size mismatch");
  ViewDescriptors da = describe_view(a, cfg);
  ViewDescriptors db = describe_view(b, cfg);
  if (da.keypoints.empty() || db.keypoints.empty()) return 0;
  std::vector<Nearest> ab = nearest_of(da.descriptors, db.descriptors);
  std::vector<Nearest> ba = nearest_of(db.descriptors, da.descriptors);
  std::vector<std::pair<double, double>> disp;
  for (size_t i = 0; i < ab.size(); ++i) {
    const Nearest& n = ab[i];
    if (n.best < 0 || ba[n.best].best != static_cast<int>(i)) continue;  // not mutual
    if (!ratio_ok(n, cfg.ratio) || !ratio_ok(ba[n.best], cfg.ratio)) continue;
    disp.emplace_back(db.keypoints[n.best].x - da.keypoints[i].x,
                      db.keypoints[n.best].y - da.keypoints[i].y);
  }
  if (disp.size() < 3 || cfg.displacement_window <= 0.0) return static_cast<int>(disp.size());

  // Spatial-coherence gate around the median displacement. The even-size
  // median averages both central elements so match_views stays symmetric.
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  std::vector<double> xs, ys;
  for (auto& [dx, dy] : disp) {
    xs.push_back(dx);
    ys.push_back(dy);
  }
  const double mx = median(xs), my = median(ys);
  const double window =
      cfg.displacement_window * std::hypot(static_cast<double>(a.width), a.height);
  int count = 0;
  for (auto& [dx, dy] : disp)
    if (std::hypot(dx - mx, dy - my) <= window) ++count;
  return count;
}

}  // namespace trisplat
