#include "trisplat/triplane.hpp"

#include <cmath>

namespace trisplat {

InitGrid make_init_grid(int n) {
  TS_CHECK(n >= 1, "make_init_grid: n must be positive");
  InitGrid grid;
  grid.n = n;
  grid.positions.reserve(static_cast<size_t>(n) * n * n);
  const double step = 2.0 / n;
  for (int ix = 0; ix < n; ++ix)
    for (int iy = 0; iy < n; ++iy)
      for (int iz = 0; iz < n; ++iz)
        grid.positions.emplace_back(-1.0 + (ix + 0.5) * step, -1.0 + (iy + 0.5) * step,
                                    -1.0 + (iz + 0.5) * step);
  return grid;
}

std::array<PlaneTap, 4> bilinear_taps(double u, double v, int resolution) {
  const int r = resolution;
  // Map [-1,1] to continuous texel coordinates with centers at integers.
  auto to_texel = [r](double t) { return (t + 1.0) * 0.5 * r - 0.5; };
  const double x = to_texel(u);
  const double y = to_texel(v);
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;
  auto clamp_idx = [r](int i) { return std::min(std::max(i, 0), r - 1); };
  const int x0c = clamp_idx(x0), x1c = clamp_idx(x0 + 1);
  const int y0c = clamp_idx(y0), y1c = clamp_idx(y0 + 1);
  return {PlaneTap{y0c * r + x0c, (1 - fx) * (1 - fy)}, PlaneTap{y0c * r + x1c, fx * (1 - fy)},
          PlaneTap{y1c * r + x0c, (1 - fx) * fy}, PlaneTap{y1c * r + x1c, fx * fy}};
}

Eigen::VectorXd sample_feature(const TriPlane& tri, const Eigen::Vector3d& p) {
  for (int i = 0; i < 3; ++i)
    TS_CHECK(p[i] >= -1.0 && p[i] <= 1.0, "sample_feature: point outside [-1,1]^3");
  const int d = tri.channels;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(3 * d);
  auto coords = plane_coords(p);
  for (int k = 0; k < 3; ++k) {
    auto taps = bilinear_taps(coords[k][0], coords[k][1], tri.resolution);
    for (const PlaneTap& t : taps) out.segment(k * d, d) += t.weight * tri.planes[k].row(t.row);
  }
  return out;
}

}  // namespace trisplat
