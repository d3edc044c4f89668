#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "trisplat/core/check.hpp"

namespace trisplat {

// Three axis-aligned feature planes over [-1,1]^3. Each plane is stored as a
// [R*R, d] row-major block with texel (ix, iy) at flat row iy*R + ix:
//   plane 0 (xy): u=px, v=py    plane 1 (xz): u=px, v=pz    plane 2 (yz): u=py, v=pz
struct TriPlane {
  int resolution = 0;  // R
  int channels = 0;    // d
  std::array<Eigen::MatrixXd, 3> planes;  // each (R*R) x d

  TriPlane() = default;
  TriPlane(int r, int d) : resolution(r), channels(d) {
    TS_CHECK(r > 0 && d > 0, "TriPlane: non-positive shape");
    for (auto& p : planes) p = Eigen::MatrixXd::Zero(r * r, d);
  }
  int feature_dim() const { return 3 * channels; }
  void validate() const {
    for (const auto& p : planes) {
      TS_CHECK(p.rows() == static_cast<Eigen::Index>(resolution) * resolution &&
                   p.cols() == channels,
               "TriPlane: plane shape mismatch");
      TS_CHECK(p.allFinite(), "TriPlane: non-finite entries");
    }
  }
};

// Uniform n^3 grid of cell centers over [-1,1]^3, x fastest-varying last:
// index = (ix*n + iy)*n + iz, coordinate c_k = -1 + (k+0.5)*2/n.
struct InitGrid {
  int n = 0;
  std::vector<Eigen::Vector3d> positions;
  size_t count() const { return positions.size(); }
};

InitGrid make_init_grid(int n);

// One bilinear corner contribution within a plane.
struct PlaneTap {
  int row;
  double weight;
};

// Bilinear taps for coordinates (u,v) in [-1,1]^2, texel centers at
// (i+0.5)*2/R - 1 with edge clamping. Always returns 4 taps.
std::array<PlaneTap, 4> bilinear_taps(double u, double v, int resolution);

// Concatenated bilinear sample of the three planes at point p in [-1,1]^3.
Eigen::VectorXd sample_feature(const TriPlane& tri, const Eigen::Vector3d& p);

// (u,v) coordinate pair each plane uses for a 3-D point.
inline std::array<std::array<double, 2>, 3> plane_coords(const Eigen::Vector3d& p) {
  return {{{p.x(), p.y()}, {p.x(), p.z()}, {p.y(), p.z()}}};
}

}  // namespace trisplat
