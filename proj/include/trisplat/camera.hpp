#pragma once

#include <Eigen/Dense>
#include <array>

#include "trisplat/core/check.hpp"
#include "trisplat/core/image.hpp"

namespace trisplat {

// Pinhole camera. extrinsic is the 4x4 world-to-camera rigid transform with
// the camera looking down +z; pixel projection is x_px = fx*X/Z + cx.
struct Camera {
  Eigen::Matrix4d extrinsic = Eigen::Matrix4d::Identity();
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  int width = 0, height = 0;

  Eigen::Matrix3d rotation() const { return extrinsic.topLeftCorner<3, 3>(); }
  Eigen::Vector3d translation() const { return extrinsic.topRightCorner<3, 1>(); }
  Eigen::Vector3d position() const { return -rotation().transpose() * translation(); }

  void validate() const {
    Eigen::Matrix3d r = rotation();
    TS_CHECK((r * r.transpose() - Eigen::Matrix3d::Identity()).norm() < 1e-6,
             "Camera: rotation block not orthonormal");
    TS_CHECK(fx > 0.0 && fy > 0.0, "Camera: focal lengths must be positive");
    TS_CHECK(width > 0 && height > 0, "Camera: empty image size");
    TS_CHECK(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height,
             "Camera: principal point outside image");
  }

  // Elevation of the camera position relative to the scene origin, degrees.
  double elevation_deg() const {
    Eigen::Vector3d p = position();
    double r = p.norm();
    TS_CHECK(r > 1e-12, "Camera: position at origin has no elevation");
    return std::asin(p.y() / r) * 180.0 / EIGEN_PI;
  }
};

// An input/output unit: RGBA image plus its camera.
struct PosedView {
  Image image;  // 4 channels, straight (non-premultiplied) alpha
  Camera camera;
};

// Orbit camera looking at the origin, world up +y.
// azimuth 0 looks down -z toward the origin from +z side.
Camera make_orbit_camera(double azimuth_deg, double elevation_deg, double radius, int width,
                         int height, double fov_deg);

// 20-d camera conditioning vector: row-major flattened extrinsic followed by
// (fx/width, fy/height, cx/width, cy/height).
using CameraVec = std::array<double, 20>;
CameraVec camera_to_vec(const Camera& cam);
Camera vec_to_camera(const CameraVec& v, int width, int height);

}  // namespace trisplat
