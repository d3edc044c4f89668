#include "trisplat/camera.hpp"

#include <cmath>

namespace trisplat {

Camera make_orbit_camera(double azimuth_deg, double elevation_deg, double radius, int width,
                         int height, double fov_deg) {
  const double az = azimuth_deg * EIGEN_PI / 180.0;
  const double el = elevation_deg * EIGEN_PI / 180.0;
  Eigen::Vector3d eye(radius * std::cos(el) * std::sin(az), radius * std::sin(el),
                      radius * std::cos(el) * std::cos(az));
  Eigen::Vector3d forward = (-eye).normalized();  // toward origin
  Eigen::Vector3d world_up(0.0, 1.0, 0.0);
  Eigen::Vector3d right = forward.cross(world_up).normalized();
  if (std::abs(forward.dot(world_up)) > 0.999) right = Eigen::Vector3d(1.0, 0.0, 0.0);
  Eigen::Vector3d up = right.cross(forward);

  // Camera basis: x right, y down, z forward (z>0 in front).
  Eigen::Matrix3d r_wc;
  r_wc.row(0) = right.transpose();
  r_wc.row(1) = -up.transpose();
  r_wc.row(2) = forward.transpose();

  Camera cam;
  cam.extrinsic.setIdentity();
  cam.extrinsic.topLeftCorner<3, 3>() = r_wc;
  cam.extrinsic.topRightCorner<3, 1>() = -r_wc * eye;
  cam.width = width;
  cam.height = height;
  const double f = 0.5 * height / std::tan(0.5 * fov_deg * EIGEN_PI / 180.0);
  cam.fx = f;
  cam.fy = f;
  cam.cx = width * 0.5;
  cam.cy = height * 0.5;
  cam.validate();
  return cam;
}

CameraVec camera_to_vec(const Camera& cam) {
  CameraVec v{};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) v[r * 4 + c] = cam.extrinsic(r, c);
  v[16] = cam.fx / cam.width;
  v[17] = cam.fy / cam.height;
  v[18] = cam.cx / cam.width;
  v[19] = cam.cy / cam.height;
  return v;
}

Camera vec_to_camera(const CameraVec& v, int width, int height) {
  Camera cam;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) cam.extrinsic(r, c) = v[r * 4 + c];
  cam.width = width;
  cam.height = height;
  cam.fx = v[16] * width;
  cam.fy = v[17] * height;
  cam.cx = v[18] * width;
  cam.cy = v[19] * height;
  return cam;
}

}  // namespace trisplat
