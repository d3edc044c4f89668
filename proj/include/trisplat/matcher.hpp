#pragma once

#include <Eigen/Dense>
#include <vector>

#include "trisplat/core/image.hpp"

namespace trisplat {

struct MatchConfig {
  int max_keypoints = 300;
  int patch_radius = 4;                  // 9x9 normalized patch descriptors
  double harris_k = 0.04;
  double response_rel_threshold = 0.01;  // relative to the strongest corner
  int nms_radius = 2;
  double ratio = 0.8;                    // nearest / second-nearest distance ratio
  // Spatial-coherence gate: keep matches whose displacement lies within this
  // fraction of the image diagonal around the median displacement. Random
  // correspondences scatter across the frame and fall out here.
  double displacement_window = 0.22;
};

struct Keypoint {
  int x = 0;
  int y = 0;
  double response = 0.0;
};

std::vector<Keypoint> detect_corners(const Image& img, const MatchConfig& cfg = {});

// Mean-free, L2-normalized gray patches; keypoints whose patch is flat are
// dropped alongside their descriptor row.
struct ViewDescriptors {
  std::vector<Keypoint> keypoints;
  Eigen::MatrixXd descriptors;  // keypoints x patch-dim
};
ViewDescriptors describe_view(const Image& img, const MatchConfig& cfg = {});

// Count of mutual-nearest-neighbor matches passing the ratio test on both
// sides; symmetric in (a, b) by construction.
int match_views(const Image& a, const Image& b, const MatchConfig& cfg = {});

}  // namespace trisplat
