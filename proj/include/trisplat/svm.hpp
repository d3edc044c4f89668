#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "trisplat/core/check.hpp"

namespace trisplat {

// Linear classifier over quality features; decision is sign(w.x + b).
struct QualityClassifier {
  Eigen::VectorXd w;
  double b = 0.0;
  std::string extractor_id = "hist-grad-v1";
  int sample_count = 0;
  uint64_t seed = 0;
  double train_accuracy = 0.0;

  double decision(const Eigen::VectorXd& x) const {
    TS_CHECK(x.size() == w.size(), "QualityClassifier: feature dim mismatch");
    return w.dot(x) + b;
  }
  bool classify(const Eigen::VectorXd& x) const { return decision(x) >= 0.0; }
};

// Deterministic full-batch subgradient descent on the L2-regularized hinge
// loss; features are standardized internally and the affine fold-back keeps
// the classifier operating on raw features. Labels are +1 (good) / -1 (bad);
// both classes must be present.
QualityClassifier train_quality_classifier(const std::vector<Eigen::VectorXd>& features,
                                           const std::vector<int>& labels, double reg,
                                           uint64_t seed, int iterations = 400);

}  // namespace trisplat
