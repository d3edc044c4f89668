#include "trisplat/svm.hpp"

#include <cmath>

namespace trisplat {

QualityClassifier train_quality_classifier(const std::vector<Eigen::VectorXd>& features,
                                           const std::vector<int>& labels, double reg,
                                           uint64_t seed, int iterations) {
  TS_CHECK(!features.empty() && features.size() == labels.size(),
           "train_quality_classifier: empty or mismatched inputs");
  TS_CHECK(reg > 0.0, "train_quality_classifier: reg must be positive");
  const int n = static_cast<int>(features.size());
  const Eigen::Index dim = features[0].size();
  bool has_pos = false, has_neg = false;
  for (int y : labels) {
    TS_CHECK(y == 1 || y == -1, "train_quality_classifier: labels must be +1/-1");
    (y == 1 ? has_pos : has_neg) = true;
  }
  TS_CHECK(has_pos && has_neg, "train_quality_classifier: both classes required");

  // Standardize features; fold the affine map back into (w, b) afterwards.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (const auto& x : features) mean += x;
  mean /= n;
  Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
  for (const auto& x : features) var += (x - mean).cwiseAbs2();
  var /= n;
  Eigen::VectorXd sigma = (var.array() + 1e-12).sqrt().matrix();

  std::vector<Eigen::VectorXd> xs(n);
  for (int i = 0; i < n; ++i) xs[i] = (features[i] - mean).cwiseQuotient(sigma);

  // Objective: (reg/2)|w|^2 + mean hinge(1 - y f). Full-batch subgradient
  // with the 1/(reg*(t+1)) schedule.
  Eigen::VectorXd w = Eigen::VectorXd::Zero(dim);
  double b = 0.0;
  for (int t = 0; t < iterations; ++t) {
    Eigen::VectorXd gw = reg * w;
    double gb = 0.0;
    for (int i = 0; i < n; ++i) {
      const double margin = labels[i] * (w.dot(xs[i]) + b);
      if (margin < 1.0) {
        gw -= (static_cast<double>(labels[i]) / n) * xs[i];
        gb -= static_cast<double>(labels[i]) / n;
      }
    }
    const double eta = 1.0 / (reg * (t + 1));
    w -= eta * gw;
    b -= eta * gb;
  }

  QualityClassifier clf;
  clf.w = w.cwiseQuotient(sigma);
  clf.b = b - clf.w.dot(mean);
  clf.sample_count = n;
  clf.seed = seed;
  int correct = 0;
  for (int i = 0; i < n; ++i)
    if ((clf.decision(features[i]) >= 0.0 ? 1 : -1) == labels[i]) ++correct;
  clf.train_accuracy = static_cast<double>(correct) / n;
  return clf;
}

}  // namespace trisplat
