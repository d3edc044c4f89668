#pragma once

#include <Eigen/Dense>
#include <functional>

#include "trisplat/core/random.hpp"

namespace trisplat::testutil {

// Central finite differences of f at x; h is applied per coordinate.
inline Eigen::ArrayXd finite_diff(const std::function<double(const Eigen::ArrayXd&)>& f,
                                  const Eigen::ArrayXd& x, double h = 1e-6) {
  Eigen::ArrayXd g(x.size());
  Eigen::ArrayXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = xp[i];
    xp[i] = orig + h;
    const double fp = f(xp);
    xp[i] = orig - h;
    const double fm = f(xp);
    xp[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// Max relative error between analytic and numeric gradients, with an absolute
// floor so near-zero entries compare absolutely.
inline double grad_rel_error(const Eigen::ArrayXd& analytic, const Eigen::ArrayXd& numeric,
                             double abs_floor = 1e-7) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), abs_floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

inline Eigen::ArrayXd random_array(Rng& rng, int n, double lo, double hi) {
  Eigen::ArrayXd a(n);
  for (int i = 0; i < n; ++i) a[i] = rand_uniform(rng, lo, hi);
  return a;
}

}  // namespace trisplat::testutil
