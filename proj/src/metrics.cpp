#include "trisplat/metrics.hpp"

#include <cmath>

namespace trisplat {

namespace {
double mse_rgb(const Image& a, const Image& b) {
  TS_CHECK(a.same_size(b), "psnr/ssim: image size mismatch");
  TS_CHECK(a.channels >= 3 && b.channels >= 3, "psnr/ssim: need RGB channels");
  double acc = 0.0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x)
      for (int c = 0; c < 3; ++c) acc += std::pow(a.at(x, y, c) - b.at(x, y, c), 2);
  return acc / (static_cast<double>(a.pixel_count()) * 3.0);
}

double psnr_from_mse(double mse) {
  if (mse <= 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}
}  // namespace

double psnr(const Image& a, const Image& b) { return psnr_from_mse(mse_rgb(a, b)); }

double psnr(const RenderedImage& render, const Image& target) {
  TS_CHECK(render.width == target.width && render.height == target.height,
           "psnr: resolution mismatch");
  TS_CHECK(target.channels >= 3, "psnr: target needs RGB channels");
  double acc = 0.0;
  for (int y = 0; y < render.height; ++y)
    for (int x = 0; x < render.width; ++x)
      for (int c = 0; c < 3; ++c)
        acc += std::pow(render.rgb[(static_cast<size_t>(y) * render.width + x) * 3 + c] -
                            target.at(x, y, c),
                        2);
  return psnr_from_mse(acc / (static_cast<double>(render.width) * render.height * 3.0));
}

double ssim(const Image& a, const Image& b) {
  TS_CHECK(a.same_size(b), "ssim: image size mismatch");
  TS_CHECK(a.channels >= 3 && b.channels >= 3, "ssim: need RGB channels");
  constexpr int kWin = 11, kHalf = 5;
  constexpr double kSigma = 1.5, kK1 = 0.01, kK2 = 0.03;
  const double c1 = kK1 * kK1, c2 = kK2 * kK2;
  TS_CHECK(a.width >= kWin && a.height >= kWin, "ssim: image smaller than the window");

  double kernel[kWin];
  double ksum = 0.0;
  for (int i = 0; i < kWin; ++i) {
    kernel[i] = std::exp(-0.5 * std::pow((i - kHalf) / kSigma, 2));
    ksum += kernel[i];
  }
  for (double& k : kernel) k /= ksum;

  double total = 0.0;
  long count = 0;
  for (int c = 0; c < 3; ++c)
    for (int y = kHalf; y + kHalf < a.height; ++y)
      for (int x = kHalf; x + kHalf < a.width; ++x) {
        double mu_a = 0, mu_b = 0, saa = 0, sbb = 0, sab = 0;
        for (int dy = -kHalf; dy <= kHalf; ++dy)
          for (int dx = -kHalf; dx <= kHalf; ++dx) {
            const double w = kernel[dy + kHalf] * kernel[dx + kHalf];
            const double va = a.at(x + dx, y + dy, c);
            const double vb = b.at(x + dx, y + dy, c);
            mu_a += w * va;
            mu_b += w * vb;
            saa += w * va * va;
            sbb += w * vb * vb;
            sab += w * va * vb;
          }
        const double var_a = saa - mu_a * mu_a;
        const double var_b = sbb - mu_b * mu_b;
        const double cov = sab - mu_a * mu_b;
        total += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
                 ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
        ++count;
      }
  return total / count;
}

double chamfer(const std::vector<Eigen::Vector3d>& a, const std::vector<Eigen::Vector3d>& b) {
  TS_CHECK(!a.empty() && !b.empty(), "chamfer: empty point set");
  auto one_way = [](const std::vector<Eigen::Vector3d>& from,
                    const std::vector<Eigen::Vector3d>& to) {
    double acc = 0.0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, (p - q).norm());
      acc += best;
    }
    return acc / from.size();
  };
  return 0.5 * (one_way(a, b) + one_way(b, a));
}

std::vector<Eigen::Vector3d> opaque_centers(const GaussianCloud& cloud, double tau) {
  std::vector<Eigen::Vector3d> out;
  for (const Gaussian& g : cloud.gaussians)
    if (g.opacity > tau) out.push_back(g.position);
  return out;
}

}  // namespace trisplat
