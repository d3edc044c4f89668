#pragma once

#include <Eigen/Dense>
#include <vector>

#include "trisplat/core/image.hpp"
#include "trisplat/gaussian.hpp"
#include "trisplat/render.hpp"

namespace trisplat {

// PSNR over the RGB channels of [0,1] images, capped at 99 dB.
double psnr(const Image& a, const Image& b);
double psnr(const RenderedImage& render, const Image& target);

// Mean SSIM over RGB channels, 11x11 Gaussian window (sigma 1.5), k1=0.01,
// k2=0.03, dynamic range 1.
double ssim(const Image& a, const Image& b);

// Mean bidirectional nearest-neighbor distance; errors on empty sets.
double chamfer(const std::vector<Eigen::Vector3d>& a, const std::vector<Eigen::Vector3d>& b);

// Centers of Gaussians whose opacity exceeds tau, for geometry metrics.
std::vector<Eigen::Vector3d> opaque_centers(const GaussianCloud& cloud, double tau = 0.05);

}  // namespace trisplat
