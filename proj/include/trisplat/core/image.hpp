#pragma once

#include <vector>

#include "trisplat/core/check.hpp"

namespace trisplat {

// Interleaved row-major HxWxC image with values nominally in [0,1].
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c, double fill = 0.0)
      : width(w), height(h), channels(c), data(static_cast<size_t>(w) * h * c, fill) {}

  double& at(int x, int y, int c) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  double at(int x, int y, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  size_t pixel_count() const { return static_cast<size_t>(width) * height; }
  bool same_size(const Image& o) const { return width == o.width && height == o.height; }
};

// Luma conversion; for RGBA inputs the alpha channel is ignored.
inline std::vector<double> to_gray(const Image& img) {
  TS_CHECK(img.channels >= 3, "to_gray: need at least 3 channels");
  std::vector<double> g(img.pixel_count());
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      g[static_cast<size_t>(y) * img.width + x] =
          0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
  return g;
}

// Integer-factor box downsample; width and height must divide evenly.
inline Image box_downsample(const Image& img, int factor) {
  TS_CHECK(factor >= 1 && img.width % factor == 0 && img.height % factor == 0,
           "box_downsample: size not divisible by factor");
  if (factor == 1) return img;
  Image out(img.width / factor, img.height / factor, img.channels);
  const double inv = 1.0 / (factor * factor);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        for (int dy = 0; dy < factor; ++dy)
          for (int dx = 0; dx < factor; ++dx) acc += img.at(x * factor + dx, y * factor + dy, c);
        out.at(x, y, c) = acc * inv;
      }
  return out;
}

}  // namespace trisplat
