#pragma once

#include <string>
#include <vector>

#include "trisplat/camera.hpp"
#include "trisplat/core/image.hpp"

namespace trisplat {

// 8-bit RGBA PNG with straight alpha. Writes are atomic (temp then rename).
void write_png_rgba8(const std::string& path, const Image& img);
Image read_png_rgba8(const std::string& path);

// Scene directory layout: view_{i}.png (dense from 0) plus cameras.json with
// the per-view extrinsic (row-major 4x4), intrinsics, size, and derived
// elevation/azimuth angles.
void save_views(const std::string& dir, const std::vector<PosedView>& views);
std::vector<PosedView> load_views(const std::string& dir);

}  // namespace trisplat
