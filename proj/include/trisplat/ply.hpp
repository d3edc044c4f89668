#pragma once

#include <string>

#include "trisplat/gaussian.hpp"

namespace trisplat {

// Binary little-endian PLY with the common splat vertex layout: x,y,z,
// f_dc_0..2, opacity, scale_0..2, rot_0..3 as float32, activated values.
void export_ply(const GaussianCloud& cloud, const std::string& path);
GaussianCloud import_ply(const std::string& path);

}  // namespace trisplat
