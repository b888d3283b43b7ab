#pragma once

#include <array>
#include <string>

#include "core/tensor.hpp"

namespace agman {

// Images are [3,H,W] tensors with values on the 8-bit grid k/255, k in 0..255.
// Binary PPM (P6) is the on-disk format: lossless for that grid, no
// dependencies, diffable sizes.

Tensor read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Tensor& image);

// Per-channel (x - mean) / std.
Tensor normalize_image(const Tensor& image, const std::array<double, 3>& mean, const std::array<double, 3>& std_dev);

}  // namespace agman
