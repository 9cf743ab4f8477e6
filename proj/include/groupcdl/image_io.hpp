#pragma once

#include <filesystem>

#include "groupcdl/planar.hpp"

namespace groupcdl {

/// Reads PNG (8/16-bit gray, gray+alpha, RGB, RGBA, palette) or binary
/// PGM/PPM (P5/P6). Integer sample v maps to v / maxval; alpha is dropped.
Image read_image(const std::filesystem::path& path);

/// Writes by extension: .png, .pgm, .ppm. Samples are clipped to [0,1] and
/// rounded to bit_depth (8 or 16) levels. C must be 1 or 3.
void write_image(const std::filesystem::path& path, const Image& img, int bit_depth = 8);

}  // namespace groupcdl
