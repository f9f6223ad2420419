#pragma once

#include <string>

#include "rpnet/scene.hpp"

namespace rpnet {

// 24-bit RGB; float values are rounded to 8 bits.
void write_png_rgb8(const std::string& path, const Image& image);

// single channel, foreground stored as 255
void write_png_gray8(const std::string& path, const Mask& mask);

Image read_png_rgb(const std::string& path);  // values scaled back to [0,1]
Mask read_png_gray(const std::string& path);  // nonzero pixels become 1

} // namespace rpnet
