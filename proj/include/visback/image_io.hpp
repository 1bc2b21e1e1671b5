#pragma once

#include <string>
#include <string_view>

#include "visback/tensor.hpp"

namespace visback {

// Binary Netpbm (P6 colour, P5 grey), maxval 255. Pixel values are stored as
// floats in [0, 255]; on write they are rounded and clamped.

std::string encode_ppm(const Tensorf& rgb);
std::string encode_pgm(const Tensorf& gray);
/// Decodes P6 to a 3-channel tensor or P5 to a 1-channel tensor.
Tensorf decode_pnm(std::string_view bytes);

void write_ppm(const std::string& path, const Tensorf& rgb);
void write_pgm(const std::string& path, const Tensorf& gray);
Tensorf read_pnm(const std::string& path);

/// Full-range BT.601 (JFIF) conversion; U and V are offset by 128 so all
/// planes stay in [0, 255].
Tensorf rgb_to_yuv(const Tensorf& rgb);
Tensorf yuv_to_rgb(const Tensorf& yuv);

/// Mirror about the vertical axis.
Tensorf flip_horizontal(const Tensorf& t);

}  // namespace visback
