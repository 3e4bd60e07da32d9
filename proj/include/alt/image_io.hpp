#pragma once

#include <string>

#include "alt/raster.hpp"

namespace alt::raster {

// 8-bit RGB PNG, non-interlaced, fixed compression level. Pixel content
// round-trips exactly through encode/decode.
void encode_png(const ImageU8& img, const std::string& path);
ImageU8 decode_png(const std::string& path);

}  // namespace alt::raster
