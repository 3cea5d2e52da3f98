#pragma once

#include <string>

#include "didnet/color.hpp"
#include "didnet/tensor.hpp"

namespace didnet {

/// 16-bit RGB PNG. Stored code = round(v * 65535), so 8-bit (k*257) and
/// 10-bit (k*64 + high-bit replication not used; plain scaling) values
/// survive a round trip exactly when representable in 16 bits.
void write_png16(const std::string& path, const Tensor& rgb);
Tensor read_png16(const std::string& path);

/// Frame save/load by extension: ".png" -> 16-bit PNG, ".dten" -> DTEN f64
/// (lossless). The color-space tag is supplied by the caller on load.
void save_frame(const std::string& path, const Frame& f);
Frame load_frame(const std::string& path, ColorSpace space,
                 BitDepth depth = BitDepth::kFloat);

}  // namespace didnet
