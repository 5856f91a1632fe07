#pragma once

#include <string>

#include "sadepth/tensor.hpp"

namespace sadepth::io {

/// 8-bit PNG/JPEG -> (3,H,W) in [0,1].
Tensor load_image(const std::string& path);

/// (3,H,W) or (1,H,W) in [0,1] -> 8-bit PNG/JPEG (by extension).
void save_image_u8(const std::string& path, const Tensor& image);

/// (1,H,W) or (H,W) map scaled by `scale` into 16-bit PNG range.
void save_gray16(const std::string& path, const Tensor& map, double scale);
Tensor load_gray16(const std::string& path, double scale); // returns (1,H,W)

/// Raw 32-bit float binary, row major, no header.
void save_f32(const std::string& path, const Tensor& map);
Tensor load_f32(const std::string& path, int64_t h, int64_t w); // returns (1,H,W)

} // namespace sadepth::io
