#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "gslm/tensor.hpp"

namespace gslm {

struct Pgm {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels;  // row-major
};

void write_pgm(const std::filesystem::path& path, int width, int height,
               const std::vector<uint8_t>& pixels);
Pgm read_pgm(const std::filesystem::path& path);

// Nearest-neighbor index mapping with the pixel-center convention:
// src = floor((dst + 0.5) * src_n / dst_n), computed in integer arithmetic.
inline int nearest_index(int dst, int src_n, int dst_n) {
    int s = static_cast<int>((static_cast<int64_t>(2 * dst + 1) * src_n) / (2 * dst_n));
    return s < src_n ? s : src_n - 1;
}

Tensor nearest_resize(const Tensor& src_hw, int out_h, int out_w);
std::vector<uint8_t> nearest_resize_u8(const std::vector<uint8_t>& src, int src_h, int src_w,
                                       int out_h, int out_w);

// 8-bit visualization of a [0,1] map: value*255, rounded half up.
std::vector<uint8_t> map_to_bytes(const Tensor& map_hw);

}  // namespace gslm
