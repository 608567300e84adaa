#pragma once

#include <filesystem>

#include "gslm/tensor.hpp"

namespace gslm {

// Binary tensor container, used repo-wide.
//   magic "GTEN", u8 version = 1, u8 dtype (1 = f64), u8 rank,
//   rank little-endian u32 extents, row-major little-endian f64 payload.
// Round-trips are bit-exact.
void write_gten(const std::filesystem::path& path, const Tensor& t);
Tensor read_gten(const std::filesystem::path& path);

}  // namespace gslm
