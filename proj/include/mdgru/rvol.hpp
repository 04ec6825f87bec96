// RVOL: minimal little-endian binary volume format.
//
// Layout: magic "RVOL" | version u32 (=1) | dims 3 x u32 | spacing 3 x f64 |
// dtype u32 (0 = float32, 1 = float64) | raw voxels, x fastest.
// Total header size 48 bytes; payload length must equal
// product(dims) * sizeof(dtype) exactly (trailing bytes are an error).
#pragma once

#include <string>

#include "mdgru/volume.hpp"

namespace mdgru {

inline constexpr uint32_t kRVolVersion = 1;
inline constexpr int64_t kRVolHeaderBytes = 48;

Volume read_volume(const std::string& path);
void write_volume(const Volume& v, const std::string& path);

}  // namespace mdgru
