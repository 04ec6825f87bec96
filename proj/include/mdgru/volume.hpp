// In-memory volume and landmark types shared by IO and the pipeline.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mdgru/error.hpp"

namespace mdgru {

enum class VoxelType : uint32_t { f32 = 0, f64 = 1 };

// Scalar volume stored in file order: x fastest, then y, then z.
// Values are held as doubles regardless of on-disk dtype; the dtype is kept
// so an unmodified volume rewrites byte-identically.
struct Volume {
  std::array<int64_t, 3> extents{0, 0, 0};
  std::array<double, 3> spacing{1, 1, 1};
  VoxelType dtype = VoxelType::f32;
  std::vector<double> data;

  int64_t size() const { return extents[0] * extents[1] * extents[2]; }

  int64_t index(int64_t x, int64_t y, int64_t z) const {
    return (z * extents[1] + y) * extents[0] + x;
  }
  double at(int64_t x, int64_t y, int64_t z) const { return data[static_cast<size_t>(index(x, y, z))]; }
  double& at(int64_t x, int64_t y, int64_t z) { return data[static_cast<size_t>(index(x, y, z))]; }

  static Volume zeros(std::array<int64_t, 3> extents, std::array<double, 3> spacing,
                      VoxelType dtype);
  void validate() const;  // positive extents and spacing, size matches
};

// Coordinate frames a landmark can live in. Conversions happen only through
// the dedicated mapping functions; mixing frames is a contract error.
enum class Space { original, padded, coarse_grid, window };

const char* space_name(Space s);

struct Landmark {
  std::array<double, 3> pos{0, 0, 0};
  Space space = Space::original;
};

inline void require_space(const Landmark& lm, Space s, const char* where) {
  if (lm.space != s) {
    throw_contract(std::string(where) + ": expected a " + space_name(s) +
                   "-space landmark, got " + space_name(lm.space));
  }
}

}  // namespace mdgru
