#pragma once

#include <array>
#include <cstdint>

namespace voldet {

/// Continuous coordinates / sizes, axis order (z, y, x).
using Vec3 = std::array<double, 3>;

/// Integer voxel indices / grid shapes, axis order (z, y, x).
using Index3 = std::array<std::int64_t, 3>;

inline Vec3 to_vec3(const Index3& a) {
  return {static_cast<double>(a[0]), static_cast<double>(a[1]),
          static_cast<double>(a[2])};
}

}  // namespace voldet
