#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "voldet/box.hpp"
#include "voldet/volume.hpp"

namespace voldet {

/// Rasterize boxes as filled ellipsoids into a label volume. Box k gets
/// instance id k+1. Voxel v (center v+0.5) belongs to box k's ellipsoid iff
/// sum_i ((v_i+0.5 - c_i)/r_i)^2 <= 1 with c = (min+max)/2, r = (max-min)/2.
/// Overlaps resolve by draw order: later boxes overwrite earlier ones.
inline Volume ellipsoid_mask(const std::vector<BoxF>& boxes,
                             const Index3& shape) {
  Volume mask = Volume::zeros(shape, VoxelKind::label, Dtype::u16);
  int id = 0;
  for (const BoxF& b : boxes) {
    ++id;
    check_box(b);
    if (!intersects_volume(b, shape))
      throw std::invalid_argument("ellipsoid_mask: box " + std::to_string(id) +
                                  " does not intersect the volume");
    Vec3 c, r;
    for (int i = 0; i < 3; ++i) {
      c[i] = 0.5 * (b.min[i] + b.max[i]);
      r[i] = 0.5 * (b.max[i] - b.min[i]);
    }
    // Only voxels inside the box can satisfy the inequality.
    Index3 lo, hi;
    for (int i = 0; i < 3; ++i) {
      lo[i] = std::max<std::int64_t>(
          0, static_cast<std::int64_t>(std::floor(b.min[i])));
      hi[i] = std::min<std::int64_t>(
          shape[i], static_cast<std::int64_t>(std::ceil(b.max[i])));
    }
    for (std::int64_t z = lo[0]; z < hi[0]; ++z) {
      const double dz = (static_cast<double>(z) + 0.5 - c[0]) / r[0];
      for (std::int64_t y = lo[1]; y < hi[1]; ++y) {
        const double dy = (static_cast<double>(y) + 0.5 - c[1]) / r[1];
        for (std::int64_t x = lo[2]; x < hi[2]; ++x) {
          const double dx = (static_cast<double>(x) + 0.5 - c[2]) / r[2];
          if (dz * dz + dy * dy + dx * dx <= 1.0)
            mask.at(z, y, x) = static_cast<float>(id);
        }
      }
    }
  }
  return mask;
}

/// Tight half-open AABB per instance id present in the mask, ascending by id.
/// min = componentwise minimum voxel index, max = maximum index + 1.
inline std::vector<std::pair<int, BoxF>> boxes_from_mask(const Volume& mask) {
  if (mask.kind != VoxelKind::label)
    throw std::invalid_argument("boxes_from_mask: mask must be a label volume");
  struct Extent {
    Index3 lo{}, hi{};
  };
  std::map<int, Extent> extents;
  std::size_t o = 0;
  for (std::int64_t z = 0; z < mask.shape[0]; ++z)
    for (std::int64_t y = 0; y < mask.shape[1]; ++y)
      for (std::int64_t x = 0; x < mask.shape[2]; ++x, ++o) {
        const float f = mask.data[o];
        if (f == 0.0f) continue;
        const int id = static_cast<int>(f);
        auto [it, fresh] = extents.try_emplace(id, Extent{{z, y, x}, {z, y, x}});
        if (!fresh) {
          Extent& e = it->second;
          e.lo = {std::min(e.lo[0], z), std::min(e.lo[1], y),
                  std::min(e.lo[2], x)};
          e.hi = {std::max(e.hi[0], z), std::max(e.hi[1], y),
                  std::max(e.hi[2], x)};
        }
      }
  std::vector<std::pair<int, BoxF>> out;
  out.reserve(extents.size());
  for (const auto& [id, e] : extents) {
    BoxF b;
    for (int i = 0; i < 3; ++i) {
      b.min[i] = static_cast<double>(e.lo[i]);
      b.max[i] = static_cast<double>(e.hi[i] + 1);
    }
    b.label = id;
    out.emplace_back(id, b);
  }
  return out;
}

inline BoxF box_from_mask(const Volume& mask, int instance) {
  for (auto& [id, box] : boxes_from_mask(mask))
    if (id == instance) return box;
  throw std::runtime_error("box_from_mask: instance " +
                           std::to_string(instance) + " not found");
}

}  // namespace voldet
