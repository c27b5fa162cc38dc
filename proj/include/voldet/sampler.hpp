#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "voldet/box.hpp"
#include "voldet/rng.hpp"
#include "voldet/types.hpp"
#include "voldet/volume.hpp"

namespace voldet {

/// Integer crop window. The origin may be negative and the window may exceed
/// the volume; extract_patch pads those regions.
struct PatchSpec {
  Index3 origin{};
  Index3 size{};
  bool operator==(const PatchSpec& o) const {
    return origin == o.origin && size == o.size;
  }
};

/// Training-patch placement. Per axis, with object size S and patch size P:
///   S <= 0.7*P: start centered on the object, shift by a uniform offset in
///     [-0.7*(P-S), +0.7*(P-S)], then clamp so the object stays fully inside
///     the patch. The tie S == 0.7*P takes this branch.
///   S  > 0.7*P: center the patch on a uniform random point inside the
///     object's extent on that axis.
/// Draws one uniform per axis in (z,y,x) order in both branches, so the
/// consumed randomness is independent of which branch is taken.
inline PatchSpec sample_training_patch(const Index3& volume_shape,
                                       const BoxF& target,
                                       const Index3& patch_size, Rng& rng) {
  check_box(target);
  for (int i = 0; i < 3; ++i) {
    if (patch_size[i] <= 0)
      throw std::invalid_argument("sample_training_patch: patch size must be positive");
  }
  if (!intersects_volume(target, volume_shape))
    throw std::invalid_argument(
        "sample_training_patch: target is disjoint from the volume");

  PatchSpec spec;
  spec.size = patch_size;
  for (int i = 0; i < 3; ++i) {
    const double s = target.extent(i);
    const double p = static_cast<double>(patch_size[i]);
    if (s <= 0.7 * p) {
      const double bound = 0.7 * (p - s);
      const double delta = uniform_real(rng, -bound, bound);
      const double start = 0.5 * (target.min[i] + target.max[i]) - 0.5 * p;
      std::int64_t o = static_cast<std::int64_t>(std::floor(start + delta));
      // Integer origins keeping [min,max) inside [o, o+P).
      const std::int64_t lo = static_cast<std::int64_t>(std::ceil(target.max[i])) -
                              patch_size[i];
      const std::int64_t hi =
          static_cast<std::int64_t>(std::floor(target.min[i]));
      if (lo <= hi)
        o = std::clamp(o, lo, hi);
      else
        o = static_cast<std::int64_t>(std::floor(start));
      spec.origin[i] = o;
    } else {
      const double center = uniform_real(rng, target.min[i], target.max[i]);
      spec.origin[i] =
          static_cast<std::int64_t>(std::floor(center - 0.5 * p));
    }
  }
  return spec;
}

inline PatchSpec sample_training_patch(const Index3& volume_shape,
                                       const BoxF& target,
                                       const Index3& patch_size,
                                       std::uint64_t seed) {
  Rng rng(seed);
  return sample_training_patch(volume_shape, target, patch_size, rng);
}

/// Crop spec.size voxels starting at spec.origin. Out-of-bounds voxels get
/// pad_value for image volumes and 0 for label volumes.
inline Volume extract_patch(const Volume& vol, const PatchSpec& spec,
                            float pad_value = 0.0f) {
  for (int i = 0; i < 3; ++i) {
    if (spec.size[i] <= 0)
      throw std::invalid_argument("extract_patch: size must be positive");
  }
  const float pad = vol.kind == VoxelKind::label ? 0.0f : pad_value;
  Volume out = Volume::zeros(spec.size, vol.kind, vol.dtype);
  out.spacing = vol.spacing;
  for (int i = 0; i < 3; ++i)
    out.origin[i] =
        vol.origin[i] + static_cast<double>(spec.origin[i]) * vol.spacing[i];
  std::size_t o = 0;
  for (std::int64_t z = 0; z < spec.size[0]; ++z) {
    const std::int64_t vz = z + spec.origin[0];
    for (std::int64_t y = 0; y < spec.size[1]; ++y) {
      const std::int64_t vy = y + spec.origin[1];
      for (std::int64_t x = 0; x < spec.size[2]; ++x, ++o) {
        const std::int64_t vx = x + spec.origin[2];
        const bool inside = vz >= 0 && vz < vol.shape[0] && vy >= 0 &&
                            vy < vol.shape[1] && vx >= 0 && vx < vol.shape[2];
        out.data[o] = inside ? vol.at(vz, vy, vx) : pad;
      }
    }
  }
  return out;
}

/// Sliding-window tiling. Per axis: stride = max(1, floor(P*(1-overlap))),
/// origins at multiples of the stride, final tile shifted back to end exactly
/// at the volume boundary. Every voxel is covered by at least one tile; a
/// patch larger than the volume yields a single tile at the origin.
inline std::vector<PatchSpec> tile_volume(const Index3& volume_shape,
                                          const Index3& patch_size,
                                          double overlap_fraction) {
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0))
    throw std::invalid_argument("tile_volume: overlap must be in [0,1)");
  for (int i = 0; i < 3; ++i) {
    if (volume_shape[i] <= 0 || patch_size[i] <= 0)
      throw std::invalid_argument("tile_volume: shapes must be positive");
  }
  std::array<std::vector<std::int64_t>, 3> axis_origins;
  for (int i = 0; i < 3; ++i) {
    const std::int64_t n = volume_shape[i];
    const std::int64_t p = patch_size[i];
    if (p >= n) {
      axis_origins[i] = {0};
      continue;
    }
    const std::int64_t stride = std::max<std::int64_t>(
        1, static_cast<std::int64_t>(
               std::floor(static_cast<double>(p) * (1.0 - overlap_fraction))));
    for (std::int64_t s = 0; s + p < n; s += stride)
      axis_origins[i].push_back(s);
    axis_origins[i].push_back(n - p);
  }
  std::vector<PatchSpec> tiles;
  tiles.reserve(axis_origins[0].size() * axis_origins[1].size() *
                axis_origins[2].size());
  for (std::int64_t z : axis_origins[0])
    for (std::int64_t y : axis_origins[1])
      for (std::int64_t x : axis_origins[2])
        tiles.push_back(PatchSpec{{z, y, x}, patch_size});
  return tiles;
}

}  // namespace voldet
