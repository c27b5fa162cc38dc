#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "voldet/box.hpp"
#include "voldet/rng.hpp"
#include "voldet/types.hpp"
#include "voldet/volume.hpp"

namespace voldet {

struct Lesion {
  Vec3 center;       // continuous voxel coordinates
  Vec3 radii;        // voxels, > 0
  double intensity = 1.0;
};

struct PhantomSpec {
  Index3 shape{};
  Vec3 spacing{1, 1, 1};
  std::vector<Lesion> lesions;
  double background_noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Synthetic test volume with analytically known lesion geometry. Background
/// is zero-mean Gaussian noise; each lesion is a filled ellipsoid of constant
/// intensity (later lesions overwrite earlier ones). Returned boxes are the
/// tight half-open AABBs of the rendered voxels, one per lesion in order.
/// Bit-reproducible: same spec, same bytes.
inline std::pair<Volume, std::vector<BoxF>> generate_phantom(
    const PhantomSpec& spec) {
  Volume vol = Volume::zeros(spec.shape, VoxelKind::image, Dtype::f32);
  vol.spacing = spec.spacing;
  validate(vol);

  for (std::size_t k = 0; k < spec.lesions.size(); ++k) {
    const Lesion& l = spec.lesions[k];
    for (int i = 0; i < 3; ++i) {
      if (!(l.radii[i] > 0.0))
        throw std::invalid_argument("phantom: lesion radii must be positive");
      if (l.center[i] - l.radii[i] < 0.0 ||
          l.center[i] + l.radii[i] > static_cast<double>(spec.shape[i]))
        throw std::invalid_argument("phantom: lesion " + std::to_string(k + 1) +
                                    " exceeds volume bounds");
    }
  }

  if (spec.background_noise_sigma < 0.0)
    throw std::invalid_argument("phantom: noise sigma must be >= 0");
  if (spec.background_noise_sigma > 0.0) {
    Rng rng(spec.seed);
    NormalSampler normal(rng);
    for (float& f : vol.data)
      f = static_cast<float>(normal() * spec.background_noise_sigma);
  }

  std::vector<BoxF> boxes;
  boxes.reserve(spec.lesions.size());
  for (const Lesion& l : spec.lesions) {
    Index3 lo, hi, seen_lo, seen_hi;
    bool seen = false;
    for (int i = 0; i < 3; ++i) {
      lo[i] = static_cast<std::int64_t>(std::floor(l.center[i] - l.radii[i]));
      hi[i] = static_cast<std::int64_t>(std::ceil(l.center[i] + l.radii[i]));
      lo[i] = std::max<std::int64_t>(lo[i], 0);
      hi[i] = std::min<std::int64_t>(hi[i], spec.shape[i]);
    }
    for (std::int64_t z = lo[0]; z < hi[0]; ++z) {
      const double dz = (static_cast<double>(z) + 0.5 - l.center[0]) / l.radii[0];
      for (std::int64_t y = lo[1]; y < hi[1]; ++y) {
        const double dy =
            (static_cast<double>(y) + 0.5 - l.center[1]) / l.radii[1];
        for (std::int64_t x = lo[2]; x < hi[2]; ++x) {
          const double dx =
              (static_cast<double>(x) + 0.5 - l.center[2]) / l.radii[2];
          if (dz * dz + dy * dy + dx * dx > 1.0) continue;
          vol.at(z, y, x) = static_cast<float>(l.intensity);
          if (!seen) {
            seen = true;
            seen_lo = seen_hi = {z, y, x};
          } else {
            seen_lo = {std::min(seen_lo[0], z), std::min(seen_lo[1], y),
                       std::min(seen_lo[2], x)};
            seen_hi = {std::max(seen_hi[0], z), std::max(seen_hi[1], y),
                       std::max(seen_hi[2], x)};
          }
        }
      }
    }
    if (!seen)
      throw std::invalid_argument("phantom: lesion renders no voxels");
    BoxF b;
    for (int i = 0; i < 3; ++i) {
      b.min[i] = static_cast<double>(seen_lo[i]);
      b.max[i] = static_cast<double>(seen_hi[i] + 1);
    }
    boxes.push_back(b);
  }
  return {std::move(vol), std::move(boxes)};
}

}  // namespace voldet
