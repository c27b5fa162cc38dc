#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "voldet/types.hpp"

namespace voldet {

enum class VoxelKind { image, label };
enum class Dtype { f32, u8, u16 };

inline std::string to_string(VoxelKind k) {
  return k == VoxelKind::image ? "image" : "label";
}
inline std::string to_string(Dtype d) {
  switch (d) {
    case Dtype::f32: return "f32";
    case Dtype::u8: return "u8";
    default: return "u16";
  }
}

/// Dense 3D scalar grid. Axis order is (z, y, x) everywhere; the payload is
/// stored with x fastest-varying and z slowest. Voxel index v occupies the
/// cell [v, v+1) in continuous voxel coordinates and its world-space center
/// is origin + (v + 0.5) * spacing.
///
/// Volumes are immutable by convention after construction: every operation
/// in this library takes volumes by const reference and returns new ones,
/// so concurrent use from multiple threads is safe.
struct Volume {
  Index3 shape{};          // voxels per axis, (z, y, x)
  Vec3 spacing{1, 1, 1};   // mm per voxel
  Vec3 origin{0, 0, 0};    // mm
  VoxelKind kind = VoxelKind::image;
  Dtype dtype = Dtype::f32;
  std::vector<float> data;  // shape[0]*shape[1]*shape[2] values

  std::int64_t voxel_count() const { return shape[0] * shape[1] * shape[2]; }

  std::int64_t flat_index(std::int64_t z, std::int64_t y,
                          std::int64_t x) const {
    return (z * shape[1] + y) * shape[2] + x;
  }

  float at(std::int64_t z, std::int64_t y, std::int64_t x) const {
    return data[static_cast<std::size_t>(flat_index(z, y, x))];
  }
  float& at(std::int64_t z, std::int64_t y, std::int64_t x) {
    return data[static_cast<std::size_t>(flat_index(z, y, x))];
  }

  static Volume zeros(const Index3& shape, VoxelKind kind = VoxelKind::image,
                      Dtype dtype = Dtype::f32) {
    for (int i = 0; i < 3; ++i) {
      if (shape[i] <= 0)
        throw std::invalid_argument("volume: shape must be positive");
    }
    Volume v;
    v.shape = shape;
    v.kind = kind;
    v.dtype = dtype;
    v.data.assign(static_cast<std::size_t>(v.voxel_count()), 0.0f);
    return v;
  }
};

inline void validate(const Volume& v) {
  for (int i = 0; i < 3; ++i) {
    if (v.shape[i] <= 0)
      throw std::invalid_argument("volume: shape must be positive");
    if (!(v.spacing[i] > 0.0))
      throw std::invalid_argument("volume: spacing must be positive");
  }
  if (static_cast<std::int64_t>(v.data.size()) != v.voxel_count())
    throw std::invalid_argument("volume: data length does not match shape");
  if (v.kind == VoxelKind::label) {
    for (float f : v.data) {
      if (f < 0.0f || f != std::floor(f))
        throw std::invalid_argument(
            "volume: label data must be non-negative integers");
    }
  }
}

/// True iff any axis deviates from the target spacing by more than the
/// relative tolerance: |spacing_i - target_i| / target_i > tolerance.
inline bool needs_resampling(const Vec3& spacing, const Vec3& target,
                             double tolerance = 0.05) {
  if (tolerance < 0.0)
    throw std::invalid_argument("needs_resampling: tolerance must be >= 0");
  for (int i = 0; i < 3; ++i) {
    if (!(spacing[i] > 0.0) || !(target[i] > 0.0))
      throw std::invalid_argument(
          "needs_resampling: spacing and target must be positive");
  }
  for (int i = 0; i < 3; ++i) {
    if (std::abs(spacing[i] - target[i]) / target[i] > tolerance) return true;
  }
  return false;
}

namespace detail {

/// Trilinear sample at continuous voxel coordinate p. Out-of-range positions
/// clamp to the nearest voxel (edge padding).
inline float sample_trilinear(const Volume& v, const Vec3& p) {
  std::int64_t i0[3], i1[3];
  double w1[3];
  for (int a = 0; a < 3; ++a) {
    const double x = p[a];
    const std::int64_t f = static_cast<std::int64_t>(std::floor(x));
    const double frac = x - static_cast<double>(f);
    const std::int64_t n = v.shape[a];
    i0[a] = std::min(std::max(f, std::int64_t{0}), n - 1);
    i1[a] = std::min(std::max(f + 1, std::int64_t{0}), n - 1);
    w1[a] = frac;
  }
  double acc = 0.0;
  for (int dz = 0; dz < 2; ++dz) {
    const double wz = dz ? w1[0] : 1.0 - w1[0];
    if (wz == 0.0) continue;
    for (int dy = 0; dy < 2; ++dy) {
      const double wy = dy ? w1[1] : 1.0 - w1[1];
      if (wy == 0.0) continue;
      for (int dx = 0; dx < 2; ++dx) {
        const double wx = dx ? w1[2] : 1.0 - w1[2];
        if (wx == 0.0) continue;
        acc += wz * wy * wx *
               v.at(dz ? i1[0] : i0[0], dy ? i1[1] : i0[1], dx ? i1[2] : i0[2]);
      }
    }
  }
  return static_cast<float>(acc);
}

/// Nearest-neighbor sample in the same index space as sample_trilinear
/// (voxel v sits at coordinate v). Halfway ties round up; out-of-range
/// clamps to the nearest voxel.
inline float sample_nearest(const Volume& v, const Vec3& p) {
  std::int64_t idx[3];
  for (int a = 0; a < 3; ++a) {
    const std::int64_t f = static_cast<std::int64_t>(std::floor(p[a] + 0.5));
    idx[a] = std::min(std::max(f, std::int64_t{0}), v.shape[a] - 1);
  }
  return v.at(idx[0], idx[1], idx[2]);
}

}  // namespace detail

/// Resample a volume onto a new voxel spacing. Output shape per axis is
/// round(shape_i * spacing_i / target_i) rounded half away from zero, at
/// least 1. Image volumes are interpolated trilinearly, label volumes with
/// nearest neighbor, so label outputs contain only input label values.
inline Volume resample(const Volume& vol, const Vec3& target_spacing) {
  validate(vol);
  for (int i = 0; i < 3; ++i) {
    if (!(target_spacing[i] > 0.0))
      throw std::invalid_argument("resample: target spacing must be positive");
  }
  Volume out;
  out.spacing = target_spacing;
  out.origin = vol.origin;
  out.kind = vol.kind;
  out.dtype = vol.dtype;
  double scale[3];
  for (int i = 0; i < 3; ++i) {
    const double exact = static_cast<double>(vol.shape[i]) * vol.spacing[i] /
                         target_spacing[i];
    out.shape[i] = std::max<std::int64_t>(1, std::llround(exact));
    // Output center o maps to input coordinate (o + 0.5) * scale - 0.5;
    // scale is exactly 1.0 when the spacings already agree.
    scale[i] = target_spacing[i] / vol.spacing[i];
  }
  out.data.resize(static_cast<std::size_t>(out.voxel_count()));
  const bool nearest = vol.kind == VoxelKind::label;
  std::size_t o = 0;
  for (std::int64_t z = 0; z < out.shape[0]; ++z) {
    const double pz = (static_cast<double>(z) + 0.5) * scale[0] - 0.5;
    for (std::int64_t y = 0; y < out.shape[1]; ++y) {
      const double py = (static_cast<double>(y) + 0.5) * scale[1] - 0.5;
      for (std::int64_t x = 0; x < out.shape[2]; ++x, ++o) {
        const double px = (static_cast<double>(x) + 0.5) * scale[2] - 0.5;
        const Vec3 p{pz, py, px};
        out.data[o] = nearest ? detail::sample_nearest(vol, p)
                              : detail::sample_trilinear(vol, p);
      }
    }
  }
  return out;
}

}  // namespace voldet
