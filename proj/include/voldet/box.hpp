#pragma once

#include <algorithm>
#include <optional>
#include <stdexcept>

#include "voldet/types.hpp"

namespace voldet {

/// Axis-aligned half-open box [min, max) in continuous voxel coordinates,
/// axis order (z, y, x). A voxel with integer index v belongs to the grid
/// cell [v, v+1); its center sits at v + 0.5.
struct BoxF {
  Vec3 min{};
  Vec3 max{};
  std::optional<double> score;
  std::optional<int> label;

  double volume() const {
    return (max[0] - min[0]) * (max[1] - min[1]) * (max[2] - min[2]);
  }

  double extent(int axis) const { return max[axis] - min[axis]; }

  bool operator==(const BoxF& o) const {
    return min == o.min && max == o.max;
  }
};

inline void check_box(const BoxF& b) {
  for (int i = 0; i < 3; ++i) {
    if (!(b.min[i] < b.max[i]))
      throw std::invalid_argument("box: min must be < max on every axis");
  }
  if (b.score && (*b.score < 0.0 || *b.score > 1.0))
    throw std::invalid_argument("box: score outside [0, 1]");
}

/// Intersection over union of two half-open boxes, computed on continuous
/// volumes (no voxel discretization). Always in [0, 1].
inline double iou(const BoxF& a, const BoxF& b) {
  check_box(a);
  check_box(b);
  double inter = 1.0;
  for (int i = 0; i < 3; ++i) {
    const double lo = std::max(a.min[i], b.min[i]);
    const double hi = std::min(a.max[i], b.max[i]);
    if (hi <= lo) return 0.0;
    inter *= hi - lo;
  }
  const double uni = a.volume() + b.volume() - inter;
  return inter / uni;
}

inline BoxF translate(const BoxF& b, const Vec3& offset) {
  BoxF out = b;
  for (int i = 0; i < 3; ++i) {
    out.min[i] += offset[i];
    out.max[i] += offset[i];
  }
  return out;
}

/// Clip a box to the volume [0, shape). Returns nullopt when nothing is left.
inline std::optional<BoxF> clip_to_volume(const BoxF& b, const Index3& shape) {
  BoxF out = b;
  for (int i = 0; i < 3; ++i) {
    out.min[i] = std::max(out.min[i], 0.0);
    out.max[i] = std::min(out.max[i], static_cast<double>(shape[i]));
    if (!(out.min[i] < out.max[i])) return std::nullopt;
  }
  return out;
}

inline bool intersects_volume(const BoxF& b, const Index3& shape) {
  for (int i = 0; i < 3; ++i) {
    if (b.max[i] <= 0.0 || b.min[i] >= static_cast<double>(shape[i]))
      return false;
  }
  return true;
}

}  // namespace voldet
