#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "voldet/box.hpp"
#include "voldet/sampler.hpp"
#include "voldet/types.hpp"
#include "voldet/volume.hpp"

namespace voldet {

struct DetectionSet {
  std::string image_id;
  std::vector<BoxF> boxes;  // scores required by every consumer here
};

namespace detail {

inline void require_score(const BoxF& b, const char* who) {
  if (!b.score)
    throw std::invalid_argument(std::string(who) + ": box without score");
}

/// Ordering used by nms/stitch/ensemble: score descending, then smaller min
/// corner, then larger box, then label. Total on distinct payloads, so kept
/// sets never depend on input order.
inline bool det_before(const BoxF& a, const BoxF& b) {
  if (*a.score != *b.score) return *a.score > *b.score;
  if (a.min != b.min) return a.min < b.min;
  if (a.max != b.max) return a.max > b.max;
  return a.label.value_or(-1) < b.label.value_or(-1);
}

}  // namespace detail

/// Deterministic intensity-blob detector: 6-connected components of
/// {v : vol(v) >= intensity_threshold} with at least min_voxels voxels.
/// Each component is reported as its tight half-open AABB with
/// score = min(1, mean component intensity / (2 * intensity_threshold)),
/// which lands in [0.5, 1] since every member is at or above the threshold.
inline DetectionSet blob_detect(const Volume& vol, double intensity_threshold,
                                std::int64_t min_voxels,
                                std::string image_id = "") {
  if (vol.kind != VoxelKind::image)
    throw std::invalid_argument("blob_detect: expects an image volume");
  if (!(intensity_threshold > 0.0))
    throw std::invalid_argument("blob_detect: threshold must be positive");
  if (min_voxels < 1)
    throw std::invalid_argument("blob_detect: min_voxels must be >= 1");

  const std::int64_t Z = vol.shape[0], Y = vol.shape[1], X = vol.shape[2];
  const float thr = static_cast<float>(intensity_threshold);
  std::vector<std::uint8_t> seen(vol.data.size(), 0);
  std::vector<std::int64_t> stack;
  DetectionSet out{std::move(image_id), {}};

  std::size_t o = 0;
  for (std::int64_t z = 0; z < Z; ++z)
    for (std::int64_t y = 0; y < Y; ++y)
      for (std::int64_t x = 0; x < X; ++x, ++o) {
        if (seen[o] || vol.data[o] < thr) continue;
        Index3 lo{z, y, x}, hi{z, y, x};
        std::int64_t count = 0;
        double sum = 0.0;
        seen[o] = 1;
        stack.push_back(static_cast<std::int64_t>(o));
        while (!stack.empty()) {
          const std::int64_t cur = stack.back();
          stack.pop_back();
          const std::int64_t cz = cur / (Y * X);
          const std::int64_t cy = (cur / X) % Y;
          const std::int64_t cx = cur % X;
          ++count;
          sum += vol.data[static_cast<std::size_t>(cur)];
          lo = {std::min(lo[0], cz), std::min(lo[1], cy), std::min(lo[2], cx)};
          hi = {std::max(hi[0], cz), std::max(hi[1], cy), std::max(hi[2], cx)};
          const std::int64_t nb[6] = {cur - Y * X, cur + Y * X, cur - X,
                                      cur + X,     cur - 1,     cur + 1};
          const bool ok[6] = {cz > 0, cz < Z - 1, cy > 0,
                              cy < Y - 1, cx > 0, cx < X - 1};
          for (int k = 0; k < 6; ++k) {
            if (!ok[k]) continue;
            const auto idx = static_cast<std::size_t>(nb[k]);
            if (seen[idx] || vol.data[idx] < thr) continue;
            seen[idx] = 1;
            stack.push_back(nb[k]);
          }
        }
        if (count < min_voxels) continue;
        BoxF b;
        for (int i = 0; i < 3; ++i) {
          b.min[i] = static_cast<double>(lo[i]);
          b.max[i] = static_cast<double>(hi[i] + 1);
        }
        const double mean = sum / static_cast<double>(count);
        b.score = std::min(1.0, mean / (2.0 * intensity_threshold));
        out.boxes.push_back(b);
      }
  return out;
}

/// Greedy non-maximum suppression. A box is suppressed iff its IoU with an
/// already-kept box exceeds the threshold (strict). Output keeps the
/// processing order: score descending with deterministic tie-breaks.
inline std::vector<BoxF> nms(std::vector<BoxF> dets, double iou_threshold) {
  if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0))
    throw std::invalid_argument("nms: threshold must be in [0,1]");
  for (const BoxF& b : dets) {
    check_box(b);
    detail::require_score(b, "nms");
  }
  std::sort(dets.begin(), dets.end(), detail::det_before);
  std::vector<BoxF> kept;
  for (const BoxF& b : dets) {
    bool suppressed = false;
    for (const BoxF& k : kept) {
      if (iou(k, b) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(b);
  }
  return kept;
}

/// Merge per-tile detections (in tile-local coordinates) into one global
/// set: translate by each tile's origin, clip to the volume, drop boxes that
/// fall entirely outside, then apply global nms.
inline DetectionSet stitch(
    const std::vector<std::pair<PatchSpec, DetectionSet>>& per_patch,
    double iou_threshold, const Index3& volume_shape,
    std::string image_id = "") {
  std::vector<BoxF> pool;
  for (const auto& [spec, dets] : per_patch) {
    for (const BoxF& b : dets.boxes) {
      detail::require_score(b, "stitch");
      const BoxF global = translate(b, to_vec3(spec.origin));
      if (auto clipped = clip_to_volume(global, volume_shape))
        pool.push_back(*clipped);
    }
  }
  return DetectionSet{std::move(image_id), nms(std::move(pool), iou_threshold)};
}

/// Two-model fusion. Pool both sets, cluster greedily in descending score
/// order (IoU >= threshold against the cluster founder joins), then emit per
/// cluster a score-weighted average box whose score is the member mean scaled
/// by contributing_models / 2. A box seen by only one model is halved.
inline DetectionSet ensemble_fuse(const DetectionSet& a, const DetectionSet& b,
                                  double iou_threshold = 0.5) {
  if (a.image_id != b.image_id)
    throw std::invalid_argument("ensemble_fuse: image_id mismatch");
  if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0))
    throw std::invalid_argument("ensemble_fuse: threshold must be in [0,1]");

  struct Tagged {
    BoxF box;
    int model;
  };
  std::vector<Tagged> pool;
  pool.reserve(a.boxes.size() + b.boxes.size());
  for (const BoxF& box : a.boxes) {
    check_box(box);
    detail::require_score(box, "ensemble_fuse");
    pool.push_back({box, 0});
  }
  for (const BoxF& box : b.boxes) {
    check_box(box);
    detail::require_score(box, "ensemble_fuse");
    pool.push_back({box, 1});
  }
  std::sort(pool.begin(), pool.end(), [](const Tagged& x, const Tagged& y) {
    if (detail::det_before(x.box, y.box)) return true;
    if (detail::det_before(y.box, x.box)) return false;
    return x.model < y.model;
  });

  struct Cluster {
    BoxF founder;
    std::vector<Tagged> members;
  };
  std::vector<Cluster> clusters;
  for (const Tagged& t : pool) {
    bool joined = false;
    for (Cluster& c : clusters) {
      if (iou(c.founder, t.box) >= iou_threshold) {
        c.members.push_back(t);
        joined = true;
        break;
      }
    }
    if (!joined) clusters.push_back({t.box, {t}});
  }

  DetectionSet out{a.image_id, {}};
  for (const Cluster& c : clusters) {
    const double k = static_cast<double>(c.members.size());
    double wsum = 0.0;
    for (const Tagged& m : c.members) wsum += *m.box.score;
    BoxF fused;
    // Averaging anchored at the founder keeps identical-coordinate clusters
    // bit-exact (the correction term is exactly zero).
    for (int i = 0; i < 3; ++i) {
      double dmin = 0.0, dmax = 0.0;
      for (const Tagged& m : c.members) {
        const double w = wsum > 0.0 ? *m.box.score : 1.0;
        dmin += w * (m.box.min[i] - c.founder.min[i]);
        dmax += w * (m.box.max[i] - c.founder.max[i]);
      }
      const double denom = wsum > 0.0 ? wsum : k;
      fused.min[i] = c.founder.min[i] + dmin / denom;
      fused.max[i] = c.founder.max[i] + dmax / denom;
    }
    bool has[2] = {false, false};
    double ssum = 0.0;
    for (const Tagged& m : c.members) {
      has[m.model] = true;
      ssum += *m.box.score;
    }
    const double models = (has[0] ? 1.0 : 0.0) + (has[1] ? 1.0 : 0.0);
    fused.score = (ssum / k) * (models / 2.0);
    out.boxes.push_back(fused);
  }
  std::sort(out.boxes.begin(), out.boxes.end(), detail::det_before);
  return out;
}

}  // namespace voldet
