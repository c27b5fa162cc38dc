#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "voldet/box.hpp"
#include "voldet/detect.hpp"
#include "voldet/rng.hpp"

namespace voldet {

inline const std::vector<double>& default_fp_targets() {
  static const std::vector<double> t{0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
  return t;
}

struct MatchResult {
  std::vector<bool> pred_is_tp;  // aligned to preds.boxes
  std::vector<bool> gt_hit;      // aligned to gts
};

/// Greedy one-to-one matching. Predictions are processed in descending score
/// (deterministic tie order); each is a TP iff its best-IoU still-unmatched
/// GT reaches the threshold, and that GT is then consumed. Equal-IoU ties go
/// to the lowest GT index.
inline MatchResult match_detections(const DetectionSet& preds,
                                    const std::vector<BoxF>& gts,
                                    double iou_threshold) {
  for (const BoxF& b : preds.boxes) detail::require_score(b, "match_detections");
  MatchResult r;
  r.pred_is_tp.assign(preds.boxes.size(), false);
  r.gt_hit.assign(gts.size(), false);

  std::vector<std::size_t> order(preds.boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const BoxF& ba = preds.boxes[a];
    const BoxF& bb = preds.boxes[b];
    if (detail::det_before(ba, bb)) return true;
    if (detail::det_before(bb, ba)) return false;
    return a < b;
  });

  for (std::size_t p : order) {
    double best = -1.0;
    std::size_t best_gt = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (r.gt_hit[g]) continue;
      const double v = iou(preds.boxes[p], gts[g]);
      if (v > best) {
        best = v;
        best_gt = g;
      }
    }
    if (best_gt < gts.size() && best >= iou_threshold) {
      r.pred_is_tp[p] = true;
      r.gt_hit[best_gt] = true;
    }
  }
  return r;
}

struct FrocPoint {
  double fp_per_image = 0.0;
  double sensitivity = 0.0;
};

struct FrocCurve {
  std::vector<FrocPoint> points;  // one per distinct score, fp ascending
  std::vector<double> operating_points;
  std::vector<double> operating_sensitivities;
  double score = 0.0;  // mean of the operating-point sensitivities
};

/// FROC over a set of images. Sweeps the score threshold across all distinct
/// prediction scores (descending); at each threshold, fp_per_image counts
/// FPs among predictions at or above it and sensitivity counts matched GTs.
/// Greedy matching is prefix-stable in score order, so one matching pass
/// yields the exact labels every threshold would produce. The operating
/// sensitivity at target r is the best sensitivity with fp_per_image <= r.
inline FrocCurve froc_curve(
    const std::vector<std::pair<DetectionSet, std::vector<BoxF>>>& per_image,
    double iou_threshold,
    const std::vector<double>& fp_targets = default_fp_targets()) {
  if (per_image.empty())
    throw std::invalid_argument("froc_curve: need at least one image");
  std::int64_t total_gts = 0;
  for (const auto& [dets, gts] : per_image)
    total_gts += static_cast<std::int64_t>(gts.size());
  if (total_gts == 0)
    throw std::invalid_argument("froc_curve: zero ground-truth objects");
  for (double t : fp_targets) {
    if (!(t > 0.0))
      throw std::invalid_argument("froc_curve: fp targets must be positive");
  }

  struct Labeled {
    double score;
    bool tp;
  };
  std::vector<Labeled> all;
  for (const auto& [dets, gts] : per_image) {
    const MatchResult m = match_detections(dets, gts, iou_threshold);
    for (std::size_t i = 0; i < dets.boxes.size(); ++i)
      all.push_back({*dets.boxes[i].score, m.pred_is_tp[i]});
  }
  std::sort(all.begin(), all.end(), [](const Labeled& a, const Labeled& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.tp && !b.tp;
  });

  FrocCurve curve;
  curve.operating_points = fp_targets;
  const double n_images = static_cast<double>(per_image.size());
  std::int64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    all[i].tp ? ++tp : ++fp;
    // Emit one point per distinct score: all equal-scored predictions are at
    // or above their common threshold together.
    if (i + 1 < all.size() && all[i + 1].score == all[i].score) continue;
    curve.points.push_back(
        {static_cast<double>(fp) / n_images,
         static_cast<double>(tp) / static_cast<double>(total_gts)});
  }

  for (double target : fp_targets) {
    double best = 0.0;
    for (const FrocPoint& p : curve.points) {
      if (p.fp_per_image <= target) best = std::max(best, p.sensitivity);
    }
    curve.operating_sensitivities.push_back(best);
  }
  double acc = 0.0;
  for (double s : curve.operating_sensitivities) acc += s;
  curve.score = acc / static_cast<double>(curve.operating_sensitivities.size());
  return curve;
}

/// Seeded shuffle then round-robin assignment. Returns the fold index of
/// each id, aligned to the input order. Fold sizes differ by at most 1.
inline std::vector<int> split_folds(const std::vector<std::string>& image_ids,
                                    int n_folds, std::uint64_t seed) {
  if (n_folds < 2)
    throw std::invalid_argument("split_folds: need at least 2 folds");
  if (static_cast<std::size_t>(n_folds) > image_ids.size())
    throw std::invalid_argument("split_folds: more folds than ids");
  std::vector<std::size_t> order(image_ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  shuffle(rng, order);
  std::vector<int> fold(image_ids.size(), 0);
  for (std::size_t i = 0; i < order.size(); ++i)
    fold[order[i]] = static_cast<int>(i % static_cast<std::size_t>(n_folds));
  return fold;
}

}  // namespace voldet
