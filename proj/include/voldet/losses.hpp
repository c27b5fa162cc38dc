#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "voldet/numeric.hpp"

namespace voldet {

struct ValueGrad {
  double value = 0.0;
  std::vector<double> grad;  // same layout as the differentiated input
};

/// Mean binary cross entropy over anchors, gradient w.r.t. probabilities.
inline ValueGrad bce(const std::vector<double>& probs,
                     const std::vector<double>& targets) {
  if (probs.size() != targets.size())
    throw std::invalid_argument("bce: length mismatch");
  if (probs.empty()) throw std::invalid_argument("bce: empty batch");
  const std::size_t n = probs.size();
  std::vector<double> terms(n);
  ValueGrad out;
  out.grad.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = probs[i];
    const double t = targets[i];
    if (!(p > 0.0 && p < 1.0))
      throw std::domain_error("bce: probabilities must lie strictly in (0,1)");
    if (t != 0.0 && t != 1.0)
      throw std::invalid_argument("bce: targets must be 0 or 1");
    terms[i] = -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
    out.grad[i] = (p - t) / (p * (1.0 - p)) / static_cast<double>(n);
  }
  out.value = detail::pairwise_sum(terms) / static_cast<double>(n);
  return out;
}

/// Weighted L1 normalized by the count of positive-weight entries (at least
/// 1, so an all-zero weight vector yields 0). Subgradient 0 at pred==target.
inline ValueGrad weighted_l1(const std::vector<double>& pred,
                             const std::vector<double>& target,
                             const std::vector<double>& weights) {
  if (pred.size() != target.size() || pred.size() != weights.size())
    throw std::invalid_argument("weighted_l1: length mismatch");
  const std::size_t n = pred.size();
  std::size_t positive = 0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("weighted_l1: negative weight");
    if (w > 0.0) ++positive;
  }
  const double denom = static_cast<double>(positive > 0 ? positive : 1);
  std::vector<double> terms(n);
  ValueGrad out;
  out.grad.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = pred[i] - target[i];
    terms[i] = weights[i] * std::abs(d);
    out.grad[i] = d == 0.0 ? 0.0 : weights[i] * (d > 0.0 ? 1.0 : -1.0) / denom;
  }
  out.value = detail::pairwise_sum(terms) / denom;
  return out;
}

/// Per-voxel class probabilities, class-major: probs[c * n_voxels + v].
/// targets[v] is the true class index in [0, n_classes).
struct SegBatch {
  std::int64_t n_classes = 0;
  std::int64_t n_voxels = 0;
  std::vector<double> probs;
  std::vector<int> targets;
};

namespace detail {

inline void validate_seg(const SegBatch& s) {
  if (s.n_classes < 1 || s.n_voxels < 1)
    throw std::invalid_argument("seg: need at least 1 class and 1 voxel");
  if (static_cast<std::int64_t>(s.probs.size()) != s.n_classes * s.n_voxels)
    throw std::invalid_argument("seg: probs size mismatch");
  if (static_cast<std::int64_t>(s.targets.size()) != s.n_voxels)
    throw std::invalid_argument("seg: targets size mismatch");
  for (int t : s.targets) {
    if (t < 0 || t >= s.n_classes)
      throw std::invalid_argument("seg: target class out of range");
  }
  for (double p : s.probs) {
    if (!(p >= 0.0))
      throw std::invalid_argument("seg: probabilities must be >= 0");
  }
  for (std::int64_t v = 0; v < s.n_voxels; ++v) {
    double sum = 0.0;
    for (std::int64_t c = 0; c < s.n_classes; ++c)
      sum += s.probs[static_cast<std::size_t>(c * s.n_voxels + v)];
    if (std::abs(sum - 1.0) > 1e-6)
      throw std::invalid_argument("seg: per-voxel probabilities must sum to 1");
  }
}

}  // namespace detail

/// Mean cross entropy over voxels; gradient w.r.t. every class probability.
inline ValueGrad ce_seg(const SegBatch& s) {
  detail::validate_seg(s);
  const double n = static_cast<double>(s.n_voxels);
  std::vector<double> terms(static_cast<std::size_t>(s.n_voxels));
  ValueGrad out;
  out.grad.assign(s.probs.size(), 0.0);
  for (std::int64_t v = 0; v < s.n_voxels; ++v) {
    const std::size_t i =
        static_cast<std::size_t>(s.targets[v] * s.n_voxels + v);
    const double p = s.probs[i];
    if (p <= 0.0)
      throw std::domain_error("ce_seg: target class has probability 0");
    terms[static_cast<std::size_t>(v)] = -std::log(p);
    out.grad[i] = -1.0 / (p * n);
  }
  out.value = detail::pairwise_sum(terms) / n;
  return out;
}

/// Soft Dice loss, averaged over foreground classes (background = class 0):
/// 1 - mean_c (2*sum(p_c*t_c) + eps) / (sum(p_c) + sum(t_c) + eps).
inline ValueGrad dice_seg(const SegBatch& s) {
  constexpr double eps = 1e-5;
  detail::validate_seg(s);
  ValueGrad out;
  out.grad.assign(s.probs.size(), 0.0);
  const std::int64_t fg = s.n_classes - 1;
  if (fg < 1) {
    out.value = 0.0;
    return out;
  }
  std::vector<double> terms(static_cast<std::size_t>(fg));
  std::vector<double> inter(static_cast<std::size_t>(s.n_voxels));
  std::vector<double> psum(static_cast<std::size_t>(s.n_voxels));
  for (std::int64_t c = 1; c < s.n_classes; ++c) {
    double tsum = 0.0;
    for (std::int64_t v = 0; v < s.n_voxels; ++v) {
      const double p = s.probs[static_cast<std::size_t>(c * s.n_voxels + v)];
      const double t = s.targets[v] == c ? 1.0 : 0.0;
      inter[static_cast<std::size_t>(v)] = p * t;
      psum[static_cast<std::size_t>(v)] = p;
      tsum += t;
    }
    const double numer = 2.0 * detail::pairwise_sum(inter) + eps;
    const double denom = detail::pairwise_sum(psum) + tsum + eps;
    terms[static_cast<std::size_t>(c - 1)] = numer / denom;
    for (std::int64_t v = 0; v < s.n_voxels; ++v) {
      const double t = s.targets[v] == c ? 1.0 : 0.0;
      out.grad[static_cast<std::size_t>(c * s.n_voxels + v)] =
          -(2.0 * t * denom - numer) / (denom * denom) /
          static_cast<double>(fg);
    }
  }
  out.value = 1.0 - detail::pairwise_sum(terms) / static_cast<double>(fg);
  return out;
}

struct LossBatch {
  std::vector<double> anchor_probs;
  std::vector<double> anchor_targets;
  std::vector<double> deltas_pred;
  std::vector<double> deltas_target;
  std::vector<double> delta_weights;
  SegBatch seg;
};

struct LossReport {
  double bce = 0.0;
  double l1 = 0.0;
  double ce = 0.0;
  double dice = 0.0;
  double total = 0.0;  // bce + 2*l1 + ce + dice
};

inline LossReport total_loss(const LossBatch& b) {
  LossReport r;
  r.bce = bce(b.anchor_probs, b.anchor_targets).value;
  r.l1 = weighted_l1(b.deltas_pred, b.deltas_target, b.delta_weights).value;
  r.ce = ce_seg(b.seg).value;
  r.dice = dice_seg(b.seg).value;
  r.total = r.bce + 2.0 * r.l1 + r.ce + r.dice;
  return r;
}

}  // namespace voldet
