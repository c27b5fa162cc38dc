#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace voldet {
namespace detail {

/// Fixed-order pairwise reduction; the summation tree depends only on n, so
/// results are identical across runs and platforms.
inline double pairwise_sum(const double* p, std::size_t n) {
  if (n <= 8) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += p[i];
    return acc;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(p, half) + pairwise_sum(p + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& v) {
  return pairwise_sum(v.data(), v.size());
}

/// Pairwise sum of f(v[i]) without materializing the mapped array.
template <typename T, typename F>
double pairwise_map_sum(const T* p, std::size_t n, F f) {
  if (n <= 8) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += f(p[i]);
    return acc;
  }
  const std::size_t half = n / 2;
  return pairwise_map_sum(p, half, f) + pairwise_map_sum(p + half, n - half, f);
}

template <typename T>
double mean_of(const std::vector<T>& v) {
  if (v.empty()) return 0.0;
  return pairwise_map_sum(v.data(), v.size(),
                          [](T x) { return static_cast<double>(x); }) /
         static_cast<double>(v.size());
}

/// Population standard deviation with deterministic reduction order.
template <typename T>
double stddev_of(const std::vector<T>& v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  const double var = pairwise_map_sum(v.data(), v.size(),
                                      [m](T x) {
                                        const double d =
                                            static_cast<double>(x) - m;
                                        return d * d;
                                      }) /
                     static_cast<double>(v.size());
  return std::sqrt(var);
}

}  // namespace detail
}  // namespace voldet
