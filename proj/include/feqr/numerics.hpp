#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace feqr {

namespace detail {

// Recursive pairwise reduction of f(lo..hi). Leaf blocks are summed
// sequentially; the tree keeps rounding error O(log n) instead of O(n).
template <typename F>
double pairwise_sum_impl(std::size_t lo, std::size_t hi, const F& f) {
  const std::size_t n = hi - lo;
  if (n <= 64) {
    double acc = 0.0;
    for (std::size_t k = lo; k < hi; ++k) acc += f(k);
    return acc;
  }
  const std::size_t mid = lo + n / 2;
  return pairwise_sum_impl(lo, mid, f) + pairwise_sum_impl(mid, hi, f);
}

}  // namespace detail

// Pairwise (tree) sum of f(0), ..., f(n-1).
template <typename F>
double pairwise_sum(std::size_t n, const F& f) {
  if (n == 0) return 0.0;
  return detail::pairwise_sum_impl(0, n, f);
}

inline double pairwise_sum(std::span<const double> v) {
  return pairwise_sum(v.size(), [&](std::size_t k) { return v[k]; });
}

template <typename F>
double pairwise_mean(std::size_t n, const F& f) {
  if (n == 0) return 0.0;
  return pairwise_sum(n, f) / static_cast<double>(n);
}

// Sample standard deviation with denominator n-1 (0 when n < 2).
template <typename F>
double sample_std_dev(std::size_t n, const F& f) {
  if (n < 2) return 0.0;
  const double mean = pairwise_mean(n, f);
  const double ss = pairwise_sum(n, [&](std::size_t k) {
    const double d = f(k) - mean;
    return d * d;
  });
  return std::sqrt(ss / static_cast<double>(n - 1));
}

}  // namespace feqr
