/**
 * @file kernel.hpp
 * @brief Smoothing kernels on [-1, 1], normalized local weights and the
 * kernel norm constants that enter the constancy test.
 *
 * Time indices are 1-based throughout the library: observations are
 * x_1..x_T and an estimator with lag order p uses centers t = p+1..T.
 * The normalized weight of observation i at center t is
 *
 *     k_{t,i}(b) = K((t - i) / (T b)) / sum_{i'=p+1..T} K((t - i') / (T b)).
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "tvarch/error.hpp"

namespace tvarch {

/// A symmetric kernel supported on [-1, 1]. Stored as a plain function
/// pointer so it can be copied freely and used as a cache key.
struct Kernel {
  double (*fn)(double) = nullptr;
  const char* name = "";

  double operator()(double x) const { return fn(x); }

  static Kernel epanechnikov();
  static Kernel box();
};

inline double epanechnikov(double x) {
  return std::abs(x) <= 1.0 ? 0.75 * (1.0 - x * x) : 0.0;
}

inline double box_kernel(double x) { return std::abs(x) <= 1.0 ? 0.5 : 0.0; }

inline Kernel Kernel::epanechnikov() { return {&tvarch::epanechnikov, "epanechnikov"}; }
inline Kernel Kernel::box() { return {&box_kernel, "box"}; }

/// Composite Simpson rule on [lo, hi]; `nodes` is forced odd.
template <class F>
double simpson(F&& f, double lo, double hi, std::size_t nodes = 4097) {
  if (hi <= lo) return 0.0;
  if (nodes < 3) nodes = 3;
  if (nodes % 2 == 0) ++nodes;
  const std::size_t intervals = nodes - 1;
  const double h = (hi - lo) / static_cast<double>(intervals);
  double acc = f(lo) + f(hi);
  for (std::size_t k = 1; k < intervals; ++k) {
    acc += (k % 2 == 1 ? 4.0 : 2.0) * f(lo + h * static_cast<double>(k));
  }
  return acc * h / 3.0;
}

/// ||K||_2^2 = int K(x)^2 dx.
inline double k_l2_norm_sq(const Kernel& kernel, std::size_t nodes = 4097) {
  return simpson([&](double x) { return kernel(x) * kernel(x); }, -1.0, 1.0, nodes);
}

/// K*(x) = int_{-1}^{1-2|x|} K(v) K(v + 2|x|) dv.
inline double k_star(const Kernel& kernel, double x, std::size_t nodes = 4097) {
  const double shift = 2.0 * std::abs(x);
  return simpson([&](double v) { return kernel(v) * kernel(v + shift); }, -1.0,
                 1.0 - shift, nodes);
}

/// ||K*||_2^2 = int_{-1}^{1} K*(x)^2 dx (nested Simpson).
inline double k_star_l2_norm_sq(const Kernel& kernel, std::size_t nodes = 4097) {
  return simpson(
      [&](double x) {
        const double v = k_star(kernel, x, nodes);
        return v * v;
      },
      -1.0, 1.0, nodes);
}

struct KernelConstants {
  double l2_sq = 0.0;       // ||K||_2^2
  double k_star_l2_sq = 0.0;  // ||K*||_2^2
};

/// Memoized constants at the default node count; the nested quadrature for
/// ||K*|| is too slow to repeat inside Monte-Carlo loops.
inline const KernelConstants& kernel_constants(const Kernel& kernel) {
  static std::mutex mutex;
  static std::map<double (*)(double), KernelConstants> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(kernel.fn);
  if (it == cache.end()) {
    it = cache.emplace(kernel.fn,
                       KernelConstants{k_l2_norm_sq(kernel), k_star_l2_norm_sq(kernel)})
             .first;
  }
  return it->second;
}

/// Kernel values tabulated by lag distance |t - i| for a fixed T*b. Every
/// weight computation in the library goes through this table so that all
/// smoothers agree bit for bit.
class KernelTable {
 public:
  KernelTable(const Kernel& kernel, double bandwidth, std::size_t T)
      : bandwidth_(bandwidth), span_(bandwidth * static_cast<double>(T)) {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
      throw InputError("bandwidth must be positive and finite");
    }
    const auto reach = static_cast<std::size_t>(
        std::min(std::floor(span_) + 1.0, static_cast<double>(T)));
    values_.reserve(reach + 1);
    for (std::size_t d = 0; d <= reach; ++d) {
      values_.push_back(kernel(static_cast<double>(d) / span_));
    }
    while (values_.size() > 1 && values_.back() == 0.0) values_.pop_back();
  }

  /// Largest distance with a (possibly) non-zero weight.
  std::size_t reach() const noexcept { return values_.size() - 1; }
  double bandwidth() const noexcept { return bandwidth_; }
  double operator[](std::size_t distance) const noexcept {
    return distance < values_.size() ? values_[distance] : 0.0;
  }

 private:
  double bandwidth_;
  double span_;
  std::vector<double> values_;
};

/// Normalized weights k_{t,i}(b) for one center, stored over the support
/// window [first, first + weights.size()).
struct KernelWeights {
  std::ptrdiff_t center_index = 0;
  double bandwidth = 0.0;
  std::ptrdiff_t first = 0;
  std::vector<double> weights;

  double at(std::ptrdiff_t i) const {
    const auto k = i - first;
    return (k < 0 || k >= static_cast<std::ptrdiff_t>(weights.size()))
               ? 0.0
               : weights[static_cast<std::size_t>(k)];
  }
};

/// Window [lo, hi] of observations i in [p+1, T] reachable from center t.
struct Window {
  std::ptrdiff_t lo;
  std::ptrdiff_t hi;
};

inline Window kernel_window(const KernelTable& table, std::ptrdiff_t t,
                            std::ptrdiff_t T, std::ptrdiff_t p) {
  const auto reach = static_cast<std::ptrdiff_t>(table.reach());
  return {std::max(p + 1, t - reach), std::min(T, t + reach)};
}

inline KernelWeights normalized_weights(const KernelTable& table, std::ptrdiff_t t,
                                        std::ptrdiff_t T, std::ptrdiff_t p) {
  if (t < p + 1 || t > T) {
    throw IndexOutOfRange("center t=" + std::to_string(t) + " outside [p+1, T]");
  }
  const Window w = kernel_window(table, t, T, p);
  KernelWeights out;
  out.center_index = t;
  out.bandwidth = table.bandwidth();
  out.first = w.lo;
  out.weights.reserve(static_cast<std::size_t>(w.hi - w.lo + 1));
  double total = 0.0;
  for (std::ptrdiff_t i = w.lo; i <= w.hi; ++i) {
    const double k = table[static_cast<std::size_t>(std::abs(t - i))];
    out.weights.push_back(k);
    total += k;
  }
  if (!(total > 0.0)) throw EmptyWindow(t, table.bandwidth());
  for (double& k : out.weights) k /= total;
  return out;
}

inline KernelWeights normalized_weights(std::ptrdiff_t t, double b, std::ptrdiff_t T,
                                        std::ptrdiff_t p,
                                        const Kernel& kernel = Kernel::epanechnikov()) {
  if (!(b > 0.0 && b <= 1.0)) throw InputError("bandwidth must lie in (0, 1]");
  return normalized_weights(KernelTable(kernel, b, static_cast<std::size_t>(T)), t, T, p);
}

}  // namespace tvarch
