/**
 * @file smoothing.hpp
 * @brief Regression weights and the kernel-smoothed local Gram engine.
 *
 * Every local estimator in the library is a ratio of kernel-weighted sums
 *
 *     G_t = sum_i k_{t,i} w_i z_i z_i',    h_t = sum_i k_{t,i} w_i z_i y_i,
 *
 * over rows i of a design. LocalGrams evaluates all centers in one pass
 * over the support windows, O(T * T b * d^2) in total.
 */
#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "tvarch/error.hpp"
#include "tvarch/kernel.hpp"
#include "tvarch/linalg.hpp"
#include "tvarch/model.hpp"

namespace tvarch {

enum class WeightKind { Unit, LevelInverse, PlugInOptimal };

inline const char* to_string(WeightKind k) {
  switch (k) {
    case WeightKind::Unit: return "unit";
    case WeightKind::LevelInverse: return "level-inverse";
    case WeightKind::PlugInOptimal: return "plug-in-optimal";
  }
  return "?";
}

/// Regression weights W_t defined for t = first..T (1-based).
class Weights {
 public:
  Weights() = default;
  Weights(std::ptrdiff_t first, std::vector<double> values)
      : first_(first), values_(std::move(values)) {
    for (double w : values_) {
      if (!(w > 0.0) || !std::isfinite(w)) {
        throw NumericalError("regression weights must be positive and finite");
      }
    }
  }

  std::ptrdiff_t first() const noexcept { return first_; }
  std::ptrdiff_t last() const noexcept {
    return first_ + static_cast<std::ptrdiff_t>(values_.size()) - 1;
  }
  double operator()(std::ptrdiff_t t) const { return values_[static_cast<std::size_t>(t - first_)]; }
  const std::vector<double>& values() const noexcept { return values_; }

 private:
  std::ptrdiff_t first_ = 1;
  std::vector<double> values_;
};

/// Average squared return (1/T) sum_t x_t^2.
inline double mean_square(const ReturnSeries& series) {
  double acc = 0.0;
  for (double v : series.values()) acc += v * v;
  return acc / static_cast<double>(series.T());
}

/// W_t = (v + sum_{j=1..lags} x_{t-j}^2)^{-2} for t = first..T, with
/// v = (1/T) sum x_t^2. `first` defaults to lags + 1.
inline Weights level_weights(const ReturnSeries& series, std::size_t lags,
                             std::ptrdiff_t first = 0) {
  require_length(series, lags);
  if (first == 0) first = static_cast<std::ptrdiff_t>(lags) + 1;
  const double v = mean_square(series);
  if (!(v > 0.0)) throw DegenerateSeries("all-zero series: mean square is zero");
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(series.T() - first + 1));
  for (std::ptrdiff_t t = first; t <= series.T(); ++t) {
    double level = v;
    for (std::size_t j = 1; j <= lags; ++j) level += series.sq(t - static_cast<std::ptrdiff_t>(j));
    w.push_back(1.0 / (level * level));
  }
  return Weights(first, std::move(w));
}

inline Weights unit_weights(const ReturnSeries& series, std::size_t p) {
  require_length(series, p);
  return Weights(static_cast<std::ptrdiff_t>(p) + 1,
                 std::vector<double>(static_cast<std::size_t>(series.T()) - p, 1.0));
}

inline Weights make_weights(const ReturnSeries& series, std::size_t p, WeightKind kind) {
  switch (kind) {
    case WeightKind::Unit: return unit_weights(series, p);
    case WeightKind::LevelInverse: return level_weights(series, p);
    case WeightKind::PlugInOptimal:
      throw InputError("plug-in weights are built from an initial fit, not from the raw series");
  }
  return {};
}

/// Rows z_t for t = first..T with response y_t and weight w_t.
struct Design {
  std::ptrdiff_t first = 1;
  std::ptrdiff_t last = 0;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> z;
  Vector y;
  Vector w;

  Eigen::Index rows() const noexcept { return z.rows(); }
  Eigen::Index cols() const noexcept { return z.cols(); }
  Eigen::Index row(std::ptrdiff_t t) const noexcept { return static_cast<Eigen::Index>(t - first); }
};

/// Design with columns given by canonical indices (0 = intercept, j = lag j),
/// response x_t^2 and weights W_t, over t = first..T.
inline Design make_design(const ReturnSeries& series, const std::vector<std::size_t>& columns,
                          const Weights& weights, std::ptrdiff_t first) {
  std::size_t max_lag = 0;
  for (auto j : columns) max_lag = std::max(max_lag, j);
  if (first <= static_cast<std::ptrdiff_t>(max_lag)) throw IndexOutOfRange("design starts before lag range");
  if (first < weights.first()) throw IndexOutOfRange("design starts before the weights");
  Design d;
  d.first = first;
  d.last = series.T();
  const auto n = static_cast<Eigen::Index>(d.last - first + 1);
  if (n <= 0) throw InputError("series too short for the requested design");
  d.z.resize(n, static_cast<Eigen::Index>(columns.size()));
  d.y.resize(n);
  d.w.resize(n);
  for (std::ptrdiff_t t = first; t <= d.last; ++t) {
    const auto r = d.row(t);
    for (std::size_t c = 0; c < columns.size(); ++c) {
      d.z(r, static_cast<Eigen::Index>(c)) = canonical_regressor(series, columns[c], t);
    }
    d.y[r] = series.sq(t);
    d.w[r] = weights(t);
  }
  return d;
}

/// Stacked (M', N')' design of a partition over t = p+1..T.
inline Design partition_design(const ReturnSeries& series, const CoefficientPartition& partition,
                               const Weights& weights) {
  std::vector<std::size_t> cols = partition.varying();
  cols.insert(cols.end(), partition.constant().begin(), partition.constant().end());
  return make_design(series, cols, weights, static_cast<std::ptrdiff_t>(partition.p()) + 1);
}

/// Canonical (1, x_{t-1}^2, .., x_{t-p}^2) design over t = first..T.
inline Design canonical_design(const ReturnSeries& series, std::size_t p, const Weights& weights,
                               std::ptrdiff_t first = 0) {
  std::vector<std::size_t> cols(p + 1);
  for (std::size_t j = 0; j <= p; ++j) cols[j] = j;
  if (first == 0) first = static_cast<std::ptrdiff_t>(p) + 1;
  return make_design(series, cols, weights, first);
}

/// Kernel-smoothed Gram matrices and moment vectors for every center of a
/// design. Sums are normalized by the kernel mass over the full row range,
/// so with no leave-out G_t = sum_i k_{t,i} w_i z_i z_i'.
class LocalGrams {
 public:
  /// When `leave_out` >= 0, rows i in [t, t + leave_out] are dropped from
  /// the sums at center t (cross-validation).
  LocalGrams(const Design& design, const KernelTable& table, std::ptrdiff_t leave_out = -1)
      : first_(design.first), last_(design.last), d_(design.cols()) {
    const Eigen::Index n = design.rows();
    const Eigen::Index tri = d_ * (d_ + 1) / 2;
    const Eigen::Index width = tri + d_;
    width_ = width;
    // Per-row features: w z z' (upper triangle) followed by w z y.
    std::vector<double> features(static_cast<std::size_t>(n * width));
    for (Eigen::Index r = 0; r < n; ++r) {
      double* f = &features[static_cast<std::size_t>(r * width)];
      const double w = design.w[r];
      Eigen::Index k = 0;
      for (Eigen::Index a = 0; a < d_; ++a) {
        const double wa = w * design.z(r, a);
        for (Eigen::Index b = a; b < d_; ++b) f[k++] = wa * design.z(r, b);
      }
      for (Eigen::Index a = 0; a < d_; ++a) f[k++] = w * design.z(r, a) * design.y[r];
    }

    sums_.assign(static_cast<std::size_t>(n * width), 0.0);
    const auto reach = static_cast<std::ptrdiff_t>(table.reach());
    for (std::ptrdiff_t t = first_; t <= last_; ++t) {
      const std::ptrdiff_t lo = std::max(first_, t - reach);
      const std::ptrdiff_t hi = std::min(last_, t + reach);
      double* acc = &sums_[static_cast<std::size_t>((t - first_) * width)];
      double mass = 0.0;
      for (std::ptrdiff_t i = lo; i <= hi; ++i) {
        const double k = table[static_cast<std::size_t>(std::abs(t - i))];
        mass += k;
        if (k == 0.0) continue;
        if (leave_out >= 0 && i >= t && i <= t + leave_out) continue;
        const double* f = &features[static_cast<std::size_t>((i - first_) * width)];
        for (Eigen::Index c = 0; c < width; ++c) acc[c] += k * f[c];
      }
      if (!(mass > 0.0)) throw EmptyWindow(t, table.bandwidth());
      const double inv = 1.0 / mass;
      for (Eigen::Index c = 0; c < width; ++c) acc[c] *= inv;
    }
  }

  std::ptrdiff_t first() const noexcept { return first_; }
  std::ptrdiff_t last() const noexcept { return last_; }
  Eigen::Index dim() const noexcept { return d_; }

  Matrix gram(std::ptrdiff_t t) const {
    const double* s = &sums_[static_cast<std::size_t>((t - first_) * width_)];
    Matrix g(d_, d_);
    Eigen::Index k = 0;
    for (Eigen::Index a = 0; a < d_; ++a) {
      for (Eigen::Index b = a; b < d_; ++b) {
        g(a, b) = s[k];
        g(b, a) = s[k];
        ++k;
      }
    }
    return g;
  }

  Vector moment(std::ptrdiff_t t) const {
    const double* s = &sums_[static_cast<std::size_t>((t - first_) * width_)];
    const Eigen::Index tri = d_ * (d_ + 1) / 2;
    Vector h(d_);
    for (Eigen::Index a = 0; a < d_; ++a) h[a] = s[tri + a];
    return h;
  }

 private:
  std::ptrdiff_t first_;
  std::ptrdiff_t last_;
  Eigen::Index d_;
  Eigen::Index width_ = 0;
  std::vector<double> sums_;
};

}  // namespace tvarch
