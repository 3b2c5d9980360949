/**
 * @file select.hpp
 * @brief Cross-validated bandwidths and the lag-order information criterion.
 */
#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "tvarch/error.hpp"
#include "tvarch/hypothesis.hpp"
#include "tvarch/kernel.hpp"
#include "tvarch/linalg.hpp"
#include "tvarch/model.hpp"
#include "tvarch/parallel.hpp"
#include "tvarch/smoothing.hpp"

namespace tvarch {

/// Bandwidths multiplier * T^{-1/3}.
struct BandwidthGrid {
  std::vector<double> multipliers{0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};

  std::vector<double> values(std::ptrdiff_t T) const {
    if (multipliers.empty()) throw InputError("bandwidth grid is empty");
    const double base = std::cbrt(1.0 / static_cast<double>(T));
    std::vector<double> out;
    out.reserve(multipliers.size());
    double prev = 0.0;
    for (double c : multipliers) {
      if (!(c > prev)) throw InputError("grid multipliers must be positive and increasing");
      prev = c;
      const double b = c * base;
      if (!(b <= 1.0)) throw InputError("grid bandwidth exceeds 1");
      out.push_back(b);
    }
    return out;
  }
};

struct CvResult {
  double bandwidth = 0.0;
  std::vector<double> grid;
  std::vector<std::optional<double>> curve;  // empty where the fit was singular
  Vector beta;                               // semiparametric variant only
};

namespace detail {

inline CvResult pick_minimum(std::vector<double> grid, std::vector<std::optional<double>> curve) {
  CvResult out;
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < curve.size(); ++k) {
    if (curve[k] && (!best || *curve[k] < *curve[*best])) best = k;
  }
  if (!best) throw AllSingular("every bandwidth on the grid gave a singular fit");
  out.bandwidth = grid[*best];
  out.grid = std::move(grid);
  out.curve = std::move(curve);
  return out;
}

}  // namespace detail

/// Leave-out CV score of the full kernel estimator at one bandwidth:
/// sum_t W_t (x_t^2 - X_t' a_t^{(-t)})^2, where rows t..t+p are dropped
/// from the local sums at center t. Empty when some local Gram is singular.
inline std::optional<double> cv_score_tvarch(const ReturnSeries& series, std::size_t p,
                                             const Weights& weights, double b,
                                             const Kernel& kernel = Kernel::epanechnikov()) {
  const Design design = canonical_design(series, p, weights);
  const LocalGrams grams(design, KernelTable(kernel, b, static_cast<std::size_t>(series.T())),
                         static_cast<std::ptrdiff_t>(p));
  double score = 0.0;
  for (std::ptrdiff_t t = design.first; t <= design.last; ++t) {
    auto llt = spd_factor(grams.gram(t));
    if (!llt) return std::nullopt;
    const Vector a = llt->solve(grams.moment(t));
    const auto r = design.row(t);
    const double e = design.y[r] - design.z.row(r).dot(a);
    score += design.w[r] * e * e;
  }
  return score;
}

inline CvResult cv_bandwidth_tvarch(const ReturnSeries& series, std::size_t p,
                                    const BandwidthGrid& grid, const Weights& weights,
                                    const Kernel& kernel = Kernel::epanechnikov()) {
  require_length(series, p);
  std::vector<double> bs = grid.values(series.T());
  std::vector<std::optional<double>> curve(bs.size());
  parallel_for(bs.size(), [&](std::size_t k) { curve[k] = cv_score_tvarch(series, p, weights, bs[k], kernel); });
  return detail::pick_minimum(std::move(bs), std::move(curve));
}

/// Semiparametric CV score at one bandwidth with the inner WLS minimizer
/// in beta. Returns (score, beta).
inline std::optional<std::pair<double, Vector>> cv_score_semiparametric(
    const ReturnSeries& series, const CoefficientPartition& partition, const Weights& weights,
    double b, const Kernel& kernel = Kernel::epanechnikov()) {
  const auto m = static_cast<Eigen::Index>(partition.m());
  const auto n = static_cast<Eigen::Index>(partition.n());
  const Design design = partition_design(series, partition, weights);
  const LocalGrams grams(design, KernelTable(kernel, b, static_cast<std::size_t>(series.T())),
                         static_cast<std::ptrdiff_t>(partition.p()));
  const auto rows = static_cast<std::size_t>(design.rows());
  std::vector<double> v(rows);
  Matrix o(design.rows(), n);
  Matrix normal = Matrix::Zero(n, n);
  Vector rhs = Vector::Zero(n);
  for (std::ptrdiff_t t = design.first; t <= design.last; ++t) {
    const Matrix g = grams.gram(t);
    auto llt = spd_factor(g.topLeftCorner(m, m));
    if (!llt) return std::nullopt;
    const Vector q1 = llt->solve(grams.moment(t).head(m));
    const Matrix q2 = llt->solve(g.topRightCorner(m, n));
    const auto r = design.row(t);
    const Vector mt = design.z.row(r).head(m).transpose();
    const Vector nt = design.z.row(r).tail(n).transpose();
    v[static_cast<std::size_t>(r)] = design.y[r] - mt.dot(q1);
    const Vector ot = nt - q2.transpose() * mt;
    o.row(r) = ot.transpose();
    normal.noalias() += design.w[r] * ot * ot.transpose();
    rhs.noalias() += (design.w[r] * v[static_cast<std::size_t>(r)]) * ot;
  }
  Vector beta = Vector(0);
  if (n > 0) {
    auto llt = spd_factor(normal);
    if (!llt) return std::nullopt;
    beta = llt->solve(rhs);
  }
  double score = 0.0;
  for (Eigen::Index r = 0; r < design.rows(); ++r) {
    double e = v[static_cast<std::size_t>(r)];
    if (n > 0) e -= o.row(r).dot(beta);
    score += design.w[r] * e * e;
  }
  return std::make_pair(score, std::move(beta));
}

/// Joint minimization over (beta, b) for the model with a time-varying
/// intercept and constant lag coefficients.
inline CvResult cv_bandwidth_semiparametric(const ReturnSeries& series, std::size_t p,
                                            const BandwidthGrid& grid, const Weights& weights,
                                            const Kernel& kernel = Kernel::epanechnikov()) {
  if (p < 1) throw InputError("semiparametric CV needs p >= 1");
  require_length(series, p);
  const auto partition = CoefficientPartition::intercept_varying(p);
  std::vector<double> bs = grid.values(series.T());
  std::vector<std::optional<std::pair<double, Vector>>> fits(bs.size());
  parallel_for(bs.size(), [&](std::size_t k) {
    fits[k] = cv_score_semiparametric(series, partition, weights, bs[k], kernel);
  });
  std::vector<std::optional<double>> curve(bs.size());
  for (std::size_t k = 0; k < bs.size(); ++k) {
    if (fits[k]) curve[k] = fits[k]->first;
  }
  CvResult out = detail::pick_minimum(bs, std::move(curve));
  for (std::size_t k = 0; k < bs.size(); ++k) {
    if (bs[k] == out.bandwidth) out.beta = fits[k]->second;
  }
  return out;
}

/// zeta_T = log(log T) / (T b).
inline double zeta(std::ptrdiff_t T, double b) {
  const double t = static_cast<double>(T);
  return std::log(std::log(t)) / (t * b);
}

struct LagOrderSelection {
  std::size_t p_hat = 0;
  std::size_t q_max = 0;
  double bandwidth = 0.0;
  double zeta = 0.0;
  std::vector<double> criterion;  // C(p), p = 0..q_max
  std::vector<double> rss;        // weighted residual sums
  CvResult cv;
};

/// C(p) = log[sum_t W_t^{(q)} (x_t^2 - X_t' a^{(p)}_t)^2] + zeta_T (p + 1) with
/// b from CV at p = q_max. All orders are fitted and scored over the
/// common range t = q_max+1..T.
inline LagOrderSelection select_lag_order(const ReturnSeries& series, std::size_t q_max = 10,
                                          const BandwidthGrid& grid = {},
                                          const Kernel& kernel = Kernel::epanechnikov()) {
  require_length(series, q_max);
  const Weights wq = level_weights(series, q_max);
  LagOrderSelection out;
  out.q_max = q_max;
  out.cv = cv_bandwidth_tvarch(series, q_max, grid, wq, kernel);
  out.bandwidth = out.cv.bandwidth;
  out.zeta = zeta(series.T(), out.bandwidth);
  const auto first = static_cast<std::ptrdiff_t>(q_max) + 1;
  out.rss.assign(q_max + 1, 0.0);
  parallel_for(q_max + 1, [&](std::size_t p) {
    const NonparametricFit fit = nonparametric_fit(series, p, wq, out.bandwidth, kernel, first);
    double rss = 0.0;
    for (std::ptrdiff_t t = first; t <= series.T(); ++t) {
      const Vector& a = fit.at(t);
      double fitted = a[0];
      for (std::size_t j = 1; j <= p; ++j) fitted += a[static_cast<Eigen::Index>(j)] * canonical_regressor(series, j, t);
      const double e = series.sq(t) - fitted;
      rss += wq(t) * e * e;
    }
    out.rss[p] = rss;
  });
  out.criterion.resize(q_max + 1);
  for (std::size_t p = 0; p <= q_max; ++p) {
    out.criterion[p] = std::log(out.rss[p]) + out.zeta * static_cast<double>(p + 1);
    if (out.criterion[p] < out.criterion[out.p_hat]) out.p_hat = p;
  }
  return out;
}

}  // namespace tvarch
