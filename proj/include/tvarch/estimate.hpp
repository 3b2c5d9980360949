/**
 * @file estimate.hpp
 * @brief Semiparametric estimation of the constant block beta and the
 * time-varying block alpha(.) by kernel partial regression.
 *
 * With smoothed moments
 *
 *     s3_t = sum_i k_{t,i} W_i M_i M_i',  s1_t = sum_i k_{t,i} W_i M_i x_i^2,
 *     s2_t = sum_i k_{t,i} W_i M_i N_i',
 *
 * and ratios q1_t = s3_t^{-1} s1_t, q2_t = s3_t^{-1} s2_t, the estimator
 * of beta is the weighted least-squares fit of V_t = x_t^2 - M_t' q1_t on
 * O_t = N_t - q2_t' M_t, and alpha_t = q1_t - q2_t beta at bandwidth b'.
 */
#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "tvarch/error.hpp"
#include "tvarch/kernel.hpp"
#include "tvarch/linalg.hpp"
#include "tvarch/model.hpp"
#include "tvarch/smoothing.hpp"

namespace tvarch {

/// Per-center smoothed moments for t = first..T.
struct SmoothedMoments {
  double bandwidth = 0.0;
  std::ptrdiff_t first = 0;
  std::vector<Vector> s1;  // m
  std::vector<Matrix> s2;  // m x n
  std::vector<Matrix> s3;  // m x m
};

inline SmoothedMoments smoothed_moments(const ReturnSeries& series,
                                        const CoefficientPartition& partition,
                                        const Weights& weights, double b,
                                        const Kernel& kernel = Kernel::epanechnikov()) {
  require_length(series, partition.p());
  const Design design = partition_design(series, partition, weights);
  const LocalGrams grams(design, KernelTable(kernel, b, static_cast<std::size_t>(series.T())));
  const auto m = static_cast<Eigen::Index>(partition.m());
  const auto n = static_cast<Eigen::Index>(partition.n());
  SmoothedMoments out;
  out.bandwidth = b;
  out.first = design.first;
  const auto count = static_cast<std::size_t>(design.rows());
  out.s1.reserve(count);
  out.s2.reserve(count);
  out.s3.reserve(count);
  for (std::ptrdiff_t t = design.first; t <= design.last; ++t) {
    const Matrix g = grams.gram(t);
    out.s3.push_back(g.topLeftCorner(m, m));
    out.s2.push_back(g.topRightCorner(m, n));
    out.s1.push_back(grams.moment(t).head(m));
  }
  return out;
}

struct ProjectionRatios {
  std::ptrdiff_t first = 0;
  std::vector<Vector> q1;  // m
  std::vector<Matrix> q2;  // m x n
  double min_rcond = 1.0;  // worst reciprocal condition of s3 over t
};

inline ProjectionRatios projection_ratios(const SmoothedMoments& moments) {
  ProjectionRatios out;
  out.first = moments.first;
  out.q1.reserve(moments.s3.size());
  out.q2.reserve(moments.s3.size());
  for (std::size_t k = 0; k < moments.s3.size(); ++k) {
    auto llt = spd_factor(moments.s3[k]);
    if (!llt) throw SingularSmoothedMoment(moments.first + static_cast<std::ptrdiff_t>(k));
    out.min_rcond = std::min(out.min_rcond, llt->rcond());
    out.q1.push_back(llt->solve(moments.s1[k]));
    out.q2.push_back(llt->solve(moments.s2[k]));
  }
  return out;
}

/// beta-hat together with the partial-regression residuals it was built from.
struct BetaEstimate {
  Vector beta;
  std::ptrdiff_t first = 0;
  std::vector<double> v_hat;  // V_t
  Matrix o_hat;               // rows O_t'
  Matrix normal_matrix;       // sum_t W_t O_t O_t'
  Vector normal_rhs;          // sum_t W_t O_t V_t
  ProjectionRatios ratios;
  double design_rcond = 1.0;
};

inline BetaEstimate beta_from_ratios(const ReturnSeries& series,
                                     const CoefficientPartition& partition,
                                     const Weights& weights, ProjectionRatios ratios) {
  const auto n = static_cast<Eigen::Index>(partition.n());
  BetaEstimate est;
  est.first = ratios.first;
  const auto count = ratios.q1.size();
  est.v_hat.resize(count);
  est.o_hat.resize(static_cast<Eigen::Index>(count), n);
  est.normal_matrix = Matrix::Zero(n, n);
  est.normal_rhs = Vector::Zero(n);
  for (std::size_t k = 0; k < count; ++k) {
    const std::ptrdiff_t t = ratios.first + static_cast<std::ptrdiff_t>(k);
    const auto [mt, nt] = regressors(series, partition, t);
    const double v = series.sq(t) - mt.dot(ratios.q1[k]);
    const Vector o = nt - ratios.q2[k].transpose() * mt;
    const double w = weights(t);
    est.v_hat[k] = v;
    est.o_hat.row(static_cast<Eigen::Index>(k)) = o.transpose();
    est.normal_matrix.noalias() += w * o * o.transpose();
    est.normal_rhs.noalias() += (w * v) * o;
  }
  if (n == 0) {
    est.beta = Vector(0);
  } else {
    auto llt = spd_factor(est.normal_matrix);
    if (!llt) throw SingularDesign("partial-regression normal matrix is singular");
    est.design_rcond = llt->rcond();
    est.beta = llt->solve(est.normal_rhs);
  }
  est.ratios = std::move(ratios);
  return est;
}

/// beta-hat = (sum W O O')^{-1} sum W O V.
inline BetaEstimate estimate_beta(const ReturnSeries& series,
                                  const CoefficientPartition& partition,
                                  const Weights& weights, double b,
                                  const Kernel& kernel = Kernel::epanechnikov()) {
  if (partition.n() == 0) throw InputError("estimate_beta needs a non-empty constant block");
  auto ratios = projection_ratios(smoothed_moments(series, partition, weights, b, kernel));
  return beta_from_ratios(series, partition, weights, std::move(ratios));
}

/// alpha-hat_t = q1_{b',t} - q2_{b',t} beta for t = p+1..T.
struct AlphaGrid {
  std::ptrdiff_t first = 0;
  std::ptrdiff_t T = 0;
  std::vector<Vector> alpha;
  double u(std::size_t k) const {
    return static_cast<double>(first + static_cast<std::ptrdiff_t>(k)) / static_cast<double>(T);
  }
};

inline AlphaGrid alpha_from_ratios(const ProjectionRatios& ratios, const Vector& beta,
                                   std::ptrdiff_t T) {
  AlphaGrid out;
  out.first = ratios.first;
  out.T = T;
  out.alpha.reserve(ratios.q1.size());
  for (std::size_t k = 0; k < ratios.q1.size(); ++k) {
    if (beta.size() == 0) {
      out.alpha.push_back(ratios.q1[k]);
    } else {
      out.alpha.push_back(ratios.q1[k] - ratios.q2[k] * beta);
    }
  }
  return out;
}

inline AlphaGrid estimate_alpha(const ReturnSeries& series, const CoefficientPartition& partition,
                                const Vector& beta, const Weights& weights, double b_prime,
                                const Kernel& kernel = Kernel::epanechnikov()) {
  if (static_cast<std::size_t>(beta.size()) != partition.n()) {
    throw InputError("beta dimension does not match the constant block");
  }
  const auto ratios =
      projection_ratios(smoothed_moments(series, partition, weights, b_prime, kernel));
  return alpha_from_ratios(ratios, beta, series.T());
}

/// Fitted volatility sigma_t^2 = M_t' alpha_t + N_t' beta, floored at
/// `floor`; the number of floored entries is reported.
struct FittedVolatility {
  std::ptrdiff_t first = 0;
  std::vector<double> sigma_sq;
  std::size_t floored = 0;
  double operator()(std::ptrdiff_t t) const { return sigma_sq[static_cast<std::size_t>(t - first)]; }
};

inline constexpr double kVolatilityFloorFactor = 1e-12;

inline FittedVolatility fitted_volatility(const ReturnSeries& series,
                                          const CoefficientPartition& partition,
                                          const AlphaGrid& alpha, const Vector& beta) {
  const double floor = kVolatilityFloorFactor * mean_square(series);
  FittedVolatility out;
  out.first = alpha.first;
  out.sigma_sq.reserve(alpha.alpha.size());
  for (std::size_t k = 0; k < alpha.alpha.size(); ++k) {
    const auto t = alpha.first + static_cast<std::ptrdiff_t>(k);
    const auto [mt, nt] = regressors(series, partition, t);
    double s = mt.dot(alpha.alpha[k]);
    if (nt.size() > 0) s += nt.dot(beta);
    if (!(s >= floor)) {
      s = floor;
      ++out.floored;
    }
    out.sigma_sq.push_back(s);
  }
  return out;
}

struct BetaCovariance {
  Matrix sigma1;      // (1/T) sum W O O'
  Matrix sigma2;      // (1/T) sum W^2 (x^2 - sigma^2)^2 O O'
  Matrix asymptotic;  // sigma1^{-1} sigma2 sigma1^{-1}
  Matrix cov;         // asymptotic / T
  Vector se;          // sqrt(diag(asymptotic) / T)
};

inline BetaCovariance covariance_beta(const ReturnSeries& series, const Weights& weights,
                                      const BetaEstimate& est, const FittedVolatility& vol) {
  const Eigen::Index n = est.beta.size();
  const double T = static_cast<double>(series.T());
  BetaCovariance out;
  out.sigma1 = Matrix::Zero(n, n);
  out.sigma2 = Matrix::Zero(n, n);
  for (Eigen::Index k = 0; k < est.o_hat.rows(); ++k) {
    const auto t = est.first + static_cast<std::ptrdiff_t>(k);
    const Vector o = est.o_hat.row(k).transpose();
    const double w = weights(t);
    const double e = series.sq(t) - vol(t);
    out.sigma1.noalias() += w * o * o.transpose();
    out.sigma2.noalias() += (w * w * e * e) * o * o.transpose();
  }
  out.sigma1 /= T;
  out.sigma2 /= T;
  auto llt = spd_factor(out.sigma1);
  if (!llt) throw SingularDesign("Sigma1 is singular");
  const Matrix inv = llt->solve(Matrix::Identity(n, n));
  out.asymptotic = symmetrize(inv * out.sigma2 * inv);
  out.cov = out.asymptotic / T;
  out.se = (out.asymptotic.diagonal() / T).cwiseSqrt();
  return out;
}

/// Pointwise standard errors of alpha-hat from
/// V(u) = Var(xi^2) ||K||^2 s3^{-1} E(W^2 sigma^4 M M') s3^{-1} / (T b').
/// Var(xi^2) is the sample variance of x_t^2 / sigma_t^2.
inline double residual_xi_sq_variance(const ReturnSeries& series, const FittedVolatility& vol) {
  const auto count = vol.sigma_sq.size();
  if (count < 2) return 0.0;
  double mean = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    mean += series.sq(vol.first + static_cast<std::ptrdiff_t>(k)) / vol.sigma_sq[k];
  }
  mean /= static_cast<double>(count);
  double acc = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    const double e = series.sq(vol.first + static_cast<std::ptrdiff_t>(k)) / vol.sigma_sq[k] - mean;
    acc += e * e;
  }
  return acc / static_cast<double>(count - 1);
}

inline std::vector<Vector> alpha_standard_errors(const ReturnSeries& series,
                                                 const CoefficientPartition& partition,
                                                 const Weights& weights,
                                                 const FittedVolatility& vol, double b_prime,
                                                 const Kernel& kernel) {
  const double var_xi2 = residual_xi_sq_variance(series, vol);
  const double k2 = kernel_constants(kernel).l2_sq;
  const double scale = var_xi2 * k2 / (static_cast<double>(series.T()) * b_prime);
  const Design design = partition_design(series, partition, weights);
  Design middle = design;
  for (std::ptrdiff_t t = design.first; t <= design.last; ++t) {
    const double w = weights(t);
    const double s = vol(t);
    middle.w[design.row(t)] = w * w * s * s;
  }
  const KernelTable table(kernel, b_prime, static_cast<std::size_t>(series.T()));
  const LocalGrams outer(design, table);
  const LocalGrams inner(middle, table);
  const auto m = static_cast<Eigen::Index>(partition.m());
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(design.rows()));
  for (std::ptrdiff_t t = design.first; t <= design.last; ++t) {
    auto llt = spd_factor(outer.gram(t).topLeftCorner(m, m));
    if (!llt) throw SingularSmoothedMoment(t);
    const Matrix inv = llt->solve(Matrix::Identity(m, m));
    const Matrix v = inv * inner.gram(t).topLeftCorner(m, m) * inv;
    out.push_back((scale * v.diagonal()).cwiseMax(0.0).cwiseSqrt());
  }
  return out;
}

/// Plug-in estimator of beta with weights W*_t = 1 / (sigma_t^4 + nu_T),
/// sigma_t^2 taken from an initial fit at bandwidth b.
struct PlugInBeta {
  BetaEstimate estimate;
  Weights weights;
};

inline Weights plug_in_weights(const FittedVolatility& vol, double nu) {
  std::vector<double> w;
  w.reserve(vol.sigma_sq.size());
  for (double s : vol.sigma_sq) {
    const double d = s * s + nu;
    if (!(d > 0.0)) throw NonPositiveVolatility("fitted volatility vanished with nu_T = 0");
    w.push_back(1.0 / d);
  }
  return Weights(vol.first, std::move(w));
}

inline PlugInBeta estimate_beta_plugin(const ReturnSeries& series,
                                       const CoefficientPartition& partition, double b,
                                       const FittedVolatility& initial, double nu_T = 0.0,
                                       const Kernel& kernel = Kernel::epanechnikov()) {
  if (nu_T < 0.0) throw InputError("nu_T must be non-negative");
  Weights w = plug_in_weights(initial, nu_T);
  BetaEstimate est = estimate_beta(series, partition, w, b, kernel);
  return {std::move(est), std::move(w)};
}

/// Plug-in estimator of alpha with per-center weights
/// W_{t,i} = 1 / (sigma_{t,i}^4 + mu_T), sigma_{t,i}^2 = M_i' alpha_t + N_i' beta0,
/// alpha*_t = s3^{-1} (s1 - s2 beta), and standard errors from
/// V*(u) = Var(xi^2) ||K||^2 s3^{-1} / (T b').
struct PlugInAlpha {
  AlphaGrid alpha;
  std::vector<Vector> se;
  std::size_t floored = 0;
};

inline PlugInAlpha estimate_alpha_plugin(const ReturnSeries& series,
                                         const CoefficientPartition& partition,
                                         const AlphaGrid& initial_alpha,
                                         const Vector& initial_beta, const Vector& beta,
                                         double b_prime, double var_xi2, double mu_T = 0.0,
                                         const Kernel& kernel = Kernel::epanechnikov()) {
  if (mu_T < 0.0) throw InputError("mu_T must be non-negative");
  const auto T = series.T();
  const auto p = static_cast<std::ptrdiff_t>(partition.p());
  const auto m = static_cast<Eigen::Index>(partition.m());
  const auto n = static_cast<Eigen::Index>(partition.n());
  const double floor = kVolatilityFloorFactor * mean_square(series);
  const double k2 = kernel_constants(kernel).l2_sq;
  const KernelTable table(kernel, b_prime, static_cast<std::size_t>(T));

  std::vector<Vector> mrows;
  std::vector<Vector> nrows;
  mrows.reserve(static_cast<std::size_t>(T - p));
  nrows.reserve(static_cast<std::size_t>(T - p));
  for (std::ptrdiff_t i = p + 1; i <= T; ++i) {
    auto [mi, ni] = regressors(series, partition, i);
    mrows.push_back(std::move(mi));
    nrows.push_back(std::move(ni));
  }

  PlugInAlpha out;
  out.alpha.first = p + 1;
  out.alpha.T = T;
  for (std::ptrdiff_t t = p + 1; t <= T; ++t) {
    const Window win = kernel_window(table, t, T, p);
    const Vector& at = initial_alpha.alpha[static_cast<std::size_t>(t - p - 1)];
    Matrix s3 = Matrix::Zero(m, m);
    Matrix s2 = Matrix::Zero(m, n);
    Vector s1 = Vector::Zero(m);
    double mass = 0.0;
    for (std::ptrdiff_t i = win.lo; i <= win.hi; ++i) {
      const double k = table[static_cast<std::size_t>(std::abs(t - i))];
      mass += k;
      if (k == 0.0) continue;
      const auto r = static_cast<std::size_t>(i - p - 1);
      double s = mrows[r].dot(at);
      if (n > 0) s += nrows[r].dot(initial_beta);
      if (!(s >= floor)) {
        s = floor;
        ++out.floored;
      }
      const double w = k / (s * s + mu_T);
      s3.noalias() += w * mrows[r] * mrows[r].transpose();
      s1.noalias() += (w * series.sq(i)) * mrows[r];
      if (n > 0) s2.noalias() += w * mrows[r] * nrows[r].transpose();
    }
    s3 /= mass;
    s2 /= mass;
    s1 /= mass;
    auto llt = spd_factor(s3);
    if (!llt) throw SingularSmoothedMoment(t);
    Vector rhs = s1;
    if (n > 0) rhs -= s2 * beta;
    out.alpha.alpha.push_back(llt->solve(rhs));
    const Matrix inv = llt->solve(Matrix::Identity(m, m));
    const double scale = var_xi2 * k2 / (static_cast<double>(T) * b_prime);
    out.se.push_back((scale * inv.diagonal()).cwiseMax(0.0).cwiseSqrt());
  }
  return out;
}

struct FitOptions {
  double bandwidth = 0.1;
  std::optional<double> bandwidth_prime;  // defaults to bandwidth
  WeightKind weights = WeightKind::LevelInverse;
  bool plug_in = false;
  double nu_T = 0.0;
  double mu_T = 0.0;
  Kernel kernel = Kernel::epanechnikov();
};

struct SemiparametricFit {
  CoefficientPartition partition;
  double bandwidth = 0.0;
  double bandwidth_prime = 0.0;
  bool plug_in = false;
  WeightKind weight_kind = WeightKind::LevelInverse;
  Vector beta;
  Matrix beta_cov;
  Vector beta_se;
  AlphaGrid alpha;
  std::vector<Vector> alpha_se;
  FittedVolatility sigma_sq;
  // Initial (non plug-in) estimates, kept for comparison when plug_in is set.
  Vector beta_initial;
  AlphaGrid alpha_initial;
  double s3_min_rcond = 1.0;
  double design_rcond = 1.0;
  std::size_t floored = 0;
};

/// Full two-step fit: beta-hat at b, alpha-hat at b', covariance estimates,
/// and optionally the plug-in pass.
inline SemiparametricFit fit_semiparametric(const ReturnSeries& series,
                                            const CoefficientPartition& partition,
                                            const FitOptions& opt) {
  require_length(series, partition.p());
  const double b = opt.bandwidth;
  const double bp = opt.bandwidth_prime.value_or(b);
  if (!(b > 0.0 && b <= 1.0) || !(bp > 0.0 && bp <= 1.0)) {
    throw InputError("bandwidths must lie in (0, 1]");
  }
  const Weights w = make_weights(series, partition.p(), opt.weights);

  SemiparametricFit fit{partition};
  fit.bandwidth = b;
  fit.bandwidth_prime = bp;
  fit.plug_in = opt.plug_in;
  fit.weight_kind = opt.weights;

  const auto ratios_b = projection_ratios(smoothed_moments(series, partition, w, b, opt.kernel));
  fit.s3_min_rcond = ratios_b.min_rcond;
  BetaEstimate est = partition.n() > 0 ? beta_from_ratios(series, partition, w, ratios_b)
                                       : BetaEstimate{Vector(0), ratios_b.first};
  fit.design_rcond = est.design_rcond;

  AlphaGrid alpha_bp;
  AlphaGrid alpha_b = alpha_from_ratios(ratios_b, est.beta, series.T());
  if (bp == b) {
    alpha_bp = alpha_b;
  } else {
    alpha_bp = estimate_alpha(series, partition, est.beta, w, bp, opt.kernel);
  }
  FittedVolatility vol = fitted_volatility(series, partition, alpha_bp, est.beta);
  fit.floored = vol.floored;

  fit.beta_initial = est.beta;
  fit.alpha_initial = alpha_bp;

  if (!opt.plug_in) {
    if (partition.n() > 0) {
      const BetaCovariance cov = covariance_beta(series, w, est, vol);
      fit.beta_cov = cov.cov;
      fit.beta_se = cov.se;
    }
    fit.beta = est.beta;
    fit.alpha = std::move(alpha_bp);
    fit.alpha_se = alpha_standard_errors(series, partition, w, vol, bp, opt.kernel);
    fit.sigma_sq = std::move(vol);
    return fit;
  }

  // Plug-in pass. Weights for beta* come from the fit at bandwidth b.
  FittedVolatility vol_b =
      bp == b ? vol : fitted_volatility(series, partition, alpha_b, est.beta);
  fit.floored += bp == b ? 0 : vol_b.floored;
  Vector beta_star = est.beta;
  if (partition.n() > 0) {
    PlugInBeta plug = estimate_beta_plugin(series, partition, b, vol_b, opt.nu_T, opt.kernel);
    beta_star = plug.estimate.beta;
    const AlphaGrid a_star_b = alpha_from_ratios(plug.estimate.ratios, beta_star, series.T());
    const FittedVolatility vol_star = fitted_volatility(series, partition, a_star_b, beta_star);
    const BetaCovariance cov = covariance_beta(series, plug.weights, plug.estimate, vol_star);
    fit.beta_cov = cov.cov;
    fit.beta_se = cov.se;
  }
  const double var_xi2 = residual_xi_sq_variance(series, vol);
  PlugInAlpha pa = estimate_alpha_plugin(series, partition, alpha_bp, est.beta, beta_star, bp,
                                         var_xi2, opt.mu_T, opt.kernel);
  fit.floored += pa.floored;
  fit.beta = beta_star;
  fit.sigma_sq = fitted_volatility(series, partition, pa.alpha, beta_star);
  fit.floored += fit.sigma_sq.floored;
  fit.alpha = std::move(pa.alpha);
  fit.alpha_se = std::move(pa.se);
  return fit;
}

}  // namespace tvarch
