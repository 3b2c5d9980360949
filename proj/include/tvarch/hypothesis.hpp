/**
 * @file hypothesis.hpp
 * @brief Tests for parameter constancy, zero constant coefficients and the
 * absence of second-order dynamics, calibrated by Monte-Carlo simulation
 * of the pivotal statistics under i.i.d. standard Gaussian data.
 */
#pragma once

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "tvarch/error.hpp"
#include "tvarch/estimate.hpp"
#include "tvarch/kernel.hpp"
#include "tvarch/linalg.hpp"
#include "tvarch/model.hpp"
#include "tvarch/parallel.hpp"
#include "tvarch/rng.hpp"
#include "tvarch/smoothing.hpp"

namespace tvarch {

// ---------------------------------------------------------------------------
// Full kernel estimate of the coefficient vector
// ---------------------------------------------------------------------------

/// a~(t/T) = S_t^{-1} sum_i k_{t,i} W_i x_i^2 X_i with S_t = sum_i k_{t,i} W_i X_i X_i'
/// and X_i the canonical regressor, for t = first..T.
struct NonparametricFit {
  std::size_t p = 0;
  std::ptrdiff_t first = 0;
  std::ptrdiff_t T = 0;
  std::vector<Vector> a_tilde;  // canonical order a_0..a_p
  std::vector<Matrix> gram;     // S_t
  double min_rcond = 1.0;

  const Vector& at(std::ptrdiff_t t) const { return a_tilde[static_cast<std::size_t>(t - first)]; }
};

inline NonparametricFit nonparametric_fit(const ReturnSeries& series, std::size_t p,
                                          const Weights& weights, double b,
                                          const Kernel& kernel = Kernel::epanechnikov(),
                                          std::ptrdiff_t first = 0) {
  require_length(series, p);
  const Design design = canonical_design(series, p, weights, first);
  const LocalGrams grams(design, KernelTable(kernel, b, static_cast<std::size_t>(series.T())));
  NonparametricFit out;
  out.p = p;
  out.first = design.first;
  out.T = series.T();
  out.a_tilde.reserve(static_cast<std::size_t>(design.rows()));
  out.gram.reserve(static_cast<std::size_t>(design.rows()));
  for (std::ptrdiff_t t = design.first; t <= design.last; ++t) {
    Matrix s = grams.gram(t);
    auto llt = spd_factor(s);
    if (!llt) throw SingularSmoothedMoment(t);
    out.min_rcond = std::min(out.min_rcond, llt->rcond());
    out.a_tilde.push_back(llt->solve(grams.moment(t)));
    out.gram.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Constancy statistic
// ---------------------------------------------------------------------------

enum class GammaKind { Identity, Constant, InverseVariance };

/// Weighting matrix family Gamma(u) of the L2 distance. InverseVariance
/// uses the inverse of the estimated local covariance of beta~(u) and is
/// experimental.
struct GammaSpec {
  GammaKind kind = GammaKind::Identity;
  Matrix matrix;  // used when kind == Constant

  static GammaSpec identity() { return {}; }
  static GammaSpec constant(Matrix g) { return {GammaKind::Constant, std::move(g)}; }
  static GammaSpec inverse_variance() { return {GammaKind::InverseVariance, {}}; }
};

struct ConstancyStatistic {
  double s_T = 0.0;
  double varpi1 = 0.0;
  double varpi2 = 0.0;
  double e_T = 0.0;
  Vector beta_hat;
  std::vector<Vector> beta_tilde;  // constant-block coordinates of a~, t = p+1..T
};

/// Combines the pieces of the constancy statistic:
///
///   S_T   = (1/T) sum_t (beta~_t - beta)' G_t (beta~_t - beta)
///   O_t   = S_t^{-1} [sum_i k_{t,i} W_i^2 (x_i^2 - sigma~_i^2)^2 X_i X_i'] S_t^{-1}
///   w_j   = (1/T) sum_t tr[(G_t^{1/2} A O_t A' G_t^{1/2})^j]
///   E_T   = T sqrt(b) (S_T - ||K||^2 w_1 / (T b)) / (2 ||K*|| sqrt(w_2))
inline ConstancyStatistic constancy_from_parts(const ReturnSeries& series,
                                               const CoefficientPartition& partition,
                                               const Weights& weights, double b,
                                               const Vector& beta_hat,
                                               const NonparametricFit& np,
                                               const GammaSpec& gamma, const Kernel& kernel) {
  const auto n = static_cast<Eigen::Index>(partition.n());
  const double T = static_cast<double>(series.T());
  const auto& cidx = partition.constant();

  if (gamma.kind == GammaKind::Constant && (gamma.matrix.rows() != n || gamma.matrix.cols() != n)) {
    throw InputError("Gamma must be an n x n matrix");
  }

  // Middle term of the local covariance, built from residuals of a~.
  Design middle = canonical_design(series, partition.p(), weights, np.first);
  for (std::ptrdiff_t t = middle.first; t <= middle.last; ++t) {
    const auto r = middle.row(t);
    const double fitted = middle.z.row(r).dot(np.at(t));
    const double e = series.sq(t) - fitted;
    const double w = weights(t);
    middle.w[r] = w * w * e * e;
  }
  // Zero residual weights are legal here; bypass the positivity check of Weights.
  const LocalGrams mid(middle, KernelTable(kernel, b, static_cast<std::size_t>(series.T())));

  ConstancyStatistic out;
  out.beta_hat = beta_hat;
  double s = 0.0;
  double tr1 = 0.0;
  double tr2 = 0.0;
  for (std::ptrdiff_t t = np.first; t <= middle.last; ++t) {
    const Vector& a = np.at(t);
    Vector bt(n);
    for (Eigen::Index k = 0; k < n; ++k) bt[k] = a[static_cast<Eigen::Index>(cidx[static_cast<std::size_t>(k)])];
    const Vector diff = bt - beta_hat;

    const Matrix& st = np.gram[static_cast<std::size_t>(t - np.first)];
    Eigen::LLT<Matrix> llt(st);
    const Matrix inv = llt.solve(Matrix::Identity(st.rows(), st.cols()));
    const Matrix omega = inv * mid.gram(t) * inv;
    Matrix block(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index c = 0; c < n; ++c) {
        block(r, c) = omega(static_cast<Eigen::Index>(cidx[static_cast<std::size_t>(r)]),
                            static_cast<Eigen::Index>(cidx[static_cast<std::size_t>(c)]));
      }
    }
    Matrix g;
    switch (gamma.kind) {
      case GammaKind::Identity: g = Matrix::Identity(n, n); break;
      case GammaKind::Constant: g = gamma.matrix; break;
      case GammaKind::InverseVariance: {
        auto f = spd_factor(symmetrize(block));
        if (!f) throw SingularCovariance("local covariance of beta~ is singular at t=" + std::to_string(t));
        g = f->solve(Matrix::Identity(n, n));
        break;
      }
    }
    s += diff.dot(g * diff);
    const Matrix gb = g * block;
    tr1 += gb.trace();
    tr2 += (gb * gb).trace();
    out.beta_tilde.push_back(std::move(bt));
  }
  out.s_T = s / T;
  out.varpi1 = tr1 / T;
  out.varpi2 = tr2 / T;
  const auto& kc = kernel_constants(kernel);
  if (!(out.varpi2 > 0.0)) throw NumericalError("variance term of the constancy statistic vanished");
  out.e_T = T * std::sqrt(b) * (out.s_T - kc.l2_sq * out.varpi1 / (T * b)) /
            (2.0 * std::sqrt(kc.k_star_l2_sq) * std::sqrt(out.varpi2));
  return out;
}

inline ConstancyStatistic constancy_statistic(const ReturnSeries& series,
                                              const CoefficientPartition& partition,
                                              const Weights& weights, double b,
                                              const GammaSpec& gamma = GammaSpec::identity(),
                                              const Kernel& kernel = Kernel::epanechnikov()) {
  if (partition.n() == 0) throw InputError("constancy test needs a non-empty constant block");
  const BetaEstimate est = estimate_beta(series, partition, weights, b, kernel);
  const NonparametricFit np = nonparametric_fit(series, partition.p(), weights, b, kernel);
  return constancy_from_parts(series, partition, weights, b, est.beta, np, gamma, kernel);
}

// ---------------------------------------------------------------------------
// Wald statistic for beta = 0
// ---------------------------------------------------------------------------

struct WaldStatistic {
  double statistic = 0.0;
  Vector beta_hat;
  Matrix asymptotic_cov;  // V-hat
};

/// T || V^{-1/2} beta ||^2 with V the sandwich covariance of sqrt(T) beta-hat.
inline WaldStatistic wald_statistic(const ReturnSeries& series,
                                    const CoefficientPartition& partition,
                                    const Weights& weights, double b,
                                    const Kernel& kernel = Kernel::epanechnikov()) {
  const BetaEstimate est = estimate_beta(series, partition, weights, b, kernel);
  const AlphaGrid alpha = alpha_from_ratios(est.ratios, est.beta, series.T());
  const FittedVolatility vol = fitted_volatility(series, partition, alpha, est.beta);
  const BetaCovariance cov = covariance_beta(series, weights, est, vol);
  const Matrix root = inverse_sqrt_spd(cov.asymptotic);
  const Vector z = root * est.beta;
  return {static_cast<double>(series.T()) * z.squaredNorm(), est.beta, cov.asymptotic};
}

// ---------------------------------------------------------------------------
// Second-order dynamic statistic
// ---------------------------------------------------------------------------

struct SecondOrderStatistic {
  Vector a_hat;        // lag estimates a_1..a_p
  double psi = 0.0;    // T sum max(a_j, 0)^2 / sigma^2
  double sigma_sq = 0.0;
  std::vector<double> d_hat;  // smoothed squares for t = p+1..T
};

/// Least squares of H_t = x_t^2 - d_t on (H_{t-1}, .., H_{t-p}) for
/// t = 2p+1..T, where d_t = sum_i k_{t,i} x_i^2 (i, t in p+1..T).
/// sigma^2 = N sum d_t^4 / (sum d_t^2)^2 with N = T - p.
inline SecondOrderStatistic second_order_statistic(const ReturnSeries& series, std::size_t p,
                                                   double b,
                                                   const Kernel& kernel = Kernel::epanechnikov()) {
  if (p < 1) throw InputError("second-order test needs p >= 1");
  const auto T = series.T();
  if (static_cast<double>(T) * b < 10.0) throw InputError("second-order test needs T*b >= 10");
  if (T < static_cast<std::ptrdiff_t>(3 * p + 2)) throw InputError("series too short for the second-order test");
  const auto lag = static_cast<std::ptrdiff_t>(p);
  const KernelTable table(kernel, b, static_cast<std::size_t>(T));

  SecondOrderStatistic out;
  out.d_hat.reserve(static_cast<std::size_t>(T - lag));
  for (std::ptrdiff_t t = lag + 1; t <= T; ++t) {
    const Window w = kernel_window(table, t, T, lag);
    double num = 0.0;
    double den = 0.0;
    for (std::ptrdiff_t i = w.lo; i <= w.hi; ++i) {
      const double k = table[static_cast<std::size_t>(std::abs(t - i))];
      num += k * series.sq(i);
      den += k;
    }
    if (!(den > 0.0)) throw EmptyWindow(t, b);
    out.d_hat.push_back(num / den);
  }
  auto h = [&](std::ptrdiff_t t) { return series.sq(t) - out.d_hat[static_cast<std::size_t>(t - lag - 1)]; };

  Matrix xtx = Matrix::Zero(lag, lag);
  Vector xty = Vector::Zero(lag);
  Vector row(lag);
  for (std::ptrdiff_t t = 2 * lag + 1; t <= T; ++t) {
    for (std::ptrdiff_t j = 1; j <= lag; ++j) row[j - 1] = h(t - j);
    xtx.noalias() += row * row.transpose();
    xty.noalias() += h(t) * row;
  }
  auto llt = spd_factor(xtx);
  if (!llt) throw SingularDesign("lagged design of the second-order regression is singular");
  out.a_hat = llt->solve(xty);

  double s2 = 0.0;
  double s4 = 0.0;
  for (double d : out.d_hat) {
    s2 += d * d;
    s4 += d * d * d * d;
  }
  out.sigma_sq = static_cast<double>(out.d_hat.size()) * s4 / (s2 * s2);
  double trunc = 0.0;
  for (Eigen::Index j = 0; j < out.a_hat.size(); ++j) {
    const double a = std::max(out.a_hat[j], 0.0);
    trunc += a * a;
  }
  out.psi = static_cast<double>(T) * trunc / out.sigma_sq;
  return out;
}

// ---------------------------------------------------------------------------
// Monte-Carlo calibration
// ---------------------------------------------------------------------------

enum class PivotalStatistic { ConstancyE_T, WaldZero, SecondOrderPsi };

inline const char* to_string(PivotalStatistic s) {
  switch (s) {
    case PivotalStatistic::ConstancyE_T: return "constancy";
    case PivotalStatistic::WaldZero: return "wald-zero";
    case PivotalStatistic::SecondOrderPsi: return "second-order";
  }
  return "?";
}

/// Type-7 (linear interpolation) empirical quantile of a sorted sample.
inline double sorted_quantile(const std::vector<double>& sorted, double prob) {
  if (sorted.empty()) throw InputError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(prob, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// (1 + #{replicates >= observed}) / (B + 1).
inline double mc_p_value(const std::vector<double>& sorted, double observed) {
  const auto it = std::lower_bound(sorted.begin(), sorted.end(), observed);
  const auto exceed = static_cast<double>(sorted.end() - it);
  return (1.0 + exceed) / (static_cast<double>(sorted.size()) + 1.0);
}

struct MonteCarloSpec {
  std::size_t T = 0;
  CoefficientPartition partition = CoefficientPartition::intercept_varying(1);
  WeightKind weights = WeightKind::LevelInverse;
  double bandwidth = 0.1;
  std::size_t B = 2000;
  std::uint64_t seed = 1;
  PivotalStatistic statistic = PivotalStatistic::ConstancyE_T;
  GammaSpec gamma;
  Kernel kernel = Kernel::epanechnikov();
};

struct MonteCarloSample {
  std::vector<double> sorted;  // replicate statistics, ascending
  std::size_t redraws = 0;     // replicates redrawn after a numerical failure

  double quantile(double prob) const { return sorted_quantile(sorted, prob); }
  double p_value(double observed) const { return mc_p_value(sorted, observed); }
};

inline constexpr int kMaxReplicateRetries = 5;

/// Evaluates the chosen statistic on one data set.
inline double evaluate_pivotal(const ReturnSeries& data, const MonteCarloSpec& spec) {
  switch (spec.statistic) {
    case PivotalStatistic::ConstancyE_T: {
      const Weights w = make_weights(data, spec.partition.p(), spec.weights);
      return constancy_statistic(data, spec.partition, w, spec.bandwidth, spec.gamma, spec.kernel).e_T;
    }
    case PivotalStatistic::WaldZero: {
      const Weights w = make_weights(data, spec.partition.p(), spec.weights);
      return wald_statistic(data, spec.partition, w, spec.bandwidth, spec.kernel).statistic;
    }
    case PivotalStatistic::SecondOrderPsi:
      return second_order_statistic(data, spec.partition.p(), spec.bandwidth, spec.kernel).psi;
  }
  return 0.0;
}

/// Replicate distribution of a pivotal statistic on B i.i.d. N(0,1) samples
/// of length T. Replicate r uses the stream seed ^ splitmix64(r); a
/// replicate that hits a numerical failure is redrawn from a derived
/// stream, at most kMaxReplicateRetries times.
inline MonteCarloSample mc_pivotal_sample(const MonteCarloSpec& spec) {
  if (spec.B < 100) throw InputError("Monte-Carlo calibration needs B >= 100");
  std::vector<double> stats(spec.B);
  std::vector<std::size_t> redraws(spec.B, 0);
  parallel_for(spec.B, [&](std::size_t r) {
    const std::uint64_t base = derive_seed(spec.seed, r);
    for (int attempt = 0;; ++attempt) {
      RandomStream rng(attempt == 0 ? base : derive_seed(base, static_cast<std::uint64_t>(attempt)));
      std::vector<double> x(spec.T);
      for (auto& v : x) v = rng.gaussian();
      try {
        stats[r] = evaluate_pivotal(ReturnSeries(std::move(x)), spec);
        redraws[r] = static_cast<std::size_t>(attempt);
        return;
      } catch (const NumericalError&) {
        if (attempt >= kMaxReplicateRetries) throw;
      }
    }
  });
  MonteCarloSample out;
  out.sorted = std::move(stats);
  std::sort(out.sorted.begin(), out.sorted.end());
  for (auto k : redraws) out.redraws += k;
  return out;
}

inline std::map<double, double> mc_pivotal_quantiles(const MonteCarloSample& sample,
                                                     const std::vector<double>& levels) {
  std::map<double, double> out;
  for (double a : levels) out[a] = sample.quantile(1.0 - a);
  return out;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct TestReport {
  std::string name;
  double statistic = 0.0;
  bool pivotal = true;
  std::string calibration = "monte-carlo";
  std::map<double, double> critical_values;  // alpha -> critical value
  std::map<double, bool> reject;             // alpha -> decision
  double p_value = 1.0;
  std::optional<double> asymptotic_p_value;
  std::size_t B = 0;
  std::uint64_t seed = 0;
  double bandwidth = 0.0;
  std::size_t redraws = 0;
  std::string partition;
  std::map<std::string, double> details;
};

inline void validate_levels(const std::vector<double>& levels) {
  if (levels.empty()) throw InputError("at least one test level is required");
  for (double a : levels) {
    if (!(a > 0.0 && a < 1.0)) throw InputError("test levels must lie in (0, 1)");
  }
}

inline void decide(TestReport& report, const MonteCarloSample& sample,
                   const std::vector<double>& levels) {
  report.B = sample.sorted.size();
  report.redraws = sample.redraws;
  report.p_value = sample.p_value(report.statistic);
  for (double a : levels) {
    const double q = sample.quantile(1.0 - a);
    report.critical_values[a] = q;
    report.reject[a] = report.statistic > q;
  }
}

struct ConstancyTestOptions {
  std::size_t B = 2000;
  std::vector<double> levels{0.05, 0.10};
  std::uint64_t seed = 1;
  WeightKind weights = WeightKind::LevelInverse;
  GammaSpec gamma;
  Kernel kernel = Kernel::epanechnikov();
  /// Reuse a replicate sample computed for the same (T, partition, b).
  const MonteCarloSample* calibration = nullptr;
};

inline MonteCarloSpec constancy_mc_spec(std::size_t T, const CoefficientPartition& partition,
                                        double b, const ConstancyTestOptions& opt) {
  return {T, partition, opt.weights, b, opt.B, opt.seed, PivotalStatistic::ConstancyE_T, opt.gamma,
          opt.kernel};
}

/// Rejects constancy of the constant block at level a iff E_T exceeds the
/// (1 - a)-quantile of the Gaussian replicate distribution.
inline TestReport test_constancy(const ReturnSeries& series, const CoefficientPartition& partition,
                                 double b, const ConstancyTestOptions& opt = {}) {
  validate_levels(opt.levels);
  const Weights w = make_weights(series, partition.p(), opt.weights);
  const ConstancyStatistic stat = constancy_statistic(series, partition, w, b, opt.gamma, opt.kernel);
  TestReport report;
  report.name = "constancy";
  report.statistic = stat.e_T;
  report.seed = opt.seed;
  report.bandwidth = b;
  report.partition = partition.describe();
  report.details["S_T"] = stat.s_T;
  report.details["varpi1"] = stat.varpi1;
  report.details["varpi2"] = stat.varpi2;
  report.asymptotic_p_value = 0.5 * std::erfc(stat.e_T / std::sqrt(2.0));
  if (opt.calibration) {
    decide(report, *opt.calibration, opt.levels);
    report.seed = 0;
  } else {
    decide(report, mc_pivotal_sample(constancy_mc_spec(static_cast<std::size_t>(series.T()), partition, b, opt)),
           opt.levels);
  }
  return report;
}

/// P(chi2_n >= x) for the reference chi-square law.
inline double chi_squared_upper(double df, double x) {
  if (x <= 0.0) return 1.0;
  boost::math::chi_squared dist(df);
  return boost::math::cdf(boost::math::complement(dist, x));
}

inline TestReport test_zero_wald(const ReturnSeries& series, const CoefficientPartition& partition,
                                 double b, const ConstancyTestOptions& opt = {}) {
  validate_levels(opt.levels);
  if (partition.n() == 0) throw InputError("Wald test needs a non-empty constant block");
  const Weights w = make_weights(series, partition.p(), opt.weights);
  const WaldStatistic stat = wald_statistic(series, partition, w, b, opt.kernel);
  TestReport report;
  report.name = "zero-wald";
  report.statistic = stat.statistic;
  report.seed = opt.seed;
  report.bandwidth = b;
  report.partition = partition.describe();
  report.asymptotic_p_value = chi_squared_upper(static_cast<double>(partition.n()), stat.statistic);
  if (opt.calibration) {
    decide(report, *opt.calibration, opt.levels);
    report.seed = 0;
  } else {
    MonteCarloSpec spec = constancy_mc_spec(static_cast<std::size_t>(series.T()), partition, b, opt);
    spec.statistic = PivotalStatistic::WaldZero;
    decide(report, mc_pivotal_sample(spec), opt.levels);
  }
  return report;
}

/// (1 - a)-quantile of sum_{j=1..p} max(Z_j, 0)^2 by Monte-Carlo
/// integration over `draws` samples; cached per (p, a, draws).
inline double truncated_chi_quantile(std::size_t p, double level_alpha,
                                     std::size_t draws = 10'000'000) {
  static std::mutex mutex;
  static std::map<std::tuple<std::size_t, double, std::size_t>, double> cache;
  const auto key = std::make_tuple(p, level_alpha, draws);
  {
    std::lock_guard<std::mutex> lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  RandomStream rng(derive_seed(0x5EC0'0D0A'11CEULL, p));
  std::vector<double> sample(draws);
  for (auto& s : sample) {
    double acc = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      const double z = rng.gaussian();
      if (z > 0.0) acc += z * z;
    }
    s = acc;
  }
  const double h = (static_cast<double>(draws) - 1.0) * (1.0 - level_alpha);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  std::nth_element(sample.begin(), sample.begin() + static_cast<std::ptrdiff_t>(lo), sample.end());
  const double a = sample[lo];
  double b = a;
  if (lo + 1 < draws) {
    b = *std::min_element(sample.begin() + static_cast<std::ptrdiff_t>(lo) + 1, sample.end());
  }
  const double q = a + (h - static_cast<double>(lo)) * (b - a);
  std::lock_guard<std::mutex> lock(mutex);
  cache[key] = q;
  return q;
}

/// P(sum_{j=1..p} max(Z_j, 0)^2 >= x): a binomial mixture of chi-square laws.
inline double truncated_chi_upper(std::size_t p, double x) {
  if (x <= 0.0) return 1.0;
  double total = 0.0;
  double binom = 1.0;  // C(p, k)
  for (std::size_t k = 0; k <= p; ++k) {
    if (k > 0) {
      binom = binom * static_cast<double>(p - k + 1) / static_cast<double>(k);
      total += binom * chi_squared_upper(static_cast<double>(k), x);
    }
  }
  return total / std::pow(2.0, static_cast<double>(p));
}

enum class Calibration { Asymptotic, MonteCarlo };

struct SecondOrderTestOptions {
  std::size_t B = 2000;
  std::vector<double> levels{0.05, 0.10};
  std::uint64_t seed = 1;
  Calibration calibration = Calibration::MonteCarlo;
  Kernel kernel = Kernel::epanechnikov();
  const MonteCarloSample* sample = nullptr;
};

inline MonteCarloSpec second_order_mc_spec(std::size_t T, std::size_t p, double b,
                                           const SecondOrderTestOptions& opt) {
  MonteCarloSpec spec;
  spec.T = T;
  spec.partition = CoefficientPartition::intercept_varying(p);
  spec.weights = WeightKind::Unit;
  spec.bandwidth = b;
  spec.B = opt.B;
  spec.seed = opt.seed;
  spec.statistic = PivotalStatistic::SecondOrderPsi;
  spec.kernel = opt.kernel;
  return spec;
}

inline TestReport test_second_order(const ReturnSeries& series, std::size_t p, double b,
                                    const SecondOrderTestOptions& opt = {}) {
  validate_levels(opt.levels);
  const SecondOrderStatistic stat = second_order_statistic(series, p, b, opt.kernel);
  TestReport report;
  report.name = "second-order";
  report.statistic = stat.psi;
  report.seed = opt.seed;
  report.bandwidth = b;
  report.partition = CoefficientPartition::intercept_varying(p).describe();
  report.details["sigma_sq"] = stat.sigma_sq;
  for (Eigen::Index j = 0; j < stat.a_hat.size(); ++j) {
    report.details["a" + std::to_string(j + 1)] = stat.a_hat[j];
  }
  report.asymptotic_p_value = truncated_chi_upper(p, stat.psi);
  if (opt.calibration == Calibration::Asymptotic) {
    report.calibration = "asymptotic";
    report.B = 0;
    report.seed = 0;
    report.p_value = *report.asymptotic_p_value;
    for (double a : opt.levels) {
      const double q = truncated_chi_quantile(p, a);
      report.critical_values[a] = q;
      report.reject[a] = stat.psi > q;
    }
    return report;
  }
  if (opt.sample) {
    decide(report, *opt.sample, opt.levels);
    report.seed = 0;
  } else {
    decide(report, mc_pivotal_sample(second_order_mc_spec(static_cast<std::size_t>(series.T()), p, b, opt)),
           opt.levels);
  }
  return report;
}

}  // namespace tvarch
