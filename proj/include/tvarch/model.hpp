/**
 * @file model.hpp
 * @brief tv-ARCH model description, coefficient partitions and regressors.
 *
 * The squared process satisfies
 *
 *     x_t^2 = M_t' alpha(t/T) + N_t' beta + (xi_t^2 - 1) sigma_t^2,
 *
 * where the canonical regressor (1, x_{t-1}^2, ..., x_{t-p}^2) is split
 * into a time-varying block M_t and a constant block N_t by a
 * CoefficientPartition.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "tvarch/error.hpp"
#include "tvarch/linalg.hpp"

namespace tvarch {

/// A coefficient function u -> a(u) on [0, 1]. Keeps a short description
/// of its construction for echoing configurations.
class CoefficientFunction {
 public:
  CoefficientFunction() : CoefficientFunction(constant(0.0)) {}
  CoefficientFunction(std::function<double(double)> fn, std::string description)
      : fn_(std::move(fn)), description_(std::move(description)) {}

  double operator()(double u) const { return fn_(u); }
  const std::string& description() const noexcept { return description_; }

  static CoefficientFunction constant(double value) {
    return {[value](double) { return value; }, "constant(" + fmt(value) + ")"};
  }

  /// offset + amplitude * sin(2 pi frequency u)
  static CoefficientFunction sine(double offset, double amplitude, double frequency = 1.0) {
    return {[=](double u) {
              return offset + amplitude * std::sin(2.0 * std::numbers::pi * frequency * u);
            },
            "sine(" + fmt(offset) + "," + fmt(amplitude) + "," + fmt(frequency) + ")"};
  }

  /// offset + amplitude * cos(2 pi frequency u)
  static CoefficientFunction cosine(double offset, double amplitude, double frequency = 1.0) {
    return {[=](double u) {
              return offset + amplitude * std::cos(2.0 * std::numbers::pi * frequency * u);
            },
            "cosine(" + fmt(offset) + "," + fmt(amplitude) + "," + fmt(frequency) + ")"};
  }

  /// Linear interpolation through knots (u_k, v_k) sorted by u, constant
  /// extrapolation outside the first and last knot.
  static CoefficientFunction piecewise_linear(std::vector<std::pair<double, double>> knots) {
    if (knots.empty()) throw InputError("piecewise-linear function needs at least one knot");
    std::sort(knots.begin(), knots.end());
    std::string desc = "piecewise_linear(";
    for (std::size_t k = 0; k < knots.size(); ++k) {
      desc += (k ? ";" : "") + fmt(knots[k].first) + ":" + fmt(knots[k].second);
    }
    desc += ")";
    return {[knots = std::move(knots)](double u) {
              if (u <= knots.front().first) return knots.front().second;
              if (u >= knots.back().first) return knots.back().second;
              auto hi = std::upper_bound(
                  knots.begin(), knots.end(), u,
                  [](double x, const std::pair<double, double>& k) { return x < k.first; });
              auto lo = hi - 1;
              const double w = (u - lo->first) / (hi->first - lo->first);
              return lo->second + w * (hi->second - lo->second);
            },
            desc};
  }

 private:
  static std::string fmt(double v) {
    std::string s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  }

  std::function<double(double)> fn_;
  std::string description_;
};

enum class NoiseLaw { Gaussian, Student };

/// Unit-variance innovation law. Student draws are rescaled by
/// sqrt((nu - 2) / nu); nu > 4 keeps fourth moments finite.
struct NoiseSpec {
  NoiseLaw law = NoiseLaw::Gaussian;
  int df = 0;

  static NoiseSpec gaussian() { return {}; }
  static NoiseSpec student(int nu) {
    if (nu <= 4) throw InputError("Student noise requires nu > 4");
    return {NoiseLaw::Student, nu};
  }
  std::string name() const {
    return law == NoiseLaw::Gaussian ? "gaussian" : "t" + std::to_string(df);
  }
};

struct TvArchModel {
  std::size_t p = 0;
  std::vector<CoefficientFunction> coeffs;  // a_0 .. a_p
  NoiseSpec noise;
};

/// Grid size for the positivity and contraction checks.
inline constexpr std::size_t kValidationGrid = 1024;

/// Grid-checked positivity of a_0, non-negativity of a_j and
/// sup_u sum_j a_j(u) < 1. Returns the contraction constant.
inline double validate_model(const TvArchModel& model) {
  if (model.coeffs.size() != model.p + 1) {
    throw InputError("model needs p+1 coefficient functions");
  }
  if (model.noise.law == NoiseLaw::Student && model.noise.df <= 4) {
    throw InputError("Student noise requires nu > 4");
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < kValidationGrid; ++k) {
    const double u = static_cast<double>(k) / static_cast<double>(kValidationGrid - 1);
    const double a0 = model.coeffs[0](u);
    if (!(a0 > 0.0) || !std::isfinite(a0)) throw NonPositiveIntercept(u, a0);
    double sum = 0.0;
    for (std::size_t j = 1; j <= model.p; ++j) {
      const double aj = model.coeffs[j](u);
      if (!(aj >= 0.0) || !std::isfinite(aj)) throw NegativeLagCoefficient(j, u, aj);
      sum += aj;
    }
    if (!(sum < 1.0)) throw ContractionViolated(u, sum);
    worst = std::max(worst, sum);
  }
  return worst;
}

/// Bipartition of the coefficient indices {0..p} into time-varying
/// (M block) and constant (N block) coefficients.
class CoefficientPartition {
 public:
  CoefficientPartition(std::size_t p, std::vector<std::size_t> varying,
                       std::vector<std::size_t> constant)
      : p_(p), varying_(std::move(varying)), constant_(std::move(constant)) {
    std::sort(varying_.begin(), varying_.end());
    std::sort(constant_.begin(), constant_.end());
    if (varying_.empty()) throw InputError("partition needs at least one time-varying index");
    if (varying_.size() + constant_.size() != p + 1) {
      throw InputError("partition must cover exactly the indices 0..p");
    }
    std::vector<int> seen(p + 1, 0);
    for (auto j : varying_) {
      if (j > p || seen[j]++) throw InputError("invalid or repeated partition index");
    }
    for (auto j : constant_) {
      if (j > p || seen[j]++) throw InputError("invalid or repeated partition index");
    }
  }

  /// Intercept time-varying, all lags constant.
  static CoefficientPartition intercept_varying(std::size_t p) {
    std::vector<std::size_t> lags;
    for (std::size_t j = 1; j <= p; ++j) lags.push_back(j);
    return {p, {0}, lags};
  }

  /// Every coefficient time-varying (n = 0).
  static CoefficientPartition all_varying(std::size_t p) {
    std::vector<std::size_t> all;
    for (std::size_t j = 0; j <= p; ++j) all.push_back(j);
    return {p, all, {}};
  }

  /// Everything except the listed constant indices is time-varying.
  static CoefficientPartition with_constant(std::size_t p, std::vector<std::size_t> constant) {
    std::vector<std::size_t> varying;
    for (std::size_t j = 0; j <= p; ++j) {
      if (std::find(constant.begin(), constant.end(), j) == constant.end()) varying.push_back(j);
    }
    return {p, varying, std::move(constant)};
  }

  std::size_t p() const noexcept { return p_; }
  std::size_t m() const noexcept { return varying_.size(); }
  std::size_t n() const noexcept { return constant_.size(); }
  const std::vector<std::size_t>& varying() const noexcept { return varying_; }
  const std::vector<std::size_t>& constant() const noexcept { return constant_; }

  /// Canonical index of position k in the stacked vector (M', N')'.
  std::size_t stacked_to_canonical(std::size_t k) const {
    return k < m() ? varying_[k] : constant_[k - m()];
  }

  std::string describe() const {
    auto join = [](const std::vector<std::size_t>& v) {
      std::string s;
      for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + std::to_string(v[k]);
      return s;
    };
    return "varying=" + join(varying_) + " constant=" + join(constant_);
  }

  friend bool operator==(const CoefficientPartition&, const CoefficientPartition&) = default;

 private:
  std::size_t p_;
  std::vector<std::size_t> varying_;
  std::vector<std::size_t> constant_;
};

/// Observed or simulated returns x_1..x_T (1-based accessors).
class ReturnSeries {
 public:
  ReturnSeries() = default;
  explicit ReturnSeries(std::vector<double> values) : values_(std::move(values)) {
    for (std::size_t k = 0; k < values_.size(); ++k) {
      if (!std::isfinite(values_[k])) {
        throw InputError("series value " + std::to_string(k + 1) + " is not finite");
      }
    }
  }

  std::ptrdiff_t T() const noexcept { return static_cast<std::ptrdiff_t>(values_.size()); }
  double x(std::ptrdiff_t t) const { return values_[static_cast<std::size_t>(t - 1)]; }
  double sq(std::ptrdiff_t t) const {
    const double v = x(t);
    return v * v;
  }
  const std::vector<double>& values() const noexcept { return values_; }

  ReturnSeries scaled(double c) const {
    std::vector<double> v(values_);
    for (double& e : v) e *= c;
    return ReturnSeries(std::move(v));
  }

 private:
  std::vector<double> values_;
};

inline void require_length(const ReturnSeries& series, std::size_t p) {
  if (series.T() < static_cast<std::ptrdiff_t>(p) + 2) {
    throw InputError("series of length " + std::to_string(series.T()) +
                     " is too short for lag order " + std::to_string(p));
  }
}

/// Entry j of the canonical regressor at time t: 1 for j = 0, x_{t-j}^2
/// otherwise.
inline double canonical_regressor(const ReturnSeries& series, std::size_t j, std::ptrdiff_t t) {
  return j == 0 ? 1.0 : series.sq(t - static_cast<std::ptrdiff_t>(j));
}

/// (M_t, N_t) for p+1 <= t <= T.
inline std::pair<Vector, Vector> regressors(const ReturnSeries& series,
                                            const CoefficientPartition& partition,
                                            std::ptrdiff_t t) {
  const auto p = static_cast<std::ptrdiff_t>(partition.p());
  if (t <= p || t > series.T()) {
    throw IndexOutOfRange("regressors need p+1 <= t <= T, got t=" + std::to_string(t));
  }
  Vector mt(partition.m());
  Vector nt(partition.n());
  for (std::size_t k = 0; k < partition.m(); ++k) {
    mt[static_cast<Eigen::Index>(k)] = canonical_regressor(series, partition.varying()[k], t);
  }
  for (std::size_t k = 0; k < partition.n(); ++k) {
    nt[static_cast<Eigen::Index>(k)] = canonical_regressor(series, partition.constant()[k], t);
  }
  return {std::move(mt), std::move(nt)};
}

}  // namespace tvarch
