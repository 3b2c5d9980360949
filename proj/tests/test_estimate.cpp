#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oracle/dense_reference.hpp"
#include "tvarch/estimate.hpp"
#include "tvarch/experiment.hpp"
#include "tvarch/simulate.hpp"

using namespace tvarch;
using Catch::Approx;

namespace {

oracle::Data to_oracle(const ReturnSeries& x) { return {x.values()}; }

double max_abs_diff(const Vector& a, const oracle::Vec& b) {
  REQUIRE(a.size() == b.size());
  return (a - b).cwiseAbs().maxCoeff();
}

ReturnSeries arch_series(std::size_t T, std::uint64_t seed) {
  return simulate_path(constancy_model(1), {T, seed, 200});
}

}  // namespace

TEST_CASE("smoothed moments of the intercept block are kernel averages") {
  const ReturnSeries x = arch_series(120, 3);
  const auto part = CoefficientPartition::all_varying(0);
  const Weights w = unit_weights(x, 0);
  const auto sm = smoothed_moments(x, part, w, 0.1);
  for (std::ptrdiff_t t = 1; t <= 120; ++t) {
    const auto k = oracle::weights(t, 0.1, 120, 1);
    double nw = 0;
    for (std::ptrdiff_t i = 1; i <= 120; ++i) nw += k[static_cast<std::size_t>(i - 1)] * x.sq(i);
    const auto idx = static_cast<std::size_t>(t - 1);
    CHECK(sm.s3[idx](0, 0) == Approx(1.0).margin(1e-14));
    CHECK(sm.s1[idx][0] == Approx(nw).epsilon(1e-12));
  }
  const auto ratios = projection_ratios(sm);
  CHECK(ratios.q1[10][0] == Approx(sm.s1[10][0] / sm.s3[10](0, 0)).epsilon(1e-15));
  CHECK(ratios.q2[10].cols() == 0);
}

TEST_CASE("global box window gives identical local moments") {
  const ReturnSeries x = arch_series(80, 5);
  const auto part = CoefficientPartition::intercept_varying(1);
  const auto sm = smoothed_moments(x, part, level_weights(x, 1), 1.0, Kernel::box());
  for (std::size_t k = 1; k < sm.s3.size(); ++k) {
    CHECK(sm.s3[k](0, 0) == Approx(sm.s3[0](0, 0)).epsilon(1e-13));
    CHECK(sm.s2[k](0, 0) == Approx(sm.s2[0](0, 0)).epsilon(1e-13));
  }
}

TEST_CASE("estimators agree with the dense reference") {
  std::mt19937_64 gen(2024);
  const std::vector<CoefficientPartition> parts{
      CoefficientPartition::intercept_varying(1), CoefficientPartition::intercept_varying(2),
      CoefficientPartition(2, {0, 2}, {1}), CoefficientPartition(1, {1}, {0}),
      CoefficientPartition(3, {0, 1}, {2, 3})};
  for (int rep = 0; rep < 50; ++rep) {
    const auto T = static_cast<std::size_t>(30 + gen() % 51);
    const auto& part = parts[static_cast<std::size_t>(rep) % parts.size()];
    const ReturnSeries x = arch_series(T, 100 + static_cast<std::uint64_t>(rep));
    const double b = 0.15 + 0.5 * static_cast<double>(gen() % 1000) / 1000.0;
    const double b2 = 0.15 + 0.5 * static_cast<double>(gen() % 1000) / 1000.0;
    const Weights w = level_weights(x, part.p());
    const auto ow = oracle::level_weights(to_oracle(x), part.p());

    const BetaEstimate est = estimate_beta(x, part, w, b);
    const AlphaGrid alpha = estimate_alpha(x, part, est.beta, w, b2);
    const auto ref = oracle::semiparametric(to_oracle(x), part.p(), part.varying(), part.constant(), ow, b, b2);
    const double scale = 1.0 + ref.beta.cwiseAbs().maxCoeff();
    CHECK(max_abs_diff(est.beta, ref.beta) < 1e-10 * scale);
    REQUIRE(alpha.alpha.size() == ref.alpha.size());
    for (std::size_t k = 0; k < alpha.alpha.size(); ++k) {
      CHECK(max_abs_diff(alpha.alpha[k], ref.alpha[k]) < 1e-10 * (1.0 + ref.alpha[k].cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("beta is scale invariant under level weights") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const ReturnSeries x = simulate_path(rmse_model(), {400, 40 + s, 200});
    const auto part = CoefficientPartition::intercept_varying(2);
    const ReturnSeries y = x.scaled(100.0);
    const Vector a = estimate_beta(x, part, level_weights(x, 2), 0.15).beta;
    const Vector c = estimate_beta(y, part, level_weights(y, 2), 0.15).beta;
    CHECK((a - c).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("covariance estimates") {
  const ReturnSeries x = arch_series(600, 8);
  const auto part = CoefficientPartition::intercept_varying(1);
  const Weights w = level_weights(x, 1);
  const BetaEstimate est = estimate_beta(x, part, w, 0.15);
  const AlphaGrid alpha = alpha_from_ratios(est.ratios, est.beta, x.T());
  const FittedVolatility vol = fitted_volatility(x, part, alpha, est.beta);
  const BetaCovariance cov = covariance_beta(x, w, est, vol);
  CHECK(cov.asymptotic(0, 0) == Approx(cov.sigma2(0, 0) / (cov.sigma1(0, 0) * cov.sigma1(0, 0))).epsilon(1e-12));
  CHECK(cov.se[0] == Approx(std::sqrt(cov.asymptotic(0, 0) / 600.0)).epsilon(1e-14));

  const auto part2 = CoefficientPartition::intercept_varying(3);
  const ReturnSeries x2 = simulate_path(
      {3, {CoefficientFunction::sine(2, 1), CoefficientFunction::constant(0.2), CoefficientFunction::constant(0.1),
           CoefficientFunction::constant(0.1)}, {}},
      {800, 9, 200});
  const Weights w2 = level_weights(x2, 3);
  const BetaEstimate e2 = estimate_beta(x2, part2, w2, 0.15);
  const FittedVolatility v2 = fitted_volatility(x2, part2, alpha_from_ratios(e2.ratios, e2.beta, 800), e2.beta);
  const BetaCovariance c2 = covariance_beta(x2, w2, e2, v2);
  for (const Matrix* m : {&c2.sigma1, &c2.sigma2, &c2.asymptotic}) {
    CHECK((*m - m->transpose()).cwiseAbs().maxCoeff() < 1e-12 * m->cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(*m);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-12 * eig.eigenvalues().maxCoeff());
  }
}

TEST_CASE("alpha without a constant block is the projection ratio") {
  const ReturnSeries x = arch_series(200, 4);
  const auto part = CoefficientPartition::all_varying(1);
  const Weights w = level_weights(x, 1);
  const AlphaGrid a = estimate_alpha(x, part, Vector(0), w, 0.2);
  const auto r = projection_ratios(smoothed_moments(x, part, w, 0.2));
  for (std::size_t k = 0; k < a.alpha.size(); ++k) CHECK(a.alpha[k] == r.q1[k]);
  CHECK_THROWS_AS(estimate_beta(x, part, w, 0.2), InputError);
}

TEST_CASE("plug-in beta with constant injected volatility equals unit-weight beta") {
  const ReturnSeries x = arch_series(500, 12);
  const auto part = CoefficientPartition::intercept_varying(1);
  FittedVolatility flat;
  flat.first = 2;
  flat.sigma_sq.assign(499, 1.7);
  const PlugInBeta plug = estimate_beta_plugin(x, part, 0.2, flat, 0.0);
  const BetaEstimate unit = estimate_beta(x, part, unit_weights(x, 1), 0.2);
  CHECK(plug.estimate.beta[0] == Approx(unit.beta[0]).epsilon(1e-10));
}

TEST_CASE("plug-in regularization nu_T barely moves beta") {
  const ReturnSeries x = simulate_path(rmse_model(), {1500, 21, 500});
  const auto part = CoefficientPartition::intercept_varying(2);
  FitOptions o;
  o.bandwidth = 0.1;
  o.plug_in = true;
  const SemiparametricFit a = fit_semiparametric(x, part, o);
  o.nu_T = std::pow(1500.0, -0.6);
  const SemiparametricFit b = fit_semiparametric(x, part, o);
  CHECK((a.beta - b.beta).cwiseAbs().maxCoeff() < 1e-3);
  CHECK(a.floored == 0);
}

TEST_CASE("plug-in alpha standard errors in the scalar case") {
  const ReturnSeries x = arch_series(400, 13);
  const auto part = CoefficientPartition::intercept_varying(1);
  FitOptions o;
  o.bandwidth = 0.2;
  o.plug_in = true;
  const SemiparametricFit f = fit_semiparametric(x, part, o);
  // Rebuild the per-center weighted s3 at one center by hand.
  const std::ptrdiff_t t = 200;
  const auto k = oracle::weights(t, 0.2, 400, 2);
  const Vector& a0 = f.alpha_initial.alpha[static_cast<std::size_t>(t - 2)];
  double s3 = 0;
  for (std::ptrdiff_t i = 2; i <= 400; ++i) {
    const double s = a0[0] + x.sq(i - 1) * f.beta_initial[0];
    s3 += k[static_cast<std::size_t>(i - 2)] / (s * s);
  }
  const FittedVolatility vol = fitted_volatility(x, part, f.alpha_initial, f.beta_initial);
  const double var_xi2 = residual_xi_sq_variance(x, vol);
  const double expected = std::sqrt(var_xi2 * 0.6 / (400 * 0.2) / s3);
  CHECK(f.alpha_se[static_cast<std::size_t>(t - 2)][0] == Approx(expected).epsilon(1e-6));
}

TEST_CASE("plug-in alpha matches the initial fit on constant volatility") {
  const ReturnSeries x = simulate_path({1, {CoefficientFunction::constant(1.0), CoefficientFunction::constant(0.05)}, {}},
                                       {1000, 14, 200});
  const auto part = CoefficientPartition::intercept_varying(1);
  FitOptions o;
  o.bandwidth = 0.2;
  const SemiparametricFit a = fit_semiparametric(x, part, o);
  o.plug_in = true;
  const SemiparametricFit b = fit_semiparametric(x, part, o);
  // The two weightings differ even here, so compare on average.
  double diff = 0, se = 0;
  for (std::size_t k = 0; k < a.alpha.alpha.size(); ++k) {
    diff += std::abs(a.alpha.alpha[k][0] - b.alpha.alpha[k][0]);
    se += a.alpha_se[k][0];
  }
  CHECK(diff < se);
}

TEST_CASE("fit recovers coefficients") {
  SECTION("constant alpha is recovered on average") {
    const TvArchModel m{1, {CoefficientFunction::constant(1.0), CoefficientFunction::constant(0.4)}, {}};
    const auto part = CoefficientPartition(1, {1}, {0});
    FitOptions o;
    o.bandwidth = 0.2;
    std::vector<double> means;
    for (std::uint64_t r = 0; r < 200; ++r) {
      const SemiparametricFit f = fit_semiparametric(simulate_path(m, {500, 500 + r, 200}), part, o);
      double s = 0;
      for (const auto& a : f.alpha.alpha) s += a[0];
      means.push_back(s / static_cast<double>(f.alpha.alpha.size()));
    }
    double mu = 0, v = 0;
    for (double e : means) mu += e;
    mu /= 200;
    for (double e : means) v += (e - mu) * (e - mu);
    const double se = std::sqrt(v / 199 / 200);
    CHECK(std::abs(mu - 0.4) < 3 * se + 0.01);
  }
  SECTION("intercept curve tracks the sine") {
    const auto model = rmse_model();
    const ReturnSeries x = simulate_path(model, {1500, 77, 500});
    FitOptions o;
    o.bandwidth = std::cbrt(1.0 / 1500);
    const SemiparametricFit f = fit_semiparametric(x, CoefficientPartition::intercept_varying(2), o);
    std::size_t inside = 0;
    for (std::size_t k = 0; k < f.alpha.alpha.size(); ++k) {
      inside += std::abs(f.alpha.alpha[k][0] - model.coeffs[0](f.alpha.u(k))) <= 0.5;
    }
    // Boundary centers carry the largest bias.
    CHECK(static_cast<double>(inside) / static_cast<double>(f.alpha.alpha.size()) > 0.9);
    CHECK(f.floored == 0);
    CHECK(f.beta_se[0] > 0.01);
    CHECK(f.beta_se[0] < 0.1);
  }
}

TEST_CASE("fit input validation") {
  const ReturnSeries x = arch_series(100, 1);
  FitOptions o;
  o.bandwidth = 0.0;
  CHECK_THROWS_AS(fit_semiparametric(x, CoefficientPartition::intercept_varying(1), o), InputError);
  o.bandwidth = 0.2;
  CHECK_THROWS_AS(fit_semiparametric(ReturnSeries({1.0, 2.0}), CoefficientPartition::intercept_varying(1), o),
                  InputError);
  const SemiparametricFit f = fit_semiparametric(x, CoefficientPartition::all_varying(1), o);
  CHECK(f.beta.size() == 0);
  CHECK(f.alpha.alpha.size() == 99);
}
