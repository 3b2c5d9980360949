#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tvarch/model.hpp"
#include "tvarch/rng.hpp"

namespace tvarch {

struct SimulationConfig {
  std::size_t T = 1000;
  std::uint64_t seed = 1;
  std::size_t burn_in = 500;
};

/// Advisory messages for configurations that are legal but questionable.
inline std::vector<std::string> simulation_warnings(const TvArchModel& model,
                                                    const SimulationConfig& config) {
  std::vector<std::string> out;
  const double c = validate_model(model);
  if (c > 0.9 && config.burn_in < 50) {
    out.push_back("burn-in below 50 with contraction constant " + std::to_string(c));
  }
  return out;
}

/// One unit-variance innovation.
inline double draw_one(const NoiseSpec& spec, RandomStream& rng) {
  if (spec.law == NoiseLaw::Gaussian) return rng.gaussian();
  const double nu = spec.df;
  return rng.student(spec.df) * std::sqrt((nu - 2.0) / nu);
}

inline std::vector<double> draw_noise(const NoiseSpec& spec, std::size_t n, std::uint64_t seed) {
  RandomStream rng(seed);
  std::vector<double> out(n);
  for (auto& v : out) v = draw_one(spec, rng);
  return out;
}

/// Simulates x_1..x_T. The pre-sample x_t, t <= 0, is the tail of
/// burn_in + p steps of the stationary ARCH with frozen coefficients a_j(0),
/// started at its unconditional variance; then for t = 1..T
///
///     sigma_t^2 = a_0(t/T) + sum_j a_j(t/T) x_{t-j}^2,   x_t = xi_t sigma_t.
inline ReturnSeries simulate_path(const TvArchModel& model, const SimulationConfig& config) {
  validate_model(model);
  if (config.T < 1) throw InputError("simulation length must be at least 1");
  const std::size_t p = model.p;
  RandomStream rng(config.seed);

  std::vector<double> a_frozen(p + 1);
  double lag_sum = 0.0;
  for (std::size_t j = 0; j <= p; ++j) {
    a_frozen[j] = model.coeffs[j](0.0);
    if (j > 0) lag_sum += a_frozen[j];
  }
  double a0_floor = a_frozen[0];

  const std::size_t pre = config.burn_in + p;
  // squares[k] holds x^2 for the k-th simulated step, prefixed by p start values
  std::vector<double> squares(p, a_frozen[0] / (1.0 - lag_sum));
  squares.reserve(p + pre + config.T);
  std::vector<double> out;
  out.reserve(config.T);

  auto step = [&](const std::vector<double>& a) {
    double sigma2 = a[0];
    const std::size_t now = squares.size();
    for (std::size_t j = 1; j <= p; ++j) sigma2 += a[j] * squares[now - j];
    if (!(sigma2 >= a0_floor) || !std::isfinite(sigma2)) {
      throw NumericalError("simulated volatility left its admissible range");
    }
    const double x = draw_one(model.noise, rng) * std::sqrt(sigma2);
    squares.push_back(x * x);
    return x;
  };

  for (std::size_t k = 0; k < pre; ++k) step(a_frozen);

  std::vector<double> a(p + 1);
  for (std::size_t t = 1; t <= config.T; ++t) {
    const double u = static_cast<double>(t) / static_cast<double>(config.T);
    for (std::size_t j = 0; j <= p; ++j) a[j] = model.coeffs[j](u);
    a0_floor = std::min(a0_floor, a[0]);
    out.push_back(step(a));
  }
  return ReturnSeries(std::move(out));
}

}  // namespace tvarch
