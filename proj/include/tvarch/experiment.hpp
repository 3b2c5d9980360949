/**
 * @file experiment.hpp
 * @brief Simulation designs for estimation accuracy, test size/power and
 * order selection, with Monte-Carlo standard errors for every cell.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "tvarch/error.hpp"
#include "tvarch/estimate.hpp"
#include "tvarch/hypothesis.hpp"
#include "tvarch/json_io.hpp"
#include "tvarch/parallel.hpp"
#include "tvarch/rng.hpp"
#include "tvarch/select.hpp"
#include "tvarch/simulate.hpp"

namespace tvarch {

enum class DesignId { Rmse, ConstancyPower, DynamicCoverage, OrderSelection };

inline const char* to_string(DesignId d) {
  switch (d) {
    case DesignId::Rmse: return "rmse";
    case DesignId::ConstancyPower: return "constancy-power";
    case DesignId::DynamicCoverage: return "dynamic-coverage";
    case DesignId::OrderSelection: return "order-selection";
  }
  return "?";
}

inline DesignId parse_design(const std::string& s) {
  if (s == "rmse") return DesignId::Rmse;
  if (s == "constancy-power") return DesignId::ConstancyPower;
  if (s == "dynamic-coverage") return DesignId::DynamicCoverage;
  if (s == "order-selection") return DesignId::OrderSelection;
  throw InputError("unknown design '" + s + "'");
}

struct ExperimentSpec {
  DesignId design = DesignId::Rmse;
  std::vector<std::size_t> T{500};
  std::size_t R = 200;
  NoiseSpec noise;
  std::uint64_t seed = 1;
  int setup = 1;
  std::size_t B = 500;  // Monte-Carlo calibration size for test designs
  std::vector<double> levels{0.05, 0.10};
  double theta = 0.0;        // dynamic-coverage alternative a_1 = a_2 = 0.02 theta
  std::size_t true_p = 1;    // order-selection setup 2
  std::size_t q_max = 10;
  std::size_t burn_in = 500;
  BandwidthGrid grid;
  std::optional<double> bandwidth;  // fixed bandwidth instead of CV
  Calibration calibration = Calibration::MonteCarlo;
};

struct ExperimentCell {
  std::size_t T = 0;
  std::string name;
  double value = 0.0;
  double mc_se = 0.0;
};

struct ExperimentResult {
  ExperimentSpec spec;
  std::vector<ExperimentCell> cells;
  std::size_t redraws = 0;

  const ExperimentCell& cell(std::size_t T, const std::string& name) const {
    for (const auto& c : cells) {
      if (c.T == T && c.name == name) return c;
    }
    throw InputError("no cell " + name + " at T=" + std::to_string(T));
  }
};

// ---------------------------------------------------------------------------
// Generating models of the designs
// ---------------------------------------------------------------------------

/// a_0(u) = 2 + sin(2 pi u), a_1 = 0.3, a_2 = 0.2.
inline TvArchModel rmse_model(NoiseSpec noise = {}) {
  return {2,
          {CoefficientFunction::sine(2.0, 1.0), CoefficientFunction::constant(0.3),
           CoefficientFunction::constant(0.2)},
          noise};
}

/// Setup 1: a_0 = 2 + sin(2 pi u), a_1 = 0.5. Setup 2: a_0 = 1,
/// a_1 = 0.5 + 0.25 cos(2 pi u).
inline TvArchModel constancy_model(int setup, NoiseSpec noise = {}) {
  if (setup == 1) {
    return {1, {CoefficientFunction::sine(2.0, 1.0), CoefficientFunction::constant(0.5)}, noise};
  }
  if (setup == 2) {
    return {1, {CoefficientFunction::constant(1.0), CoefficientFunction::cosine(0.5, 0.25)}, noise};
  }
  throw InputError("constancy design has setups 1 and 2");
}

/// p = 2 with a_1 = a_2 = 0.02 theta. Setup 1: a_0 = 1e-4. Setup 2: a_0
/// piecewise linear through 1e-4 at u = 0, 0.5, 1 and 4e-4 at 0.25, 0.75.
inline TvArchModel dynamic_model(int setup, double theta, NoiseSpec noise = {}) {
  CoefficientFunction a0;
  if (setup == 1) {
    a0 = CoefficientFunction::constant(1e-4);
  } else if (setup == 2) {
    a0 = CoefficientFunction::piecewise_linear(
        {{0.0, 1e-4}, {0.25, 4e-4}, {0.5, 1e-4}, {0.75, 4e-4}, {1.0, 1e-4}});
  } else {
    throw InputError("dynamic design has setups 1 and 2");
  }
  const auto lag = CoefficientFunction::constant(0.02 * theta);
  return {2, {a0, lag, lag}, noise};
}

/// a_0 = 2 (1 + 0.4 sin(2 pi u)). Setup 1: p = 1, a_1 = 0.3. Setup 2:
/// p = true_p in {0, 1, 2}, a_1 = 0.2 + 0.2 sin, a_2 = 0.2 + 0.2 cos.
inline TvArchModel order_model(int setup, std::size_t true_p, NoiseSpec noise = {}) {
  const auto a0 = CoefficientFunction::sine(2.0, 0.8);
  if (setup == 1) return {1, {a0, CoefficientFunction::constant(0.3)}, noise};
  if (setup != 2) throw InputError("order-selection design has setups 1 and 2");
  if (true_p > 2) throw InputError("order-selection setup 2 has p in {0, 1, 2}");
  TvArchModel m{true_p, {a0}, noise};
  if (true_p >= 1) m.coeffs.push_back(CoefficientFunction::sine(0.2, 0.2));
  if (true_p >= 2) m.coeffs.push_back(CoefficientFunction::cosine(0.2, 0.2));
  return m;
}

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr std::uint64_t kCalibrationSalt = 0xCA11'B7A7'E5EEDULL;

inline std::uint64_t replicate_seed(std::uint64_t seed, std::size_t T, std::size_t r) {
  return derive_seed(derive_seed(seed, T), r);
}

inline std::uint64_t calibration_seed(std::uint64_t seed, std::size_t T, std::uint64_t key) {
  return derive_seed(derive_seed(seed ^ kCalibrationSalt, T), key);
}

/// Runs fn on a simulated path; on a numerical failure the path is redrawn
/// from a derived stream, at most kMaxReplicateRetries times.
template <class F>
auto with_redraw(const TvArchModel& model, std::size_t T, std::size_t burn_in, std::uint64_t seed,
                 std::size_t& redraws, F&& fn) {
  for (int attempt = 0;; ++attempt) {
    const std::uint64_t s = attempt == 0 ? seed : derive_seed(seed, static_cast<std::uint64_t>(attempt));
    try {
      const ReturnSeries x = simulate_path(model, {T, s, burn_in});
      redraws = static_cast<std::size_t>(attempt);
      return fn(x);
    } catch (const NumericalError&) {
      if (attempt >= kMaxReplicateRetries) throw;
    }
  }
}

inline ExperimentCell rate_cell(std::size_t T, std::string name, std::size_t hits, std::size_t R) {
  const double p = static_cast<double>(hits) / static_cast<double>(R);
  return {T, std::move(name), p, std::sqrt(p * (1.0 - p) / static_cast<double>(R))};
}

inline ExperimentCell mean_cell(std::size_t T, std::string name, const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  const double sd = v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0;
  return {T, std::move(name), m, sd / std::sqrt(static_cast<double>(v.size()))};
}

/// sqrt(mean(v)) with a delta-method standard error.
inline ExperimentCell rmse_cell(std::size_t T, std::string name, const std::vector<double>& sq) {
  ExperimentCell c = mean_cell(T, std::move(name), sq);
  const double rmse = std::sqrt(c.value);
  c.mc_se = rmse > 0.0 ? c.mc_se / (2.0 * rmse) : 0.0;
  c.value = rmse;
  return c;
}

inline std::string level_suffix(double a) { return "@" + number_key(a); }

inline std::size_t grid_key(const std::vector<double>& grid, double b) {
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (grid[k] == b) return k;
  }
  return grid.size();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Designs
// ---------------------------------------------------------------------------

inline void run_rmse(const ExperimentSpec& spec, std::size_t T, ExperimentResult& out) {
  const TvArchModel model = rmse_model(spec.noise);
  const auto partition = CoefficientPartition::intercept_varying(2);
  struct Rep {
    double a0 = 0, a1 = 0, a2 = 0, a0s = 0, a1s = 0, a2s = 0, b = 0;
  };
  std::vector<Rep> reps(spec.R);
  std::vector<std::size_t> redraws(spec.R, 0);
  parallel_for(spec.R, [&](std::size_t r) {
    reps[r] = detail::with_redraw(model, T, spec.burn_in, detail::replicate_seed(spec.seed, T, r), redraws[r],
                                  [&](const ReturnSeries& x) {
      FitOptions opt;
      opt.bandwidth = spec.bandwidth ? *spec.bandwidth
                                     : cv_bandwidth_semiparametric(x, 2, spec.grid, level_weights(x, 2)).bandwidth;
      const SemiparametricFit fit = fit_semiparametric(x, partition, opt);
      opt.plug_in = true;
      const SemiparametricFit star = fit_semiparametric(x, partition, opt);
      auto a0_mse = [&](const AlphaGrid& g) {
        double acc = 0.0;
        for (std::size_t k = 0; k < g.alpha.size(); ++k) {
          const double e = g.alpha[k][0] - model.coeffs[0](g.u(k));
          acc += e * e;
        }
        return acc / static_cast<double>(g.alpha.size());
      };
      auto sq = [](double v) { return v * v; };
      Rep rep;
      rep.a0 = a0_mse(fit.alpha);
      rep.a1 = sq(fit.beta[0] - 0.3);
      rep.a2 = sq(fit.beta[1] - 0.2);
      rep.a0s = a0_mse(star.alpha);
      rep.a1s = sq(star.beta[0] - 0.3);
      rep.a2s = sq(star.beta[1] - 0.2);
      rep.b = opt.bandwidth;
      return rep;
    });
  });
  auto column = [&](double Rep::*f) {
    std::vector<double> v;
    for (const auto& r : reps) v.push_back(r.*f);
    return v;
  };
  out.cells.push_back(detail::rmse_cell(T, "rmse_a0", column(&Rep::a0)));
  out.cells.push_back(detail::rmse_cell(T, "rmse_a1", column(&Rep::a1)));
  out.cells.push_back(detail::rmse_cell(T, "rmse_a2", column(&Rep::a2)));
  out.cells.push_back(detail::rmse_cell(T, "rmse_a0_star", column(&Rep::a0s)));
  out.cells.push_back(detail::rmse_cell(T, "rmse_a1_star", column(&Rep::a1s)));
  out.cells.push_back(detail::rmse_cell(T, "rmse_a2_star", column(&Rep::a2s)));
  out.cells.push_back(detail::mean_cell(T, "bandwidth", column(&Rep::b)));
  for (auto k : redraws) out.redraws += k;
}

inline void run_constancy_power(const ExperimentSpec& spec, std::size_t T, ExperimentResult& out) {
  const TvArchModel model = constancy_model(spec.setup, spec.noise);
  // H0: a_0 constant, and H0: a_1 constant.
  const std::vector<std::pair<std::string, CoefficientPartition>> tests{
      {"a0", CoefficientPartition(1, {1}, {0})}, {"a1", CoefficientPartition(1, {0}, {1})}};
  const std::vector<double> grid = spec.grid.values(static_cast<std::ptrdiff_t>(T));
  struct Rep {
    double b = 0;
    std::vector<double> e;
  };
  std::vector<Rep> reps(spec.R);
  std::vector<std::size_t> redraws(spec.R, 0);
  parallel_for(spec.R, [&](std::size_t r) {
    reps[r] = detail::with_redraw(model, T, spec.burn_in, detail::replicate_seed(spec.seed, T, r), redraws[r],
                                  [&](const ReturnSeries& x) {
      const Weights w = level_weights(x, 1);
      Rep rep;
      rep.b = spec.bandwidth ? *spec.bandwidth : cv_bandwidth_tvarch(x, 1, spec.grid, w).bandwidth;
      for (const auto& [name, part] : tests) rep.e.push_back(constancy_statistic(x, part, w, rep.b).e_T);
      return rep;
    });
  });
  for (auto k : redraws) out.redraws += k;

  for (std::size_t k = 0; k < tests.size(); ++k) {
    std::map<double, MonteCarloSample> samples;
    for (const auto& rep : reps) {
      if (samples.count(rep.b)) continue;
      MonteCarloSpec mc;
      mc.T = T;
      mc.partition = tests[k].second;
      mc.bandwidth = rep.b;
      mc.B = spec.B;
      mc.seed = detail::calibration_seed(spec.seed, T, 16 * k + detail::grid_key(grid, rep.b));
      samples.emplace(rep.b, mc_pivotal_sample(mc));
    }
    for (double a : spec.levels) {
      std::size_t hits = 0;
      for (const auto& rep : reps) hits += rep.e[k] > samples.at(rep.b).quantile(1.0 - a);
      out.cells.push_back(detail::rate_cell(T, "reject_" + tests[k].first + detail::level_suffix(a), hits, spec.R));
    }
  }
  std::vector<double> bs;
  for (const auto& rep : reps) bs.push_back(rep.b);
  out.cells.push_back(detail::mean_cell(T, "bandwidth", bs));
}

/// CV bandwidth for the intercept-only smoother used by the second-order test.
inline double dynamic_bandwidth(const ReturnSeries& x, const BandwidthGrid& grid) {
  return cv_bandwidth_tvarch(x, 0, grid, unit_weights(x, 0)).bandwidth;
}

inline void run_dynamic_coverage(const ExperimentSpec& spec, std::size_t T, ExperimentResult& out) {
  const TvArchModel model = dynamic_model(spec.setup, spec.theta, spec.noise);
  const std::size_t p = 2;
  const std::vector<double> grid = spec.grid.values(static_cast<std::ptrdiff_t>(T));
  struct Rep {
    double b = 0, psi = 0, sigma_sq = 0;
  };
  std::vector<Rep> reps(spec.R);
  std::vector<std::size_t> redraws(spec.R, 0);
  parallel_for(spec.R, [&](std::size_t r) {
    reps[r] = detail::with_redraw(model, T, spec.burn_in, detail::replicate_seed(spec.seed, T, r), redraws[r],
                                  [&](const ReturnSeries& x) {
      Rep rep;
      rep.b = spec.bandwidth ? *spec.bandwidth : dynamic_bandwidth(x, spec.grid);
      const SecondOrderStatistic s = second_order_statistic(x, p, rep.b);
      rep.psi = s.psi;
      rep.sigma_sq = s.sigma_sq;
      return rep;
    });
  });
  for (auto k : redraws) out.redraws += k;

  std::map<double, MonteCarloSample> samples;
  if (spec.calibration == Calibration::MonteCarlo) {
    for (const auto& rep : reps) {
      if (samples.count(rep.b)) continue;
      SecondOrderTestOptions o;
      o.B = spec.B;
      o.seed = detail::calibration_seed(spec.seed, T, detail::grid_key(grid, rep.b));
      samples.emplace(rep.b, mc_pivotal_sample(second_order_mc_spec(T, p, rep.b, o)));
    }
  }
  for (double a : spec.levels) {
    std::size_t accept = 0;
    for (const auto& rep : reps) {
      const double q = spec.calibration == Calibration::MonteCarlo ? samples.at(rep.b).quantile(1.0 - a)
                                                                   : truncated_chi_quantile(p, a);
      accept += !(rep.psi > q);
    }
    out.cells.push_back(detail::rate_cell(T, "accept" + detail::level_suffix(a), accept, spec.R));
  }
  std::vector<double> s2;
  std::vector<double> bs;
  for (const auto& rep : reps) {
    s2.push_back(rep.sigma_sq);
    bs.push_back(rep.b);
  }
  out.cells.push_back(detail::mean_cell(T, "sigma_sq", s2));
  out.cells.push_back(detail::mean_cell(T, "bandwidth", bs));
}

inline void run_order_selection(const ExperimentSpec& spec, std::size_t T, ExperimentResult& out) {
  const TvArchModel model = order_model(spec.setup, spec.true_p, spec.noise);
  std::vector<std::size_t> picks(spec.R);
  std::vector<std::size_t> redraws(spec.R, 0);
  // Replicates run serially; each selection parallelizes over grid points and orders.
  for (std::size_t r = 0; r < spec.R; ++r) {
    picks[r] = detail::with_redraw(model, T, spec.burn_in, detail::replicate_seed(spec.seed, T, r), redraws[r],
                                   [&](const ReturnSeries& x) { return select_lag_order(x, spec.q_max, spec.grid).p_hat; });
  }
  for (auto k : redraws) out.redraws += k;
  std::size_t cf = 0, uf = 0, of = 0;
  for (auto p : picks) {
    cf += p == model.p;
    uf += p < model.p;
    of += p > model.p;
  }
  out.cells.push_back(detail::rate_cell(T, "correct", cf, spec.R));
  out.cells.push_back(detail::rate_cell(T, "under", uf, spec.R));
  out.cells.push_back(detail::rate_cell(T, "over", of, spec.R));
}

inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
  if (spec.R < 1) throw InputError("replication count must be positive");
  if (spec.T.empty()) throw InputError("experiment needs at least one sample size");
  ExperimentResult out;
  out.spec = spec;
  for (std::size_t T : spec.T) {
    switch (spec.design) {
      case DesignId::Rmse: run_rmse(spec, T, out); break;
      case DesignId::ConstancyPower: run_constancy_power(spec, T, out); break;
      case DesignId::DynamicCoverage: run_dynamic_coverage(spec, T, out); break;
      case DesignId::OrderSelection: run_order_selection(spec, T, out); break;
    }
  }
  return out;
}

inline Json to_json(const ExperimentSpec& s) {
  Json j = {{"design", to_string(s.design)},
            {"T", s.T},
            {"R", s.R},
            {"noise", s.noise.name()},
            {"seed", s.seed},
            {"setup", s.setup},
            {"B", s.B},
            {"levels", s.levels},
            {"theta", s.theta},
            {"true_p", s.true_p},
            {"q_max", s.q_max},
            {"burn_in", s.burn_in},
            {"grid", s.grid.multipliers},
            {"calibration", s.calibration == Calibration::MonteCarlo ? "monte-carlo" : "asymptotic"}};
  if (s.bandwidth) j["bandwidth"] = *s.bandwidth;
  return j;
}

inline Json to_json(const ExperimentResult& r) {
  Json cells = Json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"T", c.T}, {"cell", c.name}, {"value", c.value}, {"mc_se", c.mc_se}});
  }
  return {{"cells", std::move(cells)}, {"redraws", r.redraws}};
}

inline void write_csv(std::ostream& os, const ExperimentResult& r) {
  os << "T,cell,value,mc_se\n";
  for (const auto& c : r.cells) {
    os << c.T << ',' << c.name << ',' << number_key(c.value) << ',' << number_key(c.mc_se) << '\n';
  }
}

}  // namespace tvarch
