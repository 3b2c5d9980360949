/**
 * @file pipeline.hpp
 * @brief Data-analysis workflow: lag order, constancy tests, fit and the
 * second-order test, collected into one report bundle.
 */
#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "tvarch/error.hpp"
#include "tvarch/estimate.hpp"
#include "tvarch/hypothesis.hpp"
#include "tvarch/json_io.hpp"
#include "tvarch/select.hpp"

namespace tvarch {

struct PipelineOptions {
  std::size_t q_max = 10;
  BandwidthGrid grid;
  std::size_t B = 2000;
  std::vector<double> levels{0.05, 0.10};
  std::uint64_t seed = 1;
  /// Level at which the joint lag-constancy test decides between the
  /// semiparametric and the fully time-varying fit.
  double decision_level = 0.05;
};

struct PipelineReport {
  std::optional<LagOrderSelection> order;
  std::size_t p_test = 0;
  std::optional<CvResult> cv;
  std::vector<TestReport> constancy;
  std::string fit_kind;
  std::optional<SemiparametricFit> fit;
  std::optional<CvResult> fit_cv;
  std::optional<TestReport> second_order;
  std::string failed_stage;
  std::string error;

  bool complete() const { return failed_stage.empty(); }
};

/// Runs order selection, constancy tests on each lag, all lags jointly
/// and the intercept, then the semiparametric fit when the lags look
/// constant (otherwise the fully time-varying fit), and finally the
/// second-order test. Tests use max(p_hat, 1) lags. A failure stops the
/// run and is recorded in the report together with the stages completed.
inline PipelineReport run_pipeline(const ReturnSeries& series, const PipelineOptions& opt = {}) {
  PipelineReport rep;
  std::string stage = "select-order";
  try {
    rep.order = select_lag_order(series, opt.q_max, opt.grid);
    const std::size_t p = std::max<std::size_t>(rep.order->p_hat, 1);
    rep.p_test = p;

    stage = "bandwidth";
    rep.cv = cv_bandwidth_tvarch(series, p, opt.grid, level_weights(series, p));
    const double b = rep.cv->bandwidth;

    stage = "test-constancy";
    ConstancyTestOptions co;
    co.B = opt.B;
    co.levels = opt.levels;
    std::vector<CoefficientPartition> parts;
    for (std::size_t j = 1; j <= p; ++j) parts.push_back(CoefficientPartition::with_constant(p, {j}));
    const std::size_t joint = p >= 2 ? parts.size() : 0;
    if (p >= 2) parts.push_back(CoefficientPartition::intercept_varying(p));
    parts.push_back(CoefficientPartition::with_constant(p, {0}));
    for (std::size_t k = 0; k < parts.size(); ++k) {
      co.seed = derive_seed(opt.seed, k);
      rep.constancy.push_back(test_constancy(series, parts[k], b, co));
    }
    const TestReport& lags = rep.constancy[joint];
    const bool lags_constant = !(lags.p_value <= opt.decision_level);

    stage = "fit";
    FitOptions fo;
    if (lags_constant) {
      rep.fit_kind = "sptv";
      rep.fit_cv = cv_bandwidth_semiparametric(series, p, opt.grid, level_weights(series, p));
      fo.bandwidth = rep.fit_cv->bandwidth;
      rep.fit = fit_semiparametric(series, CoefficientPartition::intercept_varying(p), fo);
    } else {
      rep.fit_kind = "tv";
      fo.bandwidth = b;
      rep.fit = fit_semiparametric(series, CoefficientPartition::all_varying(p), fo);
    }

    if (lags_constant) {
      stage = "test-second-order";
      SecondOrderTestOptions so;
      so.B = opt.B;
      so.levels = opt.levels;
      so.seed = derive_seed(opt.seed, parts.size());
      const double bd = cv_bandwidth_tvarch(series, 0, opt.grid, unit_weights(series, 0)).bandwidth;
      rep.second_order = test_second_order(series, p, bd, so);
    }
  } catch (const Error& e) {
    rep.failed_stage = stage;
    rep.error = e.what();
  }
  return rep;
}

inline Json to_json(const PipelineReport& r) {
  Json out = Json::object();
  out["complete"] = r.complete();
  if (!r.complete()) out["failure"] = {{"stage", r.failed_stage}, {"error", r.error}};
  if (r.order) out["order"] = to_json(*r.order);
  out["p_test"] = r.p_test;
  if (r.cv) out["cv"] = to_json(*r.cv);
  Json tests = Json::array();
  for (const auto& t : r.constancy) tests.push_back(to_json(t));
  out["constancy"] = std::move(tests);
  if (r.fit) {
    out["fit_kind"] = r.fit_kind;
    out["fit"] = to_json(*r.fit);
  }
  if (r.fit_cv) out["fit_cv"] = to_json(*r.fit_cv);
  if (r.second_order) out["second_order"] = to_json(*r.second_order);
  return out;
}

/// Plain-text summary: p-values, estimates, standard errors and bandwidths.
inline std::string summarize(const PipelineReport& r) {
  std::ostringstream os;
  os.precision(4);
  if (r.order) {
    os << "lag order: p_hat = " << r.order->p_hat << " (q_max " << r.order->q_max << ", b = " << r.order->bandwidth
       << ")\n";
  }
  if (r.cv) os << "test bandwidth (p = " << r.p_test << "): " << r.cv->bandwidth << "\n";
  for (const auto& t : r.constancy) {
    os << "constancy [" << t.partition << "]: E_T = " << t.statistic << ", p-value = " << t.p_value << "\n";
  }
  if (r.fit) {
    os << "fit " << r.fit_kind << " (b = " << r.fit->bandwidth << ")\n";
    for (Eigen::Index k = 0; k < r.fit->beta.size(); ++k) {
      os << "  a_" << r.fit->partition.constant()[static_cast<std::size_t>(k)] << " = " << r.fit->beta[k]
         << " (se " << r.fit->beta_se[k] << ")\n";
    }
  }
  if (r.second_order) {
    os << "second-order: Psi = " << r.second_order->statistic << ", p-value = " << r.second_order->p_value << "\n";
  }
  if (!r.complete()) os << "stopped at " << r.failed_stage << ": " << r.error << "\n";
  return os.str();
}

}  // namespace tvarch
