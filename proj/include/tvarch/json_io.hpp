/**
 * @file json_io.hpp
 * @brief JSON model configurations and result serialization.
 *
 * Output objects use nlohmann::json, whose keys are sorted and whose
 * doubles are printed in shortest round-trip form, so equal results give
 * byte-identical documents.
 */
#pragma once

#include <charconv>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tvarch/error.hpp"
#include "tvarch/estimate.hpp"
#include "tvarch/hypothesis.hpp"
#include "tvarch/model.hpp"
#include "tvarch/select.hpp"

namespace tvarch {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Shortest round-trip decimal form, used for map keys such as test levels.
inline std::string number_key(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline Json to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v[k]);
  return out;
}

inline Json to_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model configuration
// ---------------------------------------------------------------------------

inline CoefficientFunction coefficient_from_json(const Json& j) {
  if (j.is_number()) return CoefficientFunction::constant(j.get<double>());
  if (!j.is_object() || !j.contains("type")) throw InputError("coefficient needs a 'type'");
  const auto type = j.at("type").get<std::string>();
  if (type == "constant") return CoefficientFunction::constant(j.at("value").get<double>());
  if (type == "sine" || type == "cosine") {
    const double offset = j.value("offset", 0.0);
    const double amplitude = j.value("amplitude", 0.0);
    const double frequency = j.value("frequency", 1.0);
    return type == "sine" ? CoefficientFunction::sine(offset, amplitude, frequency)
                          : CoefficientFunction::cosine(offset, amplitude, frequency);
  }
  if (type == "piecewise_linear") {
    std::vector<std::pair<double, double>> knots;
    for (const auto& k : j.at("knots")) knots.emplace_back(k.at(0).get<double>(), k.at(1).get<double>());
    return CoefficientFunction::piecewise_linear(std::move(knots));
  }
  throw InputError("unknown coefficient type '" + type + "'");
}

inline NoiseSpec noise_from_json(const Json& j) {
  if (j.is_null()) return NoiseSpec::gaussian();
  const auto law = j.is_string() ? j.get<std::string>() : j.value("law", std::string("gaussian"));
  if (law == "gaussian") return NoiseSpec::gaussian();
  if (law == "student") return NoiseSpec::student(j.at("df").get<int>());
  throw InputError("unknown noise law '" + law + "'");
}

/// {"p": 1, "coefficients": [{"type": "sine", "offset": 2, "amplitude": 1},
///  0.5], "noise": {"law": "student", "df": 9}}
inline TvArchModel model_from_json(const Json& j) {
  try {
    TvArchModel m;
    const auto& coeffs = j.at("coefficients");
    m.p = j.contains("p") ? j.at("p").get<std::size_t>() : coeffs.size() - 1;
    for (const auto& c : coeffs) m.coeffs.push_back(coefficient_from_json(c));
    m.noise = noise_from_json(j.contains("noise") ? j.at("noise") : Json());
    validate_model(m);
    return m;
  } catch (const Json::exception& e) {
    throw InputError(std::string("invalid model configuration: ") + e.what());
  }
}

inline Json to_json(const TvArchModel& m) {
  Json coeffs = Json::array();
  for (const auto& c : m.coeffs) coeffs.push_back(c.description());
  return {{"p", m.p}, {"coefficients", coeffs}, {"noise", m.noise.name()}};
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

inline Json to_json(const CoefficientPartition& p) {
  return {{"p", p.p()}, {"varying", p.varying()}, {"constant", p.constant()}};
}

inline Json to_json(const SemiparametricFit& fit) {
  Json alpha = Json::array();
  for (std::size_t k = 0; k < fit.alpha.alpha.size(); ++k) {
    alpha.push_back({{"u", fit.alpha.u(k)},
                     {"value", to_json(fit.alpha.alpha[k])},
                     {"se", to_json(fit.alpha_se[k])}});
  }
  return {{"partition", to_json(fit.partition)},
          {"bandwidth", fit.bandwidth},
          {"bandwidth_prime", fit.bandwidth_prime},
          {"plug_in", fit.plug_in},
          {"weights", to_string(fit.weight_kind)},
          {"beta", to_json(fit.beta)},
          {"beta_se", to_json(fit.beta_se)},
          {"beta_cov", to_json(fit.beta_cov)},
          {"alpha", std::move(alpha)},
          {"diagnostics",
           {{"s3_min_rcond", fit.s3_min_rcond},
            {"design_rcond", fit.design_rcond},
            {"floored", fit.floored}}}};
}

inline Json to_json(const TestReport& r) {
  Json crit = Json::object();
  Json rej = Json::object();
  for (const auto& [a, q] : r.critical_values) crit[number_key(a)] = q;
  for (const auto& [a, d] : r.reject) rej[number_key(a)] = d;
  Json out = {{"test", r.name},
              {"statistic", r.statistic},
              {"pivotal", r.pivotal},
              {"calibration", r.calibration},
              {"critical_values", std::move(crit)},
              {"reject", std::move(rej)},
              {"p_value", r.p_value},
              {"B", r.B},
              {"seed", r.seed},
              {"bandwidth", r.bandwidth},
              {"redraws", r.redraws},
              {"partition", r.partition},
              {"details", r.details}};
  if (r.asymptotic_p_value) out["asymptotic_p_value"] = *r.asymptotic_p_value;
  return out;
}

inline Json to_json(const CvResult& cv) {
  Json curve = Json::array();
  for (std::size_t k = 0; k < cv.grid.size(); ++k) {
    curve.push_back({{"b", cv.grid[k]}, {"cv", cv.curve[k] ? Json(*cv.curve[k]) : Json()}});
  }
  Json out = {{"bandwidth", cv.bandwidth}, {"curve", std::move(curve)}};
  if (cv.beta.size() > 0) out["beta"] = to_json(cv.beta);
  return out;
}

inline Json to_json(const LagOrderSelection& s) {
  return {{"p_hat", s.p_hat},
          {"q_max", s.q_max},
          {"bandwidth", s.bandwidth},
          {"zeta", s.zeta},
          {"criterion", s.criterion},
          {"rss", s.rss},
          {"cv", to_json(s.cv)}};
}

/// Top-level envelope shared by all commands.
inline Json envelope(const std::string& command, Json config, Json result) {
  return {{"schema_version", kSchemaVersion},
          {"command", command},
          {"config", std::move(config)},
          {"result", std::move(result)}};
}

}  // namespace tvarch
