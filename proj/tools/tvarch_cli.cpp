// Command-line front end: simulation, estimation, tests, selection, the
// analysis pipeline and the simulation-design harness.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tvarch/tvarch.hpp"

using namespace tvarch;

namespace {

struct Common {
  std::string input;
  std::string column = "0";
  std::string mode = "returns";
  double scale = 1.0;
  std::size_t p = 1;
  std::string partition;
  std::optional<double> bandwidth;
  bool cv = false;
  std::size_t B = 2000;
  std::vector<double> alpha{0.05, 0.10};
  std::uint64_t seed = 1;
  bool json = false;
  std::string out;
  std::vector<double> grid{0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};
  unsigned threads = 0;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::size_t> parse_indices(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& tok : split(s, ',')) {
    try {
      std::size_t used = 0;
      const long v = std::stol(tok, &used);
      if (used != tok.size() || v < 0) throw std::invalid_argument(tok);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::logic_error&) {
      throw InputError("bad index '" + tok + "' in partition");
    }
  }
  return out;
}

/// "varying=0 constant=1,2"; either side may be omitted.
CoefficientPartition parse_partition(const std::string& spec, std::size_t p) {
  if (spec.empty()) return CoefficientPartition::intercept_varying(p);
  std::optional<std::vector<std::size_t>> varying;
  std::optional<std::vector<std::size_t>> constant;
  for (const auto& part : split(spec, ' ')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw InputError("partition entries look like varying=0,1");
    const auto key = part.substr(0, eq);
    const auto idx = parse_indices(part.substr(eq + 1));
    if (key == "varying") {
      varying = idx;
    } else if (key == "constant") {
      constant = idx;
    } else {
      throw InputError("unknown partition key '" + key + "'");
    }
  }
  if (constant && !varying) return CoefficientPartition::with_constant(p, *constant);
  if (varying && !constant) {
    std::vector<std::size_t> rest;
    for (std::size_t j = 0; j <= p; ++j) {
      if (std::find(varying->begin(), varying->end(), j) == varying->end()) rest.push_back(j);
    }
    return {p, *varying, rest};
  }
  return {p, varying.value_or(std::vector<std::size_t>{}), constant.value_or(std::vector<std::size_t>{})};
}

void add_input(CLI::App* cmd, Common& c) {
  cmd->add_option("--input", c.input, "CSV file with the series")->required();
  cmd->add_option("--column", c.column, "column name or 0-based index");
  cmd->add_option("--mode", c.mode, "prices or returns")->check(CLI::IsMember({"prices", "returns"}));
  cmd->add_option("--scale", c.scale, "multiplier applied to the returns");
}

void add_output(CLI::App* cmd, Common& c) {
  cmd->add_flag("--json", c.json, "print JSON instead of text");
  cmd->add_option("--out", c.out, "write the JSON document to this file");
  cmd->add_option("--threads", c.threads, "worker threads (0 = all cores)");
}

void add_bandwidth(CLI::App* cmd, Common& c) {
  auto* b = cmd->add_option("--bandwidth", c.bandwidth, "kernel bandwidth in (0, 1]");
  auto* cv = cmd->add_flag("--cv", c.cv, "select the bandwidth by cross-validation");
  b->excludes(cv);
  cmd->add_option("--grid", c.grid, "CV multipliers of T^(-1/3)")->delimiter(',');
}

void add_testing(CLI::App* cmd, Common& c) {
  cmd->add_option("--B", c.B, "Monte-Carlo replicates");
  cmd->add_option("--alpha", c.alpha, "test levels")->delimiter(',');
  cmd->add_option("--seed", c.seed, "random seed");
}

ReturnSeries load(const Common& c) {
  IngestSpec spec;
  spec.path = c.input;
  spec.column = c.column;
  spec.mode = c.mode == "prices" ? IngestMode::Prices : IngestMode::Returns;
  spec.scale = c.scale;
  return load_series(spec);
}

Json input_config(const Common& c) {
  return {{"input", c.input}, {"column", c.column}, {"mode", c.mode}, {"scale", c.scale}};
}

BandwidthGrid grid_of(const Common& c) { return BandwidthGrid{c.grid}; }

void emit(const Common& c, const Json& doc, const std::string& text) {
  if (!c.out.empty()) {
    std::ofstream f(c.out);
    if (!f) throw InputError("cannot write " + c.out);
    f << doc.dump(2) << '\n';
  }
  if (c.json) {
    std::cout << doc.dump(2) << '\n';
  } else {
    std::cout << text;
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

std::string test_text(const TestReport& r) {
  std::ostringstream os;
  os << r.name << " [" << r.partition << "] statistic = " << fmt(r.statistic) << ", p-value = " << fmt(r.p_value)
     << " (" << r.calibration << (r.B ? ", B = " + std::to_string(r.B) : std::string()) << ", b = "
     << fmt(r.bandwidth) << ")\n";
  for (const auto& [a, q] : r.critical_values) {
    os << "  level " << fmt(a) << ": critical value " << fmt(q) << " -> " << (r.reject.at(a) ? "reject" : "accept")
       << "\n";
  }
  return os.str();
}

/// CV bandwidth matching the partition: the semiparametric criterion when
/// the intercept varies and every lag is constant, else the full one.
double choose_bandwidth(const Common& c, const ReturnSeries& x, const CoefficientPartition& part, Json& config) {
  if (c.bandwidth) return *c.bandwidth;
  if (!c.cv) throw InputError("give --bandwidth or --cv");
  CvResult cv = part == CoefficientPartition::intercept_varying(part.p()) && part.p() >= 1
                    ? cv_bandwidth_semiparametric(x, part.p(), grid_of(c), level_weights(x, part.p()))
                    : cv_bandwidth_tvarch(x, part.p(), grid_of(c), level_weights(x, part.p()));
  config["cv"] = to_json(cv);
  return cv.bandwidth;
}

TvArchModel builtin_model(const std::string& name, int setup, double theta, std::size_t true_p, NoiseSpec noise) {
  const DesignId d = parse_design(name);
  switch (d) {
    case DesignId::Rmse: return rmse_model(noise);
    case DesignId::ConstancyPower: return constancy_model(setup, noise);
    case DesignId::DynamicCoverage: return dynamic_model(setup, theta, noise);
    case DesignId::OrderSelection: return order_model(setup, true_p, noise);
  }
  throw InputError("unknown design");
}

NoiseSpec parse_noise(const std::string& s) {
  if (s == "gaussian") return NoiseSpec::gaussian();
  if (s.size() > 1 && s[0] == 't') {
    try {
      return NoiseSpec::student(std::stoi(s.substr(1)));
    } catch (const std::logic_error&) {
    }
  }
  throw InputError("noise must be 'gaussian' or 't<df>'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semiparametric estimation and tests for time-varying ARCH models"};
  app.require_subcommand(1);
  Common c;

  // simulate
  auto* sim = app.add_subcommand("simulate", "simulate a path of a tv-ARCH model");
  std::string model_path, builtin = "rmse", noise = "gaussian";
  std::size_t sim_T = 1000, burn_in = 500, true_p = 1;
  int setup = 1;
  double theta = 0.0;
  sim->add_option("--model", model_path, "JSON model configuration");
  sim->add_option("--design", builtin, "built-in model of a simulation design");
  sim->add_option("--setup", setup, "design setup");
  sim->add_option("--theta", theta, "dynamic-coverage alternative");
  sim->add_option("--true-p", true_p, "order-selection setup 2 lag order");
  sim->add_option("--noise", noise, "gaussian or t<df> for built-in designs");
  sim->add_option("--T", sim_T, "sample size");
  sim->add_option("--burn-in", burn_in, "burn-in length");
  sim->add_option("--seed", c.seed, "random seed");
  std::string csv_out;
  sim->add_option("--csv", csv_out, "write the simulated series as CSV");
  add_output(sim, c);

  // fit
  auto* fit = app.add_subcommand("fit", "semiparametric fit");
  add_input(fit, c);
  fit->add_option("--p", c.p, "lag order");
  fit->add_option("--partition", c.partition, "e.g. \"varying=0 constant=1,2\"");
  add_bandwidth(fit, c);
  bool plug_in = false;
  std::string weights = "level";
  std::optional<double> b_prime;
  std::string plot_out;
  fit->add_flag("--plug-in", plug_in, "efficiency-improving plug-in pass");
  fit->add_option("--weights", weights, "level or unit")->check(CLI::IsMember({"level", "unit"}));
  fit->add_option("--bandwidth-prime", b_prime, "bandwidth for alpha (defaults to the beta bandwidth)");
  fit->add_option("--plot-out", plot_out, "CSV of (u, alpha_j, se_j)");
  add_output(fit, c);

  // tests
  auto* tc = app.add_subcommand("test-constancy", "Monte-Carlo test that the constant block is constant");
  add_input(tc, c);
  tc->add_option("--p", c.p, "lag order");
  tc->add_option("--partition", c.partition, "coefficients under test are the constant block");
  add_bandwidth(tc, c);
  add_testing(tc, c);
  add_output(tc, c);

  auto* tz = app.add_subcommand("test-zero", "Wald test that the constant block is zero");
  add_input(tz, c);
  tz->add_option("--p", c.p, "lag order");
  tz->add_option("--partition", c.partition, "coefficients under test are the constant block");
  add_bandwidth(tz, c);
  add_testing(tz, c);
  add_output(tz, c);

  auto* td = app.add_subcommand("test-dynamic", "test for second-order dynamics");
  add_input(td, c);
  td->add_option("--p", c.p, "number of lags under the alternative");
  add_bandwidth(td, c);
  add_testing(td, c);
  bool asymptotic = false;
  td->add_flag("--asymptotic", asymptotic, "use the asymptotic critical values");
  add_output(td, c);

  // selection
  auto* so = app.add_subcommand("select-order", "information-criterion lag order");
  add_input(so, c);
  std::size_t q_max = 10;
  so->add_option("--q-max", q_max, "largest lag order considered");
  so->add_option("--grid", c.grid, "CV multipliers of T^(-1/3)")->delimiter(',');
  add_output(so, c);

  auto* sb = app.add_subcommand("select-bandwidth", "cross-validated bandwidth");
  add_input(sb, c);
  sb->add_option("--p", c.p, "lag order");
  bool semiparametric = false;
  std::string cv_out;
  sb->add_flag("--semiparametric", semiparametric, "time-varying intercept, constant lags");
  sb->add_option("--grid", c.grid, "CV multipliers of T^(-1/3)")->delimiter(',');
  sb->add_option("--curve-out", cv_out, "CSV of the CV curve");
  add_output(sb, c);

  auto* pl = app.add_subcommand("pipeline", "order selection, constancy tests, fit and dynamic test");
  add_input(pl, c);
  pl->add_option("--q-max", q_max, "largest lag order considered");
  pl->add_option("--grid", c.grid, "CV multipliers of T^(-1/3)")->delimiter(',');
  add_testing(pl, c);
  add_output(pl, c);

  auto* ex = app.add_subcommand("experiment", "run a simulation design");
  std::string design = "rmse", exp_csv;
  std::vector<std::size_t> Ts{500};
  std::size_t R = 200;
  std::string calibration = "monte-carlo";
  std::optional<double> ex_b;
  std::size_t ex_B = 500;
  ex->add_option("--design", design, "rmse | constancy-power | dynamic-coverage | order-selection");
  ex->add_option("--T", Ts, "sample sizes")->delimiter(',');
  ex->add_option("--R", R, "replications");
  ex->add_option("--noise", noise, "gaussian or t<df>");
  ex->add_option("--setup", setup, "design setup");
  ex->add_option("--theta", theta, "dynamic-coverage alternative");
  ex->add_option("--true-p", true_p, "order-selection setup 2 lag order");
  ex->add_option("--q-max", q_max, "largest lag order considered");
  ex->add_option("--B", ex_B, "Monte-Carlo replicates for test calibration");
  ex->add_option("--alpha", c.alpha, "test levels")->delimiter(',');
  ex->add_option("--seed", c.seed, "random seed");
  ex->add_option("--bandwidth", ex_b, "fixed bandwidth instead of CV");
  ex->add_option("--grid", c.grid, "CV multipliers of T^(-1/3)")->delimiter(',');
  ex->add_option("--calibration", calibration, "monte-carlo or asymptotic (dynamic-coverage)")
      ->check(CLI::IsMember({"monte-carlo", "asymptotic"}));
  ex->add_option("--csv", exp_csv, "write the results table as CSV");
  add_output(ex, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    set_thread_count(c.threads);
    std::ostringstream text;

    if (sim->parsed()) {
      TvArchModel model;
      Json config = {{"T", sim_T}, {"burn_in", burn_in}, {"seed", c.seed}};
      if (!model_path.empty()) {
        std::ifstream f(model_path);
        if (!f) throw InputError("cannot open " + model_path);
        Json j;
        try {
          j = Json::parse(f);
        } catch (const Json::exception& e) {
          throw InputError(std::string("model file: ") + e.what());
        }
        model = model_from_json(j);
      } else {
        model = builtin_model(builtin, setup, theta, true_p, parse_noise(noise));
        config["design"] = builtin;
        config["setup"] = setup;
      }
      config["model"] = to_json(model);
      const SimulationConfig sc{sim_T, c.seed, burn_in};
      for (const auto& w : simulation_warnings(model, sc)) std::cerr << "warning: " << w << "\n";
      const ReturnSeries x = simulate_path(model, sc);
      if (!csv_out.empty()) {
        std::ofstream f(csv_out);
        if (!f) throw InputError("cannot write " + csv_out);
        write_series_csv(f, x);
      }
      Json doc = envelope("simulate", config, {{"T", x.T()}, {"x", x.values()}});
      if (!csv_out.empty() && !c.json) {
        text << "wrote " << x.T() << " observations to " << csv_out << "\n";
      } else {
        write_series_csv(text, x);
      }
      emit(c, doc, text.str());
    } else if (fit->parsed()) {
      const ReturnSeries x = load(c);
      const auto part = parse_partition(c.partition, c.p);
      Json config = input_config(c);
      config["partition"] = to_json(part);
      FitOptions fo;
      fo.bandwidth = choose_bandwidth(c, x, part, config);
      fo.bandwidth_prime = b_prime;
      fo.plug_in = plug_in;
      fo.weights = weights == "unit" ? WeightKind::Unit : WeightKind::LevelInverse;
      const SemiparametricFit f = fit_semiparametric(x, part, fo);
      if (!plot_out.empty()) {
        std::ofstream pf(plot_out);
        if (!pf) throw InputError("cannot write " + plot_out);
        pf << "u";
        for (auto j : part.varying()) pf << ",a" << j << ",se" << j;
        pf << "\n";
        for (std::size_t k = 0; k < f.alpha.alpha.size(); ++k) {
          pf << number_key(f.alpha.u(k));
          for (Eigen::Index j = 0; j < f.alpha.alpha[k].size(); ++j) {
            pf << ',' << number_key(f.alpha.alpha[k][j]) << ',' << number_key(f.alpha_se[k][j]);
          }
          pf << "\n";
        }
      }
      text << "partition " << part.describe() << ", b = " << fmt(f.bandwidth) << ", b' = " << fmt(f.bandwidth_prime)
           << (f.plug_in ? ", plug-in" : "") << "\n";
      for (Eigen::Index k = 0; k < f.beta.size(); ++k) {
        text << "  a_" << part.constant()[static_cast<std::size_t>(k)] << " = " << fmt(f.beta[k]) << " (se "
             << fmt(f.beta_se[k]) << ")\n";
      }
      text << "  alpha grid: " << f.alpha.alpha.size() << " points, floored volatilities: " << f.floored << "\n";
      emit(c, envelope("fit", config, to_json(f)), text.str());
    } else if (tc->parsed() || tz->parsed()) {
      const ReturnSeries x = load(c);
      const auto part = parse_partition(c.partition, c.p);
      Json config = input_config(c);
      config["partition"] = to_json(part);
      const double b = choose_bandwidth(c, x, part, config);
      ConstancyTestOptions o;
      o.B = c.B;
      o.levels = c.alpha;
      o.seed = c.seed;
      const TestReport r = tc->parsed() ? test_constancy(x, part, b, o) : test_zero_wald(x, part, b, o);
      text << test_text(r);
      emit(c, envelope(tc->parsed() ? "test-constancy" : "test-zero", config, to_json(r)), text.str());
    } else if (td->parsed()) {
      const ReturnSeries x = load(c);
      Json config = input_config(c);
      config["p"] = c.p;
      double b = 0.0;
      if (c.bandwidth) {
        b = *c.bandwidth;
      } else if (c.cv) {
        const CvResult cv = cv_bandwidth_tvarch(x, 0, grid_of(c), unit_weights(x, 0));
        config["cv"] = to_json(cv);
        b = cv.bandwidth;
      } else {
        throw InputError("give --bandwidth or --cv");
      }
      SecondOrderTestOptions o;
      o.B = c.B;
      o.levels = c.alpha;
      o.seed = c.seed;
      o.calibration = asymptotic ? Calibration::Asymptotic : Calibration::MonteCarlo;
      const TestReport r = test_second_order(x, c.p, b, o);
      text << test_text(r);
      emit(c, envelope("test-dynamic", config, to_json(r)), text.str());
    } else if (so->parsed()) {
      const ReturnSeries x = load(c);
      Json config = input_config(c);
      config["q_max"] = q_max;
      config["grid"] = c.grid;
      const LagOrderSelection s = select_lag_order(x, q_max, grid_of(c));
      text << "b = " << fmt(s.bandwidth) << ", zeta_T = " << fmt(s.zeta) << "\n p   C(p)\n";
      for (std::size_t p = 0; p < s.criterion.size(); ++p) {
        text << std::setw(2) << p << "   " << fmt(s.criterion[p]) << (p == s.p_hat ? "  <-" : "") << "\n";
      }
      text << "p_hat = " << s.p_hat << "\n";
      emit(c, envelope("select-order", config, to_json(s)), text.str());
    } else if (sb->parsed()) {
      const ReturnSeries x = load(c);
      Json config = input_config(c);
      config["p"] = c.p;
      config["semiparametric"] = semiparametric;
      config["grid"] = c.grid;
      const Weights w = level_weights(x, c.p);
      const CvResult cv = semiparametric ? cv_bandwidth_semiparametric(x, c.p, grid_of(c), w)
                                         : cv_bandwidth_tvarch(x, c.p, grid_of(c), w);
      if (!cv_out.empty()) {
        std::ofstream f(cv_out);
        if (!f) throw InputError("cannot write " + cv_out);
        f << "b,cv\n";
        for (std::size_t k = 0; k < cv.grid.size(); ++k) {
          f << number_key(cv.grid[k]) << ',' << (cv.curve[k] ? number_key(*cv.curve[k]) : "") << "\n";
        }
      }
      for (std::size_t k = 0; k < cv.grid.size(); ++k) {
        text << fmt(cv.grid[k]) << "  " << (cv.curve[k] ? fmt(*cv.curve[k]) : "singular") << "\n";
      }
      text << "b_hat = " << fmt(cv.bandwidth) << "\n";
      emit(c, envelope("select-bandwidth", config, to_json(cv)), text.str());
    } else if (pl->parsed()) {
      const ReturnSeries x = load(c);
      Json config = input_config(c);
      PipelineOptions po;
      po.q_max = q_max;
      po.grid = grid_of(c);
      po.B = c.B;
      po.levels = c.alpha;
      po.seed = c.seed;
      config["q_max"] = q_max;
      config["B"] = c.B;
      config["levels"] = c.alpha;
      config["seed"] = c.seed;
      config["grid"] = c.grid;
      const PipelineReport r = run_pipeline(x, po);
      emit(c, envelope("pipeline", config, to_json(r)), summarize(r));
      if (!r.complete()) return 3;
    } else if (ex->parsed()) {
      ExperimentSpec spec;
      spec.design = parse_design(design);
      spec.T = Ts;
      spec.R = R;
      spec.noise = parse_noise(noise);
      spec.seed = c.seed;
      spec.setup = setup;
      spec.B = ex_B;
      spec.levels = c.alpha;
      spec.theta = theta;
      spec.true_p = true_p;
      spec.q_max = q_max;
      spec.grid = grid_of(c);
      spec.bandwidth = ex_b;
      spec.calibration = calibration == "asymptotic" ? Calibration::Asymptotic : Calibration::MonteCarlo;
      const ExperimentResult r = run_experiment(spec);
      if (!exp_csv.empty()) {
        std::ofstream f(exp_csv);
        if (!f) throw InputError("cannot write " + exp_csv);
        write_csv(f, r);
      }
      write_csv(text, r);
      emit(c, envelope("experiment", to_json(spec), to_json(r)), text.str());
    }
    return 0;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
