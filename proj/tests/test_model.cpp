#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <sstream>

#include "tvarch/experiment.hpp"
#include "tvarch/io.hpp"
#include "tvarch/json_io.hpp"
#include "tvarch/model.hpp"
#include "tvarch/simulate.hpp"
#include "tvarch/smoothing.hpp"

using namespace tvarch;
using Catch::Approx;

namespace {

ReturnSeries random_series(std::size_t T, std::uint64_t seed) {
  return ReturnSeries(draw_noise(NoiseSpec::gaussian(), T, seed));
}

}  // namespace

TEST_CASE("partition regressors unfold the lags") {
  const ReturnSeries x({1, 2, 3, 4, 5, 6});
  const CoefficientPartition part(2, {0}, {1, 2});
  const auto [m, n] = regressors(x, part, 5);
  REQUIRE(m.size() == 1);
  REQUIRE(n.size() == 2);
  CHECK(m[0] == 1.0);
  CHECK(n[0] == 16.0);
  CHECK(n[1] == 9.0);

  const auto full = CoefficientPartition::all_varying(1);
  const auto [m2, n2] = regressors(x, full, 3);
  CHECK(m2.size() == 2);
  CHECK(n2.size() == 0);
  CHECK(m2[1] == 4.0);

  CHECK_THROWS_AS(regressors(x, part, 2), IndexOutOfRange);
  CHECK_THROWS_AS(regressors(x, part, 7), IndexOutOfRange);
}

TEST_CASE("partition blocks reassemble the canonical regressor") {
  const ReturnSeries x = random_series(40, 3);
  const CoefficientPartition part(2, {0, 2}, {1});
  for (std::ptrdiff_t t = 3; t <= 40; ++t) {
    const auto [m, n] = regressors(x, part, t);
    REQUIRE(m.size() == 2);
    REQUIRE(n.size() == 1);
    const double direct[3] = {1.0, x.sq(t - 1), x.sq(t - 2)};
    for (std::size_t k = 0; k < 3; ++k) {
      const double stacked = k < 2 ? m[static_cast<Eigen::Index>(k)] : n[0];
      CHECK(stacked == direct[part.stacked_to_canonical(k)]);
    }
  }
}

TEST_CASE("partition validation") {
  CHECK_THROWS_AS(CoefficientPartition(1, {}, {0, 1}), InputError);
  CHECK_THROWS_AS(CoefficientPartition(1, {0}, {0}), InputError);
  CHECK_THROWS_AS(CoefficientPartition(1, {0}, {2}), InputError);
  CHECK(CoefficientPartition::with_constant(2, {0}).varying() == std::vector<std::size_t>{1, 2});
  CHECK(CoefficientPartition(2, {0}, {2, 1}).describe() == "varying=0 constant=1,2");
}

TEST_CASE("model validation") {
  using CF = CoefficientFunction;
  CHECK_NOTHROW(validate_model({1, {CF::constant(1), CF::constant(0.5)}, {}}));
  CHECK_THROWS_AS(validate_model({2, {CF::constant(1), CF::constant(0.6), CF::constant(0.5)}, {}}),
                  ContractionViolated);
  CHECK_THROWS_AS(validate_model({0, {CF::constant(0.0)}, {}}), NonPositiveIntercept);
  CHECK_THROWS_AS(validate_model({1, {CF::constant(1), CF::constant(-0.1)}, {}}), NegativeLagCoefficient);
  CHECK_THROWS_AS(validate_model({1, {CF::constant(1)}, {}}), InputError);
  CHECK(validate_model(rmse_model()) == Approx(0.5));
}

TEST_CASE("coefficient functions") {
  const auto s = CoefficientFunction::sine(2, 1);
  CHECK(s(0.25) == Approx(3.0));
  const auto pl = CoefficientFunction::piecewise_linear({{0, 1e-4}, {0.25, 4e-4}, {0.5, 1e-4}});
  CHECK(pl(0.125) == Approx(2.5e-4));
  CHECK(pl(0.9) == Approx(1e-4));
  CHECK(pl(-1) == Approx(1e-4));
}

TEST_CASE("simulation") {
  SECTION("constant variance") {
    const double c = 2.5;
    const ReturnSeries x = simulate_path({0, {CoefficientFunction::constant(c)}, {}}, {100000, 9, 0});
    double s = 0;
    for (double v : x.values()) s += v * v;
    CHECK(s / 100000 == Approx(c).epsilon(0.03));
  }
  SECTION("fixed seed reproduces the path") {
    const auto m = constancy_model(1);
    CHECK(simulate_path(m, {500, 4, 100}).values() == simulate_path(m, {500, 4, 100}).values());
    CHECK(simulate_path(m, {500, 4, 100}).values() != simulate_path(m, {500, 5, 100}).values());
  }
  SECTION("local variance follows the intercept") {
    const ReturnSeries x = simulate_path(order_model(1, 1), {20000, 2, 500});
    auto local = [&](double u) {
      double s = 0;
      const auto c = static_cast<std::ptrdiff_t>(u * 20000);
      for (std::ptrdiff_t t = c - 1000; t < c + 1000; ++t) s += x.sq(t);
      return s / 2000;
    };
    CHECK(local(0.25) > local(0.75));
  }
  SECTION("warnings for short burn-in with strong persistence") {
    const TvArchModel m{1, {CoefficientFunction::constant(1), CoefficientFunction::constant(0.95)}, {}};
    CHECK(simulation_warnings(m, {100, 1, 10}).size() == 1);
    CHECK(simulation_warnings(m, {100, 1, 100}).empty());
  }
}

TEST_CASE("level weights") {
  const ReturnSeries ones(std::vector<double>(20, 1.0));
  const Weights w = level_weights(ones, 1);
  for (std::ptrdiff_t t = 2; t <= 20; ++t) CHECK(w(t) == 0.25);

  const ReturnSeries x = random_series(200, 8);
  const Weights a = level_weights(x, 2);
  const Weights b = level_weights(x.scaled(3.0), 2);
  double v = 0;
  for (double e : x.values()) v += e * e;
  v /= 200;
  for (std::ptrdiff_t t = 3; t <= 200; ++t) {
    CHECK(b(t) == Approx(a(t) / 81.0).epsilon(1e-14));
    const double level = v + x.sq(t - 1) + x.sq(t - 2);
    CHECK(a(t) == Approx(1.0 / (level * level)).epsilon(1e-15));
  }
  CHECK_THROWS_AS(level_weights(ReturnSeries(std::vector<double>(10, 0.0)), 1), DegenerateSeries);
}

TEST_CASE("csv ingestion") {
  SECTION("returns column") {
    std::istringstream in("0.1\n-0.2\n0.3\n0.0\n0.5\n");
    const auto x = read_series(in, {});
    CHECK(x.T() == 5);
    CHECK(x.x(2) == -0.2);
  }
  SECTION("prices with a header") {
    std::ostringstream csv;
    csv.precision(17);
    csv << "date,price\n2020-01-01," << 1.0 << "\n2020-01-02," << std::exp(1.0) << "\n2020-01-03," << std::exp(2.0)
        << "\n";
    std::istringstream in(csv.str());
    IngestSpec spec;
    spec.column = "price";
    spec.mode = IngestMode::Prices;
    const auto x = read_series(in, spec);
    REQUIRE(x.T() == 2);
    CHECK(x.x(1) == Approx(1.0).epsilon(1e-15));
    CHECK(x.x(2) == Approx(1.0).epsilon(1e-15));
  }
  SECTION("scale") {
    std::istringstream in("r\n0.01\n0.02\n");
    IngestSpec spec;
    spec.scale = 100;
    const auto x = read_series(in, spec);
    CHECK(x.x(1) == Approx(1.0));
    CHECK(x.x(2) == Approx(2.0));
  }
  SECTION("errors carry line numbers") {
    std::istringstream bad("x\n1\nabc\n");
    try {
      read_series(bad, {});
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
    std::istringstream empty_cell("1\n\n2\nnan\n");
    CHECK_THROWS_AS(read_series(empty_cell, {}), ParseError);
    std::istringstream neg("p\n1\n-2\n");
    IngestSpec spec;
    spec.mode = IngestMode::Prices;
    CHECK_THROWS_AS(read_series(neg, spec), NonPositivePrice);
    std::istringstream missing("a,b\n1,2\n");
    spec.column = "c";
    CHECK_THROWS_AS(read_series(missing, spec), ParseError);
  }
}

TEST_CASE("model configuration round trip") {
  const Json j = Json::parse(R"({"p": 2,
    "coefficients": [{"type": "sine", "offset": 2, "amplitude": 1}, 0.3,
                     {"type": "piecewise_linear", "knots": [[0, 0.1], [1, 0.2]]}],
    "noise": {"law": "student", "df": 9}})");
  const TvArchModel m = model_from_json(j);
  CHECK(m.p == 2);
  CHECK(m.coeffs[0](0.25) == Approx(3.0));
  CHECK(m.coeffs[1](0.7) == 0.3);
  CHECK(m.coeffs[2](0.5) == Approx(0.15));
  CHECK(m.noise.law == NoiseLaw::Student);
  CHECK(m.noise.df == 9);
  CHECK_THROWS_AS(model_from_json(Json::parse(R"({"coefficients": [1, 0.7, 0.4]})")), ContractionViolated);
  CHECK_THROWS_AS(model_from_json(Json::parse(R"({"coefficients": [{"type": "wave"}]})")), InputError);
  CHECK(number_key(0.05) == "0.05");
}
