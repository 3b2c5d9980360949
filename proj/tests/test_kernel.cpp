#include <catch_amalgamated.hpp>

#include <atomic>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>

#include "tvarch/kernel.hpp"
#include "tvarch/parallel.hpp"
#include "tvarch/rng.hpp"
#include "tvarch/simulate.hpp"

using namespace tvarch;
using Catch::Approx;

namespace {

// Adaptive Simpson, independent of the library's fixed-node rule.
double adaptive(const std::function<double(double)>& f, double a, double b, double eps, int depth = 40) {
  auto simp = [&](double lo, double hi) {
    const double m = 0.5 * (lo + hi);
    return (hi - lo) / 6.0 * (f(lo) + 4.0 * f(m) + f(hi));
  };
  std::function<double(double, double, double, double, int)> rec = [&](double lo, double hi, double whole,
                                                                       double e, int d) {
    const double m = 0.5 * (lo + hi);
    const double left = simp(lo, m);
    const double right = simp(m, hi);
    if (d <= 0 || std::abs(left + right - whole) <= 15.0 * e) return left + right + (left + right - whole) / 15.0;
    return rec(lo, m, left, e / 2.0, d - 1) + rec(m, hi, right, e / 2.0, d - 1);
  };
  return rec(a, b, simp(a, b), eps, depth);
}

}  // namespace

TEST_CASE("epanechnikov kernel values") {
  CHECK(epanechnikov(0.0) == 0.75);
  CHECK(epanechnikov(1.0) == 0.0);
  CHECK(epanechnikov(-1.0) == 0.0);
  CHECK(epanechnikov(0.5) == Approx(0.5625).epsilon(1e-15));
  CHECK(epanechnikov(1.5) == 0.0);
}

TEST_CASE("normalized weights sum to one and are symmetric in the interior") {
  std::mt19937_64 gen(11);
  std::uniform_int_distribution<int> Tdist(10, 3000);
  std::uniform_real_distribution<double> bdist(0.005, 1.0);
  for (int rep = 0; rep < 1000; ++rep) {
    const auto T = Tdist(gen);
    const double b = bdist(gen);
    const auto p = static_cast<std::ptrdiff_t>(gen() % 3);
    const auto t = p + 1 + static_cast<std::ptrdiff_t>(gen() % static_cast<std::uint64_t>(T - p));
    const auto w = normalized_weights(t, b, T, p);
    double s = 0.0;
    for (double v : w.weights) s += v;
    REQUIRE(s == Approx(1.0).margin(1e-12));
  }

  const auto w = normalized_weights(500, 0.05, 1000, 0);
  for (std::ptrdiff_t j = 1; j <= 40; ++j) CHECK(w.at(500 - j) == w.at(500 + j));

  const auto left = normalized_weights(3, 0.1, 200, 2);
  double s = 0.0;
  for (double v : left.weights) s += v;
  CHECK(s == Approx(1.0).margin(1e-14));
  CHECK(left.first == 3);
}

TEST_CASE("normalized weights match a direct summation") {
  // T = 10, p = 0, b = 0.3, t = 5: k_i = K((5 - i) / 3) / sum.
  double total = 0.0;
  std::vector<double> direct(11, 0.0);
  for (int i = 1; i <= 10; ++i) {
    const double x = (5.0 - i) / 3.0;
    direct[i] = std::abs(x) <= 1 ? 0.75 * (1 - x * x) : 0.0;
    total += direct[i];
  }
  const auto w = normalized_weights(5, 0.3, 10, 0);
  for (int i = 1; i <= 10; ++i) CHECK(w.at(i) == Approx(direct[i] / total).margin(1e-15));
}

TEST_CASE("weights reject invalid centers and bandwidths") {
  CHECK_THROWS_AS(normalized_weights(1, 0.1, 100, 1), IndexOutOfRange);
  CHECK_THROWS_AS(normalized_weights(101, 0.1, 100, 1), IndexOutOfRange);
  CHECK_THROWS_AS(normalized_weights(50, 0.0, 100, 1), InputError);
  CHECK_THROWS_AS(normalized_weights(50, 1.5, 100, 1), InputError);
}

TEST_CASE("kernel L2 norm") {
  const Kernel k = Kernel::epanechnikov();
  const double oracle = adaptive([](double x) { return 0.5625 * (1 - x * x) * (1 - x * x); }, -1, 1, 1e-14);
  CHECK(oracle == Approx(0.6).margin(1e-12));
  CHECK(k_l2_norm_sq(k) == Approx(oracle).margin(1e-10));
  CHECK(k_l2_norm_sq(k, 10001) == Approx(k_l2_norm_sq(k, 1000001)).margin(1e-8));
  CHECK(k_l2_norm_sq(Kernel::box()) == Approx(0.5).margin(1e-12));
}

TEST_CASE("convolution kernel K*") {
  const Kernel k = Kernel::epanechnikov();
  CHECK(k_star(k, 0.0) == Approx(k_l2_norm_sq(k)).margin(1e-8));
  CHECK(k_star(k, 1.0) == 0.0);
  CHECK(k_star(k, -1.0) == 0.0);
  double prev = k_star(k, 0.0);
  for (int i = 1; i <= 50; ++i) {
    const double x = i / 50.0;
    const double v = k_star(k, x);
    CHECK(v >= 0.0);
    CHECK(v <= prev + 1e-15);
    CHECK(k_star(k, -x) == v);
    prev = v;
  }

  // Independent nested adaptive quadrature of ||K*||^2.
  auto kstar = [](double x) {
    const double s = 2 * std::abs(x);
    return adaptive([s](double v) { return epanechnikov(v) * epanechnikov(v + s); }, -1.0, 1.0 - s, 1e-13);
  };
  const double oracle = 2.0 * adaptive([&](double x) { return kstar(x) * kstar(x); }, 0.0, 1.0, 1e-12);
  const double lib = k_star_l2_norm_sq(k);
  CHECK(lib == Approx(oracle).margin(1e-8));
  CHECK(lib == Approx(167.0 / 770.0).margin(1e-8));
  CHECK(k_star_l2_norm_sq(k, 8193) == Approx(lib).margin(1e-6));
  CHECK(kernel_constants(k).l2_sq == Approx(0.6).margin(1e-12));
}

TEST_CASE("kernel table trims zero tails") {
  const KernelTable t(Kernel::epanechnikov(), 0.01, 1000);
  CHECK(t.reach() == 9);
  CHECK(t[10] == 0.0);
  CHECK(t[0] == 0.75);
}

TEST_CASE("random streams are reproducible") {
  RandomStream a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const double x = a.gaussian();
    CHECK(x == b.gaussian());
    (void)c;
  }
  CHECK(derive_seed(7, 1) != derive_seed(7, 2));
  CHECK(draw_noise(NoiseSpec::gaussian(), 0, 1).empty());
}

TEST_CASE("innovations have unit variance") {
  auto var = [](const std::vector<double>& v) {
    double m = 0, s = 0;
    for (double x : v) m += x;
    m /= v.size();
    for (double x : v) s += (x - m) * (x - m);
    return s / (v.size() - 1);
  };
  CHECK(var(draw_noise(NoiseSpec::gaussian(), 1'000'000, 5)) == Approx(1.0).margin(0.005));
  CHECK(var(draw_noise(NoiseSpec::student(9), 1'000'000, 6)) == Approx(1.0).margin(0.01));
  CHECK_THROWS_AS(NoiseSpec::student(4), InputError);
}

TEST_CASE("parallel_for is deterministic and reports the first failure") {
  std::vector<double> one(1000), many(1000);
  set_thread_count(1);
  parallel_for(one.size(), [&](std::size_t k) { one[k] = RandomStream(derive_seed(3, k)).gaussian(); });
  set_thread_count(4);
  parallel_for(many.size(), [&](std::size_t k) { many[k] = RandomStream(derive_seed(3, k)).gaussian(); });
  CHECK(one == many);

  std::atomic<int> nested{0};
  parallel_for(8, [&](std::size_t) { parallel_for(8, [&](std::size_t) { ++nested; }); });
  CHECK(nested == 64);

  try {
    parallel_for(100, [](std::size_t k) {
      if (k == 17 || k == 60) throw std::runtime_error(std::to_string(k));
    });
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "17");
  }
  set_thread_count(0);
}
