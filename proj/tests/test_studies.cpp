#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "mmaccel/oracle.hpp"
#include "mmaccel/studies.hpp"

using namespace mmaccel;
using namespace mmaccel::studies;

TEST_CASE("weighted mean and its standard error") {
  const Ensemble e(1, {1.0, 2.0, 4.0, 5.0}, {0.25, 0.25, 0.25, 0.25});
  const auto m = weighted_mean(e, [](auto x) { return x[0]; });
  CHECK(m.value == doctest::Approx(3.0));
  // sqrt(sum (w (f - mean))^2) = 0.25 sqrt(4 + 1 + 1 + 4)
  CHECK(m.se == doctest::Approx(0.25 * std::sqrt(10.0)));
  const auto v = weighted_variance(e, 0);
  CHECK(v.value == doctest::Approx(2.5));
  CHECK(v.se > 0.0);
}

TEST_CASE("interpolation is piecewise linear and flat outside") {
  const std::vector<double> t{0, 1, 3}, v{0, 2, 0};
  CHECK(interpolate(t, v, 0.5) == doctest::Approx(1.0));
  CHECK(interpolate(t, v, 2.0) == doctest::Approx(1.0));
  CHECK(interpolate(t, v, -1.0) == 0.0);
  CHECK(interpolate(t, v, 5.0) == 0.0);
}

TEST_CASE("L2 distance between series") {
  Series a, b;
  for (int i = 0; i <= 100; ++i) {
    const double t = i / 100.0;
    a.push(t, {t, 0.01});
    b.push(t, {0.0, 0.0});
  }
  const auto d = l2_distance(a, b, 0.0, 1.0);
  CHECK(d.value == doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-4));
  CHECK(d.error_bar == doctest::Approx(0.01).epsilon(1e-3));
  CHECK(l2_distance(a, a, 0.0, 1.0).value == 0.0);
}

TEST_CASE("averaged-model error matches the closed-form period integral") {
  oracle::PeriodicParams p;
  p.eps = 0.05;
  const auto c = oracle::solve_fourier_coeffs(p);
  const auto ab = oracle::macro_coeffs(p);
  // int over one period of (da cos + db sin)^2 = (period / 2)(da^2 + db^2)
  const double period = 2.0 * std::numbers::pi / p.a;
  const double da = c.A - ab[0], db = c.B - ab[1];
  const double exact = std::sqrt(0.5 * period * (da * da + db * db));
  CHECK(periodic_macro_error(p, 512) == doctest::Approx(exact).epsilon(1e-10));
}

TEST_CASE("initial periodic ensemble sits on the invariant curve") {
  PeriodicConfig cfg;
  cfg.params.eps = 0.1;
  cfg.particles = 20000;
  const auto e = periodic_initial_ensemble(cfg, 5);
  const auto c = oracle::solve_fourier_coeffs(cfg.params);
  const auto mx = weighted_mean(e, [](auto x) { return x[0]; });
  const auto my = weighted_mean(e, [](auto x) { return x[1]; });
  CHECK(std::abs(mx.value - c.A) < 5 * mx.se);
  CHECK(std::abs(my.value - c.C) < 5 * my.se);
}

TEST_CASE("accelerated path with the smallest step reproduces the microscopic path") {
  PeriodicConfig cfg;
  cfg.params.eps = 0.5;
  cfg.particles = 300;
  cfg.end_time = 0.5;
  const auto mm = periodic_mm_path(cfg, 1.0, 9);
  const auto micro = periodic_micro_path(cfg, 9);
  REQUIRE(mm.t.size() == micro.t.size());
  for (std::size_t i = 0; i < mm.t.size(); ++i) {
    CHECK(mm.t[i] == doctest::Approx(micro.t[i]));
    CHECK(mm.value[i] == doctest::Approx(micro.value[i]).epsilon(1e-12));
  }
}

TEST_CASE("records survive a failing run") {
  PeriodicConfig cfg;
  cfg.params.eps = 0.5;
  cfg.particles = 200;
  cfg.end_time = 0.5;
  cfg.mm.match.tol = 1e-300;
  cfg.mm.match.max_iter = 1;
  std::vector<StepRecord> records;
  CHECK_THROWS_AS(periodic_mm_path(cfg, 2.0, 3, &records), MatchingStalled);
}
