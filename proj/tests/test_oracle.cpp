#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "mmaccel/oracle.hpp"
#include "mmaccel/random.hpp"

using namespace mmaccel;
using namespace mmaccel::oracle;

namespace {

PeriodicParams random_params(RandomStream& rng) {
  PeriodicParams p;
  p.lam = 0.2 + 4.0 * rng.uniform();
  p.a = 0.5 + 10.0 * rng.uniform();
  p.e_amp = -10.0 + 20.0 * rng.uniform();
  p.eps = 0.001 + 0.5 * rng.uniform();
  return p;
}

}  // namespace

TEST_CASE("closed forms agree with the linear solve") {
  RandomStream rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto p = random_params(rng);
    const auto c = solve_fourier_coeffs(p);
    const auto [A, B] = closed_form_ab(p);
    CHECK(std::abs(A - c.A) <= 1e-12 * std::max(1.0, std::abs(A)));
    CHECK(std::abs(B - c.B) <= 1e-12 * std::max(1.0, std::abs(B)));
  }
}

TEST_CASE("small eps limit gives the averaged coefficients") {
  PeriodicParams p;
  p.eps = 1e-10;
  const auto [A, B] = closed_form_ab(p);
  const auto [Ab, Bb] = macro_coeffs(p);
  CHECK(A == doctest::Approx(Ab).epsilon(1e-8));
  CHECK(B == doctest::Approx(Bb).epsilon(1e-8));
  const double q = 4 * std::numbers::pi * std::numbers::pi + 16;
  CHECK(Ab == doctest::Approx(-20 * std::numbers::pi / q));
  CHECK(Bb == doctest::Approx(40.0 / q));
}

TEST_CASE("regression fixture at eps = 0.05") {
  const auto c = solve_fourier_coeffs(PeriodicParams{});
  CHECK(c.A == doctest::Approx(-1.2096631445583044).epsilon(1e-12));
  CHECK(c.B == doctest::Approx(0.80915326445808233).epsilon(1e-12));
}

TEST_CASE("matrix exponential") {
  const std::array<double, 4> zero = {0, 0, 0, 0};
  CHECK(expm2(zero, 3.0) == std::array<double, 4>{1, 0, 0, 1});
  // Complex pair: rotation.
  const auto r = expm2({0, -1, 1, 0}, std::numbers::pi / 2);
  CHECK(r[0] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(r[2] == doctest::Approx(1.0));
  // Defective Jordan block [[-1, 1], [0, -1]]: e^{-t} [[1, t], [0, 1]].
  const auto j = expm2({-1, 1, 0, -1}, 2.0);
  CHECK(j[0] == doctest::Approx(std::exp(-2.0)).epsilon(1e-13));
  CHECK(j[1] == doctest::Approx(2 * std::exp(-2.0)).epsilon(1e-13));
  CHECK(j[2] == 0.0);
  // Distinct real eigenvalues: diagonal.
  const auto d = expm2({-1, 0, 0, -3}, 0.5);
  CHECK(d[0] == doctest::Approx(std::exp(-0.5)));
  CHECK(d[3] == doctest::Approx(std::exp(-1.5)));
  CHECK(std::abs(d[1]) < 1e-16);
}

TEST_CASE("exact mean") {
  RandomStream rng(2);
  for (int i = 0; i < 20; ++i) {
    const auto p = random_params(rng);
    const std::array<double, 2> mu0 = {rng.normal(), rng.normal()};
    CHECK(exact_mean(p, mu0, 0.0) == mu0);
    const double t = 0.1 + rng.uniform();
    const double h = 1e-6;
    const auto mp = exact_mean(p, mu0, t + h);
    const auto mm = exact_mean(p, mu0, t - h);
    const auto m = exact_mean(p, mu0, t);
    const double fx = -p.lam * (m[0] + m[1]) + p.e_amp * std::sin(p.a * t);
    const double fy = (m[0] - m[1]) / p.eps;
    const double scale = 1.0 + std::abs(fx) + std::abs(fy);
    CHECK(std::abs((mp[0] - mm[0]) / (2 * h) - fx) <= 1e-6 * scale);
    CHECK(std::abs((mp[1] - mm[1]) / (2 * h) - fy) <= 1e-6 * scale);
  }
  const PeriodicParams p;
  const auto c = solve_fourier_coeffs(p);
  for (double t : {0.3, 1.7, 4.2}) {
    const auto a = exact_mean(p, {c.A, c.C}, t);
    const auto b = exact_mean(p, {c.A, c.C}, t + 1.0);
    CHECK(std::hypot(a[0] - b[0], a[1] - b[1]) <= 1e-10);
  }
}

TEST_CASE("approximate mean") {
  const PeriodicParams p;
  CHECK(approx_mean(p, 0.37, 0.0) == 0.37);
  for (double t : {0.05, 0.5, 2.3}) {
    const double h = 1e-6;
    const double d = (approx_mean(p, 0.37, t + h) - approx_mean(p, 0.37, t - h)) / (2 * h);
    const double f = -2 * p.lam * approx_mean(p, 0.37, t) + p.e_amp * std::sin(p.a * t);
    CHECK(std::abs(d - f) <= 1e-6 * (1 + std::abs(f)));
  }
  const auto [Ab, Bb] = macro_coeffs(p);
  double peak = 0.0;
  for (int i = 0; i < 2000; ++i) {
    peak = std::max(peak, std::abs(approx_mean(p, Ab, 10.0 + i / 2000.0)));
  }
  CHECK(peak == doctest::Approx(std::hypot(Ab, Bb)).epsilon(1e-5));
  CHECK(std::hypot(Ab, Bb) == doctest::Approx(1.3425731803657877).epsilon(1e-12));
}

TEST_CASE("reduced difference formula") {
  RandomStream rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto p = random_params(rng);
    const auto c = solve_fourier_coeffs(p);
    const auto [Ab, Bb] = macro_coeffs(p);
    for (double t : {0.0, 0.21, 0.77, 1.5}) {
      const double diff = exact_mean(p, c, {c.A, c.C}, t)[0] - approx_mean(p, Ab, t);
      CHECK(std::abs(diff - reduced_mean_difference(p, t)) <= 1e-10);
    }
  }
}

TEST_CASE("L2 period error") {
  auto zero = [](double) { return 0.0; };
  auto s = [](double t) { return std::sin(2 * std::numbers::pi * t); };
  CHECK(l2_period_error(s, s, 0.0, 1.0, 64) == 0.0);
  CHECK(std::abs(l2_period_error(s, zero, 0.0, 1.0, 512) - std::sqrt(0.5)) <= 1e-4);
  CHECK_THROWS_AS(l2_period_error(s, zero, 0.0, 1.0, 32), std::invalid_argument);
}

TEST_CASE("exact versus averaged mean error is linear in eps") {
  PeriodicParams p;
  std::vector<double> eps = {0.2, 0.1, 0.05, 0.025};
  std::vector<double> err;
  for (double e : eps) {
    p.eps = e;
    const auto c = solve_fourier_coeffs(p);
    const auto [Ab, Bb] = macro_coeffs(p);
    err.push_back(l2_period_error([&](double t) { return exact_mean(p, c, {c.A, c.C}, t)[0]; },
                                  [&](double t) { return approx_mean(p, Ab, t); }, 0.0, 1.0));
  }
  CHECK(err[0] == doctest::Approx(0.24801).epsilon(1e-4));
  CHECK(err[3] == doctest::Approx(0.041121).epsilon(1e-4));
  for (std::size_t i = 1; i < err.size(); ++i) CHECK(err[i] < err[i - 1]);
  CHECK(fit_order(eps, err) == doctest::Approx(1.0).epsilon(0.15));
  for (double e = 0.01; e <= 0.2; e *= 1.5) {
    p.eps = e;
    const auto c = solve_fourier_coeffs(p);
    const auto [Ab, Bb] = macro_coeffs(p);
    const double r =
        l2_period_error([&](double t) { return exact_mean(p, c, {c.A, c.C}, t)[0]; },
                        [&](double t) { return approx_mean(p, Ab, t); }, 0.0, 1.0) /
        e;
    CHECK(r > 0.5);
    CHECK(r < 2.0);
  }
}

TEST_CASE("order fitting") {
  const std::vector<double> x = {0.1, 0.2, 0.4, 0.8};
  std::vector<double> e1, e2;
  for (double v : x) {
    e1.push_back(3.0 * v);
    e2.push_back(0.5 * v * v);
  }
  CHECK(std::abs(fit_order(x, e1) - 1.0) < 1e-12);
  CHECK(std::abs(fit_order(x, e2) - 2.0) < 1e-12);
  const std::vector<double> bad = {1.0, 0.0, 2.0, 3.0};
  CHECK_THROWS_AS(fit_order(x, bad), std::invalid_argument);
  CHECK_THROWS_AS(fit_order(std::vector<double>{1, 2}, std::vector<double>{1, 2}),
                  std::invalid_argument);
}

TEST_CASE("crossover bisection") {
  const double c = 0.003, mstar = 7.3;
  auto f = [&](double m) { return c * m * m; };
  const auto r = find_crossover(f, c * mstar * mstar, 1.0, 100.0, 1e-9);
  CHECK(std::abs(r.m_max - mstar) < 1e-6);
  CHECK(r.iterations <= 60);
  const auto coarse = find_crossover(f, c * mstar * mstar, 1.0, 100.0);
  CHECK(std::abs(std::log(coarse.m_max / mstar)) < 1e-2);
  CHECK_THROWS_AS(find_crossover(f, c * 1000 * 1000, 1.0, 100.0), std::domain_error);
}
