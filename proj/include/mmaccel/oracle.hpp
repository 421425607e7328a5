#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>

namespace mmaccel::oracle {

/// Linear slow-fast system driven by E sin(a t):
///   dX = (-lam (X + Y) + E sin(a t)) dt + dW_x
///   dY = (X - Y) / eps dt + eps^{-1/2} dW_y
struct PeriodicParams {
  double lam = 2.0;
  double a = 2.0 * std::numbers::pi;
  double e_amp = 10.0;
  double eps = 0.05;

  void validate() const;
};

/// Coefficients of the periodic particular solution
///   mu(t) = (A, C) cos(a t) + (B, D) sin(a t).
struct FourierCoeffs {
  double A = 0.0, B = 0.0, C = 0.0, D = 0.0;
};

/// Solves the 4x4 linear system for (A, B, C, D) by pivoted LU.
/// Throws std::invalid_argument when the system is singular.
FourierCoeffs solve_fourier_coeffs(const PeriodicParams& p);

/// Closed forms for A and B alone.
std::array<double, 2> closed_form_ab(const PeriodicParams& p);

/// Averaged-model coefficients (eps = 0 limit): {-aE/(a^2+4lam^2), 2 lam E/(a^2+4lam^2)}.
std::array<double, 2> macro_coeffs(const PeriodicParams& p);

/// exp(t M) for a 2x2 matrix, row-major.
std::array<double, 4> expm2(const std::array<double, 4>& m, double t);

/// M = [[-lam, -lam], [1/eps, -1/eps]].
std::array<double, 4> drift_matrix(const PeriodicParams& p);

/// Mean of (X, Y) at time t from the initial mean mu0.
std::array<double, 2> exact_mean(const PeriodicParams& p, std::array<double, 2> mu0, double t);
/// Same, with the coefficients already solved.
std::array<double, 2> exact_mean(const PeriodicParams& p, const FourierCoeffs& c,
                                 std::array<double, 2> mu0, double t);

/// Mean of the averaged model dX = (-2 lam X + E sin(a t)) dt + dW.
double approx_mean(const PeriodicParams& p, double mu0x, double t);

/// Difference of the periodic parts of the exact and averaged means, written
/// in the reduced form that exhibits the factor eps.
double reduced_mean_difference(const PeriodicParams& p, double t);

/// sqrt(int_{t0}^{t0+period} (f - g)^2 dt) by the composite trapezoid rule on
/// n_quad + 1 nodes. Requires n_quad >= 64.
double l2_period_error(const std::function<double(double)>& f,
                       const std::function<double(double)>& g, double t0, double period,
                       std::size_t n_quad = 512);

/// Least-squares slope of log(err) against log(x). Needs at least three
/// points, all positive.
double fit_order(std::span<const double> xs, std::span<const double> errs);

/// Bisection in log M for mm_error(M) = macro_error. Requires
/// mm_error(m_lo) < macro_error < mm_error(m_hi); stops when the log-bracket is
/// narrower than log_tol. Returns the geometric midpoint of the final bracket.
struct CrossoverResult {
  double m_max = 0.0;
  std::size_t iterations = 0;
};
CrossoverResult find_crossover(const std::function<double(double)>& mm_error, double macro_error,
                               double m_lo, double m_hi, double log_tol = 1e-2);

}  // namespace mmaccel::oracle
