#include "mmaccel/oracle.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mmaccel/matching.hpp"

namespace mmaccel::oracle {

void PeriodicParams::validate() const {
  if (!(lam > 0.0) || !std::isfinite(lam)) throw std::invalid_argument("lam must be positive");
  if (a == 0.0 || !std::isfinite(a)) throw std::invalid_argument("a must be nonzero");
  if (!(eps > 0.0) || !std::isfinite(eps)) throw std::invalid_argument("eps must be positive");
  if (!std::isfinite(e_amp)) throw std::invalid_argument("E must be finite");
}

FourierCoeffs solve_fourier_coeffs(const PeriodicParams& p) {
  p.validate();
  const double l = p.lam, a = p.a, ie = 1.0 / p.eps;
  std::vector<double> m = {-a,  l,   0.0, l,    //
                           l,   a,   l,   0.0,  //
                           0.0, -ie, -a,  ie,   //
                           -ie, 0.0, ie,  a};
  double rhs[4] = {p.e_amp, 0.0, 0.0, 0.0};
  if (!lu_solve(std::move(m), rhs)) {
    throw std::invalid_argument("Fourier coefficient system is singular");
  }
  return {rhs[0], rhs[1], rhs[2], rhs[3]};
}

std::array<double, 2> closed_form_ab(const PeriodicParams& p) {
  p.validate();
  const double l = p.lam, a = p.a, e = p.eps, E = p.e_amp;
  const double le1 = l * e - 1.0;
  const double den = a * a * le1 * le1 + 4.0 * l * l + a * a * a * a * e * e;
  return {E * (a * le1 - a * a * a * e * e) / den, E * l * (a * a * e * e + 2.0) / den};
}

std::array<double, 2> macro_coeffs(const PeriodicParams& p) {
  const double q = p.a * p.a + 4.0 * p.lam * p.lam;
  return {-p.a * p.e_amp / q, 2.0 * p.lam * p.e_amp / q};
}

std::array<double, 4> drift_matrix(const PeriodicParams& p) {
  return {-p.lam, -p.lam, 1.0 / p.eps, -1.0 / p.eps};
}

namespace {

std::array<double, 4> mul(const std::array<double, 4>& x, const std::array<double, 4>& y) {
  return {x[0] * y[0] + x[1] * y[2], x[0] * y[1] + x[1] * y[3],
          x[2] * y[0] + x[3] * y[2], x[2] * y[1] + x[3] * y[3]};
}

std::array<double, 4> expm_scaling_squaring(const std::array<double, 4>& m, double t) {
  std::array<double, 4> x = {m[0] * t, m[1] * t, m[2] * t, m[3] * t};
  double norm = 0.0;
  for (double v : x) norm = std::max(norm, std::abs(v));
  int s = 0;
  while (norm > 0.25) {
    norm *= 0.5;
    ++s;
  }
  const double scale = std::ldexp(1.0, -s);
  for (auto& v : x) v *= scale;
  std::array<double, 4> result = {1.0, 0.0, 0.0, 1.0};
  std::array<double, 4> term = result;
  for (int k = 1; k <= 20; ++k) {
    term = mul(term, x);
    for (auto& v : term) v /= k;
    for (int i = 0; i < 4; ++i) result[i] += term[i];
  }
  for (int i = 0; i < s; ++i) result = mul(result, result);
  return result;
}

}  // namespace

std::array<double, 4> expm2(const std::array<double, 4>& m, double t) {
  // With mu = tr/2 and disc = mu^2 - det, M - mu I squares to disc * I.
  const double mu = 0.5 * (m[0] + m[3]);
  const double det = m[0] * m[3] - m[1] * m[2];
  const double disc = mu * mu - det;
  if (std::abs(disc) < 1e-12 * std::max(1.0, mu * mu)) return expm_scaling_squaring(m, t);
  const double d = std::sqrt(std::abs(disc));
  double c, s;  // s is sinh(d t)/d or sin(d t)/d
  if (disc > 0.0) {
    // Factor the larger exponential out to stay finite for stiff M.
    const double ep = std::exp((mu + d) * t);
    const double em = std::exp((mu - d) * t);
    c = 0.5 * (ep + em);
    s = 0.5 * (ep - em) / d;
    return {c + s * (m[0] - mu), s * m[1], s * m[2], c + s * (m[3] - mu)};
  }
  const double g = std::exp(mu * t);
  c = g * std::cos(d * t);
  s = g * std::sin(d * t) / d;
  return {c + s * (m[0] - mu), s * m[1], s * m[2], c + s * (m[3] - mu)};
}

std::array<double, 2> exact_mean(const PeriodicParams& p, const FourierCoeffs& c,
                                 std::array<double, 2> mu0, double t) {
  if (t == 0.0) return mu0;
  const auto e = expm2(drift_matrix(p), t);
  const double u = mu0[0] - c.A;
  const double v = mu0[1] - c.C;
  const double ca = std::cos(p.a * t);
  const double sa = std::sin(p.a * t);
  return {e[0] * u + e[1] * v + c.A * ca + c.B * sa, e[2] * u + e[3] * v + c.C * ca + c.D * sa};
}

std::array<double, 2> exact_mean(const PeriodicParams& p, std::array<double, 2> mu0, double t) {
  return exact_mean(p, solve_fourier_coeffs(p), mu0, t);
}

double approx_mean(const PeriodicParams& p, double mu0x, double t) {
  if (t == 0.0) return mu0x;
  const auto [abar, bbar] = macro_coeffs(p);
  return (mu0x - abar) * std::exp(-2.0 * p.lam * t) + abar * std::cos(p.a * t) +
         bbar * std::sin(p.a * t);
}

double reduced_mean_difference(const PeriodicParams& p, double t) {
  const double l = p.lam, a = p.a, e = p.eps, E = p.e_amp;
  const double le1 = l * e - 1.0;
  const double den =
      (a * a * le1 * le1 + 4.0 * l * l + a * a * a * a * e * e) * (a * a + 4.0 * l * l);
  const double cos_num = 4.0 * l * l * l - a * a * l - 3.0 * a * a * l * l * e;
  const double sin_num = 4.0 * a * a * l - a * a * a * a * e + 2.0 * a * a * l * l * e;
  return e * a * E * cos_num / den * std::cos(a * t) + e * l * E * sin_num / den * std::sin(a * t);
}

double l2_period_error(const std::function<double(double)>& f,
                       const std::function<double(double)>& g, double t0, double period,
                       std::size_t n_quad) {
  if (n_quad < 64) throw std::invalid_argument("l2_period_error: n_quad must be at least 64");
  if (!(period > 0.0)) throw std::invalid_argument("l2_period_error: period must be positive");
  const double h = period / static_cast<double>(n_quad);
  double acc = 0.0;
  for (std::size_t i = 0; i <= n_quad; ++i) {
    const double t = t0 + h * static_cast<double>(i);
    const double d = f(t) - g(t);
    acc += (i == 0 || i == n_quad ? 0.5 : 1.0) * d * d;
  }
  return std::sqrt(acc * h);
}

double fit_order(std::span<const double> xs, std::span<const double> errs) {
  if (xs.size() != errs.size()) throw std::invalid_argument("fit_order: length mismatch");
  if (xs.size() < 3) throw std::invalid_argument("fit_order: need at least three points");
  const double n = static_cast<double>(xs.size());
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(errs[i] > 0.0) || !std::isfinite(xs[i]) || !std::isfinite(errs[i])) {
      throw std::invalid_argument("fit_order: inputs must be positive and finite");
    }
    sx += std::log(xs[i]);
    sy += std::log(errs[i]);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = std::log(xs[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(errs[i]) - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_order: abscissae are all equal");
  return sxy / sxx;
}

CrossoverResult find_crossover(const std::function<double(double)>& mm_error, double macro_error,
                               double m_lo, double m_hi, double log_tol) {
  if (!(m_lo > 0.0) || !(m_hi > m_lo)) {
    throw std::invalid_argument("find_crossover: need 0 < m_lo < m_hi");
  }
  if (!(log_tol > 0.0)) throw std::invalid_argument("find_crossover: tolerance must be positive");
  if (!(mm_error(m_lo) < macro_error) || !(mm_error(m_hi) > macro_error)) {
    throw std::domain_error("find_crossover: the error curve does not bracket the target");
  }
  double lo = std::log(m_lo), hi = std::log(m_hi);
  CrossoverResult r;
  while (hi - lo > log_tol && r.iterations < 200) {
    const double mid = 0.5 * (lo + hi);
    if (mm_error(std::exp(mid)) < macro_error) {
      lo = mid;
    } else {
      hi = mid;
    }
    ++r.iterations;
  }
  r.m_max = std::exp(0.5 * (lo + hi));
  return r;
}

}  // namespace mmaccel::oracle
