#include "mmaccel/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mmaccel/parallel.hpp"

namespace mmaccel {

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

bool all_zero(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

// Extra Newton steps taken after convergence while they keep shrinking the
// residual; they tighten the renormalized moments without touching the
// failure criterion.
constexpr int kPolishSteps = 2;

}  // namespace

void MatchConfig::validate() const {
  if (!(tol > 0.0)) throw std::invalid_argument("match: tol must be positive");
  if (max_iter < 1) throw std::invalid_argument("match: max_iter must be at least 1");
}

bool lu_solve(std::vector<double> a, std::span<double> b, double pivot_tol) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    }
    if (!(std::abs(a[piv * n + col]) >= pivot_tol)) return false;
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[piv * n + c]);
      std::swap(b[col], b[piv]);
    }
    const double p = a[col * n + col];
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / p;
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i * n + c] * b[c];
    b[i] = s / a[i * n + i];
  }
  return all_finite(b);
}

DualProblem::DualProblem(const Ensemble& prior, const StateFunctions& R)
    : width_(R.size()), features_(evaluate_features(prior, R)), weights_(prior.weights()) {}

bool DualProblem::residual(std::span<const double> m, std::span<const double> lambda,
                           std::span<double> g) const {
  const std::size_t w = width_;
  const auto sums = chunked_sum(size_j(), w, [&](std::size_t b, std::size_t e, double* acc) {
    for (std::size_t j = b; j < e; ++j) {
      const double* row = features_.data() + j * w;
      double s = 0.0;
      for (std::size_t l = 0; l < w; ++l) s += lambda[l] * row[l];
      const double tilt = std::exp(s) * weights_[j];
      for (std::size_t l = 0; l < w; ++l) acc[l] += row[l] * tilt;
    }
  });
  for (std::size_t l = 0; l < w; ++l) g[l] = m[l] - sums[l];
  return all_finite(g);
}

bool DualProblem::residual_and_jacobian(std::span<const double> m,
                                        std::span<const double> lambda, std::span<double> g,
                                        std::span<double> jac) const {
  const std::size_t w = width_;
  const std::size_t tri = w * (w + 1) / 2;
  const auto sums = chunked_sum(size_j(), w + tri, [&](std::size_t b, std::size_t e, double* acc) {
    double* hess = acc + w;
    for (std::size_t j = b; j < e; ++j) {
      const double* row = features_.data() + j * w;
      double s = 0.0;
      for (std::size_t l = 0; l < w; ++l) s += lambda[l] * row[l];
      const double tilt = std::exp(s) * weights_[j];
      std::size_t idx = 0;
      for (std::size_t k = 0; k < w; ++k) {
        const double rk = row[k] * tilt;
        acc[k] += rk;
        for (std::size_t l = k; l < w; ++l) hess[idx++] += rk * row[l];
      }
    }
  });
  for (std::size_t l = 0; l < w; ++l) g[l] = m[l] - sums[l];
  std::size_t idx = w;
  for (std::size_t k = 0; k < w; ++k) {
    for (std::size_t l = k; l < w; ++l) {
      jac[k * w + l] = -sums[idx];
      jac[l * w + k] = -sums[idx];
      ++idx;
    }
  }
  return all_finite(g) && all_finite(jac);
}

std::vector<double> DualProblem::tilted_weights(std::span<const double> lambda) const {
  const std::size_t w = width_;
  const std::size_t n = size_j();
  std::vector<double> expo(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double* row = features_.data() + j * w;
    double s = 0.0;
    for (std::size_t l = 0; l < w; ++l) s += lambda[l] * row[l];
    expo[j] = s;
  }
  // Shift by the largest exponent among live particles; the constant cancels
  // in the normalization.
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    if (weights_[j] > 0.0) shift = std::max(shift, expo[j]);
  }
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = weights_[j] > 0.0 ? std::exp(expo[j] - shift) * weights_[j] : 0.0;
  }
  return out;
}

std::vector<double> dual_residual(const Ensemble& prior, const StateFunctions& R,
                                  const MacroState& m, const Multipliers& lam) {
  if (m.size() != R.size() || lam.lambda.size() != R.size()) {
    throw std::invalid_argument("dual_residual: dimension mismatch");
  }
  DualProblem dual(prior, R);
  std::vector<double> g(R.size());
  dual.residual(m.values, lam.lambda, g);
  return g;
}

std::vector<double> dual_jacobian(const Ensemble& prior, const StateFunctions& R,
                                  const Multipliers& lam) {
  if (lam.lambda.size() != R.size()) throw std::invalid_argument("dual_jacobian: dimension mismatch");
  DualProblem dual(prior, R);
  const std::vector<double> zeros(R.size(), 0.0);
  std::vector<double> g(R.size()), jac(R.size() * R.size());
  dual.residual_and_jacobian(zeros, lam.lambda, g, jac);
  return jac;
}

namespace {

MatchOutcome solve(const DualProblem& dual, std::span<const double> m, const MatchConfig& cfg) {
  cfg.validate();
  const std::size_t w = dual.size();
  MatchOutcome out;
  out.multipliers.lambda.assign(w, 0.0);
  auto& lam = out.multipliers.lambda;
  std::vector<double> g(w), jac(w * w);

  bool finite = dual.residual_and_jacobian(m, lam, g, jac);
  out.residual = finite ? norm2(g) : std::numeric_limits<double>::infinity();
  if (!finite) return out;
  if (out.residual < cfg.tol) {
    out.converged = true;
    return out;
  }
  for (int it = 1; it <= cfg.max_iter; ++it) {
    std::vector<double> step = g;
    if (!lu_solve(jac, step)) return out;
    for (std::size_t l = 0; l < w; ++l) lam[l] -= step[l];
    out.iterations = it;
    finite = dual.residual_and_jacobian(m, lam, g, jac);
    if (!finite || !all_finite(lam)) {
      out.residual = std::numeric_limits<double>::infinity();
      return out;
    }
    out.residual = norm2(g);
    if (out.residual < cfg.tol) {
      out.converged = true;
      break;
    }
  }
  if (!out.converged) return out;

  for (int p = 0; p < kPolishSteps; ++p) {
    std::vector<double> step = g;
    if (!lu_solve(jac, step)) break;
    std::vector<double> trial = lam;
    for (std::size_t l = 0; l < w; ++l) trial[l] -= step[l];
    std::vector<double> g2(w), jac2(w * w);
    if (!dual.residual_and_jacobian(m, trial, g2, jac2)) break;
    const double r2 = norm2(g2);
    if (!(r2 < out.residual)) break;
    lam = std::move(trial);
    g = std::move(g2);
    jac = std::move(jac2);
    out.residual = r2;
  }
  return out;
}

}  // namespace

MatchOutcome newton_solve(const Ensemble& prior, const StateFunctions& R, const MacroState& m,
                          const MatchConfig& cfg) {
  if (m.size() != R.size()) throw std::invalid_argument("newton_solve: dimension mismatch");
  const DualProblem dual(prior, R);
  return solve(dual, m.values, cfg);
}

Ensemble reweight(const Ensemble& prior, const Multipliers& lam, const StateFunctions& R) {
  if (lam.lambda.size() != R.size()) throw std::invalid_argument("reweight: dimension mismatch");
  if (!all_finite(lam.lambda)) throw std::invalid_argument("reweight: non-finite multipliers");
  if (all_zero(lam.lambda)) return prior;
  const DualProblem dual(prior, R);
  return Ensemble::normalized(prior.dim(), prior.positions(), dual.tilted_weights(lam.lambda));
}

MatchReport match_report(const Ensemble& prior, const StateFunctions& R, const MacroState& m,
                         const MatchConfig& cfg) {
  if (m.size() != R.size()) throw std::invalid_argument("match: dimension mismatch");
  const DualProblem dual(prior, R);
  MatchReport report{solve(dual, m.values, cfg), std::nullopt};
  if (!report.outcome.converged) return report;
  if (all_zero(report.outcome.multipliers.lambda)) {
    report.ensemble = prior;
  } else {
    report.ensemble = Ensemble::normalized(prior.dim(), prior.positions(),
                                           dual.tilted_weights(report.outcome.multipliers.lambda));
  }
  return report;
}

MatchResult match(const Ensemble& prior, const StateFunctions& R, const MacroState& m,
                  const MatchConfig& cfg) {
  MatchReport report = match_report(prior, R, m, cfg);
  if (!report.ensemble) return MatchingFailure{std::move(report.outcome)};
  return std::move(*report.ensemble);
}

}  // namespace mmaccel
