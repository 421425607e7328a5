#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "mmaccel/ensemble.hpp"

namespace mmaccel {

/// Lagrange multipliers lambda_0..lambda_L of the exponential tilt.
struct Multipliers {
  std::vector<double> lambda;
};

struct MatchConfig {
  /// Newton stops once the 2-norm of the dual residual drops below tol.
  double tol = 1e-9;
  /// Newton updates allowed before declaring a matching failure.
  int max_iter = 6;

  void validate() const;
};

struct MatchOutcome {
  Multipliers multipliers;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

/// Returned instead of an ensemble when the target is not reachable from the
/// prior within the iteration budget.
struct MatchingFailure {
  MatchOutcome outcome;
};

using MatchResult = std::variant<Ensemble, MatchingFailure>;

/// Dual system of the entropy-minimizing match over a fixed prior. The state
/// functions are evaluated once; residual and Jacobian then cost O(J L^2).
class DualProblem {
 public:
  DualProblem(const Ensemble& prior, const StateFunctions& R);

  std::size_t size() const noexcept { return width_; }

  /// g_l = m_l - sum_j R_l(X_j) exp(lambda . R(X_j)) w_j.
  /// Returns false when any intermediate is non-finite.
  bool residual(std::span<const double> m, std::span<const double> lambda,
                std::span<double> g) const;

  /// g and its Jacobian dg_l/dlambda_k = -sum_j R_k R_l exp(lambda . R) w_j
  /// (row-major, symmetric) in a single pass.
  bool residual_and_jacobian(std::span<const double> m, std::span<const double> lambda,
                             std::span<double> g, std::span<double> jac) const;

  /// Normalized tilted weights exp(lambda . R(X_j)) w_j / Z.
  std::vector<double> tilted_weights(std::span<const double> lambda) const;

 private:
  std::size_t size_j() const noexcept { return weights_.size(); }
  std::size_t width_;
  std::vector<double> features_;
  std::vector<double> weights_;
};

std::vector<double> dual_residual(const Ensemble& prior, const StateFunctions& R,
                                  const MacroState& m, const Multipliers& lam);

/// (L+1) x (L+1) row-major.
std::vector<double> dual_jacobian(const Ensemble& prior, const StateFunctions& R,
                                  const Multipliers& lam);

/// Plain Newton-Raphson from lambda = 0. Never throws on non-convergence:
/// divergence, a singular Jacobian or exhausting max_iter all come back as
/// converged == false.
MatchOutcome newton_solve(const Ensemble& prior, const StateFunctions& R, const MacroState& m,
                          const MatchConfig& cfg);

/// Prior reweighted by exp(sum_m lambda_m R_m) and renormalized. Positions are
/// untouched; lambda == 0 returns the prior weights bit for bit.
Ensemble reweight(const Ensemble& prior, const Multipliers& lam, const StateFunctions& R);

/// Matched ensemble (when converged) together with the solver outcome.
struct MatchReport {
  MatchOutcome outcome;
  std::optional<Ensemble> ensemble;
};
MatchReport match_report(const Ensemble& prior, const StateFunctions& R, const MacroState& m,
                         const MatchConfig& cfg);

/// Entropy-minimizing match of the prior to the target macroscopic state.
MatchResult match(const Ensemble& prior, const StateFunctions& R, const MacroState& m,
                  const MatchConfig& cfg);

/// Solves A x = b in place by LU with partial pivoting (A row-major n x n).
/// Returns false if a pivot magnitude falls below `pivot_tol`.
bool lu_solve(std::vector<double> a, std::span<double> b, double pivot_tol = 1e-13);

}  // namespace mmaccel
