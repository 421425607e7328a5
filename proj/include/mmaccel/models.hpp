#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mmaccel/ensemble.hpp"
#include "mmaccel/random.hpp"
#include "mmaccel/sde.hpp"

namespace mmaccel::models {

// ---------------------------------------------------------------------------
// FENE dumbbells

/// 100 t (1 - t) exp(-4 t).
double hysteresis_velocity_gradient(double t);

struct FeneParams {
  double we = 1.0;
  double b = 7.0;
  std::function<double(double)> kappa = hysteresis_velocity_gradient;

  void validate() const;
};

/// Spring force b^2 x / (b^2 - x^2) on the open interval (-b, b).
double fene_force(double x, double b);

/// dX = (kappa(t) X - F(X) / (2 We)) dt + We^{-1/2} dW on |X| < b.
SdeModel fene_model(const FeneParams& p);

/// tau = (E[X F(X)] - 1) / We.
double fene_stress(const Ensemble& ens, const FeneParams& p);

/// Macroscopic state functions for FENE.
///   1: x^2, x^4, ..., x^{2L}
///   2: x^2, ..., x^{2(L-1)}, x F(x)/We - 1/We
///   3: x^2, x^2/(1-x^2/b^2) - 1, x^2/(1-x^2/b^2)^2, x^2/(1-x^2/b^2)^3  (L = 4 only)
StateFunctions fene_hierarchy(int which, std::size_t L, const FeneParams& p);

/// J independent draws from the kappa = 0 invariant density, proportional to
/// (1 - x^2/b^2)^{b^2/2} for every We.
Ensemble fene_equilibrium_ensemble(const FeneParams& p, std::size_t count, RandomStream& rng);

// ---------------------------------------------------------------------------
// Three-atom molecule: atom A at (x_a, 0), B at the origin, C at (x_c, y_c).
// State vector (x_a, x_c, y_c).

struct ThreeAtomParams {
  double beta = 1.0;
  double eps = 1e-3;
  double k = 208.0;
  double theta_saddle = std::numbers::pi / 2;
  double delta_theta = std::numbers::pi / 2 - 1.1187;
  double l_eq = 1.0;

  void validate() const;
};

/// Bond stretching plus a double well in the bond angle with minima at
/// theta_saddle +/- delta_theta.
double three_atom_potential(const ThreeAtomParams& p, std::span<const double> x);
void three_atom_gradient(const ThreeAtomParams& p, std::span<const double> x,
                         std::span<double> grad);

/// Overdamped Langevin dynamics dX = -grad V dt + sqrt(2/beta) dW.
SdeModel three_atom_model(const ThreeAtomParams& p);

/// Point mass with both bonds at l_eq and the given bond angle.
Ensemble three_atom_configuration(const ThreeAtomParams& p, double theta, std::size_t count);

/// Scalar reaction coordinate with the derivatives needed by the effective
/// dynamics.
struct ReactionCoordinate {
  std::string name;
  std::function<double(std::span<const double>)> value;
  std::function<void(std::span<const double>, std::span<double>)> gradient;
  std::function<double(std::span<const double>)> laplacian;
};

/// xi_1 = theta = atan2(y_c, x_c); throws std::domain_error at the origin.
ReactionCoordinate bond_angle();
/// xi_2 = |A - C|^2 = (x_a - x_c)^2 + y_c^2.
ReactionCoordinate end_to_end_squared();
std::pair<ReactionCoordinate, ReactionCoordinate> reaction_coordinates();

/// Long-run sampling of the invariant measure used to tabulate the
/// effective drift and diffusion.
struct EffectiveSamplerConfig {
  double dt = 1e-4;
  double inverse_temperature = 1.0;
  std::size_t chains = 100;
  std::size_t burn_in_steps = 100000;
  /// Retained samples over all chains.
  std::size_t samples = 1000000;
  std::size_t thin = 10;
  /// Chains are grouped for batch-mean standard errors.
  std::size_t groups = 10;
  /// Initial angles for the chains, spread uniformly over this interval.
  double theta_lo = 0.3;
  double theta_hi = std::numbers::pi - 0.3;
};

struct EffectiveDynamicsTable {
  std::vector<double> grid;
  std::vector<double> drift_b;
  std::vector<double> diffusion_sigma;
  /// Diagnostics from the build (empty when read from CSV).
  std::vector<std::size_t> counts;
  std::vector<double> drift_se;
  std::vector<double> sigma_sq_se;

  void validate() const;
  /// Linear interpolation between nodes, constant beyond the end nodes.
  double b(double z) const;
  double sigma(double z) const;
};

/// Thrown when too many grid bins inside the sampled range received no samples.
class SamplingInsufficient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bins samples of the invariant measure by xi onto n_bins cells of
/// [grid_min, grid_max] (nodes at cell centers) and averages
///   b(z)       = E[ drift . grad xi + beta^{-1} lap xi | xi = z ]
///   sigma(z)^2 = E[ |grad xi|^2 | xi = z ].
/// The model drift plays the role of -grad V. Empty cells take the value of
/// the nearest populated cell.
EffectiveDynamicsTable build_effective_table(const SdeModel& model, const ReactionCoordinate& xi,
                                             double grid_min, double grid_max,
                                             std::size_t n_bins, const Ensemble& chain_start,
                                             const EffectiveSamplerConfig& cfg,
                                             std::uint64_t seed);

/// Convenience overload for the three-atom molecule: chains start with both
/// bonds at l_eq and angles spread over [theta_lo, theta_hi].
EffectiveDynamicsTable build_effective_table(const ThreeAtomParams& p,
                                             const ReactionCoordinate& xi, double grid_min,
                                             double grid_max, std::size_t n_bins,
                                             const EffectiveSamplerConfig& cfg,
                                             std::uint64_t seed);

/// dz = b(z) dt + sqrt(2/beta) sigma(z) dW.
SdeModel effective_model(const EffectiveDynamicsTable& table, double beta);

void write_effective_table_csv(std::ostream& out, const EffectiveDynamicsTable& table);
EffectiveDynamicsTable read_effective_table_csv(std::istream& in);

// ---------------------------------------------------------------------------
// Slow-fast systems, state (x, y).

struct SlowFastParams {
  double eps = 0.1;
  void validate() const;
};

/// dX = -(2X + Y) dt + 0.1 dW_x,  dY = (Y - Y^3)/eps dt + eps^{-1/2} dW_y.
SdeModel bimodal_model(const SlowFastParams& p);
/// Averaged slow model dX = -2X dt + 0.1 dW.
SdeModel bimodal_macro();

/// dX = (-lam (X + Y) + E sin(a t)) dt + dW_x,  dY = (X - Y)/eps dt + eps^{-1/2} dW_y.
SdeModel linear_driven_model(double lam, double a, double e_amp, double eps);
/// Averaged model dX = (-2 lam X + E sin(a t)) dt + dW.
SdeModel linear_driven_macro(double lam, double a, double e_amp);

/// lam = 2, a = 2 pi, E = 10.
SdeModel periodic_model(const SlowFastParams& p);
SdeModel periodic_macro();

/// Stationary covariance of the noise-driven part of the linear driven
/// system (the periodic forcing only moves the mean). Row-major 2x2.
std::vector<double> linear_driven_covariance(double lam, double eps);

/// J draws from N(mean, cov) with cov 2x2 row-major.
Ensemble gaussian_ensemble(std::span<const double> mean, std::span<const double> cov,
                           std::size_t count, RandomStream& rng);

/// R(x) = x[coord]^power.
StateFunctions::Function coordinate_power(std::size_t coord, int power);

}  // namespace mmaccel::models
