#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mmaccel/accelerator.hpp"
#include "mmaccel/models.hpp"
#include "mmaccel/oracle.hpp"

// Drivers for the benchmark studies. Each returns plain numbers so that the
// command-line runner and the acceptance checks share one implementation.
namespace mmaccel::studies {

/// Weighted mean of f over the ensemble with its delta-method standard error
/// sqrt(sum_j w_j^2 (f_j - mean)^2).
struct Estimate {
  double value = 0.0;
  double se = 0.0;
};
Estimate weighted_mean(const Ensemble& ens, const std::function<double(std::span<const double>)>& f);
/// Weighted variance of one coordinate with the same kind of standard error.
Estimate weighted_variance(const Ensemble& ens, std::size_t coord);

/// Scalar time series with pointwise standard errors.
struct Series {
  std::vector<double> t;
  std::vector<double> value;
  std::vector<double> se;

  void push(double time, Estimate e) {
    t.push_back(time);
    value.push_back(e.value);
    se.push_back(e.se);
  }
};

/// Piecewise-linear interpolation of a series (constant beyond its ends).
double interpolate(const std::vector<double>& t, const std::vector<double>& v, double x);

/// L2 distance over [t0, t1] between two piecewise-linear series, together
/// with the Monte Carlo error bar sqrt(int se_a^2 + se_b^2 dt).
struct Distance {
  double value = 0.0;
  double error_bar = 0.0;
};
Distance l2_distance(const Series& a, const Series& b, double t0, double t1,
                     std::size_t n_quad = 1000);

// Accelerated drivers take an optional `records` vector that is appended to
// as steps complete, so it still holds the finished steps if the run throws.

/// Shared accelerator knobs.
struct MmKnobs {
  std::size_t K = 1;
  MatchConfig match;
  std::size_t resample_period = 5;
  double entropy_fraction = 0.1;
};

// ---------------------------------------------------------------------------
// Periodically driven linear system

struct PeriodicConfig {
  oracle::PeriodicParams params;
  std::size_t particles = 100000;
  /// Inner step; 0 means eps / 10.
  double dt = 0.0;
  double end_time = 2.0;
  /// Extrapolate E[x] only (1) or E[x] and E[x^2] (2).
  int moments = 1;
  std::size_t n_quad = 512;
  MmKnobs mm;

  double inner_step() const { return dt > 0.0 ? dt : params.eps / 10.0; }
};

/// Gaussian ensemble centred on the invariant curve with the stationary
/// covariance of the noise.
Ensemble periodic_initial_ensemble(const PeriodicConfig& cfg, std::uint64_t seed);

/// Slow mean at every macro node of a run with fixed extrapolation step
/// M * dt (the first node is the initial state).
Series periodic_mm_path(const PeriodicConfig& cfg, double M, std::uint64_t seed,
                        std::vector<StepRecord>* records = nullptr);

/// Slow mean of a plain microscopic run, recorded every `every` steps.
Series periodic_micro_path(const PeriodicConfig& cfg, std::uint64_t seed, std::size_t every = 1);

/// L2 error of a slow-mean path against the exact mean over the last period
/// before cfg.end_time.
double periodic_path_error(const PeriodicConfig& cfg, const Series& path);

/// Error of the averaged model against the exact mean over one period, both
/// on their invariant curves.
double periodic_macro_error(const oracle::PeriodicParams& p, std::size_t n_quad = 512);

struct ConvergenceResult {
  std::vector<double> M;
  std::vector<double> dt_extrap;
  std::vector<double> error;
  double order = 0.0;
};
/// Runs the accelerator for every factor in the ladder with the same seed.
ConvergenceResult periodic_convergence(const PeriodicConfig& cfg, const std::vector<double>& ladder,
                                       std::uint64_t seed);

struct CrossoverResult {
  double eps = 0.0;
  double macro_error = 0.0;
  double M_max = 0.0;
  double dt_max = 0.0;
  std::vector<double> M_evaluated;
  std::vector<double> mm_error;
};
CrossoverResult periodic_crossover(const PeriodicConfig& cfg, double m_lo, double m_hi,
                                   double log_tol, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Bimodal slow-fast system

struct BimodalConfig {
  double eps = 0.1;
  std::size_t particles = 100000;
  /// 0 means eps / 10.
  double dt = 0.0;
  double end_time = 3.0;
  double x0 = 1.0;
  double y0 = 0.0;
  /// Standard deviation of the independent Gaussian spread around (x0, y0);
  /// 0 gives a point mass.
  double initial_sd = 0.05;
  std::size_t record_every = 10;
  MmKnobs mm;

  double inner_step() const { return dt > 0.0 ? dt : eps / 10.0; }
};

/// Variance of the slow component over time.
Series bimodal_micro_variance(const BimodalConfig& cfg, std::uint64_t seed);
/// Variance of the averaged model, integrated with step macro_dt.
Series bimodal_macro_variance(const BimodalConfig& cfg, double macro_dt, std::uint64_t seed);
/// Accelerator with R = (1, x, x^2) and a fixed step M * dt.
Series bimodal_mm_variance(const BimodalConfig& cfg, double M, std::uint64_t seed,
                           std::vector<StepRecord>* records = nullptr);

// ---------------------------------------------------------------------------
// FENE dumbbells

struct FeneConfig {
  models::FeneParams params;
  std::size_t particles = 50000;
  double dt = 2e-4;
  double end_time = 4.0;
  /// Extrapolation cap as a multiple of dt; the step starts at K dt and grows.
  double M_max = 5.0;
  /// Start from the kappa = 0 invariant law (true) or from a point mass.
  bool equilibrium_start = true;
  double x0 = 1.0;
  std::size_t record_every = 10;
  MmKnobs mm;
};

struct FeneSeries {
  Series tau;
  /// M_1 = E[X^2].
  Series m1;
};

FeneSeries fene_micro(const FeneConfig& cfg, std::uint64_t seed);
FeneSeries fene_mm(const FeneConfig& cfg, int hierarchy, std::size_t L, std::uint64_t seed,
                   std::vector<StepRecord>* records = nullptr);

// ---------------------------------------------------------------------------
// Three-atom molecule

struct TriatomConfig {
  models::ThreeAtomParams params;
  std::size_t particles = 50000;
  double dt = 1e-3;
  double end_time = 2.0;
  double theta0 = 1.1187;
  std::size_t record_every = 10;
  double M_max = 10.0;
  MmKnobs mm;
  /// Effective-table construction.
  double grid_min = 0.0;
  double grid_max = 5.0;
  std::size_t n_bins = 100;
  models::EffectiveSamplerConfig sampler;
};

/// Means of xi_1 = theta and xi_2 = |A - C|^2.
struct TriatomSeries {
  Series theta;
  Series xi2;
};

Ensemble triatom_initial_ensemble(const TriatomConfig& cfg);
TriatomSeries triatom_micro(const TriatomConfig& cfg, std::uint64_t seed);

/// Effective dynamics of one coordinate started from its value at the
/// initial configuration; returns the mean of the coordinate.
Series triatom_effective(const TriatomConfig& cfg, const models::EffectiveDynamicsTable& table,
                         double z0, std::uint64_t seed);

/// Accelerator extrapolating the mean of the given coordinate(s).
TriatomSeries triatom_mm(const TriatomConfig& cfg, const StateFunctions& R, std::uint64_t seed,
                         std::vector<StepRecord>* records = nullptr);

/// R = (xi) for one reaction coordinate.
StateFunctions reaction_coordinate_states(const models::ReactionCoordinate& xi);
/// R = (x_c, y_c, x_c^2, y_c^2).
StateFunctions triatom_moment_states();

}  // namespace mmaccel::studies
