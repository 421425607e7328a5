#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmaccel/ensemble.hpp"
#include "mmaccel/random.hpp"

namespace mmaccel {

/// dX = a(X, t) dt + b(X, t) dW on an admissible domain G in R^d, with an
/// n-dimensional Brownian motion W.
struct SdeModel {
  using Drift = std::function<void(std::span<const double> x, double t, std::span<double> out)>;
  /// Writes the d x n diffusion matrix row-major into `out`.
  using Diffusion = Drift;
  using Domain = std::function<bool(std::span<const double> x)>;

  std::string name;
  std::size_t state_dim = 1;
  std::size_t noise_dim = 1;
  Drift drift;
  Diffusion diffusion;
  /// Empty means the whole space is admissible.
  Domain domain;

  bool admissible(std::span<const double> x) const { return !domain || domain(x); }
};

/// Raised when a particle cannot be kept inside the admissible domain.
class StepError : public std::runtime_error {
 public:
  StepError(std::size_t particle, const std::string& what)
      : std::runtime_error(what), particle_(particle) {}
  std::size_t particle() const noexcept { return particle_; }

 private:
  std::size_t particle_;
};

/// K inner Euler-Maruyama steps of size dt.
struct MicroConfig {
  double dt = 1e-3;
  std::size_t steps = 1;

  double burst_length() const { return dt * static_cast<double>(steps); }
  void validate() const;
};

/// Proposals leaving the domain are redrawn this many times before failing.
inline constexpr int kDomainRetries = 100;

/// One Euler-Maruyama step of every particle:
///   X <- X + a(X, t) dt + sqrt(dt) b(X, t) xi,  xi ~ N(0, I_n).
/// A single key is drawn from `rng`; particle j then uses its own child
/// stream, so the result does not depend on the thread count. Weights are
/// carried over unchanged.
Ensemble em_step(const SdeModel& model, const Ensemble& ens, double t, double dt,
                 RandomStream& rng);

struct Burst {
  Ensemble final;
  /// Restrictions at t, t + dt, ..., t + K dt (K + 1 entries).
  std::vector<MacroState> macro_path;
};

/// K chained em_step calls with the state functions restricted after every step.
Burst simulate_burst(const SdeModel& model, const Ensemble& ens, double t, const MicroConfig& cfg,
                     const StateFunctions& R, RandomStream& rng);

/// Plain microscopic integration over `steps` steps. The observer (if set) is
/// called with (time, ensemble) at the start and after every `every`-th step
/// and at the final step.
using EnsembleObserver = std::function<void(double, const Ensemble&)>;
Ensemble simulate(const SdeModel& model, Ensemble ens, double t0, double dt, std::size_t steps,
                  RandomStream& rng, const EnsembleObserver& observer = {},
                  std::size_t every = 1);

}  // namespace mmaccel
