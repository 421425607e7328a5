#include "mmaccel/sde.hpp"

#include <cmath>

#include "mmaccel/parallel.hpp"

namespace mmaccel {

void MicroConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("micro: dt must be positive");
  if (steps < 1) throw std::invalid_argument("micro: need at least one inner step");
}

Ensemble em_step(const SdeModel& model, const Ensemble& ens, double t, double dt,
                 RandomStream& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("em_step: dt must be positive");
  const std::size_t d = model.state_dim;
  const std::size_t n = model.noise_dim;
  if (ens.dim() != d) {
    throw std::invalid_argument("em_step: ensemble dimension " + std::to_string(ens.dim()) +
                                " does not match model '" + model.name + "' (" +
                                std::to_string(d) + ")");
  }
  const RandomStream base(rng());
  const double sqdt = std::sqrt(dt);
  std::vector<double> out(ens.positions().size());

  parallel_for(ens.size(), kDefaultChunk / 4, [&](std::size_t b, std::size_t e) {
    std::vector<double> drift(d), diff(d * n), xi(n);
    for (std::size_t j = b; j < e; ++j) {
      const auto x = ens.position(j);
      std::span<double> y(out.data() + j * d, d);
      if (!model.admissible(x)) {
        throw StepError(j, "em_step: particle " + std::to_string(j) +
                               " starts outside the domain of '" + model.name + "'");
      }
      model.drift(x, t, drift);
      model.diffusion(x, t, diff);
      RandomStream stream = base.child(j);
      int attempt = 0;
      for (;;) {
        stream.normals(std::span<double>(xi));
        for (std::size_t i = 0; i < d; ++i) {
          double noise = 0.0;
          for (std::size_t k = 0; k < n; ++k) noise += diff[i * n + k] * xi[k];
          y[i] = x[i] + drift[i] * dt + sqdt * noise;
        }
        if (model.admissible(y)) break;
        if (++attempt > kDomainRetries) {
          throw StepError(j, "em_step: particle " + std::to_string(j) + " left the domain of '" +
                                 model.name + "' after " + std::to_string(kDomainRetries) +
                                 " redraws");
        }
      }
    }
  });
  return ens.with_positions(std::move(out));
}

Burst simulate_burst(const SdeModel& model, const Ensemble& ens, double t, const MicroConfig& cfg,
                     const StateFunctions& R, RandomStream& rng) {
  cfg.validate();
  std::vector<MacroState> path;
  path.reserve(cfg.steps + 1);
  path.push_back(restrict_to_macro(ens, R, t));
  Ensemble cur = ens;
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    const double tk = t + static_cast<double>(k) * cfg.dt;
    cur = em_step(model, cur, tk, cfg.dt, rng);
    path.push_back(restrict_to_macro(cur, R, t + static_cast<double>(k + 1) * cfg.dt));
  }
  return Burst{std::move(cur), std::move(path)};
}

Ensemble simulate(const SdeModel& model, Ensemble ens, double t0, double dt, std::size_t steps,
                  RandomStream& rng, const EnsembleObserver& observer, std::size_t every) {
  every = every == 0 ? 1 : every;
  if (observer) observer(t0, ens);
  for (std::size_t k = 0; k < steps; ++k) {
    ens = em_step(model, ens, t0 + static_cast<double>(k) * dt, dt, rng);
    if (observer && ((k + 1) % every == 0 || k + 1 == steps)) {
      observer(t0 + static_cast<double>(k + 1) * dt, ens);
    }
  }
  return ens;
}

}  // namespace mmaccel
