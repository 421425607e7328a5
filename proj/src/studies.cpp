#include "mmaccel/studies.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mmaccel::studies {

namespace {

MmConfig mm_config(const MmKnobs& knobs, double dt, double dt_init, double dt_max,
                   double end_time) {
  MmConfig cfg;
  cfg.micro.dt = dt;
  cfg.micro.steps = knobs.K;
  cfg.dt_extrap_init = dt_init;
  cfg.dt_extrap_max = dt_max;
  cfg.end_time = end_time;
  cfg.match = knobs.match;
  cfg.resample_check_period = knobs.resample_period;
  cfg.entropy_threshold_fraction = knobs.entropy_fraction;
  return cfg;
}

std::size_t step_count(double end_time, double dt) {
  return static_cast<std::size_t>(std::llround(end_time / dt));
}

double coord0(std::span<const double> x) { return x[0]; }

}  // namespace

Estimate weighted_mean(const Ensemble& ens,
                       const std::function<double(std::span<const double>)>& f) {
  const std::size_t J = ens.size();
  std::vector<double> v(J);
  double mean = 0.0;
  for (std::size_t j = 0; j < J; ++j) {
    v[j] = f(ens.position(j));
    mean += ens.weight(j) * v[j];
  }
  double s2 = 0.0;
  for (std::size_t j = 0; j < J; ++j) {
    const double d = ens.weight(j) * (v[j] - mean);
    s2 += d * d;
  }
  return {mean, std::sqrt(s2)};
}

Estimate weighted_variance(const Ensemble& ens, std::size_t coord) {
  const double mu = ens.mean(coord);
  return weighted_mean(ens, [mu, coord](std::span<const double> x) {
    const double d = x[coord] - mu;
    return d * d;
  });
}

double interpolate(const std::vector<double>& t, const std::vector<double>& v, double x) {
  if (t.empty() || t.size() != v.size()) throw std::invalid_argument("interpolate: bad series");
  if (x <= t.front()) return v.front();
  if (x >= t.back()) return v.back();
  const auto it = std::upper_bound(t.begin(), t.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - t.begin());
  const double t0 = t[i - 1], t1 = t[i];
  if (t1 <= t0) return v[i];
  const double s = (x - t0) / (t1 - t0);
  return (1.0 - s) * v[i - 1] + s * v[i];
}

Distance l2_distance(const Series& a, const Series& b, double t0, double t1, std::size_t n_quad) {
  if (!(t1 > t0) || n_quad < 2) throw std::invalid_argument("l2_distance: bad interval");
  const double h = (t1 - t0) / static_cast<double>(n_quad);
  double d2 = 0.0, e2 = 0.0;
  for (std::size_t i = 0; i <= n_quad; ++i) {
    const double t = t0 + h * static_cast<double>(i);
    const double w = (i == 0 || i == n_quad) ? 0.5 * h : h;
    const double diff = interpolate(a.t, a.value, t) - interpolate(b.t, b.value, t);
    const double sa = interpolate(a.t, a.se, t);
    const double sb = interpolate(b.t, b.se, t);
    d2 += w * diff * diff;
    e2 += w * (sa * sa + sb * sb);
  }
  return {std::sqrt(d2), std::sqrt(e2)};
}

// ---------------------------------------------------------------------------
// Periodic system

namespace {

SdeModel periodic_sde(const oracle::PeriodicParams& p) {
  return models::linear_driven_model(p.lam, p.a, p.e_amp, p.eps);
}

StateFunctions periodic_states(int moments) {
  if (moments == 1) return StateFunctions({coord0}, {"x"});
  if (moments == 2) return StateFunctions({coord0, models::coordinate_power(0, 2)}, {"x", "x^2"});
  throw std::invalid_argument("periodic: moments must be 1 or 2");
}

}  // namespace

Ensemble periodic_initial_ensemble(const PeriodicConfig& cfg, std::uint64_t seed) {
  cfg.params.validate();
  const auto c = oracle::solve_fourier_coeffs(cfg.params);
  const std::vector<double> mean{c.A, c.C};
  const auto cov = models::linear_driven_covariance(cfg.params.lam, cfg.params.eps);
  RandomStream rng = RandomStream(mix64(seed)).child(0xC0FFEE);
  return models::gaussian_ensemble(mean, cov, cfg.particles, rng);
}

Series periodic_mm_path(const PeriodicConfig& cfg, double M, std::uint64_t seed,
                        std::vector<StepRecord>* records) {
  if (!(M >= static_cast<double>(cfg.mm.K)))
    throw std::invalid_argument("periodic: extrapolation factor below the burst length");
  const double dt = cfg.inner_step();
  const Ensemble init = periodic_initial_ensemble(cfg, seed);
  const StateFunctions R = periodic_states(cfg.moments);
  const MmConfig mc = mm_config(cfg.mm, dt, M * dt, M * dt, cfg.end_time);
  Series path;
  path.push(0.0, weighted_mean(init, coord0));
  run(periodic_sde(cfg.params), init, R, mc, seed,
                  [&](const StepRecord& r, const Ensemble& ens) {
                    if (records) records->push_back(r);
                    path.push(r.time_end, weighted_mean(ens, coord0));
                  });
  return path;
}

Series periodic_micro_path(const PeriodicConfig& cfg, std::uint64_t seed, std::size_t every) {
  const double dt = cfg.inner_step();
  RandomStream rng(mix64(seed));
  Series path;
  simulate(periodic_sde(cfg.params), periodic_initial_ensemble(cfg, seed), 0.0, dt,
           step_count(cfg.end_time, dt), rng,
           [&](double t, const Ensemble& ens) { path.push(t, weighted_mean(ens, coord0)); },
           every);
  return path;
}

double periodic_path_error(const PeriodicConfig& cfg, const Series& path) {
  const auto& p = cfg.params;
  const auto c = oracle::solve_fourier_coeffs(p);
  const double period = 2.0 * std::numbers::pi / p.a;
  const double t0 = cfg.end_time - period;
  if (t0 < 0.0) throw std::invalid_argument("periodic: end time shorter than one period");
  return oracle::l2_period_error(
      [&](double t) { return interpolate(path.t, path.value, t); },
      [&](double t) { return oracle::exact_mean(p, c, {c.A, c.C}, t)[0]; }, t0, period,
      cfg.n_quad);
}

double periodic_macro_error(const oracle::PeriodicParams& p, std::size_t n_quad) {
  const auto c = oracle::solve_fourier_coeffs(p);
  const auto [abar, bbar] = oracle::macro_coeffs(p);
  const double period = 2.0 * std::numbers::pi / p.a;
  return oracle::l2_period_error(
      [&](double t) { return c.A * std::cos(p.a * t) + c.B * std::sin(p.a * t); },
      [&](double t) { return abar * std::cos(p.a * t) + bbar * std::sin(p.a * t); }, 0.0, period,
      n_quad);
}

ConvergenceResult periodic_convergence(const PeriodicConfig& cfg, const std::vector<double>& ladder,
                                       std::uint64_t seed) {
  if (ladder.size() < 3) throw std::invalid_argument("convergence: need at least three steps");
  ConvergenceResult out;
  for (double M : ladder) {
    out.M.push_back(M);
    out.dt_extrap.push_back(M * cfg.inner_step());
    out.error.push_back(periodic_path_error(cfg, periodic_mm_path(cfg, M, seed)));
  }
  out.order = oracle::fit_order(out.dt_extrap, out.error);
  return out;
}

CrossoverResult periodic_crossover(const PeriodicConfig& cfg, double m_lo, double m_hi,
                                   double log_tol, std::uint64_t seed) {
  CrossoverResult out;
  out.eps = cfg.params.eps;
  out.macro_error = periodic_macro_error(cfg.params, cfg.n_quad);
  auto mm_error = [&](double M) {
    const double e = periodic_path_error(cfg, periodic_mm_path(cfg, M, seed));
    out.M_evaluated.push_back(M);
    out.mm_error.push_back(e);
    return e;
  };
  const auto res = oracle::find_crossover(mm_error, out.macro_error, m_lo, m_hi, log_tol);
  out.M_max = res.m_max;
  out.dt_max = res.m_max * cfg.inner_step();
  return out;
}

// ---------------------------------------------------------------------------
// Bimodal system

namespace {

Ensemble bimodal_start(const BimodalConfig& cfg, std::uint64_t seed) {
  const std::vector<double> p{cfg.x0, cfg.y0};
  if (cfg.initial_sd == 0.0) return Ensemble::point_mass(p, cfg.particles);
  const double v = cfg.initial_sd * cfg.initial_sd;
  const std::vector<double> cov{v, 0.0, 0.0, v};
  RandomStream rng = RandomStream(mix64(seed)).child(0xB1D0);
  return models::gaussian_ensemble(p, cov, cfg.particles, rng);
}

}  // namespace

Series bimodal_micro_variance(const BimodalConfig& cfg, std::uint64_t seed) {
  const double dt = cfg.inner_step();
  RandomStream rng(mix64(seed));
  Series s;
  simulate(models::bimodal_model({cfg.eps}), bimodal_start(cfg, seed), 0.0, dt,
           step_count(cfg.end_time, dt), rng,
           [&](double t, const Ensemble& ens) { s.push(t, weighted_variance(ens, 0)); },
           cfg.record_every);
  return s;
}

Series bimodal_macro_variance(const BimodalConfig& cfg, double macro_dt, std::uint64_t seed) {
  RandomStream rng(mix64(seed));
  // Slow marginal of the microscopic start.
  const Ensemble start = bimodal_start(cfg, seed);
  std::vector<double> xs(start.size());
  for (std::size_t j = 0; j < xs.size(); ++j) xs[j] = start.position(j)[0];
  Series s;
  simulate(models::bimodal_macro(), Ensemble::uniform(1, std::move(xs)), 0.0, macro_dt,
           step_count(cfg.end_time, macro_dt), rng,
           [&](double t, const Ensemble& ens) { s.push(t, weighted_variance(ens, 0)); },
           cfg.record_every);
  return s;
}

Series bimodal_mm_variance(const BimodalConfig& cfg, double M, std::uint64_t seed,
                           std::vector<StepRecord>* records) {
  const double dt = cfg.inner_step();
  const Ensemble init = bimodal_start(cfg, seed);
  const StateFunctions R({coord0, models::coordinate_power(0, 2)}, {"x", "x^2"});
  const MmConfig mc = mm_config(cfg.mm, dt, M * dt, M * dt, cfg.end_time);
  Series s;
  s.push(0.0, weighted_variance(init, 0));
  run(models::bimodal_model({cfg.eps}), init, R, mc, seed,
                  [&](const StepRecord& r, const Ensemble& ens) {
                    if (records) records->push_back(r);
                    s.push(r.time_end, weighted_variance(ens, 0));
                  });
  return s;
}

// ---------------------------------------------------------------------------
// FENE

namespace {

Ensemble fene_start(const FeneConfig& cfg, std::uint64_t seed) {
  if (cfg.equilibrium_start) {
    RandomStream rng = RandomStream(mix64(seed)).child(0xFE7E);
    return models::fene_equilibrium_ensemble(cfg.params, cfg.particles, rng);
  }
  const std::vector<double> p{cfg.x0};
  return Ensemble::point_mass(p, cfg.particles);
}

void record_fene(FeneSeries& s, const models::FeneParams& p, double t, const Ensemble& ens) {
  const double b = p.b, we = p.we;
  s.tau.push(t, weighted_mean(ens, [b, we](std::span<const double> x) {
               return (x[0] * models::fene_force(x[0], b) - 1.0) / we;
             }));
  s.m1.push(t, weighted_mean(ens, [](std::span<const double> x) { return x[0] * x[0]; }));
}

}  // namespace

FeneSeries fene_micro(const FeneConfig& cfg, std::uint64_t seed) {
  RandomStream rng(mix64(seed));
  FeneSeries s;
  simulate(models::fene_model(cfg.params), fene_start(cfg, seed), 0.0, cfg.dt,
           step_count(cfg.end_time, cfg.dt), rng,
           [&](double t, const Ensemble& ens) { record_fene(s, cfg.params, t, ens); },
           cfg.record_every);
  return s;
}

FeneSeries fene_mm(const FeneConfig& cfg, int hierarchy, std::size_t L, std::uint64_t seed,
                   std::vector<StepRecord>* records) {
  const Ensemble init = fene_start(cfg, seed);
  const StateFunctions R = models::fene_hierarchy(hierarchy, L, cfg.params);
  const double floor = static_cast<double>(cfg.mm.K) * cfg.dt;
  const MmConfig mc = mm_config(cfg.mm, cfg.dt, floor, cfg.M_max * cfg.dt, cfg.end_time);
  FeneSeries s;
  record_fene(s, cfg.params, 0.0, init);
  run(models::fene_model(cfg.params), init, R, mc, seed,
                  [&](const StepRecord& r, const Ensemble& ens) {
                    if (records) records->push_back(r);
                    record_fene(s, cfg.params, r.time_end, ens);
                  });
  return s;
}

// ---------------------------------------------------------------------------
// Three-atom molecule

namespace {

void record_triatom(TriatomSeries& s, double t, const Ensemble& ens) {
  static const auto xi = models::reaction_coordinates();
  s.theta.push(t, weighted_mean(ens, xi.first.value));
  s.xi2.push(t, weighted_mean(ens, xi.second.value));
}

}  // namespace

Ensemble triatom_initial_ensemble(const TriatomConfig& cfg) {
  return models::three_atom_configuration(cfg.params, cfg.theta0, cfg.particles);
}

TriatomSeries triatom_micro(const TriatomConfig& cfg, std::uint64_t seed) {
  RandomStream rng(mix64(seed));
  TriatomSeries s;
  simulate(models::three_atom_model(cfg.params), triatom_initial_ensemble(cfg), 0.0, cfg.dt,
           step_count(cfg.end_time, cfg.dt), rng,
           [&](double t, const Ensemble& ens) { record_triatom(s, t, ens); }, cfg.record_every);
  return s;
}

Series triatom_effective(const TriatomConfig& cfg, const models::EffectiveDynamicsTable& table,
                         double z0, std::uint64_t seed) {
  RandomStream rng(mix64(seed));
  const std::vector<double> p{z0};
  Series s;
  simulate(models::effective_model(table, cfg.params.beta), Ensemble::point_mass(p, cfg.particles),
           0.0, cfg.dt, step_count(cfg.end_time, cfg.dt), rng,
           [&](double t, const Ensemble& ens) { s.push(t, weighted_mean(ens, coord0)); },
           cfg.record_every);
  return s;
}

TriatomSeries triatom_mm(const TriatomConfig& cfg, const StateFunctions& R, std::uint64_t seed,
                         std::vector<StepRecord>* records) {
  const Ensemble init = triatom_initial_ensemble(cfg);
  const double floor = static_cast<double>(cfg.mm.K) * cfg.dt;
  const MmConfig mc = mm_config(cfg.mm, cfg.dt, floor, cfg.M_max * cfg.dt, cfg.end_time);
  TriatomSeries s;
  record_triatom(s, 0.0, init);
  run(models::three_atom_model(cfg.params), init, R, mc, seed,
                  [&](const StepRecord& r, const Ensemble& ens) {
                    if (records) records->push_back(r);
                    record_triatom(s, r.time_end, ens);
                  });
  return s;
}

StateFunctions reaction_coordinate_states(const models::ReactionCoordinate& xi) {
  return StateFunctions({xi.value}, {xi.name});
}

StateFunctions triatom_moment_states() {
  return StateFunctions(
      {[](std::span<const double> x) { return x[1]; },
       [](std::span<const double> x) { return x[2]; },
       [](std::span<const double> x) { return x[1] * x[1]; },
       [](std::span<const double> x) { return x[2] * x[2]; }},
      {"x_c", "y_c", "x_c^2", "y_c^2"});
}

}  // namespace mmaccel::studies
