#include "mmaccel/models.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "mmaccel/csv.hpp"
#include "mmaccel/parallel.hpp"

namespace mmaccel::models {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

std::string fmt_power(const char* var, int p) {
  return p == 1 ? std::string(var) : std::string(var) + "^" + std::to_string(p);
}

}  // namespace

// ---------------------------------------------------------------------------
// FENE

double hysteresis_velocity_gradient(double t) { return 100.0 * t * (1.0 - t) * std::exp(-4.0 * t); }

void FeneParams::validate() const {
  require(we > 0.0 && std::isfinite(we), "FENE: We must be positive");
  require(b > 0.0 && std::isfinite(b), "FENE: b must be positive");
  require(static_cast<bool>(kappa), "FENE: velocity gradient is not set");
}

double fene_force(double x, double b) {
  const double b2 = b * b;
  return b2 * x / (b2 - x * x);
}

SdeModel fene_model(const FeneParams& p) {
  p.validate();
  SdeModel m;
  m.name = "fene";
  m.state_dim = 1;
  m.noise_dim = 1;
  const double we = p.we;
  const double b = p.b;
  auto kappa = p.kappa;
  m.drift = [we, b, kappa](std::span<const double> x, double t, std::span<double> out) {
    out[0] = kappa(t) * x[0] - fene_force(x[0], b) / (2.0 * we);
  };
  const double s = 1.0 / std::sqrt(we);
  m.diffusion = [s](std::span<const double>, double, std::span<double> out) { out[0] = s; };
  m.domain = [b](std::span<const double> x) { return std::abs(x[0]) < b; };
  return m;
}

double fene_stress(const Ensemble& ens, const FeneParams& p) {
  require(ens.dim() == 1, "fene_stress: ensemble must be one-dimensional");
  double acc = 0.0;
  for (std::size_t j = 0; j < ens.size(); ++j) {
    const double x = ens.position(j)[0];
    if (!(std::abs(x) < p.b)) throw std::domain_error("fene_stress: particle outside |x| < b");
    acc += ens.weight(j) * x * fene_force(x, p.b);
  }
  return (acc - 1.0) / p.we;
}

StateFunctions fene_hierarchy(int which, std::size_t L, const FeneParams& p) {
  p.validate();
  require(L >= 1, "FENE hierarchy: L must be at least 1");
  std::vector<StateFunctions::Function> fs;
  std::vector<std::string> labels;
  const double b = p.b;
  const double we = p.we;
  auto even_moment = [](int k) {
    return [k](std::span<const double> x) {
      const double x2 = x[0] * x[0];
      double v = x2;
      for (int i = 1; i < k; ++i) v *= x2;
      return v;
    };
  };
  switch (which) {
    case 1:
      for (std::size_t k = 1; k <= L; ++k) {
        fs.push_back(even_moment(static_cast<int>(k)));
        labels.push_back(fmt_power("x", 2 * static_cast<int>(k)));
      }
      break;
    case 2:
      for (std::size_t k = 1; k < L; ++k) {
        fs.push_back(even_moment(static_cast<int>(k)));
        labels.push_back(fmt_power("x", 2 * static_cast<int>(k)));
      }
      fs.emplace_back([b, we](std::span<const double> x) {
        return (x[0] * fene_force(x[0], b) - 1.0) / we;
      });
      labels.emplace_back("tau");
      break;
    case 3: {
      if (L != 4) {
        throw std::invalid_argument("FENE hierarchy 3 is defined for L = 4 only");
      }
      const double b2 = b * b;
      fs.emplace_back([](std::span<const double> x) { return x[0] * x[0]; });
      for (int k = 1; k <= 3; ++k) {
        fs.emplace_back([b2, k](std::span<const double> x) {
          const double x2 = x[0] * x[0];
          const double v = x2 / std::pow(1.0 - x2 / b2, k);
          return k == 1 ? v - 1.0 : v;
        });
      }
      labels = {"x^2", "x^2/(1-x^2/b^2)-1", "x^2/(1-x^2/b^2)^2", "x^2/(1-x^2/b^2)^3"};
      break;
    }
    default:
      throw std::invalid_argument("FENE hierarchy must be 1, 2 or 3");
  }
  return StateFunctions(std::move(fs), std::move(labels));
}

Ensemble fene_equilibrium_ensemble(const FeneParams& p, std::size_t count, RandomStream& rng) {
  p.validate();
  require(count >= 1, "ensemble size must be positive");
  // x = b (2B - 1) with B ~ Beta(b^2/2 + 1, b^2/2 + 1).
  const double shape = p.b * p.b / 2.0 + 1.0;
  std::gamma_distribution<double> gamma(shape, 1.0);
  std::vector<double> pos(count);
  for (auto& x : pos) {
    do {
      const double g1 = gamma(rng);
      const double g2 = gamma(rng);
      x = p.b * (g1 - g2) / (g1 + g2);
    } while (!(std::abs(x) < p.b));
  }
  return Ensemble::uniform(1, std::move(pos));
}

// ---------------------------------------------------------------------------
// Three-atom molecule

void ThreeAtomParams::validate() const {
  require(beta > 0.0, "three-atom: beta must be positive");
  require(eps > 0.0, "three-atom: eps must be positive");
  require(k > 0.0, "three-atom: k must be positive");
  require(l_eq > 0.0, "three-atom: l_eq must be positive");
}

double three_atom_potential(const ThreeAtomParams& p, std::span<const double> x) {
  const double r = std::hypot(x[1], x[2]);
  const double s = std::atan2(x[2], x[1]) - p.theta_saddle;
  const double u = s * s - p.delta_theta * p.delta_theta;
  const double da = x[0] - p.l_eq;
  const double dr = r - p.l_eq;
  return (da * da + dr * dr) / (2.0 * p.eps) + 0.5 * p.k * u * u;
}

void three_atom_gradient(const ThreeAtomParams& p, std::span<const double> x,
                         std::span<double> grad) {
  const double xc = x[1];
  const double yc = x[2];
  const double r2 = xc * xc + yc * yc;
  const double r = std::sqrt(r2);
  const double s = std::atan2(yc, xc) - p.theta_saddle;
  const double dv_dtheta = 2.0 * p.k * s * (s * s - p.delta_theta * p.delta_theta);
  const double dv_dr = (r - p.l_eq) / p.eps;
  grad[0] = (x[0] - p.l_eq) / p.eps;
  grad[1] = dv_dr * xc / r - dv_dtheta * yc / r2;
  grad[2] = dv_dr * yc / r + dv_dtheta * xc / r2;
}

SdeModel three_atom_model(const ThreeAtomParams& p) {
  p.validate();
  SdeModel m;
  m.name = "three_atom";
  m.state_dim = 3;
  m.noise_dim = 3;
  m.drift = [p](std::span<const double> x, double, std::span<double> out) {
    three_atom_gradient(p, x, out);
    for (auto& v : out) v = -v;
  };
  const double s = std::sqrt(2.0 / p.beta);
  m.diffusion = [s](std::span<const double>, double, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    out[0] = out[4] = out[8] = s;
  };
  m.domain = [](std::span<const double> x) { return x[1] != 0.0 || x[2] != 0.0; };
  return m;
}

Ensemble three_atom_configuration(const ThreeAtomParams& p, double theta, std::size_t count) {
  const double pt[3] = {p.l_eq, p.l_eq * std::cos(theta), p.l_eq * std::sin(theta)};
  return Ensemble::point_mass(pt, count);
}

ReactionCoordinate bond_angle() {
  ReactionCoordinate rc;
  rc.name = "theta";
  auto check = [](std::span<const double> x) {
    if (x[1] == 0.0 && x[2] == 0.0) throw std::domain_error("bond angle undefined at the origin");
  };
  rc.value = [check](std::span<const double> x) {
    check(x);
    return std::atan2(x[2], x[1]);
  };
  rc.gradient = [check](std::span<const double> x, std::span<double> g) {
    check(x);
    const double r2 = x[1] * x[1] + x[2] * x[2];
    g[0] = 0.0;
    g[1] = -x[2] / r2;
    g[2] = x[1] / r2;
  };
  // atan2 is harmonic in the plane.
  rc.laplacian = [check](std::span<const double> x) {
    check(x);
    return 0.0;
  };
  return rc;
}

ReactionCoordinate end_to_end_squared() {
  ReactionCoordinate rc;
  rc.name = "end_to_end_sq";
  rc.value = [](std::span<const double> x) {
    const double dx = x[0] - x[1];
    return dx * dx + x[2] * x[2];
  };
  rc.gradient = [](std::span<const double> x, std::span<double> g) {
    const double dx = x[0] - x[1];
    g[0] = 2.0 * dx;
    g[1] = -2.0 * dx;
    g[2] = 2.0 * x[2];
  };
  rc.laplacian = [](std::span<const double>) { return 6.0; };
  return rc;
}

std::pair<ReactionCoordinate, ReactionCoordinate> reaction_coordinates() {
  return {bond_angle(), end_to_end_squared()};
}

// ---------------------------------------------------------------------------
// Effective dynamics

void EffectiveDynamicsTable::validate() const {
  require(!grid.empty(), "effective table: empty grid");
  require(drift_b.size() == grid.size() && diffusion_sigma.size() == grid.size(),
          "effective table: column lengths differ");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    require(grid[i] > grid[i - 1], "effective table: grid must be strictly increasing");
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    require(std::isfinite(grid[i]) && std::isfinite(drift_b[i]) &&
                std::isfinite(diffusion_sigma[i]),
            "effective table: non-finite entry");
    require(diffusion_sigma[i] >= 0.0, "effective table: negative sigma");
  }
}

namespace {

double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double z) {
  if (z <= xs.front()) return ys.front();
  if (z >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), z);
  const std::size_t i = static_cast<std::size_t>(it - xs.begin());
  const double t = (z - xs[i - 1]) / (xs[i] - xs[i - 1]);
  if (t == 0.0) return ys[i - 1];
  return ys[i - 1] + t * (ys[i] - ys[i - 1]);
}

struct BinAccumulator {
  std::vector<double> count, sum_b, sum_s2;
  explicit BinAccumulator(std::size_t n) : count(n, 0.0), sum_b(n, 0.0), sum_s2(n, 0.0) {}
};

// Standard error of the pooled mean from per-group means (batch means).
double batch_se(const std::vector<BinAccumulator>& groups, std::size_t bin, bool drift) {
  std::vector<double> means;
  for (const auto& g : groups) {
    if (g.count[bin] > 0.0) {
      means.push_back((drift ? g.sum_b[bin] : g.sum_s2[bin]) / g.count[bin]);
    }
  }
  if (means.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double mean = 0.0;
  for (double m : means) mean += m;
  mean /= static_cast<double>(means.size());
  double ss = 0.0;
  for (double m : means) ss += (m - mean) * (m - mean);
  const double n = static_cast<double>(means.size());
  return std::sqrt(ss / (n - 1.0) / n);
}

}  // namespace

double EffectiveDynamicsTable::b(double z) const { return interpolate(grid, drift_b, z); }
double EffectiveDynamicsTable::sigma(double z) const {
  return interpolate(grid, diffusion_sigma, z);
}

EffectiveDynamicsTable build_effective_table(const SdeModel& model, const ReactionCoordinate& xi,
                                             double grid_min, double grid_max,
                                             std::size_t n_bins, const Ensemble& chain_start,
                                             const EffectiveSamplerConfig& cfg,
                                             std::uint64_t seed) {
  require(n_bins >= 1, "effective table: need at least one bin");
  require(grid_max > grid_min, "effective table: grid_max must exceed grid_min");
  require(cfg.dt > 0.0 && cfg.inverse_temperature > 0.0, "effective table: bad sampler step");
  require(cfg.chains >= 1 && cfg.thin >= 1 && cfg.samples >= cfg.chains,
          "effective table: bad sampler counts");
  require(cfg.groups >= 1 && cfg.groups <= cfg.chains,
          "effective table: groups must be between 1 and the chain count");
  require(chain_start.size() == cfg.chains && chain_start.dim() == model.state_dim,
          "effective table: chain_start must hold one state per chain");

  const std::size_t d = model.state_dim;
  const std::size_t nn = model.noise_dim;
  const std::size_t per_chain = (cfg.samples + cfg.chains - 1) / cfg.chains;
  const double h = (grid_max - grid_min) / static_cast<double>(n_bins);
  const double sqdt = std::sqrt(cfg.dt);
  const double inv_beta = 1.0 / cfg.inverse_temperature;

  std::vector<BinAccumulator> per_chain_acc(cfg.chains, BinAccumulator(n_bins));
  const RandomStream base(mix64(seed));

  parallel_for(cfg.chains, 1, [&](std::size_t c0, std::size_t c1) {
    std::vector<double> x(d), prop(d), a(d), bm(d * nn), dw(nn), g(d);
    for (std::size_t c = c0; c < c1; ++c) {
      RandomStream rng = base.child(c);
      auto pos = chain_start.position(c);
      std::copy(pos.begin(), pos.end(), x.begin());
      auto& acc = per_chain_acc[c];
      const std::size_t total = cfg.burn_in_steps + per_chain * cfg.thin;
      for (std::size_t step = 1; step <= total; ++step) {
        model.drift(x, 0.0, a);
        model.diffusion(x, 0.0, bm);
        int tries = 0;
        for (;;) {
          rng.normals(std::span<double>(dw));
          for (std::size_t i = 0; i < d; ++i) {
            double noise = 0.0;
            for (std::size_t k = 0; k < nn; ++k) noise += bm[i * nn + k] * dw[k];
            prop[i] = x[i] + a[i] * cfg.dt + sqdt * noise;
          }
          if (model.admissible(prop)) break;
          if (++tries > kDomainRetries) {
            throw StepError(c, "effective table sampler left the domain");
          }
        }
        x.swap(prop);
        if (step <= cfg.burn_in_steps || (step - cfg.burn_in_steps) % cfg.thin != 0) continue;
        const double z = xi.value(x);
        if (!(z >= grid_min && z <= grid_max)) continue;
        const std::size_t bin =
            std::min(n_bins - 1, static_cast<std::size_t>((z - grid_min) / h));
        model.drift(x, 0.0, a);
        xi.gradient(x, g);
        double bdot = 0.0;
        double g2 = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          bdot += a[i] * g[i];
          g2 += g[i] * g[i];
        }
        acc.count[bin] += 1.0;
        acc.sum_b[bin] += bdot + inv_beta * xi.laplacian(x);
        acc.sum_s2[bin] += g2;
      }
    }
  });

  // Chains are assigned to groups round-robin.
  std::vector<BinAccumulator> groups(cfg.groups, BinAccumulator(n_bins));
  BinAccumulator pooled(n_bins);
  for (std::size_t c = 0; c < cfg.chains; ++c) {
    auto& g = groups[c % cfg.groups];
    const auto& a = per_chain_acc[c];
    for (std::size_t k = 0; k < n_bins; ++k) {
      g.count[k] += a.count[k];
      g.sum_b[k] += a.sum_b[k];
      g.sum_s2[k] += a.sum_s2[k];
      pooled.count[k] += a.count[k];
      pooled.sum_b[k] += a.sum_b[k];
      pooled.sum_s2[k] += a.sum_s2[k];
    }
  }

  std::size_t first = n_bins, last = 0;
  for (std::size_t k = 0; k < n_bins; ++k) {
    if (pooled.count[k] > 0.0) {
      first = std::min(first, k);
      last = k;
    }
  }
  if (first == n_bins) {
    throw SamplingInsufficient("effective table: no samples fell inside the grid");
  }
  std::size_t empty_inside = 0;
  for (std::size_t k = first; k <= last; ++k) empty_inside += pooled.count[k] == 0.0;
  if (static_cast<double>(empty_inside) > 0.2 * static_cast<double>(n_bins)) {
    throw SamplingInsufficient("effective table: more than 20% of the bins inside the sampled "
                               "range are empty");
  }

  EffectiveDynamicsTable t;
  t.grid.resize(n_bins);
  t.drift_b.resize(n_bins);
  t.diffusion_sigma.resize(n_bins);
  t.counts.resize(n_bins);
  t.drift_se.resize(n_bins);
  t.sigma_sq_se.resize(n_bins);
  std::vector<double> s2(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k) {
    t.grid[k] = grid_min + (static_cast<double>(k) + 0.5) * h;
    t.counts[k] = static_cast<std::size_t>(pooled.count[k]);
  }
  for (std::size_t k = 0; k < n_bins; ++k) {
    std::size_t src = k;
    if (pooled.count[k] == 0.0) {
      // Nearest populated bin; the lower one wins a tie.
      std::size_t best = n_bins;
      std::size_t best_dist = n_bins + 1;
      for (std::size_t q = 0; q < n_bins; ++q) {
        if (pooled.count[q] == 0.0) continue;
        const std::size_t dist = q > k ? q - k : k - q;
        if (dist < best_dist) {
          best = q;
          best_dist = dist;
        }
      }
      src = best;
    }
    t.drift_b[k] = pooled.sum_b[src] / pooled.count[src];
    s2[k] = pooled.sum_s2[src] / pooled.count[src];
    t.diffusion_sigma[k] = std::sqrt(std::max(0.0, s2[k]));
    t.drift_se[k] = batch_se(groups, src, true);
    t.sigma_sq_se[k] = batch_se(groups, src, false);
  }
  t.validate();
  return t;
}

EffectiveDynamicsTable build_effective_table(const ThreeAtomParams& p,
                                             const ReactionCoordinate& xi, double grid_min,
                                             double grid_max, std::size_t n_bins,
                                             const EffectiveSamplerConfig& cfg,
                                             std::uint64_t seed) {
  p.validate();
  require(cfg.chains >= 1, "effective table: need at least one chain");
  std::vector<double> start(3 * cfg.chains);
  for (std::size_t c = 0; c < cfg.chains; ++c) {
    const double frac =
        cfg.chains == 1 ? 0.5 : static_cast<double>(c) / static_cast<double>(cfg.chains - 1);
    const double theta = cfg.theta_lo + frac * (cfg.theta_hi - cfg.theta_lo);
    start[3 * c] = p.l_eq;
    start[3 * c + 1] = p.l_eq * std::cos(theta);
    start[3 * c + 2] = p.l_eq * std::sin(theta);
  }
  EffectiveSamplerConfig c = cfg;
  c.inverse_temperature = p.beta;
  return build_effective_table(three_atom_model(p), xi, grid_min, grid_max, n_bins,
                               Ensemble::uniform(3, std::move(start)), c, seed);
}

SdeModel effective_model(const EffectiveDynamicsTable& table, double beta) {
  table.validate();
  require(beta > 0.0, "effective model: beta must be positive");
  SdeModel m;
  m.name = "effective";
  m.state_dim = 1;
  m.noise_dim = 1;
  m.drift = [table](std::span<const double> x, double, std::span<double> out) {
    out[0] = table.b(x[0]);
  };
  const double s = std::sqrt(2.0 / beta);
  m.diffusion = [table, s](std::span<const double> x, double, std::span<double> out) {
    out[0] = s * table.sigma(x[0]);
  };
  return m;
}

void write_effective_table_csv(std::ostream& out, const EffectiveDynamicsTable& table) {
  csv::write_row(out, std::vector<std::string>{"z", "b", "sigma"});
  for (std::size_t k = 0; k < table.grid.size(); ++k) {
    csv::write_row(out, std::vector<double>{table.grid[k], table.drift_b[k],
                                            table.diffusion_sigma[k]});
  }
}

EffectiveDynamicsTable read_effective_table_csv(std::istream& in) {
  const csv::Table t = csv::read_numeric(in);
  if (t.header != std::vector<std::string>{"z", "b", "sigma"}) {
    throw std::invalid_argument("effective table CSV: expected header z,b,sigma");
  }
  EffectiveDynamicsTable table;
  for (const auto& row : t.rows) {
    table.grid.push_back(row[0]);
    table.drift_b.push_back(row[1]);
    table.diffusion_sigma.push_back(row[2]);
  }
  table.validate();
  return table;
}

// ---------------------------------------------------------------------------
// Slow-fast systems

void SlowFastParams::validate() const { require(eps > 0.0, "eps must be positive"); }

namespace {

SdeModel diagonal_2d(std::string name, SdeModel::Drift drift, double sx, double sy) {
  SdeModel m;
  m.name = std::move(name);
  m.state_dim = 2;
  m.noise_dim = 2;
  m.drift = std::move(drift);
  m.diffusion = [sx, sy](std::span<const double>, double, std::span<double> out) {
    out[0] = sx;
    out[1] = 0.0;
    out[2] = 0.0;
    out[3] = sy;
  };
  return m;
}

SdeModel scalar_model(std::string name, SdeModel::Drift drift, double s) {
  SdeModel m;
  m.name = std::move(name);
  m.state_dim = 1;
  m.noise_dim = 1;
  m.drift = std::move(drift);
  m.diffusion = [s](std::span<const double>, double, std::span<double> out) { out[0] = s; };
  return m;
}

constexpr double kPeriodicLam = 2.0;
constexpr double kPeriodicA = 2.0 * std::numbers::pi;
constexpr double kPeriodicE = 10.0;

}  // namespace

SdeModel bimodal_model(const SlowFastParams& p) {
  p.validate();
  const double eps = p.eps;
  return diagonal_2d(
      "bimodal",
      [eps](std::span<const double> x, double, std::span<double> out) {
        out[0] = -(2.0 * x[0] + x[1]);
        out[1] = (x[1] - x[1] * x[1] * x[1]) / eps;
      },
      0.1, 1.0 / std::sqrt(eps));
}

SdeModel bimodal_macro() {
  return scalar_model(
      "bimodal_macro",
      [](std::span<const double> x, double, std::span<double> out) { out[0] = -2.0 * x[0]; },
      0.1);
}

SdeModel linear_driven_model(double lam, double a, double e_amp, double eps) {
  require(eps > 0.0, "eps must be positive");
  return diagonal_2d(
      "periodic",
      [lam, a, e_amp, eps](std::span<const double> x, double t, std::span<double> out) {
        out[0] = -lam * (x[0] + x[1]) + e_amp * std::sin(a * t);
        out[1] = (x[0] - x[1]) / eps;
      },
      1.0, 1.0 / std::sqrt(eps));
}

SdeModel linear_driven_macro(double lam, double a, double e_amp) {
  return scalar_model(
      "periodic_macro",
      [lam, a, e_amp](std::span<const double> x, double t, std::span<double> out) {
        out[0] = -2.0 * lam * x[0] + e_amp * std::sin(a * t);
      },
      1.0);
}

SdeModel periodic_model(const SlowFastParams& p) {
  p.validate();
  return linear_driven_model(kPeriodicLam, kPeriodicA, kPeriodicE, p.eps);
}

SdeModel periodic_macro() { return linear_driven_macro(kPeriodicLam, kPeriodicA, kPeriodicE); }

std::vector<double> linear_driven_covariance(double lam, double eps) {
  require(lam > 0.0 && eps > 0.0, "covariance: lam and eps must be positive");
  // Solves M S + S M^T + diag(1, 1/eps) = 0 for M = [[-lam, -lam], [1/eps, -1/eps]].
  const double s12 = (1.0 - lam * lam * eps) / (4.0 * lam * (1.0 + lam * eps));
  const double s11 = 1.0 / (2.0 * lam) - s12;
  const double s22 = s12 + 0.5;
  return {s11, s12, s12, s22};
}

Ensemble gaussian_ensemble(std::span<const double> mean, std::span<const double> cov,
                           std::size_t count, RandomStream& rng) {
  const std::size_t d = mean.size();
  require(cov.size() == d * d, "gaussian_ensemble: covariance has the wrong size");
  require(count >= 1, "gaussian_ensemble: count must be positive");
  // Lower Cholesky factor.
  std::vector<double> l(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = cov[i * d + j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i * d + k] * l[j * d + k];
      if (i == j) {
        if (s < 0.0) throw std::invalid_argument("gaussian_ensemble: covariance not PSD");
        l[i * d + i] = std::sqrt(s);
      } else {
        l[i * d + j] = l[j * d + j] > 0.0 ? s / l[j * d + j] : 0.0;
      }
    }
  }
  std::vector<double> pos(count * d);
  std::vector<double> z(d);
  for (std::size_t p = 0; p < count; ++p) {
    rng.normals(std::span<double>(z));
    for (std::size_t i = 0; i < d; ++i) {
      double v = mean[i];
      for (std::size_t k = 0; k <= i; ++k) v += l[i * d + k] * z[k];
      pos[p * d + i] = v;
    }
  }
  return Ensemble::uniform(d, std::move(pos));
}

StateFunctions::Function coordinate_power(std::size_t coord, int power) {
  return [coord, power](std::span<const double> x) {
    double v = 1.0;
    for (int i = 0; i < power; ++i) v *= x[coord];
    return v;
  };
}

}  // namespace mmaccel::models
