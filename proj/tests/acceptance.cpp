// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset. Exit status is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "mmaccel/accelerator.hpp"
#include "mmaccel/ensemble.hpp"
#include "mmaccel/matching.hpp"
#include "mmaccel/models.hpp"
#include "mmaccel/oracle.hpp"
#include "mmaccel/sde.hpp"
#include "mmaccel/studies.hpp"

using namespace mmaccel;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

StateFunctions powers(int L) {
  std::vector<StateFunctions::Function> fs;
  std::vector<std::string> names;
  for (int l = 1; l <= L; ++l) {
    fs.push_back(models::coordinate_power(0, l));
    names.push_back("x^" + std::to_string(l));
  }
  return StateFunctions(std::move(fs), std::move(names));
}

// 1. Matching reproduces feasible targets to 1e-9 in the max norm.
Verdict matching_exactness() {
  RandomStream rng(20240601);
  double worst = 0.0;
  int failures = 0;
  for (int inst = 0; inst < 200; ++inst) {
    const std::size_t J = 20 + static_cast<std::size_t>(rng.uniform() * 981);
    const int L = 1 + static_cast<int>(rng.uniform() * 5);
    std::vector<double> pos(J), mass(J), other(J);
    for (std::size_t j = 0; j < J; ++j) {
      pos[j] = inst % 2 ? rng.normal() : 2.0 * rng.uniform() - 1.0;
      mass[j] = 0.2 + rng.uniform();
      other[j] = -std::log(rng.uniform());  // Dirichlet(1, ..., 1) after normalising
    }
    const auto prior = Ensemble::normalized(1, pos, mass);
    const auto R = powers(L);
    const auto m_prior = restrict_to_macro(prior, R);
    const auto m_other = restrict_to_macro(Ensemble::normalized(1, pos, other), R);
    // Both moment vectors lie inside the hull of the support, so every
    // convex combination is a feasible interior target.
    const double s = 0.05 + 0.25 * rng.uniform();
    MacroState target = m_prior;
    for (std::size_t l = 1; l < target.size(); ++l)
      target.values[l] += s * (m_other.values[l] - m_prior.values[l]);
    const auto r = match(prior, R, target, MatchConfig{});
    if (!std::holds_alternative<Ensemble>(r)) {
      ++failures;
      continue;
    }
    const auto got = restrict_to_macro(std::get<Ensemble>(r), R);
    for (std::size_t l = 0; l < got.size(); ++l)
      worst = std::max(worst, std::abs(got[l] - target[l]));
  }
  return {failures == 0 && worst <= 1e-9,
          fmt("200 instances, %d failed, max |restrict - m| = %.2e (bar 1e-9)", failures, worst)};
}

// 2. Extrapolation over exactly one burst reproduces chained bursts bit for bit.
Verdict zero_extrapolation() {
  std::string detail;
  bool pass = true;
  for (std::size_t K : {1u, 3u}) {
    const double eps = 0.1, dt = eps / 10;
    const auto model = models::bimodal_model({eps});
    std::vector<double> xy;
    RandomStream g(77);
    for (int j = 0; j < 2000; ++j) {
      xy.push_back(1.0 + 0.1 * g.normal());
      xy.push_back(0.1 * g.normal());
    }
    const auto init = Ensemble::uniform(2, xy);
    const StateFunctions R({models::coordinate_power(0, 1), models::coordinate_power(0, 2)},
                           {"x", "x^2"});
    MmConfig cfg;
    cfg.micro = {dt, K};
    cfg.dt_extrap_init = cfg.dt_extrap_max = K * dt;
    cfg.end_time = 100.0 * K * dt;
    const auto records = run(model, init, R, cfg, std::uint64_t{5});

    RandomStream rng(mix64(5));
    Ensemble ens = init;
    double t = 0.0;
    std::size_t identical = 0;
    for (const auto& rec : records) {
      const auto burst = simulate_burst(model, ens, t, cfg.micro, R, rng);
      if (rec.macro_after_match.values == burst.macro_path.back().values &&
          rec.match_outcome.iterations == 0 && !rec.resampled)
        ++identical;
      ens = burst.final;
      t += K * dt;
    }
    pass = pass && records.size() == 100 && identical == 100;
    detail += fmt("%sK=%zu: %zu/%zu steps bit-identical", detail.empty() ? "" : "; ", K,
                  identical, records.size());
  }
  return {pass, detail};
}

// 3. Exact and averaged means differ by O(eps).
Verdict averaged_model_error() {
  oracle::PeriodicParams p;
  p.lam = 2.0;
  p.a = 2.0 * std::numbers::pi;
  p.e_amp = 10.0;
  const std::vector<double> eps = {0.2, 0.1, 0.05, 0.025};
  std::vector<double> err;
  for (double e : eps) {
    p.eps = e;
    const auto c = oracle::solve_fourier_coeffs(p);
    const auto ab = oracle::macro_coeffs(p);
    err.push_back(oracle::l2_period_error(
        [&](double t) { return oracle::exact_mean(p, c, {c.A, c.C}, t)[0]; },
        [&](double t) { return oracle::approx_mean(p, ab[0], t); }, 0.0, 2.0 * std::numbers::pi / p.a));
  }
  const double slope = oracle::fit_order(eps, err);
  return {std::abs(slope - 1.0) <= 0.15,
          fmt("errors %.4g %.4g %.4g %.4g, slope %.3f (bar 1.0 +/- 0.15)", err[0], err[1], err[2],
              err[3], slope)};
}

// 4. Observed order of the accelerated slow mean.
Verdict convergence_order() {
  studies::PeriodicConfig big;
  big.params.eps = 0.5;
  big.particles = 100000;
  big.end_time = 3.0;
  const auto a = studies::periodic_convergence(big, {1.0, 1.25, 1.5, 1.75, 2.0}, 7);

  studies::PeriodicConfig small;
  small.params.eps = 0.05;
  small.particles = 100000;
  small.end_time = 2.0;
  const auto b = studies::periodic_convergence(small, {2.0, 4.0, 8.0, 16.0, 32.0}, 7);

  auto list = [](const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += fmt("%s%.3g", s.empty() ? "" : " ", x);
    return s;
  };
  const bool pa = std::abs(a.order - 1.0) <= 0.3, pb = std::abs(b.order - 2.0) <= 0.3;
  return {pa && pb, fmt("eps=0.5: errors [%s] slope %.2f (bar 1.0 +/- 0.3) %s; "
                        "eps=0.05: errors [%s] slope %.2f (bar 2.0 +/- 0.3) %s",
                        list(a.error).c_str(), a.order, pa ? "ok" : "out", list(b.error).c_str(),
                        b.order, pb ? "ok" : "out")};
}

// 5. Largest useful extrapolation step against eps.
Verdict crossover_scaling() {
  std::vector<double> eps = {0.1, 0.05, 0.025, 0.0125}, dt_max, m_max;
  for (double e : eps) {
    studies::PeriodicConfig cfg;
    cfg.params.eps = e;
    cfg.particles = 100000;
    cfg.end_time = 2.0;
    const auto r = studies::periodic_crossover(cfg, 1.0, 16.0, 1e-2, 1);
    dt_max.push_back(r.dt_max);
    m_max.push_back(r.M_max);
  }
  const double slope = oracle::fit_order(eps, dt_max);
  bool monotone = true;
  for (std::size_t i = 1; i < m_max.size(); ++i) monotone = monotone && m_max[i] > m_max[i - 1];
  return {std::abs(slope - 0.75) <= 0.2 && monotone,
          fmt("M_max %.3f %.3f %.3f %.3f (%s), dt_max slope %.3f (bar 0.75 +/- 0.2)", m_max[0],
              m_max[1], m_max[2], m_max[3], monotone ? "increasing" : "not increasing", slope)};
}

// 6. Slow variance of the bimodal system.
Verdict bimodal_variance() {
  constexpr double kOu = 0.0025;
  studies::BimodalConfig cfg;
  cfg.eps = 0.1;
  cfg.particles = 100000;
  cfg.end_time = 10.0;
  const auto macro = studies::bimodal_macro_variance(cfg, 1e-3, 41);
  const auto micro = studies::bimodal_micro_variance(cfg, 42);
  const double za = (macro.value.back() - kOu) / macro.se.back();
  const double zb = (micro.value.back() - kOu) / micro.se.back();
  const bool pa = std::abs(za) <= 3.0, pb = zb > 10.0;
  std::string detail =
      fmt("(a) averaged %.5f, z=%.2f %s; (b) micro %.5f, z=%.0f %s; (c)", macro.value.back(), za,
          pa ? "ok" : "out", micro.value.back(), zb, pb ? "ok" : "out");
  bool pc = true;
  for (double M : {2.0, 5.0, 10.0}) {
    try {
      const auto mm = studies::bimodal_mm_variance(cfg, M, 43);
      const double z = (mm.value.back() - micro.value.back()) /
                       std::hypot(mm.se.back(), micro.se.back());
      const bool ok = std::abs(z) <= 3.0;
      pc = pc && ok;
      detail += fmt(" M=%g %.5f z=%.2f %s;", M, mm.value.back(), z, ok ? "ok" : "out");
    } catch (const std::exception& e) {
      pc = false;
      detail += fmt(" M=%g aborted (%s);", M, e.what());
    }
  }
  detail.pop_back();
  return {pa && pb && pc, detail};
}

// 7. Hierarchy 3 tracks the FENE stress better than hierarchy 1.
Verdict fene_ordering() {
  studies::FeneConfig cfg;
  cfg.particles = 50000;
  cfg.dt = 2e-4;
  cfg.M_max = 5.0;
  cfg.end_time = 4.0;
  const auto ref = studies::fene_micro(cfg, 51);
  const auto h1 = studies::fene_mm(cfg, 1, 4, 52);
  const auto h3 = studies::fene_mm(cfg, 3, 4, 52);
  const auto d1 = studies::l2_distance(h1.tau, ref.tau, 0.0, cfg.end_time, 4000);
  const auto d3 = studies::l2_distance(h3.tau, ref.tau, 0.0, cfg.end_time, 4000);
  const double bar = std::hypot(d1.error_bar, d3.error_bar);
  return {d3.value < d1.value && d1.value - d3.value > bar,
          fmt("L2 distance hierarchy 1: %.3f (bar %.3f), hierarchy 3: %.3f (bar %.3f); "
              "need h3 < h1 by more than %.3f",
              d1.value, d1.error_bar, d3.value, d3.error_bar, bar)};
}

// 8. Effective dynamics bias against accelerated removal of it.
Verdict triatom_bias() {
  studies::TriatomConfig cfg;
  cfg.params.eps = 1e-3;
  cfg.dt = 1e-3;
  cfg.particles = 50000;
  cfg.end_time = 2.0;
  cfg.M_max = 10.0;
  cfg.sampler.dt = 1e-4;
  cfg.sampler.inverse_temperature = cfg.params.beta;
  const auto [xi1, xi2] = models::reaction_coordinates();
  const auto ref = studies::triatom_micro(cfg, 61);
  const auto table = models::build_effective_table(cfg.params, xi2, cfg.grid_min, cfg.grid_max,
                                                   cfg.n_bins, cfg.sampler, 62);
  const double z0 = xi2.value(studies::triatom_initial_ensemble(cfg).position(0));
  const auto eff = studies::triatom_effective(cfg, table, z0, 63);
  const auto& r = ref.xi2;
  const double ze = (eff.value.back() - r.value.back()) / std::hypot(eff.se.back(), r.se.back());
  const bool pe = std::abs(ze) > 5.0;
  std::string detail = fmt("micro E[xi2](T)=%.4f; effective %.4f z=%.1f %s; accelerated", r.value.back(),
                           eff.value.back(), ze, pe ? "ok" : "out");
  bool pm = false;
  try {
    const auto mm = studies::triatom_mm(cfg, studies::reaction_coordinate_states(xi2), 64);
    const double zm = (mm.xi2.value.back() - r.value.back()) /
                      std::hypot(mm.xi2.se.back(), r.se.back());
    pm = std::abs(zm) <= 3.0;
    detail += fmt(" %.4f z=%.1f %s", mm.xi2.value.back(), zm, pm ? "ok" : "out");
  } catch (const std::exception& e) {
    detail += fmt(" aborted (%s)", e.what());
  }
  return {pe && pm, detail};
}

// 9. Entropy, stratified resampling and its unbiasedness.
Verdict resampling() {
  std::vector<std::string> problems;
  RandomStream rng(909);
  // Entropy lies in [0, ln J], with the ends at uniform and point weights.
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t J = 2 + static_cast<std::size_t>(rng.uniform() * 300);
    std::vector<double> pos(J), mass(J);
    for (std::size_t j = 0; j < J; ++j) {
      pos[j] = rng.normal();
      mass[j] = std::pow(rng.uniform(), 4.0);
    }
    const auto e = Ensemble::normalized(1, pos, mass);
    const double h = weight_entropy(e);
    if (!(h >= -1e-12 && h <= std::log(double(J)) + 1e-12)) problems.push_back("entropy bound");
    const auto r = stratified_resample(e, rng);
    if (r.size() != J) problems.push_back("resampled size");
    for (std::size_t j = 0; j < J; ++j)
      if (r.weight(j) != 1.0 / double(J)) {
        problems.push_back("output weights");
        break;
      }
  }
  if (std::abs(weight_entropy(Ensemble::uniform(1, {0.0, 1.0, 2.0}))) > 1e-15)
    problems.push_back("uniform entropy");
  {
    const Ensemble spike(1, {0.0, 1.0, 2.0, 3.0}, {1.0, 0.0, 0.0, 0.0});
    if (std::abs(weight_entropy(spike) - std::log(4.0)) > 1e-12) problems.push_back("point entropy");
  }
  // Counts sum to J and the resampled mean of f is unbiased.
  const std::vector<double> w = {0.05, 0.3, 0.15, 0.25, 0.1, 0.15};
  const std::vector<double> f = {2.0, -1.0, 0.5, 3.0, -4.0, 1.5};
  double exact = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) exact += w[j] * f[j];
  const int trials = 10000;
  double sum = 0.0, sq = 0.0;
  bool sums_ok = true;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> u(w.size());
    for (auto& v : u) v = rng.uniform();
    const auto n = stratified_counts(w, u);
    std::size_t total = 0;
    double est = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      total += n[j];
      est += double(n[j]) * f[j] / double(w.size());
    }
    sums_ok = sums_ok && total == w.size();
    sum += est;
    sq += est * est;
  }
  if (!sums_ok) problems.push_back("count sum");
  const double mean = sum / trials;
  const double se = std::sqrt((sq / trials - mean * mean) / trials);
  const double z = (mean - exact) / se;
  if (std::abs(z) > 4.0) problems.push_back("bias");
  std::string detail = fmt("unbiasedness over %d trials: z=%.2f (bar 4)", trials, z);
  for (const auto& p : problems) detail += "; failed: " + p;
  return {problems.empty(), detail};
}

// 10. Step halving on an infeasible extrapolation, then regrowth.
Verdict adaptive_stepping() {
  // Noise-free contraction towards 1 until t = 0.1, then no motion. Early
  // on, a long extrapolation of (x, x^2) asks for a negative variance; once
  // the contraction stops every extrapolation is feasible.
  SdeModel m;
  m.name = "contract-then-rest";
  m.drift = [](std::span<const double> x, double t, std::span<double> out) {
    out[0] = t < 0.1 ? -4.0 * (x[0] - 1.0) : 0.0;
  };
  m.diffusion = [](std::span<const double>, double, std::span<double> out) { out[0] = 0.0; };
  std::vector<double> pos(400);
  RandomStream g(3);
  for (auto& x : pos) x = 1.0 + g.normal();
  const StateFunctions R({models::coordinate_power(0, 1), models::coordinate_power(0, 2)},
                         {"x", "x^2"});
  MmConfig cfg;
  cfg.micro = {0.01, 1};
  cfg.dt_extrap_init = 0.32;
  cfg.dt_extrap_max = 0.32;
  cfg.end_time = 3.0;
  cfg.resample_check_period = 0;
  const auto records = run(m, Ensemble::uniform(1, pos), R, cfg, std::uint64_t{4});
  if (records.empty()) return {false, "no steps"};
  const auto& first = records.front();
  const double ratio = first.dt_requested / first.dt_used;
  const double k = std::log2(ratio);
  const bool halved = first.failures_before_success >= 1 && std::abs(k - std::round(k)) < 1e-9 &&
                      std::lround(k) == first.failures_before_success;
  bool regrow = true, reached = false;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& prev = records[i - 1];
    const auto& cur = records[i];
    const bool clipped = cur.time_end >= cfg.end_time - 1e-12;
    const double expect = std::min(1.2 * prev.dt_used, cfg.dt_extrap_max);
    if (!clipped && std::abs(cur.dt_requested - expect) > 1e-12 * expect) regrow = false;
    if (cur.dt_used > cfg.dt_extrap_max * (1 + 1e-12)) regrow = false;
    reached = reached || std::abs(cur.dt_used - cfg.dt_extrap_max) < 1e-12;
  }
  return {halved && regrow && reached,
          fmt("first step: requested %.3f, used %.4f after %d halvings (%s); "
              "regrowth by 1.2 capped at %.2f %s, cap %s",
              first.dt_requested, first.dt_used, first.failures_before_success,
              halved ? "ok" : "wrong", cfg.dt_extrap_max, regrow ? "ok" : "violated",
              reached ? "reached" : "never reached")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"matching exactness", matching_exactness},
      {"zero-extrapolation identity", zero_extrapolation},
      {"averaged-model error is linear in eps", averaged_model_error},
      {"convergence order", convergence_order},
      {"crossover scaling", crossover_scaling},
      {"bimodal steady-state variance", bimodal_variance},
      {"FENE hierarchy ordering", fene_ordering},
      {"three-atom effective dynamics bias", triatom_bias},
      {"resampling and entropy", resampling},
      {"adaptive stepping", adaptive_stepping},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(n)) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("aborted: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += v.pass ? 0 : 1;
    std::printf("criterion %2d %s: %s [%s] (%.1fs)\n", n, v.pass ? "PASS" : "FAIL", criteria[i].first,
                v.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed;
}
