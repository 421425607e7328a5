#include "mmaccel/accelerator.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <variant>

#include "mmaccel/csv.hpp"

namespace mmaccel {

void MmConfig::validate() const {
  micro.validate();
  match.validate();
  const double floor = micro.burst_length();
  if (!(dt_extrap_init >= floor * (1.0 - 1e-12))) {
    throw std::invalid_argument("mm config: initial extrapolation step is shorter than K dt");
  }
  if (!(dt_extrap_max >= dt_extrap_init)) {
    throw std::invalid_argument("mm config: dt_extrap_max is below the initial step");
  }
  if (!(shrink > 0.0 && shrink < 1.0)) throw std::invalid_argument("mm config: need 0 < shrink < 1");
  if (!(grow > 1.0)) throw std::invalid_argument("mm config: need grow > 1");
  if (!(entropy_threshold_fraction >= 0.0)) {
    throw std::invalid_argument("mm config: entropy threshold must be nonnegative");
  }
  if (!std::isfinite(end_time)) throw std::invalid_argument("mm config: end time must be finite");
}

MacroState extrapolate(const MacroState& m_n, const MacroState& m_nK, double dt_extrap,
                       std::size_t K, double dt_micro) {
  if (m_n.size() != m_nK.size()) throw std::invalid_argument("extrapolate: size mismatch");
  const double burst = static_cast<double>(K) * dt_micro;
  MacroState out;
  out.time = m_n.time + dt_extrap;
  // Step counts times dt need not round to the same double as the caller's step.
  if (std::abs(dt_extrap - burst) <= 1e-12 * burst) {
    out.values = m_nK.values;
    return out;
  }
  const double ratio = dt_extrap / burst;
  out.values.resize(m_n.size());
  for (std::size_t l = 0; l < m_n.size(); ++l) {
    out.values[l] = m_n.values[l] + ratio * (m_nK.values[l] - m_n.values[l]);
  }
  return out;
}

StepResult mm_step(const MmState& state, const SdeModel& model, const StateFunctions& R,
                   const MmConfig& cfg, RandomStream& rng, double dt_limit) {
  const double floor = cfg.micro.burst_length();
  Burst burst = simulate_burst(model, state.ensemble, state.time, cfg.micro, R, rng);
  const MacroState& m_n = burst.macro_path.front();
  const MacroState& m_nK = burst.macro_path.back();

  StepRecord rec;
  rec.step = state.steps;
  rec.time_start = state.time;
  rec.macro_before = m_n;

  const bool clipped = dt_limit < state.dt_extrap;
  double dt = std::max(floor, std::min(state.dt_extrap, dt_limit));
  rec.dt_requested = dt;

  for (;;) {
    MacroState target = extrapolate(m_n, m_nK, dt, cfg.micro.steps, cfg.micro.dt);
    MatchReport report = match_report(burst.final, R, target, cfg.match);
    rec.match_outcome = std::move(report.outcome);
    rec.macro_extrapolated = std::move(target);
    rec.dt_used = dt;
    rec.time_end = state.time + dt;
    if (report.ensemble) {
      rec.macro_after_match = restrict_to_macro(*report.ensemble, R, rec.time_end);
      MmState next{rec.time_end, std::move(*report.ensemble),
                   clipped ? state.dt_extrap : std::min(dt * cfg.grow, cfg.dt_extrap_max),
                   state.steps + 1};
      return {std::move(next), std::move(rec)};
    }
    if (dt <= floor) {
      std::ostringstream msg;
      msg << "mm_step: matching failed at the minimal extrapolation step " << dt << " (t = "
          << state.time << ", residual " << rec.match_outcome.residual << ")";
      throw MatchingStalled(std::move(rec), msg.str());
    }
    ++rec.failures_before_success;
    dt = std::max(floor, dt * cfg.shrink);
  }
}

std::vector<StepRecord> run(const SdeModel& model, const Ensemble& init, const StateFunctions& R,
                            const MmConfig& cfg, RandomStream& rng, double t0,
                            const StepObserver& observer) {
  cfg.validate();
  MmState state{t0, init, cfg.dt_extrap_init, 0};
  std::vector<StepRecord> records;
  const double floor = cfg.micro.burst_length();
  // Remaining spans shorter than this are rounding residue, not a step.
  const double slack = 1e-9 * floor;
  const double log_j = std::log(static_cast<double>(init.size()));
  while (state.time < cfg.end_time - slack) {
    StepResult res = mm_step(state, model, R, cfg, rng, cfg.end_time - state.time);
    state = std::move(res.state);
    if (cfg.resample_check_period > 0 && state.steps % cfg.resample_check_period == 0) {
      if (weight_entropy(state.ensemble) >= cfg.entropy_threshold_fraction * log_j) {
        state.ensemble = stratified_resample(state.ensemble, rng);
        res.record.resampled = true;
      }
    }
    if (observer) observer(res.record, state.ensemble);
    records.push_back(std::move(res.record));
  }
  return records;
}

std::vector<StepRecord> run(const SdeModel& model, const Ensemble& init, const StateFunctions& R,
                            const MmConfig& cfg, std::uint64_t seed,
                            const StepObserver& observer) {
  RandomStream rng(mix64(seed));
  return run(model, init, R, cfg, rng, 0.0, observer);
}

void write_step_records_csv(std::ostream& out, const std::vector<StepRecord>& records) {
  std::size_t width = 0;
  if (!records.empty()) width = records.front().macro_extrapolated.size();
  std::vector<std::string> header{"step",     "t_start",  "t_end", "dt_used",
                                  "failures", "resampled", "residual", "iters"};
  for (std::size_t l = 0; l < width; ++l) header.push_back("extrap_m_" + std::to_string(l));
  for (std::size_t l = 0; l < width; ++l) header.push_back("matched_m_" + std::to_string(l));
  csv::write_row(out, header);
  for (const auto& r : records) {
    out << r.step << ',' << csv::format(r.time_start) << ',' << csv::format(r.time_end) << ','
        << csv::format(r.dt_used) << ',' << r.failures_before_success << ','
        << (r.resampled ? 1 : 0) << ',' << csv::format(r.match_outcome.residual) << ','
        << r.match_outcome.iterations;
    for (double v : r.macro_extrapolated.values) out << ',' << csv::format(v);
    for (double v : r.macro_after_match.values) out << ',' << csv::format(v);
    out << '\n';
  }
}

}  // namespace mmaccel
