#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mmaccel/ensemble.hpp"
#include "mmaccel/matching.hpp"
#include "mmaccel/random.hpp"
#include "mmaccel/sde.hpp"

namespace mmaccel {

struct MmConfig {
  MicroConfig micro;
  double dt_extrap_init = 0.0;
  double dt_extrap_max = 0.0;
  double end_time = 0.0;
  MatchConfig match;
  double shrink = 0.5;
  double grow = 1.2;
  /// Weight entropy is checked after every this many macro steps; 0 disables
  /// resampling altogether.
  std::size_t resample_check_period = 5;
  /// Resample when the weight entropy reaches this fraction of ln J.
  double entropy_threshold_fraction = 0.1;

  void validate() const;
};

struct StepRecord {
  std::size_t step = 0;
  double time_start = 0.0;
  double time_end = 0.0;
  double dt_requested = 0.0;
  double dt_used = 0.0;
  MacroState macro_before;
  MacroState macro_extrapolated;
  MacroState macro_after_match;
  MatchOutcome match_outcome;
  int failures_before_success = 0;
  bool resampled = false;
};

struct MmState {
  double time = 0.0;
  Ensemble ensemble;
  /// Extrapolation step to try next.
  double dt_extrap = 0.0;
  std::size_t steps = 0;
};

/// Matching still failed with the extrapolation step at its floor K dt. At
/// the floor the target equals the burst-final moments, so this points at a
/// defect rather than an infeasible extrapolation.
class MatchingStalled : public std::runtime_error {
 public:
  MatchingStalled(StepRecord record, const std::string& what)
      : std::runtime_error(what), record_(std::move(record)) {}
  const StepRecord& record() const noexcept { return record_; }

 private:
  StepRecord record_;
};

/// m^n + (dt_extrap / (K dt_micro)) (m^{n,K} - m^n), stamped at
/// m_n.time + dt_extrap. With dt_extrap == K dt_micro the burst-final state is
/// returned unchanged.
MacroState extrapolate(const MacroState& m_n, const MacroState& m_nK, double dt_extrap,
                       std::size_t K, double dt_micro);

struct StepResult {
  MmState state;
  StepRecord record;
};

/// One accelerated step: burst, restriction, extrapolation and matching
/// against the burst-final ensemble. On a matching failure the step is halved
/// (down to K dt) and only extrapolation and matching are redone. On success
/// the next step grows by cfg.grow, capped at cfg.dt_extrap_max.
/// `dt_limit` caps this step only (used to land on the end time).
StepResult mm_step(const MmState& state, const SdeModel& model, const StateFunctions& R,
                   const MmConfig& cfg, RandomStream& rng,
                   double dt_limit = std::numeric_limits<double>::infinity());

using StepObserver = std::function<void(const StepRecord&, const Ensemble&)>;

/// Accelerated integration from time 0 to cfg.end_time. The observer, when
/// given, sees every record together with the ensemble carried into the next
/// step (after any resampling).
std::vector<StepRecord> run(const SdeModel& model, const Ensemble& init, const StateFunctions& R,
                            const MmConfig& cfg, std::uint64_t seed,
                            const StepObserver& observer = {});

/// Same loop with a caller-owned stream and start time.
std::vector<StepRecord> run(const SdeModel& model, const Ensemble& init, const StateFunctions& R,
                            const MmConfig& cfg, RandomStream& rng, double t0,
                            const StepObserver& observer = {});

/// Header step,t_start,t_end,dt_used,failures,resampled,residual,iters, then
/// extrap_m_0..extrap_m_L and matched_m_0..matched_m_L.
void write_step_records_csv(std::ostream& out, const std::vector<StepRecord>& records);

}  // namespace mmaccel
