#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmaccel/accelerator.hpp"
#include "mmaccel/studies.hpp"

namespace mmaccel::experiments {

enum class Kind {
  fene_hysteresis,
  triatom,
  triatom_moments,
  bimodal,
  periodic_converge,
  periodic_crossover,
  appendixb_error,
};

const char* kind_name(Kind k);

/// Invalid configuration. The message names the offending JSON path and,
/// for syntax errors, the line and column.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A run aborted by the numerics. `record` is the last step record known at
/// the time of failure (the failing step itself when matching stalled).
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(const std::string& what, std::optional<StepRecord> record)
      : std::runtime_error(what), record_(std::move(record)) {}
  const std::optional<StepRecord>& record() const noexcept { return record_; }

 private:
  std::optional<StepRecord> record_;
};

struct ExperimentConfig {
  Kind kind = Kind::periodic_converge;
  std::uint64_t seed = 1;
  std::string output_dir = "mmaccel-out";
  bool plots = true;

  // periodic_converge / periodic_crossover / appendixb_error
  studies::PeriodicConfig periodic;
  std::vector<double> eps_list;
  std::vector<double> ladder;
  double m_lo = 1.0, m_hi = 16.0, log_tol = 1e-2;

  // bimodal
  studies::BimodalConfig bimodal;
  double macro_dt = 0.0;

  // fene_hysteresis
  studies::FeneConfig fene;
  std::vector<int> hierarchies;
  std::size_t L = 4;

  // triatom / triatom_moments
  studies::TriatomConfig triatom;
  std::string reaction_coordinate = "xi2";

  /// Fully resolved configuration (defaults filled), echoed into the manifest.
  nlohmann::json resolved;
};

/// Strict parse of a JSON document. Unknown keys, keys that do not apply to
/// the chosen experiment and out-of-range values raise ConfigError.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config(const std::filesystem::path& path);

struct RunManifest {
  std::string experiment;
  std::uint64_t seed = 0;
  nlohmann::json config;
  std::string build_id;
  double wall_seconds = 0.0;
  std::vector<std::string> files;
  nlohmann::json summary;

  nlohmann::json to_json() const;
};

/// Runs the study, writes its CSV (and SVG) files under `out_dir` and finally
/// manifest.json (atomically). Throws NumericalFailure on numerical trouble.
RunManifest run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// JSON rendering of a step record for failure reports.
nlohmann::json step_record_json(const StepRecord& r);

std::string build_id();

}  // namespace mmaccel::experiments
