#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mmaccel/experiments.hpp"
#include "mmaccel/parallel.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::optional<std::size_t> env_threads() {
  const char* s = std::getenv("MMACCEL_THREADS");
  if (!s || !*s) return std::nullopt;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (*end != '\0' || v == 0) {
    std::cerr << "warning: ignoring MMACCEL_THREADS='" << s << "' (expected a positive integer)\n";
    return std::nullopt;
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

int main(int argc, char** argv) {
  namespace ex = mmaccel::experiments;

  CLI::App app{"Micro-macro acceleration for stiff stochastic differential equations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "mmaccel " + ex::build_id());

  auto* run = app.add_subcommand("run", "Run the experiment described by a JSON config");
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  bool no_plots = false;
  std::optional<std::size_t> threads;
  run->add_option("config", config_path, "Experiment configuration (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory (overrides output_dir)");
  run->add_option("--seed", seed, "Master seed (overrides seed)");
  run->add_flag("--no-plots", no_plots, "Skip SVG output");
  run->add_option("--threads", threads, "Worker threads (default: MMACCEL_THREADS or all cores)")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  ex::ExperimentConfig cfg;
  try {
    cfg = ex::parse_config(config_path);
  } catch (const ex::ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return kExitConfig;
  }
  if (seed) {
    cfg.seed = *seed;
    cfg.resolved["seed"] = *seed;
  }
  if (out_dir) {
    cfg.output_dir = *out_dir;
    cfg.resolved["output_dir"] = *out_dir;
  }
  if (no_plots) {
    cfg.plots = false;
    cfg.resolved["plots"] = false;
  }
  if (!threads) threads = env_threads();
  if (threads) mmaccel::set_thread_count(*threads);

  try {
    const auto manifest = ex::run_experiment(cfg, cfg.output_dir);
    std::cout << "wrote " << manifest.files.size() + 1 << " files to " << cfg.output_dir << '\n'
              << manifest.summary.dump(2) << '\n';
    return kExitOk;
  } catch (const ex::NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    if (e.record())
      std::cerr << "step record: " << ex::step_record_json(*e.record()).dump(2) << '\n';
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}
