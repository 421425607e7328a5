#include "mmaccel/experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>

#include "mmaccel/csv.hpp"
#include "mmaccel/models.hpp"
#include "mmaccel/oracle.hpp"
#include "mmaccel/parallel.hpp"
#include "mmaccel/svg.hpp"

#ifndef MMACCEL_BUILD_ID
#define MMACCEL_BUILD_ID "unknown"
#endif

namespace mmaccel::experiments {

using nlohmann::json;
namespace fs = std::filesystem;

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::fene_hysteresis: return "fene_hysteresis";
    case Kind::triatom: return "triatom";
    case Kind::triatom_moments: return "triatom_moments";
    case Kind::bimodal: return "bimodal";
    case Kind::periodic_converge: return "periodic_converge";
    case Kind::periodic_crossover: return "periodic_crossover";
    case Kind::appendixb_error: return "appendixb_error";
  }
  return "?";
}

std::string build_id() { return MMACCEL_BUILD_ID; }

// ---------------------------------------------------------------------------
// Strict configuration reading

namespace {

/// Reads one JSON object, remembering which keys were consumed so that
/// leftovers can be reported as unknown.
class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail(path_, "expected an object");
  }

  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw ConfigError(where + ": " + what);
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  const json* take(const std::string& key) {
    used_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  std::string where(const std::string& key) const { return path_ + "." + key; }

  double real(const std::string& key, double def,
              const std::function<bool(double)>& ok = {}, const char* need = "") {
    const json* v = take(key);
    if (!v) return def;
    if (!v->is_number()) fail(where(key), "expected a number");
    const double x = v->get<double>();
    if (!std::isfinite(x) || (ok && !ok(x))) fail(where(key), std::string("must be ") + need);
    return x;
  }

  double positive(const std::string& key, double def) {
    return real(key, def, [](double x) { return x > 0.0; }, "positive");
  }

  std::uint64_t integer(const std::string& key, std::uint64_t def, std::uint64_t min = 0) {
    const json* v = take(key);
    if (!v) return def;
    return as_integer(*v, where(key), min);
  }

  bool flag(const std::string& key, bool def) {
    const json* v = take(key);
    if (!v) return def;
    if (!v->is_boolean()) fail(where(key), "expected true or false");
    return v->get<bool>();
  }

  std::string text(const std::string& key, const std::string& def,
                   const std::vector<std::string>& allowed) {
    const json* v = take(key);
    if (!v) return def;
    if (!v->is_string()) fail(where(key), "expected a string");
    const auto s = v->get<std::string>();
    for (const auto& a : allowed)
      if (a == s) return s;
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
    fail(where(key), "must be one of " + list);
  }

  std::vector<double> reals(const std::string& key, std::vector<double> def, bool positive_only,
                            std::size_t min_size) {
    const json* v = take(key);
    if (!v) return def;
    if (!v->is_array()) fail(where(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      const auto& e = (*v)[i];
      const std::string w = where(key) + "[" + std::to_string(i) + "]";
      if (!e.is_number()) fail(w, "expected a number");
      const double x = e.get<double>();
      if (!std::isfinite(x) || (positive_only && !(x > 0.0))) fail(w, "must be positive");
      out.push_back(x);
    }
    if (out.size() < min_size)
      fail(where(key), "needs at least " + std::to_string(min_size) + " entries");
    return out;
  }

  /// Sub-object reader; the key is marked as consumed.
  Reader object(const std::string& key) {
    const json* v = take(key);
    static const json empty = json::object();
    return Reader(v ? *v : empty, where(key));
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!used_.count(it.key())) fail(where(it.key()), "unknown key");
    }
  }

  static std::uint64_t as_integer(const json& v, const std::string& w, std::uint64_t min) {
    if (!v.is_number()) fail(w, "expected an integer");
    const double x = v.get<double>();
    if (!std::isfinite(x) || x != std::floor(x) || x < static_cast<double>(min) || x > 9.0e18)
      fail(w, "must be an integer >= " + std::to_string(min));
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    return static_cast<std::uint64_t>(x);
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> used_;
};

Kind parse_kind(const std::string& s) {
  static const Kind all[] = {Kind::fene_hysteresis,   Kind::triatom,
                             Kind::triatom_moments,   Kind::bimodal,
                             Kind::periodic_converge, Kind::periodic_crossover,
                             Kind::appendixb_error};
  for (Kind k : all)
    if (s == kind_name(k)) return k;
  throw ConfigError(
      "experiment: unknown experiment '" + s +
      "' (expected fene_hysteresis, triatom, triatom_moments, bimodal, periodic_converge, "
      "periodic_crossover or appendixb_error)");
}

/// Name of the model block an experiment reads.
const char* block_name(Kind k) {
  switch (k) {
    case Kind::fene_hysteresis: return "fene";
    case Kind::triatom:
    case Kind::triatom_moments: return "triatom";
    case Kind::bimodal: return "bimodal";
    default: return "periodic";
  }
}

void read_mm_knobs(Reader& n, studies::MmKnobs& mm) {
  mm.K = n.integer("K", mm.K, 1);
  mm.match.tol = n.positive("tol", mm.match.tol);
  mm.match.max_iter = static_cast<int>(n.integer("max_iter", static_cast<std::uint64_t>(mm.match.max_iter), 1));
  mm.resample_period = n.integer("resample_period", mm.resample_period, 0);
  mm.entropy_fraction =
      n.real("entropy_fraction", mm.entropy_fraction, [](double x) { return x >= 0.0; }, "nonnegative");
}

json mm_knobs_json(const studies::MmKnobs& mm) {
  return {{"K", mm.K},
          {"tol", mm.match.tol},
          {"max_iter", mm.match.max_iter},
          {"resample_period", mm.resample_period},
          {"entropy_fraction", mm.entropy_fraction}};
}

void read_periodic_params(Reader& b, oracle::PeriodicParams& p) {
  p.lam = b.positive("lam", p.lam);
  p.a = b.positive("a", p.a);
  p.e_amp = b.real("E", p.e_amp);
}

ExperimentConfig parse_document(const json& doc) {
  ExperimentConfig cfg;
  Reader top(doc, "$");
  const json* exp = top.take("experiment");
  if (!exp) Reader::fail("$.experiment", "missing (required)");
  if (!exp->is_string()) Reader::fail("$.experiment", "expected a string");
  cfg.kind = parse_kind(exp->get<std::string>());
  cfg.seed = top.integer("seed", cfg.seed);
  if (const json* v = top.take("output_dir")) {
    if (!v->is_string() || v->get<std::string>().empty())
      Reader::fail("$.output_dir", "expected a non-empty string");
    cfg.output_dir = v->get<std::string>();
  }
  cfg.plots = top.flag("plots", cfg.plots);

  const std::string block = block_name(cfg.kind);
  if (!top.has(block))
    Reader::fail("$." + block, std::string("missing (required by experiment ") +
                                   kind_name(cfg.kind) + ")");
  Reader b = top.object(block);
  Reader n = top.object("numerics");
  json& r = cfg.resolved;
  r["experiment"] = kind_name(cfg.kind);
  r["seed"] = cfg.seed;
  r["output_dir"] = cfg.output_dir;
  r["plots"] = cfg.plots;

  switch (cfg.kind) {
    case Kind::periodic_converge: {
      auto& pc = cfg.periodic;
      read_periodic_params(b, pc.params);
      if (!b.has("eps")) Reader::fail("$.periodic.eps", "missing (required)");
      pc.params.eps = b.positive("eps", 0.0);
      pc.moments = static_cast<int>(b.integer("moments", 1, 1));
      if (pc.moments > 2) Reader::fail("$.periodic.moments", "must be 1 or 2");
      pc.particles = n.integer("particles", 100000, 1);
      pc.dt = n.positive("dt", pc.params.eps / 10.0);
      pc.end_time = n.positive("end_time", 2.0);
      pc.n_quad = n.integer("n_quad", 512, 64);
      cfg.ladder = n.reals("ladder", {2.0, 4.0, 8.0, 16.0, 32.0}, true, 3);
      read_mm_knobs(n, pc.mm);
      for (double M : cfg.ladder)
        if (M < static_cast<double>(pc.mm.K))
          Reader::fail("$.numerics.ladder", "every factor must be at least K");
      r["periodic"] = {{"eps", pc.params.eps}, {"lam", pc.params.lam}, {"a", pc.params.a},
                       {"E", pc.params.e_amp}, {"moments", pc.moments}};
      r["numerics"] = {{"particles", pc.particles}, {"dt", pc.dt}, {"end_time", pc.end_time},
                       {"n_quad", pc.n_quad}, {"ladder", cfg.ladder}};
      r["numerics"].update(mm_knobs_json(pc.mm));
      break;
    }
    case Kind::periodic_crossover: {
      auto& pc = cfg.periodic;
      read_periodic_params(b, pc.params);
      cfg.eps_list = b.reals("eps", {0.1, 0.05, 0.025, 0.0125}, true, 1);
      pc.moments = static_cast<int>(b.integer("moments", 1, 1));
      if (pc.moments > 2) Reader::fail("$.periodic.moments", "must be 1 or 2");
      pc.particles = n.integer("particles", 100000, 1);
      pc.end_time = n.positive("end_time", 2.0);
      pc.n_quad = n.integer("n_quad", 512, 64);
      const auto range = n.reals("m_range", {1.0, 16.0}, true, 2);
      if (range.size() != 2 || !(range[1] > range[0]))
        Reader::fail("$.numerics.m_range", "expected [m_lo, m_hi] with m_lo < m_hi");
      cfg.m_lo = range[0];
      cfg.m_hi = range[1];
      cfg.log_tol = n.positive("log_tol", 1e-2);
      read_mm_knobs(n, pc.mm);
      if (cfg.m_lo < static_cast<double>(pc.mm.K))
        Reader::fail("$.numerics.m_range", "m_lo must be at least K");
      r["periodic"] = {{"eps", cfg.eps_list}, {"lam", pc.params.lam}, {"a", pc.params.a},
                       {"E", pc.params.e_amp}, {"moments", pc.moments}};
      r["numerics"] = {{"particles", pc.particles}, {"dt", "eps/10"},
                       {"end_time", pc.end_time},   {"n_quad", pc.n_quad},
                       {"m_range", range},          {"log_tol", cfg.log_tol}};
      r["numerics"].update(mm_knobs_json(pc.mm));
      break;
    }
    case Kind::appendixb_error: {
      auto& pc = cfg.periodic;
      read_periodic_params(b, pc.params);
      cfg.eps_list = b.reals("eps", {0.2, 0.1, 0.05, 0.025}, true, 3);
      pc.n_quad = n.integer("n_quad", 512, 64);
      r["periodic"] = {{"eps", cfg.eps_list}, {"lam", pc.params.lam}, {"a", pc.params.a},
                       {"E", pc.params.e_amp}};
      r["numerics"] = {{"n_quad", pc.n_quad}};
      break;
    }
    case Kind::bimodal: {
      auto& bc = cfg.bimodal;
      if (!b.has("eps")) Reader::fail("$.bimodal.eps", "missing (required)");
      bc.eps = b.positive("eps", 0.0);
      bc.x0 = b.real("x0", bc.x0);
      bc.y0 = b.real("y0", bc.y0);
      bc.initial_sd =
          b.real("initial_sd", bc.initial_sd, [](double x) { return x >= 0.0; }, "nonnegative");
      bc.particles = n.integer("particles", 100000, 1);
      bc.dt = n.positive("dt", bc.eps / 10.0);
      bc.end_time = n.positive("end_time", 10.0);
      bc.record_every = n.integer("record_every", 10, 1);
      cfg.macro_dt = n.positive("macro_dt", bc.dt);
      cfg.ladder = n.reals("ladder", {2.0, 5.0, 10.0}, true, 1);
      read_mm_knobs(n, bc.mm);
      for (double M : cfg.ladder)
        if (M < static_cast<double>(bc.mm.K))
          Reader::fail("$.numerics.ladder", "every factor must be at least K");
      r["bimodal"] = {{"eps", bc.eps}, {"x0", bc.x0}, {"y0", bc.y0}, {"initial_sd", bc.initial_sd}};
      r["numerics"] = {{"particles", bc.particles}, {"dt", bc.dt},
                       {"end_time", bc.end_time},   {"record_every", bc.record_every},
                       {"macro_dt", cfg.macro_dt},  {"ladder", cfg.ladder}};
      r["numerics"].update(mm_knobs_json(bc.mm));
      break;
    }
    case Kind::fene_hysteresis: {
      auto& fc = cfg.fene;
      fc.params.we = b.positive("we", 1.0);
      fc.params.b = b.positive("b", 7.0);
      cfg.L = b.integer("L", 4, 1);
      std::vector<double> hs = b.reals("hierarchies", {1.0, 2.0, 3.0}, true, 1);
      for (std::size_t i = 0; i < hs.size(); ++i) {
        const std::string w = "$.fene.hierarchies[" + std::to_string(i) + "]";
        if (hs[i] != 1.0 && hs[i] != 2.0 && hs[i] != 3.0) Reader::fail(w, "must be 1, 2 or 3");
        if (hs[i] == 3.0 && cfg.L != 4) Reader::fail(w, "hierarchy 3 is defined for L = 4 only");
        cfg.hierarchies.push_back(static_cast<int>(hs[i]));
      }
      const std::string init = b.text("initial", "equilibrium", {"equilibrium", "point"});
      fc.equilibrium_start = init == "equilibrium";
      fc.x0 = b.real("x0", fc.x0);
      if (!(std::abs(fc.x0) < fc.params.b)) Reader::fail("$.fene.x0", "must satisfy |x0| < b");
      fc.particles = n.integer("particles", 50000, 1);
      fc.dt = n.positive("dt", 2e-4);
      fc.end_time = n.positive("end_time", 4.0);
      fc.M_max = n.positive("M_max", 5.0);
      fc.record_every = n.integer("record_every", 10, 1);
      read_mm_knobs(n, fc.mm);
      if (fc.M_max < static_cast<double>(fc.mm.K)) Reader::fail("$.numerics.M_max", "must be at least K");
      r["fene"] = {{"we", fc.params.we}, {"b", fc.params.b},  {"L", cfg.L},
                   {"hierarchies", cfg.hierarchies}, {"initial", init}, {"x0", fc.x0}};
      r["numerics"] = {{"particles", fc.particles}, {"dt", fc.dt},       {"end_time", fc.end_time},
                       {"M_max", fc.M_max},         {"record_every", fc.record_every}};
      r["numerics"].update(mm_knobs_json(fc.mm));
      break;
    }
    case Kind::triatom:
    case Kind::triatom_moments: {
      auto& tc = cfg.triatom;
      auto& p = tc.params;
      p.beta = b.positive("beta", p.beta);
      p.eps = b.positive("eps", p.eps);
      p.k = b.positive("k", p.k);
      p.theta_saddle = b.real("theta_saddle", p.theta_saddle);
      p.delta_theta = b.positive("delta_theta", p.delta_theta);
      p.l_eq = b.positive("l_eq", p.l_eq);
      tc.theta0 = b.real("theta0", tc.theta0, [](double x) { return x > 0.0 && x < std::numbers::pi; },
                         "inside (0, pi)");
      r["triatom"] = {{"beta", p.beta},
                      {"eps", p.eps},
                      {"k", p.k},
                      {"theta_saddle", p.theta_saddle},
                      {"delta_theta", p.delta_theta},
                      {"l_eq", p.l_eq},
                      {"theta0", tc.theta0}};
      if (cfg.kind == Kind::triatom) {
        cfg.reaction_coordinate = b.text("reaction_coordinate", "xi2", {"xi1", "xi2"});
        const bool angle = cfg.reaction_coordinate == "xi1";
        tc.grid_min = b.real("grid_min", angle ? 0.0 : 0.0);
        tc.grid_max = b.real("grid_max", angle ? std::numbers::pi : 5.0);
        if (!(tc.grid_max > tc.grid_min)) Reader::fail("$.triatom.grid_max", "must exceed grid_min");
        tc.n_bins = b.integer("n_bins", 100, 2);
        Reader s = b.object("sampler");
        auto& sc = tc.sampler;
        sc.dt = s.positive("dt", p.eps / 10.0);
        sc.chains = s.integer("chains", sc.chains, 1);
        sc.burn_in_steps = s.integer("burn_in_steps", sc.burn_in_steps, 0);
        sc.samples = s.integer("samples", sc.samples, 1);
        sc.thin = s.integer("thin", sc.thin, 1);
        sc.groups = s.integer("groups", sc.groups, 1);
        s.finish();
        if (sc.samples < sc.chains) Reader::fail("$.triatom.sampler.samples", "must be at least chains");
        sc.inverse_temperature = p.beta;
        r["triatom"]["reaction_coordinate"] = cfg.reaction_coordinate;
        r["triatom"]["grid_min"] = tc.grid_min;
        r["triatom"]["grid_max"] = tc.grid_max;
        r["triatom"]["n_bins"] = tc.n_bins;
        r["triatom"]["sampler"] = {{"dt", sc.dt},
                                   {"chains", sc.chains},
                                   {"burn_in_steps", sc.burn_in_steps},
                                   {"samples", sc.samples},
                                   {"thin", sc.thin},
                                   {"groups", sc.groups}};
      }
      tc.particles = n.integer("particles", 50000, 1);
      tc.dt = n.positive("dt", 1e-3);
      tc.end_time = n.positive("end_time", 2.0);
      tc.M_max = n.positive("M_max", 10.0);
      tc.record_every = n.integer("record_every", 10, 1);
      read_mm_knobs(n, tc.mm);
      if (tc.M_max < static_cast<double>(tc.mm.K)) Reader::fail("$.numerics.M_max", "must be at least K");
      r["numerics"] = {{"particles", tc.particles}, {"dt", tc.dt},       {"end_time", tc.end_time},
                       {"M_max", tc.M_max},         {"record_every", tc.record_every}};
      r["numerics"].update(mm_knobs_json(tc.mm));
      break;
    }
  }
  b.finish();
  n.finish();
  top.finish();
  return cfg;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // The library message already carries the line and column.
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  return parse_document(doc);
}

ExperimentConfig parse_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config_text(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Output helpers

json RunManifest::to_json() const {
  return {{"experiment", experiment}, {"seed", seed},       {"config", config},
          {"build", build_id},        {"wall_seconds", wall_seconds},
          {"files", files},           {"summary", summary}};
}

json step_record_json(const StepRecord& r) {
  return {{"step", r.step},
          {"time_start", r.time_start},
          {"time_end", r.time_end},
          {"dt_requested", r.dt_requested},
          {"dt_used", r.dt_used},
          {"macro_before", r.macro_before.values},
          {"macro_extrapolated", r.macro_extrapolated.values},
          {"macro_after_match", r.macro_after_match.values},
          {"match_iterations", r.match_outcome.iterations},
          {"match_residual", r.match_outcome.residual},
          {"match_converged", r.match_outcome.converged},
          {"failures_before_success", r.failures_before_success},
          {"resampled", r.resampled}};
}

namespace {

/// Collects output files for one run.
class Output {
 public:
  Output(fs::path dir, bool plots) : dir_(std::move(dir)), plots_(plots) {
    fs::create_directories(dir_);
  }

  /// Writes `name` through a temporary file so a crash never leaves a torn CSV.
  void write(const std::string& name, const std::function<void(std::ostream&)>& body) {
    const fs::path final_path = dir_ / name;
    const fs::path tmp = dir_ / (name + ".tmp");
    {
      std::ofstream f(tmp, std::ios::binary);
      if (!f) throw std::runtime_error("cannot open " + tmp.string());
      body(f);
      if (!f) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, final_path);
    files_.push_back(name);
  }

  void plot(const std::string& name, const svg::Plot& p) {
    if (!plots_) return;
    p.save((dir_ / name).string());
    files_.push_back(name);
  }

  void series(const std::string& name, const std::vector<std::string>& header,
              const std::vector<const std::vector<double>*>& columns) {
    write(name, [&](std::ostream& out) {
      csv::write_row(out, header);
      const std::size_t rows = columns.front()->size();
      for (const auto* c : columns)
        if (c->size() != rows) throw std::logic_error("csv columns differ in length");
      std::vector<double> row(columns.size());
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t c = 0; c < columns.size(); ++c) row[c] = (*columns[c])[i];
        csv::write_row(out, row);
      }
    });
  }

  void steps(const std::string& name, const std::vector<StepRecord>& records) {
    write(name, [&](std::ostream& out) { write_step_records_csv(out, records); });
  }

  const std::vector<std::string>& files() const { return files_; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  bool plots_;
  std::vector<std::string> files_;
};

std::string factor_label(double M) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", M);
  return buf;
}

std::uint64_t job_seed(std::uint64_t seed, std::uint64_t job) { return derive_key(seed, job); }

/// Runs an accelerated study, translating numerical errors into
/// NumericalFailure carrying the last completed (or the stalled) step.
template <typename F>
auto guarded(std::vector<StepRecord>& records, F&& body) {
  try {
    return body();
  } catch (const MatchingStalled& e) {
    throw NumericalFailure(e.what(), e.record());
  } catch (const StepError& e) {
    std::optional<StepRecord> rec;
    if (!records.empty()) {
      StepRecord next;
      next.step = records.back().step + 1;
      next.time_start = records.back().time_end;
      next.macro_before = records.back().macro_after_match;
      rec = next;
    }
    throw NumericalFailure(std::string("step failed: ") + e.what(), rec);
  } catch (const EvaluationError& e) {
    throw NumericalFailure(std::string("state function failed: ") + e.what(),
                           records.empty() ? std::nullopt : std::optional(records.back()));
  }
}

template <typename F>
auto guarded_micro(F&& body) {
  try {
    return body();
  } catch (const StepError& e) {
    throw NumericalFailure(std::string("microscopic step failed: ") + e.what(), std::nullopt);
  } catch (const std::domain_error& e) {
    throw NumericalFailure(e.what(), std::nullopt);
  }
}

void series_csv(Output& out, const std::string& name, const std::string& label,
                const studies::Series& s) {
  out.series(name, {"t", label, label + "_se"}, {&s.t, &s.value, &s.se});
}

// ---------------------------------------------------------------------------
// Studies

json run_periodic_converge(const ExperimentConfig& cfg, Output& out) {
  const auto& pc = cfg.periodic;
  studies::ConvergenceResult res;
  svg::Plot paths("Slow mean", "t", "E[X]");
  // One seed for every ladder point so the error is a smooth function of the step.
  const std::uint64_t seed = job_seed(cfg.seed, 0);
  for (double M : cfg.ladder) {
    std::vector<StepRecord> records;
    const auto path =
        guarded(records, [&] { return studies::periodic_mm_path(pc, M, seed, &records); });
    const std::string tag = "M" + factor_label(M);
    series_csv(out, "mm_" + tag + ".csv", "mean_x", path);
    out.steps("steps_" + tag + ".csv", records);
    res.M.push_back(M);
    res.dt_extrap.push_back(M * pc.inner_step());
    res.error.push_back(studies::periodic_path_error(pc, path));
    paths.add("dt=" + factor_label(M) + " dt_micro", path.t, path.value);
  }
  res.order = oracle::fit_order(res.dt_extrap, res.error);

  const auto c = oracle::solve_fourier_coeffs(pc.params);
  std::vector<double> te, xe;
  for (std::size_t i = 0; i <= 1000; ++i) {
    const double t = pc.end_time * static_cast<double>(i) / 1000.0;
    te.push_back(t);
    xe.push_back(oracle::exact_mean(pc.params, c, {c.A, c.C}, t)[0]);
  }
  out.series("exact.csv", {"t", "mean_x"}, {&te, &xe});
  const auto micro = guarded_micro([&] { return studies::periodic_micro_path(pc, seed); });
  series_csv(out, "micro.csv", "mean_x", micro);
  out.series("convergence.csv", {"M", "dt_extrap", "error"}, {&res.M, &res.dt_extrap, &res.error});
  paths.add("exact", te, xe, false, true);
  out.plot("paths.svg", paths);
  out.plot("convergence.svg", svg::Plot("Error against extrapolation step", "extrapolation step",
                                        "L2 error over last period")
                                  .log_x()
                                  .log_y()
                                  .add("accelerated", res.dt_extrap, res.error, true));
  return {{"order", res.order},
          {"dt_extrap", res.dt_extrap},
          {"error", res.error},
          {"micro_error", studies::periodic_path_error(pc, micro)},
          {"reference", {"exact.csv", "micro.csv"}}};
}

json run_periodic_crossover(const ExperimentConfig& cfg, Output& out) {
  std::vector<double> eps_col, m_col, mm_col, macro_col;
  std::vector<double> eps_max, m_max, dt_max;
  svg::Plot errors("Accelerated vs averaged-model error", "M", "L2 error over last period");
  errors.log_x().log_y();
  json per_eps = json::array();
  for (std::size_t i = 0; i < cfg.eps_list.size(); ++i) {
    studies::PeriodicConfig pc = cfg.periodic;
    pc.params.eps = cfg.eps_list[i];
    pc.dt = 0.0;
    std::vector<StepRecord> none;
    const auto r = guarded(none, [&] {
      return studies::periodic_crossover(pc, cfg.m_lo, cfg.m_hi, cfg.log_tol, job_seed(cfg.seed, i));
    });
    for (std::size_t k = 0; k < r.M_evaluated.size(); ++k) {
      eps_col.push_back(r.eps);
      m_col.push_back(r.M_evaluated[k]);
      mm_col.push_back(r.mm_error[k]);
      macro_col.push_back(r.macro_error);
    }
    eps_max.push_back(r.eps);
    m_max.push_back(r.M_max);
    dt_max.push_back(r.dt_max);
    std::vector<double> ms = r.M_evaluated, es = r.mm_error;
    std::vector<std::size_t> order(ms.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return ms[a] < ms[b]; });
    std::vector<double> sm, se;
    for (auto k : order) sm.push_back(ms[k]), se.push_back(es[k]);
    errors.add("eps=" + factor_label(r.eps), sm, se, true);
    errors.add("averaged eps=" + factor_label(r.eps), {cfg.m_lo, cfg.m_hi},
               {r.macro_error, r.macro_error}, false, true);
    per_eps.push_back({{"eps", r.eps}, {"M_max", r.M_max}, {"dt_max", r.dt_max},
                       {"macro_error", r.macro_error}});
  }
  out.series("crossover_evaluations.csv", {"eps", "M", "mm_error", "macro_error"},
             {&eps_col, &m_col, &mm_col, &macro_col});
  out.series("crossover.csv", {"eps", "M_max", "dt_max"}, {&eps_max, &m_max, &dt_max});
  out.plot("crossover_errors.svg", errors);
  json summary{{"crossovers", per_eps}};
  if (eps_max.size() >= 3) {
    const double slope = oracle::fit_order(eps_max, dt_max);
    summary["dt_max_slope"] = slope;
    out.plot("dt_max.svg", svg::Plot("Largest useful extrapolation step", "eps", "dt_max")
                               .log_x()
                               .log_y()
                               .add("dt_max", eps_max, dt_max, true));
  }
  return summary;
}

json run_appendixb(const ExperimentConfig& cfg, Output& out) {
  std::vector<double> eps = cfg.eps_list, err;
  for (double e : eps) {
    oracle::PeriodicParams p = cfg.periodic.params;
    p.eps = e;
    err.push_back(studies::periodic_macro_error(p, cfg.periodic.n_quad));
  }
  const double slope = oracle::fit_order(eps, err);
  out.series("appendixb.csv", {"eps", "error"}, {&eps, &err});
  out.plot("appendixb.svg", svg::Plot("Averaged-model error", "eps", "L2 error over one period")
                                .log_x()
                                .log_y()
                                .add("averaged model", eps, err, true));
  return {{"slope", slope}, {"eps", eps}, {"error", err}};
}

json run_bimodal(const ExperimentConfig& cfg, Output& out) {
  const auto& bc = cfg.bimodal;
  const auto micro = guarded_micro([&] { return studies::bimodal_micro_variance(bc, job_seed(cfg.seed, 0)); });
  const auto macro = guarded_micro(
      [&] { return studies::bimodal_macro_variance(bc, cfg.macro_dt, job_seed(cfg.seed, 1)); });
  series_csv(out, "micro.csv", "variance", micro);
  series_csv(out, "macro.csv", "variance", macro);
  svg::Plot plot("Variance of the slow component", "t", "Var[X]");
  plot.add("microscopic", micro.t, micro.value);
  plot.add("averaged model", macro.t, macro.value, false, true);
  json finals = json::array();
  for (double M : cfg.ladder) {
    std::vector<StepRecord> records;
    const auto mm = guarded(
        records, [&] { return studies::bimodal_mm_variance(bc, M, job_seed(cfg.seed, 2), &records); });
    const std::string tag = "M" + factor_label(M);
    series_csv(out, "mm_" + tag + ".csv", "variance", mm);
    out.steps("steps_" + tag + ".csv", records);
    plot.add("accelerated dt=" + factor_label(M) + " dt_micro", mm.t, mm.value);
    finals.push_back({{"M", M}, {"variance", mm.value.back()}, {"se", mm.se.back()}});
  }
  out.plot("variance.svg", plot);
  return {{"micro_variance", micro.value.back()}, {"micro_se", micro.se.back()},
          {"macro_variance", macro.value.back()}, {"macro_se", macro.se.back()},
          {"accelerated", finals}};
}

void fene_csv(Output& out, const std::string& name, const studies::FeneSeries& s) {
  out.series(name, {"t", "tau", "tau_se", "M1", "M1_se"},
             {&s.tau.t, &s.tau.value, &s.tau.se, &s.m1.value, &s.m1.se});
}

json run_fene(const ExperimentConfig& cfg, Output& out) {
  const auto& fc = cfg.fene;
  const auto ref = guarded_micro([&] { return studies::fene_micro(fc, job_seed(cfg.seed, 0)); });
  fene_csv(out, "micro.csv", ref);
  svg::Plot phase("Hysteresis", "M1 = E[X^2]", "tau");
  svg::Plot stress("Stress", "t", "tau");
  phase.add("microscopic", ref.m1.value, ref.tau.value);
  stress.add("microscopic", ref.tau.t, ref.tau.value);
  json dist = json::array();
  for (int h : cfg.hierarchies) {
    std::vector<StepRecord> records;
    const auto mm = guarded(records, [&] {
      return studies::fene_mm(fc, h, cfg.L, job_seed(cfg.seed, 1), &records);
    });
    const std::string tag = "h" + std::to_string(h);
    fene_csv(out, "mm_" + tag + ".csv", mm);
    out.steps("steps_" + tag + ".csv", records);
    phase.add("hierarchy " + std::to_string(h), mm.m1.value, mm.tau.value);
    stress.add("hierarchy " + std::to_string(h), mm.tau.t, mm.tau.value);
    const auto d = studies::l2_distance(mm.tau, ref.tau, 0.0, fc.end_time, 4000);
    dist.push_back({{"hierarchy", h}, {"L", cfg.L}, {"l2_tau", d.value}, {"error_bar", d.error_bar}});
  }
  out.plot("hysteresis.svg", phase);
  out.plot("stress.svg", stress);
  return {{"distances", dist}};
}

void triatom_csv(Output& out, const std::string& name, const studies::TriatomSeries& s) {
  out.series(name, {"t", "theta", "theta_se", "xi2", "xi2_se"},
             {&s.theta.t, &s.theta.value, &s.theta.se, &s.xi2.value, &s.xi2.se});
}

double z_score(const studies::Series& a, const studies::Series& b) {
  return (a.value.back() - b.value.back()) / std::hypot(a.se.back(), b.se.back());
}

json run_triatom(const ExperimentConfig& cfg, Output& out) {
  const auto& tc = cfg.triatom;
  const auto [xi1, xi2] = models::reaction_coordinates();
  const bool angle = cfg.reaction_coordinate == "xi1";
  const auto& xi = angle ? xi1 : xi2;
  const auto ref = guarded_micro([&] { return studies::triatom_micro(tc, job_seed(cfg.seed, 0)); });
  triatom_csv(out, "micro.csv", ref);

  models::EffectiveDynamicsTable table;
  try {
    table = models::build_effective_table(tc.params, xi, tc.grid_min, tc.grid_max, tc.n_bins,
                                          tc.sampler, job_seed(cfg.seed, 1));
  } catch (const models::SamplingInsufficient& e) {
    throw NumericalFailure(e.what(), std::nullopt);
  }
  out.write("effective_table.csv",
            [&](std::ostream& o) { models::write_effective_table_csv(o, table); });
  const Ensemble init = studies::triatom_initial_ensemble(tc);
  const double z0 = xi.value(init.position(0));
  const auto eff = guarded_micro(
      [&] { return studies::triatom_effective(tc, table, z0, job_seed(cfg.seed, 2)); });
  series_csv(out, "effective.csv", "mean_" + xi.name, eff);

  std::vector<StepRecord> records;
  const auto mm = guarded(records, [&] {
    return studies::triatom_mm(tc, studies::reaction_coordinate_states(xi), job_seed(cfg.seed, 3),
                               &records);
  });
  triatom_csv(out, "mm.csv", mm);
  out.steps("steps.csv", records);

  const auto& ref_xi = angle ? ref.theta : ref.xi2;
  const auto& mm_xi = angle ? mm.theta : mm.xi2;
  out.plot("means.svg", svg::Plot("Mean of " + xi.name, "t", "E[" + xi.name + "]")
                            .add("microscopic", ref_xi.t, ref_xi.value)
                            .add("effective dynamics", eff.t, eff.value, false, true)
                            .add("accelerated", mm_xi.t, mm_xi.value));
  return {{"reaction_coordinate", xi.name},
          {"micro_final", ref_xi.value.back()},
          {"micro_se", ref_xi.se.back()},
          {"effective_final", eff.value.back()},
          {"effective_se", eff.se.back()},
          {"effective_z", z_score(eff, ref_xi)},
          {"accelerated_final", mm_xi.value.back()},
          {"accelerated_se", mm_xi.se.back()},
          {"accelerated_z", z_score(mm_xi, ref_xi)}};
}

json run_triatom_moments(const ExperimentConfig& cfg, Output& out) {
  const auto& tc = cfg.triatom;
  const auto ref = guarded_micro([&] { return studies::triatom_micro(tc, job_seed(cfg.seed, 0)); });
  triatom_csv(out, "micro.csv", ref);
  std::vector<StepRecord> records;
  const auto mm = guarded(records, [&] {
    return studies::triatom_mm(tc, studies::triatom_moment_states(), job_seed(cfg.seed, 3), &records);
  });
  triatom_csv(out, "mm.csv", mm);
  out.steps("steps.csv", records);
  out.plot("theta.svg", svg::Plot("Mean bond angle", "t", "E[theta]")
                            .add("microscopic", ref.theta.t, ref.theta.value)
                            .add("accelerated", mm.theta.t, mm.theta.value));
  return {{"micro_theta", ref.theta.value.back()},
          {"micro_theta_se", ref.theta.se.back()},
          {"accelerated_theta", mm.theta.value.back()},
          {"accelerated_theta_se", mm.theta.se.back()},
          {"theta_z", z_score(mm.theta, ref.theta)}};
}

}  // namespace

RunManifest run_experiment(const ExperimentConfig& cfg, const fs::path& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  Output out(out_dir, cfg.plots);
  RunManifest m;
  m.experiment = kind_name(cfg.kind);
  m.seed = cfg.seed;
  m.config = cfg.resolved;
  m.build_id = build_id();
  switch (cfg.kind) {
    case Kind::periodic_converge: m.summary = run_periodic_converge(cfg, out); break;
    case Kind::periodic_crossover: m.summary = run_periodic_crossover(cfg, out); break;
    case Kind::appendixb_error: m.summary = run_appendixb(cfg, out); break;
    case Kind::bimodal: m.summary = run_bimodal(cfg, out); break;
    case Kind::fene_hysteresis: m.summary = run_fene(cfg, out); break;
    case Kind::triatom: m.summary = run_triatom(cfg, out); break;
    case Kind::triatom_moments: m.summary = run_triatom_moments(cfg, out); break;
  }
  m.files = out.files();
  m.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json doc = m.to_json();
  doc["threads"] = thread_count();
  out.write("manifest.json", [&](std::ostream& o) { o << doc.dump(2) << '\n'; });
  return m;
}

}  // namespace mmaccel::experiments
