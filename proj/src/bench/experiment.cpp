#include "palmi/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "json.hpp"

namespace palmi {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

const char* const kTraceHeader =
    "iter,objective,rel_kkt,eps,max_sqrt_residual,infeas_inf,step_norm,sigma_min,sigma_max,"
    "cum_time_s";

const char* const kDiagnosticsHeader = "iter,eps,delta_next,ratio,margin,flagged,w_norm,w_bound,distance";

std::string to_string(Family family) {
  return family == Family::kMmot ? "mmot" : "eqp";
}

// -- schedules ---------------------------------------------------------------------------

EpsilonSchedule ScheduleSpec::inexact() const {
  if (kind == "constant") return EpsilonSchedule::constant(scale, floor);
  if (kind == "exponential") return EpsilonSchedule::exponential(scale, rate, floor);
  if (kind == "sublinear") return EpsilonSchedule::sublinear(scale, rate, floor);
  throw InputError("[schedule] kind: expected constant, exponential or sublinear, got '" + kind +
                   "'");
}

EpsilonSchedule ScheduleSpec::for_mode(Mode mode) const {
  if (mode == Mode::kPalmE) return EpsilonSchedule::constant(exact_eps);
  return inexact();
}

// -- configuration -------------------------------------------------------------------------

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"problem",
       {"family", "K", "N", "beta", "domain_lo", "domain_hi", "density", "n", "m", "ncond",
        "data_seed", "random_c"}},
      {"solver",
       {"modes", "sigma", "gamma", "sigma_upper", "kkt_tol", "max_iters", "time_budget_s"}},
      {"schedule", {"kind", "scale", "rate", "floor", "exact_eps"}},
      {"batch", {"seeds", "init", "reference", "perturbation", "jobs"}},
      {"output", {"dir", "traces", "diagnostics"}},
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  std::optional<std::string> raw(const std::string& section, const std::string& key) const {
    const auto sec = tree_.get_child_optional(section);
    if (!sec) return std::nullopt;
    const auto value = sec->get_optional<std::string>(key);
    if (!value) return std::nullopt;
    return trim(*value);
  }

  template <typename T>
  void read(const std::string& section, const std::string& key, T& target) const {
    const auto text = raw(section, key);
    if (!text) return;
    target = convert<T>(section, key, *text);
  }

  template <typename T>
  static T convert(const std::string& section, const std::string& key, const std::string& text) {
    const std::string where = "[" + section + "] " + key;
    if constexpr (std::is_same_v<T, std::string>) {
      return text;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (text == "true" || text == "1" || text == "yes") return true;
      if (text == "false" || text == "0" || text == "no") return false;
      throw InputError(where + ": expected a boolean, got '" + text + "'");
    } else {
      std::istringstream in(text);
      T value{};
      in >> value;
      if (in.fail() || !(in >> std::ws).eof()) {
        throw InputError(where + ": cannot parse '" + text + "' as a number");
      }
      return value;
    }
  }

 private:
  const pt::ptree& tree_;
};

void check_keys(const pt::ptree& tree) {
  for (const auto& [section, body] : tree) {
    const auto found = known_keys().find(section);
    if (found == known_keys().end()) throw InputError("unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      if (!found->second.contains(key)) {
        throw InputError("[" + section + "]: unknown key '" + key + "'");
      }
    }
  }
}

}  // namespace

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const std::string& item : split(text, ',')) {
    const auto dash = item.find('-');
    try {
      if (dash == std::string::npos) {
        seeds.push_back(std::stoull(item));
        continue;
      }
      const std::uint64_t lo = std::stoull(item.substr(0, dash));
      const std::uint64_t hi = std::stoull(item.substr(dash + 1));
      if (hi < lo) throw InputError("seed range '" + item + "' is decreasing");
      for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const InputError*>(&e) != nullptr) throw;
      throw InputError("[batch] seeds: cannot parse '" + item + "'");
    }
  }
  return seeds;
}

ExperimentConfig parse_config_text(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  check_keys(tree);
  const Reader r(tree);

  ExperimentConfig c;
  std::string family = "mmot";
  r.read("problem", "family", family);
  if (family == "mmot") {
    c.family = Family::kMmot;
  } else if (family == "eqp") {
    c.family = Family::kEllipsoidQp;
    // Defaults of the ellipsoid experiment.
    c.sigma = 1.0;
    c.stop.rel_kkt_tol = 1e-5;
    c.schedule.floor = 1e-6;
    c.schedule.exact_eps = 1e-6;
  } else {
    throw InputError("[problem] family: expected mmot or eqp, got '" + family + "'");
  }

  r.read("problem", "K", c.mmot.K);
  r.read("problem", "N", c.mmot.N);
  r.read("problem", "beta", c.mmot.beta);
  r.read("problem", "domain_lo", c.mmot.domain_lo);
  r.read("problem", "domain_hi", c.mmot.domain_hi);
  r.read("problem", "density", c.mmot.density);
  r.read("problem", "n", c.eqp.n);
  r.read("problem", "m", c.eqp.m);
  r.read("problem", "data_seed", c.eqp.seed);
  r.read("problem", "random_c", c.eqp.random_c);
  if (const auto ncond = r.raw("problem", "ncond")) {
    c.eqp.ncond.clear();
    for (const std::string& v : split(*ncond, ',')) {
      c.eqp.ncond.push_back(Reader::convert<double>("problem", "ncond", v));
    }
  }

  if (const auto modes = r.raw("solver", "modes")) {
    c.modes.clear();
    for (const std::string& m : split(*modes, ',')) c.modes.push_back(parse_mode(m));
    if (c.modes.empty()) throw InputError("[solver] modes: empty list");
  }
  r.read("solver", "sigma", c.sigma);
  if (const auto gamma = r.raw("solver", "gamma")) {
    c.gamma = Reader::convert<double>("solver", "gamma", *gamma);
  }
  r.read("solver", "sigma_upper", c.sigma_upper);
  r.read("solver", "kkt_tol", c.stop.rel_kkt_tol);
  r.read("solver", "max_iters", c.stop.max_outer_iters);
  r.read("solver", "time_budget_s", c.stop.time_budget_s);

  r.read("schedule", "kind", c.schedule.kind);
  r.read("schedule", "scale", c.schedule.scale);
  r.read("schedule", "rate", c.schedule.rate);
  r.read("schedule", "floor", c.schedule.floor);
  r.read("schedule", "exact_eps", c.schedule.exact_eps);

  if (const auto seeds = r.raw("batch", "seeds")) c.seeds = parse_seed_list(*seeds);
  std::string init = "random";
  r.read("batch", "init", init);
  if (init == "random") {
    c.init = InitKind::kRandom;
  } else if (init == "good") {
    c.init = InitKind::kGood;
  } else {
    throw InputError("[batch] init: expected random or good, got '" + init + "'");
  }
  r.read("batch", "reference", c.reference_path);
  r.read("batch", "perturbation", c.perturbation);
  r.read("batch", "jobs", c.jobs);

  r.read("output", "dir", c.out_dir);
  r.read("output", "traces", c.write_traces);
  r.read("output", "diagnostics", c.diagnostics);

  for (const auto& [section, body] : tree) {
    for (const auto& [key, value] : body) c.echo[section + "." + key] = trim(value.data());
  }

  // Fail fast on values the solver would reject later.
  if (c.family == Family::kMmot) c.mmot.validate();
  if (c.family == Family::kEllipsoidQp) c.eqp.validate();
  (void)c.schedule.inexact();
  if (!(c.schedule.exact_eps > 0.0)) throw InputError("[schedule] exact_eps must be positive");
  if (!(c.sigma > 0.0)) throw InputError("[solver] sigma must be positive");
  if (c.jobs < 1) throw InputError("[batch] jobs must be at least 1");
  if (!(c.perturbation >= 0.0)) throw InputError("[batch] perturbation must be nonnegative");
  if (c.init == InitKind::kGood && c.reference_path.empty()) {
    throw InputError("[batch] init = good needs a reference file");
  }
  return c;
}

ExperimentConfig parse_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  ExperimentConfig c = parse_config_text(buffer.str());
  // Relative paths are taken relative to the config file.
  if (!c.reference_path.empty() && fs::path(c.reference_path).is_relative()) {
    c.reference_path = (path.parent_path() / c.reference_path).string();
  }
  return c;
}

std::vector<std::uint64_t> ExperimentConfig::effective_seeds() const {
  return seeds.empty() ? std::vector<std::uint64_t>{0} : seeds;
}

SolverConfig ExperimentConfig::solver_config(Mode mode, const BlockProblem& problem) const {
  SolverConfig s;
  s.mode = mode;
  s.schedule = schedule.for_mode(mode);
  if (gamma) {
    const double lip = *std::max_element(problem.lipschitz.begin(), problem.lipschitz.end());
    s.sigma = SigmaPolicy::bounded(*gamma, lip, sigma_upper, sigma);
    s.gamma_check = *gamma;
  } else {
    s.sigma = SigmaPolicy::fixed(sigma);
  }
  s.stop = stop;
  s.record_history = diagnostics && mode != Mode::kPalmF;
  return s;
}

// -- problems and starts ---------------------------------------------------------------------

BlockProblem build_problem(const ExperimentConfig& config) {
  return config.family == Family::kMmot ? build_mmot(config.mmot)
                                        : build_ellipsoid_qp(config.eqp);
}

BlockVec initial_point(const ExperimentConfig& config, std::uint64_t seed,
                       const BlockVec* reference) {
  std::mt19937_64 rng(seed);
  if (config.init == InitKind::kGood) {
    if (reference == nullptr) throw InputError("good initialization needs a reference point");
    std::uniform_real_distribution<double> noise(-config.perturbation, config.perturbation);
    BlockVec z = *reference;
    for (Vector& block : z) {
      for (Index j = 0; j < block.size(); ++j) block[j] += noise(rng);
    }
    return z;
  }
  return config.family == Family::kMmot ? mmot_random_start(config.mmot, rng)
                                        : ellipsoid_qp_random_start(config.eqp, rng);
}

void write_reference(const fs::path& path, const BlockVec& z) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write reference '" + path.string() + "'");
  out << std::setprecision(17);
  for (const Vector& block : z) {
    for (Index j = 0; j < block.size(); ++j) out << block[j] << '\n';
  }
}

BlockVec read_reference(const fs::path& path, std::span<const Index> dims) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open reference '" + path.string() + "'");
  const Index total = std::accumulate(dims.begin(), dims.end(), Index{0});
  Vector flat(total);
  for (Index j = 0; j < total; ++j) {
    if (!(in >> flat[j])) {
      throw InputError("reference '" + path.string() + "' holds fewer than " +
                       std::to_string(total) + " values");
    }
  }
  double extra = 0.0;
  if (in >> extra) throw InputError("reference '" + path.string() + "' holds extra values");
  return BlockVec::unflatten(flat, dims);
}

// -- diagnostics of one run --------------------------------------------------------------------

RunDiagnostics diagnose_run(const BlockProblem& problem, const SolveResult& result,
                            const SolverConfig& solver) {
  const SolveTrace& trace = result.trace;
  if (trace.mode == Mode::kPalmF) throw InputError("diagnose_run: PALMf runs carry no eps");
  RunDiagnostics d;
  for (const TraceRow& row : trace.rows) d.eps.push_back(row.eps);
  d.distance = distances_to(trace.history, result.z);
  d.rate = fit_empirical_rate(d.distance);
  if (trace.rows.empty()) return d;

  const ExactSweepData data = exact_sweep_data(problem, trace.history);
  d.oracle_gaps = data.gaps.size();
  d.delta_next.assign(data.delta_norm.begin() + 1, data.delta_norm.end());
  const ErrorBoundFit fit = fit_error_bound(d.delta_next, d.eps);
  d.omega = fit.omega;
  d.omega_p95 = fit.p95;
  d.omega_half_ratio = fit.half_ratio;

  // The surrogate analysis needs sigma >= gamma L for some gamma > 1.
  const double lip = *std::max_element(problem.lipschitz.begin(), problem.lipschitz.end());
  std::vector<double> smin, smax;
  for (const TraceRow& row : trace.rows) {
    smin.push_back(row.sigma_min);
    smax.push_back(row.sigma_max);
  }
  const double sigma_floor = *std::min_element(smin.begin(), smin.end());
  const double gamma =
      solver.sigma.is_bounded() ? solver.sigma.gamma() : sigma_floor / std::max(lip, 1e-300);
  if (!(gamma > 1.0)) return d;

  const double upper = solver.sigma.is_bounded()
                           ? solver.sigma.upper()
                           : *std::max_element(smax.begin(), smax.end());
  const TheoryConstants constants = compute_constants(gamma, lip, problem.num_blocks(), upper,
                                                      smin, smax, fit.omega);
  const SurrogateSeries series = surrogate_sequence(data, constants, solver.schedule);
  const SubgradientCheck check = subgradient_bound_check(problem, trace.history, data, constants);
  d.surrogate_checked = true;
  d.flagged_margins = series.num_flagged();
  d.min_relative_margin = series.min_relative_margin();
  d.subgradient_holds = check.all_hold();
  d.margin = series.margins;
  d.flagged = series.flagged;
  d.w_norm = check.w_norm;
  d.w_bound = check.bound;
  return d;
}

void write_diagnostics_csv(std::ostream& out, const RunDiagnostics& d) {
  out << kDiagnosticsHeader << '\n' << std::setprecision(17);
  auto at = [](const std::vector<double>& v, std::size_t k) {
    return k < v.size() ? v[k] : std::numeric_limits<double>::quiet_NaN();
  };
  for (std::size_t k = 0; k < d.eps.size(); ++k) {
    const double delta = at(d.delta_next, k);
    out << k << ',' << d.eps[k] << ',' << delta << ',' << delta / std::max(d.eps[k], 1e-30) << ','
        << at(d.margin, k) << ',' << (k < d.flagged.size() && d.flagged[k] ? 1 : 0) << ','
        << at(d.w_norm, k) << ',' << at(d.w_bound, k) << ','
        << at(d.distance, k) << '\n';
  }
}

// -- traces ----------------------------------------------------------------------------------

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows) {
  out << kTraceHeader << '\n' << std::setprecision(17);
  for (const TraceRow& r : rows) {
    out << r.iter << ',' << r.objective << ',' << r.rel_kkt << ',' << r.eps << ','
        << r.max_sqrt_residual << ',' << r.infeas_inf << ',' << r.step_norm << ',' << r.sigma_min
        << ',' << r.sigma_max << ',' << r.cum_time_s << '\n';
  }
}

std::vector<TraceRow> read_trace_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open trace '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || trim(line) != kTraceHeader) {
    throw InputError("'" + path.string() + "' is not a trace file (header mismatch)");
  }
  std::vector<TraceRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        v.push_back(std::stod(cell));
      } catch (const std::exception&) {
        // stod rejects "nan" spellings on some platforms; accept them here.
        if (trim(cell) == "nan" || trim(cell) == "-nan") {
          v.push_back(std::numeric_limits<double>::quiet_NaN());
        } else {
          throw InputError(path.string() + ":" + std::to_string(lineno) + ": bad value '" +
                           cell + "'");
        }
      }
    }
    if (v.size() != 10) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": expected 10 columns");
    }
    TraceRow r;
    r.iter = static_cast<int>(v[0]);
    r.objective = v[1];
    r.rel_kkt = v[2];
    r.eps = v[3];
    r.max_sqrt_residual = v[4];
    r.infeas_inf = v[5];
    r.step_norm = v[6];
    r.sigma_min = v[7];
    r.sigma_max = v[8];
    r.cum_time_s = v[9];
    rows.push_back(r);
  }
  return rows;
}

// -- batch ---------------------------------------------------------------------------------

RunRecord run_single(const ExperimentConfig& config, const BlockProblem& problem, Mode mode,
                     std::uint64_t seed, const BlockVec* reference) {
  RunRecord rec;
  rec.seed = seed;
  rec.mode = mode;
  try {
    const SolverConfig solver = config.solver_config(mode, problem);
    const BlockVec z0 = initial_point(config, seed, reference);
    SolveResult result = palmi_solve(problem, z0, solver);
    rec.ok = true;
    rec.status = result.trace.status;
    rec.iters = static_cast<int>(result.trace.rows.size());
    rec.final_kkt = result.trace.final_rel_kkt();
    rec.final_obj = result.trace.final_objective();
    rec.time_s = result.trace.wall_time_s();
    for (const TraceRow& row : result.trace.rows) {
      rec.max_infeas = std::max(rec.max_infeas, row.infeas_inf);
    }
    rec.warnings = result.trace.warnings;
    if (solver.record_history) rec.diagnostics = diagnose_run(problem, result, solver);
    rec.rows = std::move(result.trace.rows);
    rec.z = std::move(result.z);
  } catch (const SolveError& e) {
    rec.error = e.what();
    rec.rows = e.partial().rows;
    rec.iters = static_cast<int>(rec.rows.size());
    rec.z = e.last();
  } catch (const std::exception& e) {
    rec.error = e.what();
  }
  return rec;
}

namespace {

std::string run_stem(const RunRecord& r) {
  return to_string(r.mode) + "_seed" + std::to_string(r.seed);
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// JSON has no NaN/inf; map them to null.
nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

// Per-mode mean of rel_kkt and objective by iteration; finished runs hold
// their final values so every row averages over the same runs.
void write_averaged_history(const fs::path& path, const ExperimentConfig& config,
                            const std::vector<RunRecord>& runs) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << "iter,mode,mean_rel_kkt,geomean_rel_kkt,mean_objective,active_runs\n"
      << std::setprecision(17);
  for (Mode mode : config.modes) {
    std::vector<const RunRecord*> group;
    std::size_t horizon = 0;
    for (const RunRecord& r : runs) {
      if (r.mode == mode && r.ok && !r.rows.empty()) {
        group.push_back(&r);
        horizon = std::max(horizon, r.rows.size());
      }
    }
    for (std::size_t k = 0; k < horizon; ++k) {
      double kkt = 0.0, log_kkt = 0.0, obj = 0.0;
      std::size_t active = 0;
      for (const RunRecord* r : group) {
        const TraceRow& row = r->rows[std::min(k, r->rows.size() - 1)];
        kkt += row.rel_kkt;
        log_kkt += std::log(std::max(row.rel_kkt, 1e-300));
        obj += row.objective;
        if (k < r->rows.size()) ++active;
      }
      const auto n = static_cast<double>(group.size());
      out << k << ',' << to_string(mode) << ',' << kkt / n << ',' << std::exp(log_kkt / n) << ','
          << obj / n << ',' << active << '\n';
    }
  }
}

nlohmann::json diagnostics_json(const RunDiagnostics& d) {
  nlohmann::json j;
  j["omega"] = number(d.omega);
  j["omega_p95"] = number(d.omega_p95);
  j["omega_half_ratio"] = number(d.omega_half_ratio);
  j["oracle_gaps"] = d.oracle_gaps;
  j["surrogate_checked"] = d.surrogate_checked;
  if (d.surrogate_checked) {
    j["flagged_margins"] = d.flagged_margins;
    j["min_relative_margin"] = number(d.min_relative_margin);
    j["subgradient_bound_holds"] = d.subgradient_holds;
  }
  j["rate"] = {{"class", to_string(d.rate.rate)},
               {"exponent", number(d.rate.exponent)},
               {"r2", number(d.rate.r2)},
               {"window", {d.rate.window_begin, d.rate.window_end}}};
  return j;
}

}  // namespace

BatchReport run_experiment(const ExperimentConfig& config) {
  BatchReport report;
  report.config = config;
  const BlockProblem problem = build_problem(config);
  std::optional<BlockVec> reference;
  if (config.init == InitKind::kGood) {
    reference = read_reference(config.reference_path, problem.dims);
  }

  const std::vector<std::uint64_t> seeds = config.effective_seeds();
  const std::size_t tasks = seeds.size() * config.modes.size();
  report.runs.resize(tasks);

  // Each worker owns the slots it claims; aggregation happens after join.
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks; t = next++) {
      const std::uint64_t seed = seeds[t / config.modes.size()];
      const Mode mode = config.modes[t % config.modes.size()];
      report.runs[t] = run_single(config, problem, mode, seed, reference ? &*reference : nullptr);
    }
  };
  const auto jobs = static_cast<std::size_t>(
      std::min<std::size_t>(static_cast<std::size_t>(config.jobs), std::max<std::size_t>(tasks, 1)));
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (std::thread& th : pool) th.join();

  if (config.out_dir.empty()) return report;

  const fs::path dir(config.out_dir);
  fs::create_directories(dir);
  if (config.write_traces) {
    for (RunRecord& r : report.runs) {
      if (r.rows.empty()) continue;
      const fs::path trace = dir / ("trace_" + run_stem(r) + ".csv");
      std::ofstream out(trace);
      write_trace_csv(out, r.rows);
      r.trace_path = trace.string();
      if (r.diagnostics) {
        std::ofstream diag(dir / ("diag_" + run_stem(r) + ".csv"));
        write_diagnostics_csv(diag, *r.diagnostics);
      }
    }
  }
  const fs::path averaged = dir / "averaged_history.csv";
  write_averaged_history(averaged, config, report.runs);
  report.averaged_history_path = averaged.string();

  nlohmann::json summary;
  summary["config"] = config.echo;
  summary["config"]["family"] = to_string(config.family);
  nlohmann::json per_run = nlohmann::json::array();
  nlohmann::json diagnostics = nlohmann::json::object();
  for (const RunRecord& r : report.runs) {
    nlohmann::json j = {{"seed", r.seed},
                        {"mode", to_string(r.mode)},
                        {"iters", r.iters},
                        {"final_kkt", number(r.final_kkt)},
                        {"final_obj", number(r.final_obj)},
                        {"time_s", number(r.time_s)},
                        {"status", r.ok ? to_string(r.status) : "error"},
                        {"max_infeas", number(r.max_infeas)}};
    if (!r.error.empty()) j["error"] = r.error;
    if (!r.trace_path.empty()) j["trace"] = r.trace_path;
    if (r.diagnostics) diagnostics[run_stem(r)] = diagnostics_json(*r.diagnostics);
    per_run.push_back(std::move(j));
  }
  summary["per_run"] = std::move(per_run);
  summary["averaged_history_path"] = report.averaged_history_path;
  summary["diagnostics"] = std::move(diagnostics);

  // Paired per-mode columns for timing and quality comparisons.
  nlohmann::json modes = nlohmann::json::object();
  for (Mode mode : config.modes) {
    std::vector<double> times, objs;
    std::size_t converged = 0, failed = 0;
    for (const RunRecord& r : report.runs) {
      if (r.mode != mode) continue;
      if (!r.ok) {
        ++failed;
        continue;
      }
      times.push_back(r.time_s);
      objs.push_back(r.final_obj);
      if (r.status == SolveStatus::kConverged) ++converged;
    }
    const double mean_time =
        times.empty() ? std::numeric_limits<double>::quiet_NaN()
                      : std::accumulate(times.begin(), times.end(), 0.0) /
                            static_cast<double>(times.size());
    modes[to_string(mode)] = {{"runs", times.size() + failed},
                              {"converged", converged},
                              {"failed", failed},
                              {"mean_time_s", number(mean_time)},
                              {"median_time_s", number(median(times))},
                              {"median_final_obj", number(median(objs))}};
  }
  summary["modes"] = std::move(modes);

  const fs::path summary_path = dir / "summary.json";
  std::ofstream out(summary_path);
  out << summary.dump(2) << '\n';
  report.summary_path = summary_path.string();
  return report;
}

}  // namespace palmi
