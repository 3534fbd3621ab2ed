// Command-line front end: batch experiments from INI configs, and
// post-processing of written traces.
//
//   palmi solve <config>            family taken from [problem] family
//   palmi mmot <config>             same, requiring family = mmot
//   palmi eqp <config>              same, requiring family = eqp
//   palmi diagnose <trace.csv>...   certification / error-bound / surrogate summary
//   palmi rates <trace.csv> --theta <t>   predicted versus fitted rate

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "palmi/diagnostics.hpp"
#include "palmi/experiment.hpp"

namespace fs = std::filesystem;
using namespace palmi;

namespace {

struct Overrides {
  std::string mode;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::string out;
  std::optional<double> kkt_tol;
  std::optional<int> max_iters;
  std::string save_final;
};

void apply(const Overrides& o, ExperimentConfig& c) {
  if (!o.mode.empty()) c.modes = {parse_mode(o.mode)};
  if (o.seed) c.seeds = {*o.seed};
  if (o.jobs) c.jobs = *o.jobs;
  if (!o.out.empty()) c.out_dir = o.out;
  if (o.kkt_tol) c.stop.rel_kkt_tol = *o.kkt_tol;
  if (o.max_iters) c.stop.max_outer_iters = *o.max_iters;
  if (c.jobs < 1) throw InputError("--jobs must be at least 1");
}

int run_batch(const std::string& path, const Overrides& o, std::optional<Family> required) {
  ExperimentConfig config = parse_config_file(path);
  if (required && config.family != *required) {
    throw InputError("config '" + path + "' describes family " + to_string(config.family) +
                     ", expected " + to_string(*required));
  }
  apply(o, config);
  const BatchReport report = run_experiment(config);

  std::cout << std::left << std::setw(8) << "mode" << std::setw(8) << "seed" << std::setw(12)
            << "status" << std::setw(8) << "iters" << std::setw(14) << "rel_kkt" << std::setw(20)
            << "objective" << "time_s\n";
  int failures = 0;
  for (const RunRecord& r : report.runs) {
    std::cout << std::setw(8) << to_string(r.mode) << std::setw(8) << r.seed << std::setw(12)
              << (r.ok ? to_string(r.status) : "error") << std::setw(8) << r.iters
              << std::setw(14) << std::setprecision(4) << r.final_kkt << std::setw(20)
              << std::setprecision(12) << r.final_obj << std::setprecision(4) << r.time_s << '\n';
    if (!r.ok) {
      ++failures;
      std::cout << "  error: " << r.error << '\n';
    }
  }
  if (!report.summary_path.empty()) std::cout << "summary: " << report.summary_path << '\n';
  if (!o.save_final.empty()) {
    for (const RunRecord& r : report.runs) {
      if (r.ok) {
        write_reference(o.save_final, r.z);
        std::cout << "final iterate of " << to_string(r.mode) << " seed " << r.seed
                  << " written to " << o.save_final << '\n';
        break;
      }
    }
  }
  return failures == 0 ? 0 : 2;
}

fs::path sibling_diagnostics(const fs::path& trace) {
  std::string name = trace.filename().string();
  if (name.rfind("trace_", 0) == 0) name.replace(0, 6, "diag_");
  return trace.parent_path() / name;
}

std::vector<std::vector<double>> read_numeric_csv(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        row.push_back(std::numeric_limits<double>::quiet_NaN());
      }
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  return rows;
}

int diagnose(const std::vector<std::string>& traces) {
  for (const std::string& path : traces) {
    const std::vector<TraceRow> rows = read_trace_csv(path);
    std::cout << path << '\n';
    if (rows.empty()) {
      std::cout << "  empty trace\n";
      continue;
    }
    std::size_t certified = 0, checked = 0;
    double max_infeas = 0.0;
    for (const TraceRow& r : rows) {
      max_infeas = std::max(max_infeas, r.infeas_inf);
      if (std::isnan(r.eps)) continue;
      ++checked;
      if (r.max_sqrt_residual <= r.eps * (1.0 + 1e-10)) ++certified;
    }
    std::cout << "  iterations " << rows.size() << ", final rel_kkt " << rows.back().rel_kkt
              << ", final objective " << std::setprecision(12) << rows.back().objective
              << std::setprecision(6) << '\n';
    if (checked > 0) {
      std::cout << "  certified sweeps " << certified << "/" << checked << '\n';
    } else {
      std::cout << "  feasible-mode trace (no residual certificate)\n";
    }
    std::cout << "  max infeasibility " << max_infeas << '\n';

    const fs::path diag = sibling_diagnostics(path);
    if (!fs::exists(diag)) {
      std::cout << "  no diagnostics file (" << diag.string() << ")\n";
      continue;
    }
    // iter,eps,delta_next,ratio,margin,flagged,w_norm,w_bound,distance
    const auto table = read_numeric_csv(diag);
    std::vector<double> delta, eps;
    std::size_t flagged = 0, w_checked = 0, w_hold = 0;
    for (const auto& r : table) {
      if (r.size() < 9) continue;
      eps.push_back(r[1]);
      delta.push_back(r[2]);
      if (r[5] > 0.5) ++flagged;
      if (std::isfinite(r[6]) && std::isfinite(r[7])) {
        ++w_checked;
        if (r[6] <= r[7] + 1e-12 * (1.0 + r[7])) ++w_hold;
      }
    }
    const ErrorBoundFit fit = fit_error_bound(delta, eps);
    std::cout << "  error bound: omega " << fit.omega << ", p95 " << fit.p95
              << ", second/first half " << fit.half_ratio << '\n';
    if (w_checked > 0) {
      std::cout << "  surrogate: " << flagged << " flagged margins\n";
      std::cout << "  subgradient bound: holds at " << w_hold << "/" << w_checked << '\n';
    } else {
      std::cout << "  surrogate/subgradient checks not applicable (sigma < gamma L)\n";
    }
  }
  return 0;
}

EpsilonSchedule parse_schedule(const std::string& text) {
  // kind:scale,rate,floor
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw InputError("--schedule: expected kind:scale,rate,floor");
  ScheduleSpec spec;
  spec.kind = text.substr(0, colon);
  std::stringstream ss(text.substr(colon + 1));
  char comma = 0;
  if (!(ss >> spec.scale)) throw InputError("--schedule: bad scale");
  if (ss >> comma && !(ss >> spec.rate)) throw InputError("--schedule: bad rate");
  if (ss >> comma && !(ss >> spec.floor)) throw InputError("--schedule: bad floor");
  return spec.inexact();
}

int rates(const std::string& path, double theta, const std::string& schedule_text) {
  const EpsilonSchedule schedule = parse_schedule(schedule_text);
  std::cout << "schedule " << schedule.describe() << ", theta " << theta << '\n';
  try {
    const RatePrediction p = predict_rate(theta, schedule);
    std::cout << "predicted: " << to_string(p.rate);
    if (p.rate == RateClass::kSublinear) std::cout << " O(k^-" << p.exponent << ")";
    if (p.tau) std::cout << ", tau " << *p.tau;
    std::cout << '\n';
    if (!p.note.empty()) std::cout << "  note: " << p.note << '\n';
  } catch (const ParameterError& e) {
    std::cout << "predicted: none (" << e.what() << ")\n";
  }

  // Distances to the last iterate come from the diagnostics file; otherwise
  // they are bounded by the tail sums of the recorded step norms.
  std::vector<double> distance;
  const fs::path diag = sibling_diagnostics(path);
  if (fs::exists(diag)) {
    for (const auto& r : read_numeric_csv(diag)) {
      if (r.size() >= 9) distance.push_back(r[8]);
    }
    std::cout << "distances: ||z^k - z^K|| from " << diag.string() << '\n';
  } else {
    const std::vector<TraceRow> rows = read_trace_csv(path);
    distance.assign(rows.size(), 0.0);
    double tail = 0.0;
    for (std::size_t k = rows.size(); k-- > 0;) {
      tail += rows[k].step_norm;
      distance[k] = tail;
    }
    std::cout << "distances: tail sums of step norms\n";
  }
  const RateFit fit = fit_empirical_rate(distance);
  std::cout << "fitted: " << to_string(fit.rate);
  if (fit.rate == RateClass::kLinear) {
    std::cout << " ratio " << fit.linear_ratio;
  } else if (fit.rate == RateClass::kSublinear) {
    std::cout << " O(k^-" << fit.sublinear_exponent << ")";
  }
  std::cout << ", r2 " << fit.r2 << ", window [" << fit.window_begin << ", " << fit.window_end
            << ")\n";
  std::cout << "  linear r2 " << fit.linear_r2 << ", sublinear r2 " << fit.sublinear_r2 << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inexact proximal alternating linearized minimization experiments"};
  app.require_subcommand(1);

  Overrides o;
  auto add_overrides = [&](CLI::App* sub) {
    sub->add_option("--mode", o.mode, "Run a single mode: palme, palmf or palmi");
    sub->add_option("--seed", o.seed, "Run a single seed");
    sub->add_option("--jobs", o.jobs, "Concurrent runs");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--kkt-tol", o.kkt_tol, "Relative KKT stopping tolerance");
    sub->add_option("--max-iters", o.max_iters, "Outer iteration limit");
    sub->add_option("--save-final", o.save_final,
                    "Write the final iterate of the first successful run (reference file)");
  };

  std::string config_path;
  auto* solve = app.add_subcommand("solve", "Run the batch described by a config file");
  solve->add_option("config", config_path)->required()->check(CLI::ExistingFile);
  add_overrides(solve);
  auto* mmot = app.add_subcommand("mmot", "Run an MMOT config");
  mmot->add_option("config", config_path)->required()->check(CLI::ExistingFile);
  add_overrides(mmot);
  auto* eqp = app.add_subcommand("eqp", "Run an ellipsoid-QP config");
  eqp->add_option("config", config_path)->required()->check(CLI::ExistingFile);
  add_overrides(eqp);

  std::vector<std::string> traces;
  auto* diag = app.add_subcommand("diagnose", "Summarize written traces");
  diag->add_option("traces", traces)->required()->check(CLI::ExistingFile);

  std::string rate_trace;
  double theta = 0.5;
  std::string schedule = "sublinear:0.1,0.75,1e-7";
  auto* rate = app.add_subcommand("rates", "Predicted versus fitted convergence rate");
  rate->add_option("trace", rate_trace)->required()->check(CLI::ExistingFile);
  rate->add_option("--theta", theta, "Lojasiewicz exponent hypothesis in [0, 1)")->required();
  rate->add_option("--schedule", schedule, "kind:scale,rate,floor of the run's eps schedule")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) return run_batch(config_path, o, std::nullopt);
    if (mmot->parsed()) return run_batch(config_path, o, Family::kMmot);
    if (eqp->parsed()) return run_batch(config_path, o, Family::kEllipsoidQp);
    if (diag->parsed()) return diagnose(traces);
    if (rate->parsed()) return rates(rate_trace, theta, schedule);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
