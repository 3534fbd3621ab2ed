#pragma once

// Batch runner for the two benchmark families: configuration parsing, the
// per-seed solves (run concurrently up to a job limit), and serialization of
// traces, diagnostics and the JSON summary.
//
// Configuration is an INI file with the sections [problem], [solver],
// [schedule], [batch] and [output]; unknown sections or keys are errors.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "palmi/core.hpp"
#include "palmi/diagnostics.hpp"
#include "palmi/driver.hpp"
#include "palmi/problems.hpp"

namespace palmi {

enum class Family { kMmot, kEllipsoidQp };
std::string to_string(Family family);

enum class InitKind { kRandom, kGood };

/// Tolerances per mode. PALMi follows the configured schedule, PALMe runs at
/// the constant exact_eps, PALMf ignores both.
struct ScheduleSpec {
  std::string kind = "sublinear";  // constant | exponential | sublinear
  double scale = 0.1;
  double rate = 0.75;
  double floor = 1e-7;
  double exact_eps = 1e-5;

  EpsilonSchedule inexact() const;
  EpsilonSchedule for_mode(Mode mode) const;
};

struct ExperimentConfig {
  Family family = Family::kMmot;
  MmotSpec mmot;
  EllipsoidQpSpec eqp;

  std::vector<Mode> modes = {Mode::kPalmI};
  double sigma = 1e-2;
  /// When set, sigma follows SigmaPolicy::bounded(gamma, max_i L_i, sigma_upper).
  std::optional<double> gamma;
  double sigma_upper = 1e6;
  StopCriteria stop;
  ScheduleSpec schedule;

  std::vector<std::uint64_t> seeds;  // empty means the single seed 0
  InitKind init = InitKind::kRandom;
  std::string reference_path;
  double perturbation = 1e-3;
  int jobs = 1;

  std::string out_dir;  // empty: nothing is written
  bool write_traces = true;
  bool diagnostics = false;

  /// Every key as read, for the summary echo.
  std::map<std::string, std::string> echo;

  std::vector<std::uint64_t> effective_seeds() const;
  SolverConfig solver_config(Mode mode, const BlockProblem& problem) const;
};

/// Throws InputError naming the offending section/key.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::filesystem::path& path);

/// "1-100", "3,5,8" or a mix ("1-3,10").
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

BlockProblem build_problem(const ExperimentConfig& config);
/// Random start of the family, or the reference perturbed uniformly by at
/// most config.perturbation per entry. Deterministic in the seed.
BlockVec initial_point(const ExperimentConfig& config, std::uint64_t seed,
                       const BlockVec* reference);

/// Whitespace-separated flattened iterate, blocks in order.
void write_reference(const std::filesystem::path& path, const BlockVec& z);
BlockVec read_reference(const std::filesystem::path& path, std::span<const Index> dims);

struct RunDiagnostics {
  double omega = 0.0;
  double omega_p95 = 0.0;
  double omega_half_ratio = 0.0;
  /// Surrogate and subgradient checks need sigma >= gamma L with gamma > 1.
  bool surrogate_checked = false;
  std::size_t flagged_margins = 0;
  double min_relative_margin = 0.0;
  bool subgradient_holds = true;
  std::size_t oracle_gaps = 0;
  RateFit rate;

  // Per-iteration series, k = 0..K-1 (margin/w entries empty when unchecked).
  std::vector<double> eps;
  std::vector<double> delta_next;  // ||z^{k+1} - zbar^{k+1}||
  std::vector<double> margin;
  std::vector<bool> flagged;
  std::vector<double> w_norm;
  std::vector<double> w_bound;
  std::vector<double> distance;  // ||z^k - z^K||, k = 0..K
};

extern const char* const kDiagnosticsHeader;
void write_diagnostics_csv(std::ostream& out, const RunDiagnostics& diag);

/// Oracle-based diagnostics of a recorded run (PALMe/PALMi only).
RunDiagnostics diagnose_run(const BlockProblem& problem, const SolveResult& result,
                            const SolverConfig& solver);

struct RunRecord {
  std::uint64_t seed = 0;
  Mode mode = Mode::kPalmI;
  bool ok = false;
  std::string error;
  SolveStatus status = SolveStatus::kMaxIters;
  int iters = 0;
  double final_kkt = 0.0;
  double final_obj = 0.0;
  double time_s = 0.0;
  double max_infeas = 0.0;
  std::vector<TraceRow> rows;
  std::vector<std::string> warnings;
  BlockVec z;
  std::optional<RunDiagnostics> diagnostics;
  std::string trace_path;
};

struct BatchReport {
  ExperimentConfig config;
  std::vector<RunRecord> runs;  // seed-major, modes in configured order
  std::string averaged_history_path;
  std::string summary_path;
};

/// One solve with per-run error capture.
RunRecord run_single(const ExperimentConfig& config, const BlockProblem& problem, Mode mode,
                     std::uint64_t seed, const BlockVec* reference);

/// Runs every (seed, mode) pair on up to config.jobs threads and writes the
/// configured artifacts. Solver failures are recorded, never rethrown.
BatchReport run_experiment(const ExperimentConfig& config);

/// CSV header of per-run traces.
extern const char* const kTraceHeader;
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows);
std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path);

}  // namespace palmi
