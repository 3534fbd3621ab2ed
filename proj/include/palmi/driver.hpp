#pragma once

// The outer PALM loop. Blocks are updated in ascending order (Gauss-Seidel):
// block i is linearized at (x_{<i}^{k+1}, x_{>=i}^k), its prox target
// x_t = x_i - grad_i f / sigma_i is formed, and a projection subsolver returns
// a point x_i^{k+1} with a multiplier whose residual certificate satisfies
// sqrt(r_i) <= eps^k. The three modes differ in schedule and subsolvers:
//
//   PALMe  constant tight eps; SSNCG for polytopes, the secular oracle for
//          ellipsoids, closed-form or ALM projections otherwise
//   PALMf  feasible inexact projections (every iterate stays in S_i); steps
//          follow the subsolver's own stop rule and are not residual-certified
//   PALMi  decreasing eps; infeasible inexact projections (SSNCG, ADMM, ALM)
//          certified by the residual

#include <chrono>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "palmi/core.hpp"
#include "palmi/subsolvers.hpp"

namespace palmi {

enum class Mode { kPalmE, kPalmF, kPalmI };

std::string to_string(Mode mode);
/// Accepts "palme", "palmf", "palmi" (case-insensitive); InputError otherwise.
Mode parse_mode(const std::string& text);

enum class SubsolverKind { kAuto, kExact, kSsncg, kAdmm, kFeasible, kAlm };

struct StopCriteria {
  double rel_kkt_tol = 1e-6;
  int max_outer_iters = 10000;
  double time_budget_s = std::numeric_limits<double>::infinity();
};

struct SolverConfig {
  Mode mode = Mode::kPalmI;
  EpsilonSchedule schedule = EpsilonSchedule::constant(1e-6);
  SigmaPolicy sigma = SigmaPolicy::fixed(1.0);
  StopCriteria stop;
  /// Per-block subsolver; empty or kAuto picks by mode and set kind.
  std::vector<SubsolverKind> subsolvers;
  /// Keep z^k, prox targets and sigmas of every iteration for diagnostics.
  bool record_history = false;
  /// Certificate misses are retried with the subsolver's internal target
  /// halved, at most this many times.
  int max_retries = 20;
  /// PALMf stop-rule constant eta = eta_factor * sigma, applied to the
  /// sigma-scaled subproblem gradient.
  double feasible_eta_factor = 0.99;
  /// A fixed sigma below gamma_check * L_i triggers a warning.
  double gamma_check = 1.0;

  /// Throws ParameterError on inconsistent settings.
  void validate() const;
};

/// One accepted outer iteration: z^k -> z^{k+1}.
struct TraceRow {
  int iter = 0;
  double objective = 0.0;  // F(z^{k+1})
  double rel_kkt = 0.0;    // at z^{k+1}
  double eps = 0.0;        // eps^k (NaN for PALMf, which is not residual-certified)
  double max_sqrt_residual = 0.0;
  double infeas_inf = 0.0;
  double step_norm = 0.0;  // ||z^{k+1} - z^k||
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  double cum_time_s = 0.0;
  long inner_iters = 0;
  int retries = 0;
};

enum class SolveStatus { kConverged, kMaxIters, kTimeBudget };
std::string to_string(SolveStatus status);

/// Per-iteration data for the diagnostics module (record_history only).
/// iterates has one more entry than targets and sigmas.
struct SolveHistory {
  std::vector<BlockVec> iterates;            // z^0, z^1, ...
  std::vector<BlockVec> targets;             // prox targets of sweep k
  std::vector<std::vector<double>> sigmas;   // sigma_i^k of sweep k
  std::vector<std::vector<SubSolution>> steps;
};

struct SolveTrace {
  Mode mode = Mode::kPalmI;
  std::vector<TraceRow> rows;
  SolveStatus status = SolveStatus::kMaxIters;
  double initial_objective = 0.0;
  double initial_rel_kkt = 0.0;
  std::vector<std::string> warnings;
  SolveHistory history;

  double final_rel_kkt() const { return rows.empty() ? initial_rel_kkt : rows.back().rel_kkt; }
  double final_objective() const {
    return rows.empty() ? initial_objective : rows.back().objective;
  }
  double wall_time_s() const { return rows.empty() ? 0.0 : rows.back().cum_time_s; }
};

struct SolveResult {
  BlockVec z;
  SolveTrace trace;
};

/// Raised when a block step cannot be certified after all retries or the
/// objective becomes non-finite. Carries the last iterate and the trace so far.
class SolveError : public std::runtime_error {
 public:
  SolveError(const std::string& what, BlockVec last, SolveTrace partial)
      : std::runtime_error(what), last_(std::move(last)), partial_(std::move(partial)) {}
  const BlockVec& last() const { return last_; }
  const SolveTrace& partial() const { return partial_; }

 private:
  BlockVec last_;
  SolveTrace partial_;
};

/// Mutable state carried between sweeps: current sigmas and subsolver warm
/// starts (equality multipliers for polytopes, the scalar for ellipsoids).
struct SweepState {
  std::vector<double> sigma;
  std::vector<std::optional<Vector>> warm;

  static SweepState initial(const BlockProblem& problem, const SolverConfig& config);
};

struct SweepRecord {
  std::vector<SubSolution> blocks;
  std::vector<Vector> targets;
  std::vector<double> sigmas;
  std::vector<int> retries;
};

/// One Gauss-Seidel pass i = 0..n-1 at iteration k. Throws SolveError (with an
/// empty trace) when a block cannot be certified.
std::pair<BlockVec, SweepRecord> block_sweep(const BlockProblem& problem, const BlockVec& z,
                                             std::int64_t k, const SolverConfig& config,
                                             SweepState& state);

SolveResult palmi_solve(const BlockProblem& problem, const BlockVec& z0,
                        const SolverConfig& config);

}  // namespace palmi
