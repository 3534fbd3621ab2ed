#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "palmi/driver.hpp"
#include "palmi/residuals.hpp"

namespace palmi {

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::kPalmE:
      return "palme";
    case Mode::kPalmF:
      return "palmf";
    case Mode::kPalmI:
      return "palmi";
  }
  return "unknown";
}

Mode parse_mode(const std::string& text) {
  std::string lower = text;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (lower == "palme") return Mode::kPalmE;
  if (lower == "palmf") return Mode::kPalmF;
  if (lower == "palmi") return Mode::kPalmI;
  throw InputError("unknown mode '" + text + "' (expected palme, palmf or palmi)");
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kConverged:
      return "converged";
    case SolveStatus::kMaxIters:
      return "max_iters";
    case SolveStatus::kTimeBudget:
      return "time_budget";
  }
  return "unknown";
}

void SolverConfig::validate() const {
  if (!(stop.rel_kkt_tol > 0.0)) throw ParameterError("rel_kkt_tol must be positive");
  if (stop.max_outer_iters < 0) throw ParameterError("max_outer_iters must be nonnegative");
  if (!(stop.time_budget_s > 0.0)) throw ParameterError("time budget must be positive");
  if (max_retries < 0) throw ParameterError("max_retries must be nonnegative");
  if (!(feasible_eta_factor > 0.0)) throw ParameterError("feasible_eta_factor must be positive");
}

namespace {

using Clock = std::chrono::steady_clock;

SubsolverKind resolve_kind(const SolverConfig& config, const ConstraintSet& set, Index i) {
  const auto slot = static_cast<std::size_t>(i);
  if (slot < config.subsolvers.size() && config.subsolvers[slot] != SubsolverKind::kAuto) {
    return config.subsolvers[slot];
  }
  // PALMe runs the residual-driven SSNCG to its constant tight tolerance; for
  // ellipsoids that tolerance sits below the ADMM round-off floor, so the
  // secular oracle takes over.
  switch (set.kind()) {
    case SetKind::kLinearPolytope:
      return config.mode == Mode::kPalmF ? SubsolverKind::kExact : SubsolverKind::kSsncg;
    case SetKind::kEllipsoid:
      if (config.mode == Mode::kPalmI) return SubsolverKind::kAdmm;
      return config.mode == Mode::kPalmE ? SubsolverKind::kExact : SubsolverKind::kFeasible;
    case SetKind::kSmoothConvex:
      // A closed-form projector is already exact; otherwise fall back to ALM.
      if (set.smooth().projector) return SubsolverKind::kExact;
      return SubsolverKind::kAlm;
  }
  return SubsolverKind::kExact;
}

struct BlockCall {
  const ConstraintSet& set;
  SubsolverKind kind;
  const Vector& target;
  const Vector& x_prev;
  double eps;
  double sigma;
  const std::optional<Vector>& warm;
  const SolverConfig& config;
};

SubSolution run_subsolver(const BlockCall& call, int attempt) {
  const double shrink = std::ldexp(1.0, -attempt);
  const double internal = call.eps * shrink;
  switch (call.kind) {
    case SubsolverKind::kExact: {
      if (call.set.kind() == SetKind::kLinearPolytope) {
        SsncgOptions options;
        options.tol = kExactTolerance * shrink;
        options.initial_multiplier = call.warm;
        return project_polytope_ssncg(call.set.polytope(), call.target, options);
      }
      if (call.set.kind() == SetKind::kEllipsoid) {
        return project_ellipsoid_secular(call.set.ellipsoid(), call.target,
                                         kExactTolerance * shrink);
      }
      return project_exact_solution(call.set, call.target);
    }
    case SubsolverKind::kSsncg: {
      if (call.set.kind() != SetKind::kLinearPolytope) {
        throw InputError("ssncg subsolver requires a linear polytope block");
      }
      SsncgOptions options;
      // Exit is driven by the residual certificate alone.
      options.tol = std::numeric_limits<double>::min();
      options.residual_target = internal;
      options.initial_multiplier = call.warm;
      return project_polytope_ssncg(call.set.polytope(), call.target, options);
    }
    case SubsolverKind::kAdmm: {
      if (call.set.kind() != SetKind::kEllipsoid) {
        throw InputError("admm subsolver requires an ellipsoid block");
      }
      AdmmOptions options;
      options.target_residual = internal;
      if (call.warm && call.warm->size() == 1) options.initial_multiplier = (*call.warm)[0];
      return project_ellipsoid_admm(call.set.ellipsoid(), call.target, options);
    }
    case SubsolverKind::kFeasible: {
      if (call.set.kind() != SetKind::kEllipsoid) {
        throw InputError("feasible subsolver requires an ellipsoid block");
      }
      // The stop rule bounds the subproblem gradient sigma (x - x_t) + lambda' grad g
      // by eta/2 ||x - x_prev||_inf with eta = factor * sigma; in the units of
      // the projection (lambda = lambda' / sigma) the constant is the factor.
      return project_ellipsoid_feasible(call.set.ellipsoid(), call.target, call.x_prev,
                                        call.config.feasible_eta_factor);
    }
    case SubsolverKind::kAlm: {
      AlmOptions options;
      options.target_residual = internal;
      return project_smooth_alm(call.set, call.target, options);
    }
    case SubsolverKind::kAuto:
      break;
  }
  throw InputError("unresolved subsolver kind");
}

bool certified(const BlockCall& call, const SubSolution& sol) {
  // Independent re-evaluation; the subsolver's own residual field is not trusted.
  const double r = residual(call.set, sol.x, sol.lambda, call.target);
  return std::sqrt(r) <= call.eps;
}

}  // namespace

SweepState SweepState::initial(const BlockProblem& problem, const SolverConfig& config) {
  SweepState state;
  const auto n = static_cast<std::size_t>(problem.num_blocks());
  state.sigma.resize(n);
  for (std::size_t i = 0; i < n; ++i) state.sigma[i] = config.sigma.initial(static_cast<Index>(i));
  state.warm.resize(n);
  return state;
}

std::pair<BlockVec, SweepRecord> block_sweep(const BlockProblem& problem, const BlockVec& z,
                                             std::int64_t k, const SolverConfig& config,
                                             SweepState& state) {
  problem.check_point(z);
  const Index n = problem.num_blocks();
  const bool residual_certified = config.mode != Mode::kPalmF;
  const double eps = config.schedule.at(k);

  BlockVec next = z;
  SweepRecord record;
  for (Index i = 0; i < n; ++i) {
    const auto slot = static_cast<std::size_t>(i);
    const ConstraintSet& set = problem.constraints[slot];
    const double sigma = state.sigma[slot];
    // next holds x_{<i}^{k+1} and x_{>=i}^k.
    const Vector target = prox_target(problem, next, i, sigma);
    const BlockCall call{set,   resolve_kind(config, set, i), target, z[i], eps, sigma,
                         state.warm[slot], config};

    std::optional<SubSolution> accepted;
    int attempt = 0;
    for (; attempt <= config.max_retries; ++attempt) {
      SubSolution sol;
      try {
        sol = run_subsolver(call, attempt);
      } catch (const SubsolverError& e) {
        sol = e.best();
      }
      if (!residual_certified || certified(call, sol)) {
        accepted = std::move(sol);
        break;
      }
    }
    if (!accepted) {
      std::ostringstream msg;
      msg << "block " << i << " at iteration " << k << ": certificate sqrt(r) <= " << eps
          << " not reached after " << config.max_retries << " retries";
      throw SolveError(msg.str(), next, SolveTrace{});
    }

    if (accepted->lambda.eq.size() > 0) {
      state.warm[slot] = accepted->lambda.eq;
    } else if (set.kind() == SetKind::kEllipsoid) {
      state.warm[slot] = accepted->lambda.ineq;
    }
    next[i] = accepted->x;
    record.targets.push_back(target);
    record.sigmas.push_back(sigma);
    record.retries.push_back(attempt);
    record.blocks.push_back(std::move(*accepted));
    state.sigma[slot] = config.sigma.next(i, k, sigma);
  }
  return {std::move(next), std::move(record)};
}

SolveResult palmi_solve(const BlockProblem& problem, const BlockVec& z0,
                        const SolverConfig& config_in) {
  config_in.validate();
  problem.validate();
  problem.check_point(z0);

  SolverConfig config = config_in;
  SolveTrace trace;
  trace.mode = config.mode;
  if (config.mode == Mode::kPalmE &&
      config.schedule.kind() != EpsilonSchedule::Kind::kConstant) {
    config.schedule = EpsilonSchedule::constant(config.schedule.at(0));
    trace.warnings.push_back("palme: schedule replaced by the constant " +
                             config.schedule.describe());
  }
  SweepState state = SweepState::initial(problem, config);
  for (Index i = 0; i < problem.num_blocks(); ++i) {
    const double bound = config.gamma_check * problem.lipschitz[static_cast<std::size_t>(i)];
    if (state.sigma[static_cast<std::size_t>(i)] < bound) {
      std::ostringstream msg;
      msg << "block " << i << ": sigma " << state.sigma[static_cast<std::size_t>(i)]
          << " is below gamma * L = " << bound << "; sufficient decrease is not guaranteed";
      trace.warnings.push_back(msg.str());
    }
  }

  const auto start = Clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - start).count(); };

  KktWorkspace kkt_workspace;
  BlockVec z = z0;
  {
    const KktReport report = rel_kkt_violation(problem, z, &kkt_workspace);
    trace.initial_objective = report.objective;
    trace.initial_rel_kkt = report.rel_kkt;
  }
  if (config.record_history) trace.history.iterates.push_back(z);
  if (trace.initial_rel_kkt <= config.stop.rel_kkt_tol) {
    trace.status = SolveStatus::kConverged;
    return {std::move(z), std::move(trace)};
  }

  const bool residual_certified = config.mode != Mode::kPalmF;
  trace.status = SolveStatus::kMaxIters;
  for (int k = 0; k < config.stop.max_outer_iters; ++k) {
    std::pair<BlockVec, SweepRecord> sweep;
    try {
      sweep = block_sweep(problem, z, k, config, state);
    } catch (const SolveError& e) {
      throw SolveError(e.what(), e.last(), std::move(trace));
    }
    auto& [z_next, record] = sweep;

    const KktReport report = rel_kkt_violation(problem, z_next, &kkt_workspace);
    if (!std::isfinite(report.objective)) {
      throw NumericalError("objective is not finite at iteration " + std::to_string(k));
    }

    TraceRow row;
    row.iter = k;
    row.objective = report.objective;
    row.rel_kkt = report.rel_kkt;
    row.eps = residual_certified ? config.schedule.at(k)
                                 : std::numeric_limits<double>::quiet_NaN();
    row.step_norm = z_next.distance(z);
    row.sigma_min = *std::min_element(record.sigmas.begin(), record.sigmas.end());
    row.sigma_max = *std::max_element(record.sigmas.begin(), record.sigmas.end());
    for (std::size_t i = 0; i < record.blocks.size(); ++i) {
      const SubSolution& b = record.blocks[i];
      row.max_sqrt_residual = std::max(row.max_sqrt_residual, std::sqrt(b.residual));
      row.infeas_inf = std::max(row.infeas_inf, b.infeas);
      row.inner_iters += b.inner_iters;
      row.retries += record.retries[i];
    }
    row.cum_time_s = elapsed();
    trace.rows.push_back(row);

    if (config.record_history) {
      trace.history.iterates.push_back(z_next);
      trace.history.targets.emplace_back(std::move(record.targets));
      trace.history.sigmas.push_back(std::move(record.sigmas));
      trace.history.steps.push_back(std::move(record.blocks));
    }
    z = std::move(z_next);

    if (row.rel_kkt <= config.stop.rel_kkt_tol) {
      trace.status = SolveStatus::kConverged;
      break;
    }
    if (row.cum_time_s > config.stop.time_budget_s) {
      trace.status = SolveStatus::kTimeBudget;
      break;
    }
  }
  return {std::move(z), std::move(trace)};
}

}  // namespace palmi
