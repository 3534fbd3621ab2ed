#include "palmi/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "palmi/subsolvers.hpp"

namespace palmi {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

constexpr double kStartFeasibilityTol = 1e-9;

double sq(double v) { return v * v; }

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

LineFit least_squares_line(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    mx += x[j];
    my += y[j];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    sxx += sq(x[j] - mx);
    sxy += (x[j] - mx) * (y[j] - my);
    syy += sq(y[j] - my);
  }
  LineFit fit;
  fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  fit.intercept = my - fit.slope * mx;
  if (syy > 0.0) {
    double sse = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      sse += sq(y[j] - (fit.intercept + fit.slope * x[j]));
    }
    fit.r2 = 1.0 - sse / syy;
  }
  return fit;
}

double series_max(std::span<const double> values) {
  double m = 0.0;
  for (double v : values) m = std::max(m, v);
  return m;
}

}  // namespace

// -- constants ------------------------------------------------------------------------

double constant_c0(double sigma_min, double lipschitz, double nu) {
  return (sigma_min - lipschitz * (1.0 + 6.0 / nu)) / 2.0;
}

double constant_c1(double sigma_max, double lipschitz, double nu, Index num_blocks) {
  const auto n = static_cast<double>(num_blocks);
  const double bracket = 0.5 * nu * n * n + (2.0 + 2.0 / nu - 0.5 * nu) * n + 2.0 * nu +
                         4.0 / nu + 3.0;
  return (sigma_max + lipschitz * bracket) / 2.0;
}

TheoryConstants compute_constants(double gamma, double lipschitz, Index num_blocks, double upper,
                                  std::span<const double> sigma_min,
                                  std::span<const double> sigma_max, double omega) {
  if (!(gamma > 1.0)) throw ParameterError("compute_constants: gamma must exceed 1");
  if (!(lipschitz > 0.0)) throw ParameterError("compute_constants: L must be positive");
  if (num_blocks < 1) throw ParameterError("compute_constants: need at least one block");
  if (!(omega >= 0.0)) throw ParameterError("compute_constants: omega must be nonnegative");
  if (sigma_min.size() != sigma_max.size()) {
    throw InputError("compute_constants: sigma bound series differ in length");
  }
  TheoryConstants c;
  c.gamma = gamma;
  c.lipschitz = lipschitz;
  c.upper = upper;
  c.num_blocks = num_blocks;
  c.omega = omega;
  c.nu = 12.0 / (gamma - 1.0);
  c.m_bar = std::sqrt(3.0) * (upper + lipschitz * std::sqrt(static_cast<double>(num_blocks)));
  double c1_max = 0.0;
  for (std::size_t k = 0; k < sigma_min.size(); ++k) {
    c.c0.push_back(constant_c0(sigma_min[k], lipschitz, c.nu));
    c.c1.push_back(constant_c1(sigma_max[k], lipschitz, c.nu, num_blocks));
    c1_max = std::max(c1_max, c.c1.back());
  }
  c.c1_bar = 2.0 * omega * omega * c1_max;
  return c;
}

// -- exact-subproblem reconstruction ---------------------------------------------------

ExactSweepData exact_sweep_data(const BlockProblem& problem, const SolveHistory& history) {
  const std::size_t sweeps = history.targets.size();
  if (history.iterates.size() != sweeps + 1 || sweeps == 0) {
    throw InputError("exact_sweep_data: run was not recorded with record_history");
  }
  const Index n = problem.num_blocks();
  ExactSweepData data;
  data.bar_points.push_back(history.iterates[0]);
  data.delta_norm.push_back(0.0);
  // F carries the indicators of the sets: an infeasible start has F = +inf,
  // which makes the first decrease vacuous rather than spuriously negative.
  bool start_feasible = true;
  for (Index i = 0; i < n; ++i) {
    const auto slot = static_cast<std::size_t>(i);
    if (problem.constraints[slot].infeasibility(history.iterates[0][i]) > kStartFeasibilityTol) {
      start_feasible = false;
    }
  }
  data.bar_objective.push_back(start_feasible ? problem.objective(history.iterates[0])
                                              : std::numeric_limits<double>::infinity());

  std::vector<std::optional<Vector>> warm(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < sweeps; ++k) {
    std::vector<Vector> blocks;
    bool failed = false;
    for (Index i = 0; i < n; ++i) {
      const auto slot = static_cast<std::size_t>(i);
      try {
        SubSolution exact = project_exact_solution(problem.constraints[slot],
                                                   history.targets[k][i], warm[slot]);
        if (exact.lambda.eq.size() > 0) warm[slot] = exact.lambda.eq;
        blocks.push_back(std::move(exact.x));
      } catch (const std::exception&) {
        failed = true;
        blocks.push_back(Vector::Constant(problem.dims[slot], kNan));
      }
    }
    BlockVec bar(std::move(blocks));
    if (failed) {
      data.gaps.push_back(k + 1);
      data.delta_norm.push_back(kNan);
      data.bar_step_norm.push_back(kNan);
      data.bar_objective.push_back(kNan);
    } else {
      data.delta_norm.push_back(bar.distance(history.iterates[k + 1]));
      data.bar_step_norm.push_back(bar.distance(history.iterates[k]));
      data.bar_objective.push_back(problem.objective(bar));
    }
    data.bar_points.push_back(std::move(bar));
  }
  return data;
}

// -- error bound -------------------------------------------------------------------------

ErrorBoundFit fit_error_bound(std::span<const double> delta_next, std::span<const double> eps) {
  if (delta_next.empty()) throw InputError("fit_error_bound: empty trace");
  if (delta_next.size() != eps.size()) {
    throw InputError("fit_error_bound: delta and eps series differ in length");
  }
  ErrorBoundFit fit;
  for (std::size_t k = 0; k < delta_next.size(); ++k) {
    if (!std::isfinite(delta_next[k]) || !std::isfinite(eps[k])) continue;
    fit.ratios.push_back(delta_next[k] / std::max(eps[k], 1e-30));
  }
  if (fit.ratios.empty()) throw InputError("fit_error_bound: no finite entries");
  fit.omega = series_max(fit.ratios);

  std::vector<double> sorted = fit.ratios;
  std::sort(sorted.begin(), sorted.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(sorted.size())));
  fit.p95 = sorted[std::max<std::size_t>(rank, 1) - 1];

  const std::size_t half = fit.ratios.size() / 2;
  const std::span<const double> all(fit.ratios);
  fit.first_half = series_max(all.first(std::max<std::size_t>(half, 1)));
  fit.second_half = series_max(all.subspan(half));
  if (fit.first_half > 0.0) {
    fit.half_ratio = fit.second_half / fit.first_half;
  } else {
    fit.half_ratio = fit.second_half > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  }
  return fit;
}

// -- surrogate sequence -----------------------------------------------------------------

std::size_t SurrogateSeries::num_flagged() const {
  return static_cast<std::size_t>(std::count(flagged.begin(), flagged.end(), true));
}

double SurrogateSeries::min_relative_margin() const {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < margins.size(); ++k) {
    if (std::isfinite(margins[k])) m = std::min(m, margins[k] / (1.0 + std::abs(v[k])));
  }
  return m;
}

SurrogateSeries surrogate_sequence(const ExactSweepData& data, const TheoryConstants& constants,
                                   const EpsilonSchedule& schedule) {
  const std::size_t sweeps = data.bar_step_norm.size();
  if (sweeps == 0 || constants.c0.size() != sweeps || constants.c1.size() != sweeps) {
    throw InputError("surrogate_sequence: constants do not match the run length");
  }
  // c1 of the step after the last sweep is not observed; the last value stands in.
  auto c1 = [&](std::size_t t) { return constants.c1[std::min(t, sweeps - 1)]; };
  auto energy = [&](std::size_t t) { return c1(t) * sq(data.delta_norm[t]); };

  SurrogateSeries s;
  s.gaps = data.gaps;
  const double tail_energy_after = schedule.tail_energy(static_cast<std::int64_t>(sweeps));
  s.tail = std::isfinite(tail_energy_after) ? 0.5 * constants.c1_bar * tail_energy_after : 0.0;

  // u^k for k = 0..K+1 by backward accumulation.
  s.u.assign(sweeps + 2, s.tail);
  for (std::size_t k = sweeps + 1; k-- > 0;) {
    const double next = k + 1 <= sweeps + 1 ? s.u[k + 1] : s.tail;
    s.u[k] = k <= sweeps ? next + energy(k) : s.tail;
  }
  for (std::size_t k = 0; k <= sweeps; ++k) {
    s.v.push_back(data.bar_objective[k] + s.u[k] + s.u[k + 1]);
    const std::int64_t idx = k == 0 ? 0 : static_cast<std::int64_t>(k) - 1;
    s.u_bound.push_back(0.5 * constants.c1_bar * schedule.tail_energy(idx));
  }
  // v^k - v^{k+1} = f(zbar^k) - f(zbar^{k+1}) + u^k - u^{k+2}; evaluated from
  // the two surviving terms so the tail cancels exactly.
  for (std::size_t k = 0; k < sweeps; ++k) {
    const double decrease =
        data.bar_objective[k] - data.bar_objective[k + 1] + energy(k) + energy(k + 1);
    const double margin = decrease - constants.c0[k] * sq(data.bar_step_norm[k]);
    s.margins.push_back(margin);
    s.flagged.push_back(std::isfinite(margin) &&
                        margin < -kMarginTolerance * (1.0 + std::abs(s.v[k])));
  }
  return s;
}

// -- subgradient bound --------------------------------------------------------------------

bool SubgradientCheck::all_hold() const {
  return std::all_of(holds.begin(), holds.end(), [](bool b) { return b; });
}

SubgradientCheck subgradient_bound_check(const BlockProblem& problem, const SolveHistory& history,
                                         const ExactSweepData& data,
                                         const TheoryConstants& constants) {
  const std::size_t sweeps = history.targets.size();
  if (data.bar_points.size() != sweeps + 1 || history.sigmas.size() != sweeps) {
    throw InputError("subgradient_bound_check: history and oracle data do not match");
  }
  const Index n = problem.num_blocks();
  SubgradientCheck check;
  for (std::size_t k = 0; k < sweeps; ++k) {
    const BlockVec& z = history.iterates[k];
    const BlockVec& z_next = history.iterates[k + 1];
    const BlockVec& bar = data.bar_points[k + 1];
    if (!bar.all_finite()) {
      check.w_norm.push_back(kNan);
      check.bound.push_back(kNan);
      check.holds.push_back(true);
      continue;
    }
    double w2 = 0.0;
    for (Index i = 0; i < n; ++i) {
      BlockVec mixed = z;
      for (Index j = 0; j < i; ++j) mixed[j] = z_next[j];
      mixed[i] = bar[i];
      const Vector w = problem.block_gradient(bar, i) - problem.block_gradient(mixed, i) -
                       history.sigmas[k][static_cast<std::size_t>(i)] * (bar[i] - z[i]);
      w2 += w.squaredNorm();
    }
    const double w_norm = std::sqrt(w2);
    const double bound = constants.m_bar * (data.bar_step_norm[k] + data.delta_norm[k + 1]);
    check.w_norm.push_back(w_norm);
    check.bound.push_back(bound);
    check.holds.push_back(w_norm <= bound + 1e-12 * (1.0 + bound));
  }
  return check;
}

// -- rates --------------------------------------------------------------------------------

std::string to_string(RateClass rate) {
  switch (rate) {
    case RateClass::kLinear:
      return "linear";
    case RateClass::kSublinear:
      return "sublinear";
    case RateClass::kFinite:
      return "finite";
  }
  return "unknown";
}

double rate_tau(double theta, double ell) {
  if (!(theta > 0.5 && theta < 1.0)) throw ParameterError("rate_tau: theta must lie in (1/2, 1)");
  if (!(ell > (theta + 1.0) / (2.0 * theta))) {
    throw ParameterError("rate_tau: ell must exceed (theta + 1) / (2 theta)");
  }
  return std::min({(1.0 - theta) / theta * ell, ell - 1.0, (2.0 * ell - 1.0) * theta - 1.0,
                   (2.0 * ell - 1.0) * (1.0 - theta)});
}

RatePrediction predict_rate(double theta, const EpsilonSchedule& schedule) {
  if (!(theta >= 0.0 && theta < 1.0)) {
    throw ParameterError("predict_rate: theta must lie in [0, 1)");
  }
  RatePrediction p;
  const bool flat_region = theta > 0.5;
  const double kl_exponent = flat_region ? (1.0 - theta) / (2.0 * theta - 1.0) : 0.0;
  switch (schedule.kind()) {
    case EpsilonSchedule::Kind::kConstant:
      throw ParameterError("predict_rate: a constant schedule carries no rate guarantee");
    case EpsilonSchedule::Kind::kExponential:
      if (flat_region) {
        p.rate = RateClass::kSublinear;
        p.exponent = kl_exponent;
      } else {
        p.rate = RateClass::kLinear;
      }
      break;
    case EpsilonSchedule::Kind::kSublinear: {
      const double ell = schedule.rate();
      if (!(ell > 1.0)) {
        throw ParameterError("predict_rate: a sublinear schedule needs ell > 1 for a rate");
      }
      p.rate = RateClass::kSublinear;
      if (flat_region && ell >= theta / (2.0 * theta - 1.0)) {
        p.exponent = kl_exponent;
      } else {
        p.exponent = ell - 1.0;
      }
      if (flat_region && ell > (theta + 1.0) / (2.0 * theta)) p.tau = rate_tau(theta, ell);
      break;
    }
  }
  if (schedule.floor() > 0.0) {
    std::ostringstream msg;
    msg << "schedule is floored at " << schedule.floor()
        << "; the prediction holds only while eps exceeds the floor";
    p.note = msg.str();
  }
  return p;
}

RateFit fit_empirical_rate(std::span<const double> distances) {
  if (distances.empty()) throw InputError("fit_empirical_rate: empty series");
  RateFit fit;
  fit.window_begin = distances.size() / 2;
  fit.window_end = distances.size();
  std::vector<double> k_lin, k_log, y;
  for (std::size_t j = fit.window_begin; j < fit.window_end; ++j) {
    const double d = distances[j];
    if (!(std::isfinite(d) && d > kRateNoiseFloor)) continue;
    k_lin.push_back(static_cast<double>(j));
    k_log.push_back(std::log(static_cast<double>(j) + 1.0));
    y.push_back(std::log(d));
  }
  if (y.size() < 3) {
    fit.rate = RateClass::kFinite;
    return fit;
  }
  const LineFit lin = least_squares_line(k_lin, y);
  const LineFit sub = least_squares_line(k_log, y);
  fit.linear_ratio = std::exp(lin.slope);
  fit.linear_r2 = lin.r2;
  fit.sublinear_exponent = -sub.slope;
  fit.sublinear_r2 = sub.r2;
  if (lin.r2 >= sub.r2) {
    fit.rate = RateClass::kLinear;
    fit.exponent = -lin.slope;
    fit.r2 = lin.r2;
  } else {
    fit.rate = RateClass::kSublinear;
    fit.exponent = fit.sublinear_exponent;
    fit.r2 = sub.r2;
  }
  return fit;
}

std::vector<double> distances_to(const SolveHistory& history, const BlockVec& reference) {
  std::vector<double> out;
  out.reserve(history.iterates.size());
  for (const BlockVec& z : history.iterates) out.push_back(z.distance(reference));
  return out;
}

}  // namespace palmi
