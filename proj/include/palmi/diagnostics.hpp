#pragma once

// Post-processing of recorded PALM runs: the constants of the convergence
// analysis, the error bound ||z^{k+1} - zbar^{k+1}|| <= omega eps^k, the
// surrogate sequence v^k and its sufficient decrease, the subgradient bound,
// and predicted versus fitted asymptotic rates.
//
// zbar^{k+1} collects the exact solutions of the block subproblems that the run
// actually posed: xbar_i^{k+1} = P_{S_i}(x_t,i^k) for the recorded prox targets.
// zbar^0 is taken to be z^0; F includes the set indicators, so F(zbar^0) = +inf
// when z^0 lies outside the sets.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "palmi/core.hpp"
#include "palmi/driver.hpp"

namespace palmi {

// -- constants ----------------------------------------------------------------------

struct TheoryConstants {
  double gamma = 0.0;
  double lipschitz = 0.0;  // L = max_i L_i
  double upper = 0.0;      // M_u, the largest proximal parameter allowed
  Index num_blocks = 0;
  double nu = 0.0;     // 12 / (gamma - 1)
  double m_bar = 0.0;  // sqrt(3) (M_u + L sqrt(n))
  double omega = 0.0;
  std::vector<double> c0;  // per iteration, from the smallest sigma
  std::vector<double> c1;  // per iteration, from the largest sigma
  double c1_bar = 0.0;     // 2 omega^2 max_k c1
};

double constant_c0(double sigma_min, double lipschitz, double nu);
double constant_c1(double sigma_max, double lipschitz, double nu, Index num_blocks);

/// sigma_min / sigma_max hold the per-iteration extremes of the proximal
/// parameters. Throws ParameterError unless gamma > 1 and L > 0.
TheoryConstants compute_constants(double gamma, double lipschitz, Index num_blocks, double upper,
                                  std::span<const double> sigma_min,
                                  std::span<const double> sigma_max, double omega);

// -- exact-subproblem reconstruction ---------------------------------------------------

/// Oracle projections of a recorded run. Entries whose projection failed are
/// NaN and listed in gaps.
struct ExactSweepData {
  std::vector<BlockVec> bar_points;     // zbar^0 (= z^0), zbar^1, ...
  std::vector<double> delta_norm;       // ||zbar^k - z^k||, k = 0..K
  std::vector<double> bar_step_norm;    // ||zbar^{k+1} - z^k||, k = 0..K-1
  std::vector<double> bar_objective;    // f(zbar^k), k = 0..K
  std::vector<std::size_t> gaps;        // indices k with a failed projection
};

/// Requires a trace recorded with record_history; InputError otherwise.
ExactSweepData exact_sweep_data(const BlockProblem& problem, const SolveHistory& history);

// -- error bound -------------------------------------------------------------------------

struct ErrorBoundFit {
  double omega = 0.0;   // max_k ||Delta z^{k+1}|| / max(eps^k, 1e-30)
  double p95 = 0.0;     // 95th percentile of the same ratios
  double first_half = 0.0;
  double second_half = 0.0;
  /// second_half / first_half (1 when both are zero, +inf when only the first is).
  double half_ratio = 0.0;
  std::vector<double> ratios;
};

/// delta_next[k] = ||Delta z^{k+1}||, eps[k] = eps^k; same length, nonempty.
ErrorBoundFit fit_error_bound(std::span<const double> delta_next, std::span<const double> eps);

// -- surrogate sequence -----------------------------------------------------------------

struct SurrogateSeries {
  /// u^k = sum_{t=k}^{K} c1^t ||Delta z^t||^2 + tail, k = 0..K+1.
  std::vector<double> u;
  /// v^k = f(zbar^k) + u^k + u^{k+1}, k = 0..K (NaN across gaps).
  std::vector<double> v;
  /// v^k - v^{k+1} - c0^k ||zbar^{k+1} - z^k||^2, k = 0..K-1.
  std::vector<double> margins;
  /// margins[k] < -1e-8 (1 + |v^k|).
  std::vector<bool> flagged;
  /// (c1_bar / 2) tail_energy(k - 1): the bound on u^k implied by the error
  /// bound (the error of step t is certified at eps^{t-1}).
  std::vector<double> u_bound;
  /// Closing term for t > K: (c1_bar / 2) tail_energy(K). With it v is an
  /// upper-bound surrogate; the truncated sums alone would be a lower bound.
  double tail = 0.0;
  std::vector<std::size_t> gaps;

  std::size_t num_flagged() const;
  double min_relative_margin() const;
};

constexpr double kMarginTolerance = 1e-8;

SurrogateSeries surrogate_sequence(const ExactSweepData& data, const TheoryConstants& constants,
                                   const EpsilonSchedule& schedule);

// -- subgradient bound --------------------------------------------------------------------

struct SubgradientCheck {
  /// ||w^{k+1}|| and M_bar (||zbar^{k+1} - z^k|| + ||Delta z^{k+1}||), k = 0..K-1.
  std::vector<double> w_norm;
  std::vector<double> bound;
  std::vector<bool> holds;

  bool all_hold() const;
};

/// w^{k+1}_i = grad_i f(zbar^{k+1}) - grad_i f(x_{<i}^{k+1}, xbar_i^{k+1}, x_{>i}^k)
///             - sigma_i^k (xbar_i^{k+1} - x_i^k),
/// an element of the limiting subdifferential of F at zbar^{k+1}.
SubgradientCheck subgradient_bound_check(const BlockProblem& problem, const SolveHistory& history,
                                         const ExactSweepData& data,
                                         const TheoryConstants& constants);

// -- rates --------------------------------------------------------------------------------

enum class RateClass { kLinear, kSublinear, kFinite };
std::string to_string(RateClass rate);

struct RatePrediction {
  RateClass rate = RateClass::kLinear;
  /// Exponent p of O(k^-p) for the sublinear class; 0 otherwise.
  double exponent = 0.0;
  /// tau(theta, ell) when theta in (1/2, 1) and ell > (theta + 1) / (2 theta).
  std::optional<double> tau;
  std::string note;
};

/// tau(theta, ell) = min{(1-theta)/theta ell, ell - 1, (2ell-1) theta - 1, (2ell-1)(1-theta)}.
double rate_tau(double theta, double ell);

/// Predicted rate of ||z^k - zbar|| for a Lojasiewicz exponent theta in [0, 1).
/// Constant schedules and sublinear ones with ell <= 1 carry no guarantee and
/// raise ParameterError, as does theta outside [0, 1). A positive floor makes
/// every schedule eventually constant; the prediction then describes the
/// regime above the floor and says so in note.
RatePrediction predict_rate(double theta, const EpsilonSchedule& schedule);

struct RateFit {
  RateClass rate = RateClass::kFinite;
  double exponent = 0.0;  // sublinear exponent (class sublinear) or -log(ratio) (linear)
  std::size_t window_begin = 0;
  std::size_t window_end = 0;  // exclusive
  double r2 = 0.0;             // of the selected class
  double linear_ratio = 0.0;   // d^{k+1} / d^k of the log-linear fit
  double linear_r2 = 0.0;
  double sublinear_exponent = 0.0;  // p of d^k ~ (k+1)^-p
  double sublinear_r2 = 0.0;
};

constexpr double kRateNoiseFloor = 1e-12;

/// Fits log d^k against k (linear class) and against log(k + 1) (sublinear
/// class) over the last half of the series, dropping entries at or below the
/// noise floor, and keeps the better r^2. Fewer than three usable points give
/// class finite. Throws InputError on an empty series.
RateFit fit_empirical_rate(std::span<const double> distances);

/// ||z^k - z_ref|| for every recorded iterate.
std::vector<double> distances_to(const SolveHistory& history, const BlockVec& reference);

}  // namespace palmi
