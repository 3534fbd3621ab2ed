#pragma once

// Projection subsolvers for the proximal linearized block subproblem. Solving
// that subproblem is the projection of a target point onto the block's
// constraint set; the routines below return a candidate point together with a
// multiplier estimate and the residual certificate of the pair.
//
//   project_polytope_ssncg     dual semismooth Newton-CG; primal iterate is
//                              nonnegative but violates Bx = b
//   project_ellipsoid_secular  safeguarded Newton on the secular equation;
//                              high-accuracy oracle
//   project_ellipsoid_admm     ADMM on a ball reformulation; infeasible
//   project_ellipsoid_feasible tangent-halfspace steps with radial rescaling;
//                              every iterate inside the ellipsoid
//   project_smooth_alm         augmented Lagrangian for generic h; infeasible
//   project_exact              dispatch at tolerance 1e-12

#include <optional>
#include <stdexcept>
#include <vector>

#include "palmi/core.hpp"

namespace palmi {

struct SubSolution {
  Vector x;
  Multiplier lambda;
  double residual = 0.0;
  double infeas = 0.0;
  int inner_iters = 0;
};

/// Raised when a subsolver exhausts its iteration budget; carries the best
/// iterate seen.
class SubsolverError : public std::runtime_error {
 public:
  SubsolverError(const std::string& what, SubSolution best)
      : std::runtime_error(what), best_(std::move(best)) {}
  const SubSolution& best() const { return best_; }

 private:
  SubSolution best_;
};

// -- polytope -------------------------------------------------------------------

struct SsncgOptions {
  /// Exit once the dual gradient norm ||B x - b||_2 is at most tol.
  double tol = 1e-10;
  /// Also exit as soon as sqrt(residual) <= residual_target.
  std::optional<double> residual_target;
  int max_newton_iters = 200;
  int max_cg_iters = 1000;
  double damping = 1e-10;
  /// Warm start for the equality multiplier (lambda_eq = -y).
  std::optional<Vector> initial_multiplier;
  /// When set, receives ||B x - b||_2 after every Newton iteration.
  std::vector<double>* violation_log = nullptr;
};

SubSolution project_polytope_ssncg(const LinearPolytope& set, const Vector& x_target,
                                   const SsncgOptions& options);

SubSolution project_polytope_ssncg(const LinearPolytope& set, const Vector& x_target, double tol);

// -- ellipsoid ------------------------------------------------------------------

struct SecularOptions {
  double tol = 1e-12;
  int max_iters = 500;
};

SubSolution project_ellipsoid_secular(const Ellipsoid& set, const Vector& x_target,
                                      const SecularOptions& options);

SubSolution project_ellipsoid_secular(const Ellipsoid& set, const Vector& x_target, double tol);

struct AdmmOptions {
  double target_residual = 1e-8;
  double rho = 1.0;
  /// Penalty doubles/halves when one of primal/dual residual exceeds the
  /// other by this factor.
  double balance_ratio = 10.0;
  double balance_factor = 2.0;
  int max_iters = 200000;
  std::optional<double> initial_multiplier;
};

SubSolution project_ellipsoid_admm(const Ellipsoid& set, const Vector& x_target,
                                   const AdmmOptions& options);

SubSolution project_ellipsoid_admm(const Ellipsoid& set, const Vector& x_target,
                                   double target_residual);

struct FeasibleOptions {
  int max_iters = 20000;
  /// Iterations without improvement of the stop-rule ratio before falling
  /// back to the secular oracle.
  int stagnation_window = 200;
};

/// Stops once ||x - x_target + lambda (Bx + c)|| <= (eta/2) ||x - x_prev||_inf,
/// in projection units: a PALM step with proximal weight sigma passes eta / sigma.
SubSolution project_ellipsoid_feasible(const Ellipsoid& set, const Vector& x_target,
                                       const Vector& x_prev, double eta,
                                       const FeasibleOptions& options = {});

/// x_c + s (x - x_c) with the largest s <= 1 keeping the point in the set.
Vector radial_rescale(const Ellipsoid& set, const Vector& x);

// -- generic smooth convex ----------------------------------------------------------

struct AlmOptions {
  double target_residual = 1e-8;
  double penalty = 10.0;
  int max_outer_iters = 200;
  int max_inner_iters = 5000;
};

SubSolution project_smooth_alm(const ConstraintSet& set, const Vector& x_target,
                               const AlmOptions& options);

// -- dispatch -----------------------------------------------------------------------

constexpr double kExactTolerance = 1e-12;

/// High-accuracy projection with its multiplier.
SubSolution project_exact_solution(const ConstraintSet& set, const Vector& x_target,
                                   const std::optional<Vector>& warm_multiplier = std::nullopt);

/// P_S(x_target) to oracle accuracy 1e-12.
Vector project_exact(const ConstraintSet& set, const Vector& x_target);

}  // namespace palmi
