#pragma once

// Computable certificates for the block subproblem
//
//   min_x 1/2 || x - x_target ||^2   s.t.  x in S,
//
// and the outer stationarity metric used to stop the PALM loop.

#include <optional>
#include <vector>

#include "palmi/core.hpp"

namespace palmi {

/// The four nonnegative pieces of the residual r(x, lambda, x_target).
struct ResidualTerms {
  double stationarity_inner = 0.0;  // max{<x, s>, 0}
  double stationarity_inf = 0.0;    // ||s||_inf
  double infeasibility = 0.0;       // ||max{h(x), 0}||_inf
  double complementarity = 0.0;     // max{-<lambda, h(x)>, 0}

  double total() const {
    return stationarity_inner + stationarity_inf + infeasibility + complementarity;
  }
};

/// s = x - x_target + grad h(x) lambda.
///
/// For a polytope the combination is evaluated as (x - (x_target - B^T lambda_eq))
/// - mu, so a primal point produced as max(x_target - B^T lambda_eq, 0) with the
/// matching slack mu gives s = 0 exactly; the residual then reduces to
/// max{-<lambda_eq, Bx - b>, 0} + ||Bx - b||_inf.
Vector stationarity_vector(const ConstraintSet& set, const Vector& x, const Multiplier& lambda,
                           const Vector& x_target);

ResidualTerms residual_terms(const ConstraintSet& set, const Vector& x, const Multiplier& lambda,
                             const Vector& x_target);

/// r(x, lambda, x_target). Throws InputError on a negative inequality
/// multiplier or mismatched dimensions.
double residual(const ConstraintSet& set, const Vector& x, const Multiplier& lambda,
                const Vector& x_target);

/// Looks for lambda >= 0 (equality parts sign-free) with each residual term at
/// most eps^2 / 4, which certifies sqrt(r) <= eps. Requires
/// ||max{h(x), 0}||_inf <= eps^2 / 4 (throws InputError otherwise). Returns
/// nullopt when no such multiplier exists.
std::optional<Multiplier> recover_multiplier(const ConstraintSet& set, const Vector& x,
                                             const Vector& x_target, double eps);

/// Nonnegative least squares min ||A w - y|| s.t. w_j >= 0 for j >= num_free
/// (Lawson-Hanson active set, first num_free variables unconstrained).
Vector nonneg_least_squares(const Matrix& a, const Vector& y, Index num_free = 0,
                            double tol = 1e-12, int max_iters = 0);

struct KktReport {
  double rel_kkt = 0.0;
  std::vector<double> per_block_projection_gap;
  double objective = 0.0;
};

/// Dual warm starts for the projections inside rel_kkt_violation, one slot per
/// block. Reusing a workspace across outer iterations changes only the cost.
struct KktWorkspace {
  std::vector<std::optional<Vector>> warm;
};

/// g_i = || x_i - P_{S_i}(x_i - grad_i f(z)) ||, rel_kkt = max_i g_i / (1 + ||z|| + ||grad f(z)||).
KktReport rel_kkt_violation(const BlockProblem& problem, const BlockVec& z,
                            KktWorkspace* workspace = nullptr);

}  // namespace palmi
