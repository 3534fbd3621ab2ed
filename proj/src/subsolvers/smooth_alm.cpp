// Augmented Lagrangian projection onto { x : h(x) <= 0 } for a generic convex
// differentiable h. The inner problem
//   min 1/2 ||x - x_t||^2 + 1/(2 rho) sum (max(0, mu + rho h(x))^2 - mu^2)
// is solved by Newton steps (Hessian I + rho J_A J_A^T over the active rows
// plus a finite-difference curvature term for h), backtracking on the norm of
// the inner gradient: the inner objective is strongly convex, and its gradient
// stays well resolved where objective decreases drown in rounding. Multipliers follow
// the first-order update mu <- max(0, mu + rho h).

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>

#include "palmi/residuals.hpp"
#include "palmi/subsolvers.hpp"

namespace palmi {

SubSolution project_smooth_alm(const ConstraintSet& set, const Vector& x_target,
                               const AlmOptions& options) {
  if (set.kind() != SetKind::kSmoothConvex) throw InputError("alm: set must be smooth convex");
  if (!(options.target_residual > 0.0)) throw ParameterError("alm: target must be positive");
  if (!(options.penalty > 0.0)) throw ParameterError("alm: penalty must be positive");
  const SmoothConvex& s = set.smooth();
  if (x_target.size() != s.dim) throw InputError("alm: target has wrong dimension");
  if (!x_target.allFinite()) throw NumericalError("alm: target is not finite");

  auto package = [&](const Vector& x, const Vector& mu, int iters) {
    SubSolution sol;
    sol.x = x;
    sol.lambda.ineq = mu;
    sol.residual = residual(set, x, sol.lambda, x_target);
    sol.infeas = set.infeasibility(x);
    sol.inner_iters = iters;
    return sol;
  };
  const double target_sq = options.target_residual * options.target_residual;

  double rho = options.penalty;
  Vector x = x_target;
  Vector mu = Vector::Zero(s.num_constraints);
  auto inner_gradient = [&](const Vector& v) -> Vector {
    const Vector shifted = (mu + rho * s.h(v)).cwiseMax(0.0);
    return v - x_target + s.jacobian(v) * shifted;
  };

  const double gradient_floor =
      64.0 * std::numeric_limits<double>::epsilon() * (1.0 + x_target.lpNorm<Eigen::Infinity>());
  SubSolution best = package(x, mu, 0);
  if (best.residual <= target_sq) return best;
  int total_inner = 0;
  double prev_progress = std::numeric_limits<double>::infinity();
  for (int outer = 0; outer < options.max_outer_iters; ++outer) {
    // Below a few ulps of the target the inner gradient is pure rounding.
    const double inner_tol =
        std::max({0.1 * target_sq, std::min(1e-2, 1e-2 * best.residual), gradient_floor});
    for (int inner = 0; inner < options.max_inner_iters; ++inner, ++total_inner) {
      const Vector h = s.h(x);
      const Matrix jac = s.jacobian(x);
      const Vector shifted = (mu + rho * h).cwiseMax(0.0);
      const Vector grad = x - x_target + jac * shifted;
      if (grad.lpNorm<Eigen::Infinity>() <= inner_tol) break;
      Matrix hess = Matrix::Identity(s.dim, s.dim);
      for (Index j = 0; j < s.num_constraints; ++j) {
        if (shifted[j] > 0.0) hess.noalias() += rho * jac.col(j) * jac.col(j).transpose();
      }
      // Curvature of sum_j shifted_j h_j by forward differences of the
      // weighted Jacobian (h convex and shifted >= 0 keep it PSD up to noise).
      Matrix curvature(s.dim, s.dim);
      const Vector weighted = jac * shifted;
      for (Index k = 0; k < s.dim; ++k) {
        Vector xp = x;
        const double delta = 1e-7 * (1.0 + std::abs(x[k]));
        xp[k] += delta;
        curvature.col(k) = (s.jacobian(xp) * shifted - weighted) / delta;
      }
      const Matrix full = hess + 0.5 * (curvature + curvature.transpose());
      Eigen::LLT<Matrix> llt(full);
      const Vector step =
          llt.info() == Eigen::Success ? Vector(-llt.solve(grad)) : Vector(-hess.llt().solve(grad));
      const double g0 = grad.lpNorm<Eigen::Infinity>();
      double t = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 50; ++ls, t *= 0.5) {
        const Vector trial = x + t * step;
        if (inner_gradient(trial).lpNorm<Eigen::Infinity>() <= (1.0 - 1e-4 * t) * g0) {
          x = trial;
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
    const Vector h_now = s.h(x);
    // Joint feasibility/complementarity progress measure.
    const double progress = h_now.cwiseMax(-mu / rho).lpNorm<Eigen::Infinity>();
    mu = (mu + rho * h_now).cwiseMax(0.0);
    const SubSolution current = package(x, mu, total_inner);
    if (current.residual < best.residual) best = current;
    if (current.residual <= target_sq) return current;
    if (progress > 0.25 * prev_progress) rho = std::min(rho * 10.0, 1e6);
    prev_progress = progress;
  }
  throw SubsolverError("alm: iteration cap exceeded", best);
}

}  // namespace palmi
