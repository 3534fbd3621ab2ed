// Projection onto { x : 1/2 x^T B x + c^T x <= alpha } through the secular
// equation. In the eigenbasis of B the KKT point is
//   u(l) = (u_t - l c) / (1 + l d),
// and the multiplier l > 0 is the root of q(l) = 1/2 sum d u^2 + sum c u - alpha,
// which is convex and decreasing on [0, inf). Newton from the left of the root
// is safeguarded by a bisection bracket.

#include <algorithm>
#include <cmath>
#include <limits>

#include "palmi/kernels.hpp"
#include "palmi/residuals.hpp"
#include "palmi/subsolvers.hpp"

namespace palmi {

namespace {

Vector secular_point(const Ellipsoid& set, const Vector& u_target, double lambda) {
  const Vector& d = set.eigenvalues();
  const Vector& c = set.c_rotated();
  return ((u_target - lambda * c).array() / (1.0 + lambda * d.array())).matrix();
}

SubSolution package(const Ellipsoid& set, const Vector& x_target, Vector x, double lambda,
                    int iters) {
  SubSolution sol;
  sol.x = std::move(x);
  sol.lambda.eq.resize(0);
  sol.lambda.ineq = Vector::Constant(1, lambda);
  const ConstraintSet wrapped(set);
  sol.residual = residual(wrapped, sol.x, sol.lambda, x_target);
  sol.infeas = wrapped.infeasibility(sol.x);
  sol.inner_iters = iters;
  return sol;
}

}  // namespace

SubSolution project_ellipsoid_secular(const Ellipsoid& set, const Vector& x_target,
                                      const SecularOptions& options) {
  if (!(options.tol > 0.0)) throw ParameterError("secular: tol must be positive");
  if (x_target.size() != set.dim()) throw InputError("secular: target has wrong dimension");
  if (!x_target.allFinite()) throw NumericalError("secular: target is not finite");
  if (set.value(x_target) <= 0.0) return package(set, x_target, x_target, 0.0, 0);

  const Vector u_target = set.to_rotated(x_target);
  const Vector& d = set.eigenvalues();
  const Vector& c = set.c_rotated();
  auto eval = [&](double l) {
    kernels::SecularValue v = kernels::secular_diag(d, u_target, c, l);
    v.value -= set.alpha();
    return v;
  };

  // Bracket the root: q(0) > 0 and q(hi) <= 0.
  double lo = 0.0;
  double hi = 1.0;
  while (eval(hi).value > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) throw NumericalError("secular: cannot bracket the multiplier");
  }

  double lambda = lo;
  int it = 0;
  for (; it < options.max_iters; ++it) {
    const kernels::SecularValue q = eval(lambda);
    if (std::abs(q.value) <= options.tol) break;
    if (q.value > 0.0) {
      lo = std::max(lo, lambda);
    } else {
      hi = std::min(hi, lambda);
    }
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
    double next = q.derivative < 0.0 ? lambda - q.value / q.derivative : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    lambda = next;
  }
  // Newton converges quadratically here; a few extra steps take the slack from
  // the tolerance down to rounding level at negligible cost.
  for (int polish = 0; polish < 5 && it < options.max_iters; ++polish) {
    const kernels::SecularValue q = eval(lambda);
    if (q.value == 0.0 || !(q.derivative < 0.0)) break;
    const double next = lambda - q.value / q.derivative;
    if (!(next > 0.0) || !(std::abs(eval(next).value) < std::abs(q.value))) break;
    lambda = next;
  }
  if (it == options.max_iters) {
    throw SubsolverError("secular: iteration cap exceeded",
                         package(set, x_target, set.from_rotated(secular_point(set, u_target, lambda)),
                                 lambda, it));
  }
  return package(set, x_target, set.from_rotated(secular_point(set, u_target, lambda)), lambda,
                 it);
}

SubSolution project_ellipsoid_secular(const Ellipsoid& set, const Vector& x_target, double tol) {
  SecularOptions options;
  options.tol = tol;
  return project_ellipsoid_secular(set, x_target, options);
}

}  // namespace palmi
