// Feasible comparator for the ellipsoid projection. Every iterate lies in the
// ellipsoid: the multiplier climbs to its optimal value by monotone Newton
// steps on the secular function, and each unconstrained minimizer (which lies
// outside) is pulled back onto the boundary by radial rescaling toward the
// center. The loop ends on the rule
//   ||x - x_t + lambda (Bx + c)|| <= (eta / 2) ||x - x_prev||_inf.

#include <algorithm>
#include <cmath>
#include <limits>

#include "palmi/residuals.hpp"
#include "palmi/subsolvers.hpp"

namespace palmi {

Vector radial_rescale(const Ellipsoid& set, const Vector& x) {
  if (set.value(x) <= 0.0) return x;
  const Vector& xc = set.center();
  const Vector dx = x - xc;
  const double q = 0.5 * dx.dot(set.apply_shape(dx));
  double s = std::sqrt(set.kappa() / q);
  Vector out = xc + s * dx;
  // Absorb the rounding of the square root so the result is inside.
  for (int guard = 0; guard < 64 && set.value(out) > 0.0; ++guard) {
    s *= 1.0 - 4.0 * std::numeric_limits<double>::epsilon();
    out = xc + s * dx;
  }
  return out;
}

namespace {

// argmin_{lambda >= 0} || x - x_t + lambda grad g(x) ||.
double least_squares_multiplier(const Ellipsoid& set, const Vector& x, const Vector& x_target) {
  const Vector g = set.gradient(x);
  const double gg = g.squaredNorm();
  if (!(gg > 0.0)) return 0.0;
  return std::max((x_target - x).dot(g) / gg, 0.0);
}

}  // namespace

SubSolution project_ellipsoid_feasible(const Ellipsoid& set, const Vector& x_target,
                                       const Vector& x_prev, double eta,
                                       const FeasibleOptions& options) {
  if (!(eta > 0.0)) throw ParameterError("feasible: eta must be positive");
  if (x_target.size() != set.dim() || x_prev.size() != set.dim()) {
    throw InputError("feasible: dimension mismatch");
  }
  if (!x_target.allFinite()) throw NumericalError("feasible: target is not finite");

  const ConstraintSet wrapped(set);
  auto package = [&](Vector x, double lambda, int iters) {
    SubSolution sol;
    sol.x = std::move(x);
    sol.lambda.ineq = Vector::Constant(1, lambda);
    sol.residual = residual(wrapped, sol.x, sol.lambda, x_target);
    sol.infeas = wrapped.infeasibility(sol.x);
    sol.inner_iters = iters;
    return sol;
  };
  if (set.value(x_target) <= 0.0) return package(x_target, 0.0, 0);

  // Centered rotated coordinates: the set is 1/2 sum d_j v_j^2 <= kappa and the
  // unconstrained minimizer at multiplier lambda is v_j = v_t,j / (1 + lambda d_j).
  const Vector& d = set.eigenvalues();
  const Vector v_t = set.to_rotated(x_target) - set.to_rotated(set.center());
  const double kappa = set.kappa();
  auto point_at = [&](double lambda) {
    const Vector v = (v_t.array() / (1.0 + lambda * d.array())).matrix();
    return radial_rescale(set, set.from_rotated(v + set.to_rotated(set.center())));
  };

  // phi(lambda) = 1/2 sum d v_t^2 / (1 + lambda d)^2 - kappa is convex and
  // decreasing, so Newton from lambda = 0 increases monotonically to the root
  // and every unscaled point stays outside; the rescaled iterates sit on the
  // boundary, where the multiplier estimate is complementary.
  double lambda = 0.0;
  Vector x = radial_rescale(set, x_prev);
  double best_ratio = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int it = 0; it < options.max_iters; ++it) {
    if (it > 0) {
      const double estimate = least_squares_multiplier(set, x, x_target);
      const double lhs = (x - x_target + estimate * set.gradient(x)).norm();
      const double rhs = 0.5 * eta * (x - x_prev).lpNorm<Eigen::Infinity>();
      if (lhs <= rhs) return package(std::move(x), estimate, it);

      const double ratio = lhs / std::max(rhs, std::numeric_limits<double>::min());
      if (ratio < best_ratio * (1.0 - 1e-12)) {
        best_ratio = ratio;
        since_best = 0;
      } else if (++since_best >= options.stagnation_window) {
        break;
      }
    }

    const Eigen::ArrayXd den = 1.0 + lambda * d.array();
    const Eigen::ArrayXd w = d.array() * v_t.array().square();
    const double phi = 0.5 * (w / den.square()).sum() - kappa;
    const double dphi = -(w * d.array() / den.cube()).sum();
    if (phi > 0.0 && dphi < 0.0) lambda -= phi / dphi;
    x = point_at(lambda);
  }
  // Stop rule unreachable in floating point: hand back the oracle projection,
  // rescaled so the feasibility invariant still holds.
  SubSolution oracle = project_ellipsoid_secular(set, x_target, kExactTolerance);
  return package(radial_rescale(set, oracle.x), oracle.lambda.ineq[0], options.max_iters);
}

}  // namespace palmi
