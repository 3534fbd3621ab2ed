// ADMM for the ellipsoid projection on a ball reformulation. In the eigenbasis
// of B, with M = diag(sqrt(d / (2 kappa))) and u_c the rotated center, the set is
// { u : ||M (u - u_c)|| <= 1 }. Splitting w = M u - a (a = M u_c) gives
//
//   min 1/2 ||u - u_t||^2 + I_ball(w)   s.t.  M u - w - a = 0,
//
// whose u-step is a diagonal solve and whose w-step is the ball projection
// (the secular equation of the whitened set, solved in closed form). The
// penalty is rebalanced when the primal and dual residuals drift apart.
//
// With y the scaled-constraint multiplier, the ellipsoid multiplier is
// lambda = <y, w> / (2 kappa). Each check also tries the secular point
// u(lambda), which satisfies stationarity exactly; the first pair whose
// residual meets the target is returned. Targets below the double-precision
// floor of the residual are treated as met once that floor is reached.

#include <algorithm>
#include <cmath>
#include <limits>

#include "palmi/residuals.hpp"
#include "palmi/subsolvers.hpp"

namespace palmi {

namespace {

struct Candidate {
  Vector x;
  double lambda = 0.0;
  double residual = 0.0;
};

}  // namespace

SubSolution project_ellipsoid_admm(const Ellipsoid& set, const Vector& x_target,
                                   const AdmmOptions& options) {
  if (!(options.target_residual > 0.0)) throw ParameterError("admm: target must be positive");
  if (!(options.rho > 0.0)) throw ParameterError("admm: rho must be positive");
  if (x_target.size() != set.dim()) throw InputError("admm: target has wrong dimension");
  if (!x_target.allFinite()) throw NumericalError("admm: target is not finite");

  const ConstraintSet wrapped(set);
  auto package = [&](const Candidate& c, int iters) {
    SubSolution sol;
    sol.x = c.x;
    sol.lambda.ineq = Vector::Constant(1, c.lambda);
    sol.residual = c.residual;
    sol.infeas = wrapped.infeasibility(c.x);
    sol.inner_iters = iters;
    return sol;
  };
  auto evaluate = [&](Vector x, double lambda) {
    Candidate c;
    c.x = std::move(x);
    c.lambda = lambda;
    Multiplier m;
    m.ineq = Vector::Constant(1, lambda);
    c.residual = residual(wrapped, c.x, m, x_target);
    return c;
  };
  const double target_sq = options.target_residual * options.target_residual;
  // Smallest residual resolvable in double precision at (x, lambda): rounding
  // in g(x) and in the stationarity vector, amplified by <x, s>.
  auto roundoff_floor = [&](const Candidate& c) {
    const double eps = std::numeric_limits<double>::epsilon();
    const double scale = 1.0 + set.alpha() + x_target.lpNorm<Eigen::Infinity>() +
                         c.lambda * set.gradient(c.x).lpNorm<Eigen::Infinity>();
    return 16.0 * eps * scale * (1.0 + c.x.lpNorm<1>());
  };
  auto done = [&](const Candidate& c) {
    return c.residual <= target_sq || c.residual <= roundoff_floor(c);
  };

  if (set.value(x_target) <= 0.0) {
    Candidate c = evaluate(x_target, 0.0);
    if (c.residual <= target_sq) return package(c, 0);
  }

  const double kappa = set.kappa();
  const Vector& d = set.eigenvalues();
  const Vector& c_rot = set.c_rotated();
  const Vector u_t = set.to_rotated(x_target);
  const Vector u_c = set.to_rotated(set.center());
  const Vector m = (d.array() / (2.0 * kappa)).sqrt().matrix();
  const Vector a = (m.array() * u_c.array()).matrix();

  auto ball = [](Vector v) {
    const double nv = v.norm();
    if (nv > 1.0) v /= nv;
    return v;
  };

  double rho = options.rho;
  Vector u = u_t;
  Vector w = ball((m.array() * u.array()).matrix() - a);
  Vector y = Vector::Zero(u.size());
  if (options.initial_multiplier && *options.initial_multiplier > 0.0) {
    y = (2.0 * kappa * *options.initial_multiplier) * w;
  }

  Candidate best;
  best.residual = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= options.max_iters; ++it) {
    // u-step: (I + rho M^2) u = u_t - M y + rho M (w + a)
    u = ((u_t.array() - m.array() * y.array() + rho * m.array() * (w + a).array()) /
         (1.0 + rho * m.array().square()))
            .matrix();
    const Vector mu_minus_a = (m.array() * u.array()).matrix() - a;
    const Vector w_prev = w;
    w = ball(mu_minus_a + y / rho);
    const Vector primal = mu_minus_a - w;
    y += rho * primal;

    const double lambda = std::max(y.dot(w), 0.0) / (2.0 * kappa);
    Candidate iterate = evaluate(set.from_rotated(u), lambda);
    if (iterate.residual < best.residual) best = iterate;
    if (done(iterate)) return package(iterate, it);
    const Vector u_secular =
        ((u_t - lambda * c_rot).array() / (1.0 + lambda * d.array())).matrix();
    Candidate polished = evaluate(set.from_rotated(u_secular), lambda);
    if (polished.residual < best.residual) best = polished;
    if (done(polished)) return package(polished, it);

    const double primal_norm = primal.norm();
    const double dual_norm = rho * (m.array() * (w - w_prev).array()).matrix().norm();
    if (primal_norm > options.balance_ratio * dual_norm) {
      rho *= options.balance_factor;
    } else if (dual_norm > options.balance_ratio * primal_norm) {
      rho /= options.balance_factor;
    }
  }
  throw SubsolverError("admm: iteration cap exceeded", package(best, options.max_iters));
}

SubSolution project_ellipsoid_admm(const Ellipsoid& set, const Vector& x_target,
                                   double target_residual) {
  AdmmOptions options;
  options.target_residual = target_residual;
  return project_ellipsoid_admm(set, x_target, options);
}

}  // namespace palmi
