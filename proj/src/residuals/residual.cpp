#include <algorithm>
#include <cmath>

#include "palmi/kernels.hpp"
#include "palmi/residuals.hpp"

namespace palmi {

namespace {

void check_multiplier(const ConstraintSet& set, const Vector& x, const Multiplier& lambda,
                      const Vector& x_target) {
  if (x.size() != set.dim() || x_target.size() != set.dim()) {
    throw InputError("residual: point dimension does not match the constraint set");
  }
  if (lambda.eq.size() != set.num_eq() || lambda.ineq.size() != set.num_ineq()) {
    throw InputError("residual: multiplier dimension does not match the constraint set");
  }
  for (Index j = 0; j < lambda.ineq.size(); ++j) {
    if (!(lambda.ineq[j] >= 0.0)) throw InputError("residual: negative inequality multiplier");
  }
}

}  // namespace

Vector stationarity_vector(const ConstraintSet& set, const Vector& x, const Multiplier& lambda,
                           const Vector& x_target) {
  check_multiplier(set, x, lambda, x_target);
  if (set.kind() == SetKind::kLinearPolytope) {
    const auto& p = set.polytope();
    Vector btl;
    p.op->apply_transpose(lambda.eq, btl);
    const Vector shifted = x_target - btl;
    Vector s = x - shifted;
    if (p.nonneg) s -= lambda.ineq;
    return s;
  }
  return x - x_target + set.jacobian_times(x, lambda);
}

ResidualTerms residual_terms(const ConstraintSet& set, const Vector& x, const Multiplier& lambda,
                             const Vector& x_target) {
  const Vector s = stationarity_vector(set, x, lambda, x_target);
  ResidualTerms t;
  t.stationarity_inner = std::max(kernels::dot(x, s), 0.0);
  t.stationarity_inf = kernels::max_abs(s);

  const Vector eq = set.eq_values(x);
  const Vector in = set.ineq_values(x);
  double infeas = eq.size() > 0 ? kernels::max_abs(eq) : 0.0;
  for (Index j = 0; j < in.size(); ++j) infeas = std::max(infeas, in[j]);
  t.infeasibility = infeas;

  double lh = 0.0;
  if (eq.size() > 0) lh += kernels::dot(lambda.eq, eq);
  if (in.size() > 0) lh += kernels::dot(lambda.ineq, in);
  t.complementarity = std::max(-lh, 0.0);
  return t;
}

double residual(const ConstraintSet& set, const Vector& x, const Multiplier& lambda,
                const Vector& x_target) {
  return residual_terms(set, x, lambda, x_target).total();
}

}  // namespace palmi
