#include <algorithm>
#include <cmath>

#include "palmi/residuals.hpp"

namespace palmi {

namespace {

// Dense Jacobian [grad h_eq, grad h_ineq] at x, one column per multiplier.
Matrix dense_jacobian(const ConstraintSet& set, const Vector& x) {
  const Index m = set.dim();
  const Index q = set.num_eq();
  const Index p = set.num_ineq();
  Matrix j = Matrix::Zero(m, q + p);
  switch (set.kind()) {
    case SetKind::kLinearPolytope: {
      const auto& poly = set.polytope();
      Vector e = Vector::Zero(q), col;
      for (Index r = 0; r < q; ++r) {
        e.setZero();
        e[r] = 1.0;
        poly.op->apply_transpose(e, col);
        j.col(r) = col;
      }
      if (poly.nonneg) j.rightCols(p) = -Matrix::Identity(m, m);
      break;
    }
    case SetKind::kEllipsoid:
      j.col(0) = set.ellipsoid().gradient(x);
      break;
    case SetKind::kSmoothConvex:
      j = set.smooth().jacobian(x);
      break;
  }
  return j;
}

std::optional<Multiplier> attempt(const ConstraintSet& set, const Vector& x,
                                  const Vector& x_target, const Matrix& jac,
                                  const std::vector<bool>& allowed, double slack) {
  const Index q = set.num_eq();
  const Index p = set.num_ineq();
  // Keep only allowed inequality columns; equality columns are always free.
  std::vector<Index> cols;
  for (Index c = 0; c < q; ++c) cols.push_back(c);
  for (Index c = 0; c < p; ++c) {
    if (allowed[static_cast<std::size_t>(c)]) cols.push_back(q + c);
  }
  Matrix sub(jac.rows(), static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) sub.col(static_cast<Index>(k)) = jac.col(cols[k]);

  const Vector rhs = x_target - x;
  const Vector w = nonneg_least_squares(sub, rhs, q, slack / 10.0);

  Multiplier lambda = set.zero_multiplier();
  for (std::size_t k = 0; k < cols.size(); ++k) {
    const Index c = cols[k];
    const double v = w[static_cast<Index>(k)];
    if (c < q) lambda.eq[c] = v;
    else lambda.ineq[c - q] = std::max(v, 0.0);
  }

  const ResidualTerms t = residual_terms(set, x, lambda, x_target);
  if (t.stationarity_inner <= slack && t.stationarity_inf <= slack && t.complementarity <= slack) {
    return lambda;
  }
  return std::nullopt;
}

}  // namespace

std::optional<Multiplier> recover_multiplier(const ConstraintSet& set, const Vector& x,
                                             const Vector& x_target, double eps) {
  if (!(eps > 0.0)) throw ParameterError("recover_multiplier: eps must be positive");
  if (x.size() != set.dim() || x_target.size() != set.dim()) {
    throw InputError("recover_multiplier: dimension mismatch");
  }
  const double slack = 0.25 * eps * eps;
  if (set.infeasibility(x) > slack) {
    throw InputError("recover_multiplier: infeasibility exceeds eps^2/4");
  }

  const Matrix jac = dense_jacobian(set, x);
  const Vector in = set.ineq_values(x);
  const auto p = static_cast<std::size_t>(set.num_ineq());

  std::vector<bool> all(p, true);
  if (auto lambda = attempt(set, x, x_target, jac, all, slack)) return lambda;

  // Drop clearly inactive constraints, which can only add complementarity
  // violation, and try again.
  std::vector<bool> near_active(p, false);
  bool differs = false;
  for (std::size_t c = 0; c < p; ++c) {
    near_active[c] = in[static_cast<Index>(c)] >= -slack;
    differs = differs || !near_active[c];
  }
  if (differs) return attempt(set, x, x_target, jac, near_active, slack);
  return std::nullopt;
}

}  // namespace palmi
