#include <cmath>

#include "palmi/residuals.hpp"
#include "palmi/subsolvers.hpp"

namespace palmi {

namespace {

constexpr double kAlmRoundoffFloor = 1e-6;

// Closed-form projector plus the multiplier of the active constraints.
SubSolution project_with_projector(const ConstraintSet& set, const Vector& x_target) {
  const SmoothConvex& s = set.smooth();
  SubSolution sol;
  sol.x = s.projector(x_target);
  const Vector h = s.h(sol.x);
  const Matrix jac = s.jacobian(sol.x);
  Index active = 0;
  for (Index j = 0; j < h.size(); ++j) active += h[j] >= -kExactTolerance ? 1 : 0;
  sol.lambda.ineq = Vector::Zero(s.num_constraints);
  if (active > 0) {
    Matrix ja(s.dim, active);
    std::vector<Index> index;
    for (Index j = 0; j < h.size(); ++j) {
      if (h[j] >= -kExactTolerance) {
        ja.col(static_cast<Index>(index.size())) = jac.col(j);
        index.push_back(j);
      }
    }
    const Vector w = nonneg_least_squares(ja, x_target - sol.x, 0, kExactTolerance);
    for (std::size_t k = 0; k < index.size(); ++k) {
      sol.lambda.ineq[index[k]] = w[static_cast<Index>(k)];
    }
  }
  sol.residual = residual(set, sol.x, sol.lambda, x_target);
  sol.infeas = set.infeasibility(sol.x);
  return sol;
}

}  // namespace

SubSolution project_exact_solution(const ConstraintSet& set, const Vector& x_target,
                                   const std::optional<Vector>& warm_multiplier) {
  switch (set.kind()) {
    case SetKind::kLinearPolytope: {
      SsncgOptions options;
      options.tol = kExactTolerance;
      options.initial_multiplier = warm_multiplier;
      try {
        return project_polytope_ssncg(set.polytope(), x_target, options);
      } catch (const SubsolverError& e) {
        // Newton stalls only at round-off level; accept a best iterate that is
        // accurate for all practical purposes.
        if (e.best().infeas <= 1e3 * kExactTolerance * (1.0 + set.polytope().rhs.norm())) {
          return e.best();
        }
        throw;
      }
    }
    case SetKind::kEllipsoid:
      return project_ellipsoid_secular(set.ellipsoid(), x_target, kExactTolerance);
    case SetKind::kSmoothConvex: {
      if (set.smooth().projector) return project_with_projector(set, x_target);
      AlmOptions options;
      options.target_residual = 1e-10;
      try {
        return project_smooth_alm(set, x_target, options);
      } catch (const SubsolverError& e) {
        // The residual of a generic h bottoms out near sqrt(machine eps) times
        // the problem scale; accept a best iterate at that level.
        const double floor = kAlmRoundoffFloor * (1.0 + x_target.lpNorm<Eigen::Infinity>());
        if (std::sqrt(e.best().residual) <= floor) return e.best();
        throw;
      }
    }
  }
  throw InputError("project_exact: unknown constraint set");
}

Vector project_exact(const ConstraintSet& set, const Vector& x_target) {
  return project_exact_solution(set, x_target).x;
}

}  // namespace palmi
