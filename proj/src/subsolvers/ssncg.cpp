// Dual semismooth Newton-CG for  min 1/2 ||x - x_t||^2  s.t.  Bx = b, x >= 0.
//
// In terms of the equality multiplier lambda the primal point is
// x(lambda) = max(x_t - B^T lambda, 0) and the dual function
//   phi(lambda) = 1/2 ||x(lambda)||^2 + b^T lambda
// is convex with gradient b - B x(lambda). Newton steps use the generalized
// Hessian B D B^T (D the 0/1 pattern of x_t - B^T lambda > 0), Jacobi-scaled by
// the row norms of B, plus a Tikhonov term, solved matrix-free by CG. Steps are globalized by an Armijo
// rule on phi while its decrease is resolvable in floating point, and by an
// Armijo rule on ||Bx - b|| below that level.

#include <algorithm>
#include <cmath>
#include <limits>

#include "palmi/kernels.hpp"
#include "palmi/residuals.hpp"
#include "palmi/subsolvers.hpp"

namespace palmi {

namespace {
// Newton damping is this fraction of min(1, ||Bx - b||), floored at options.damping.
constexpr double kDampingScale = 1e-6;
// Iterations reducing ||Bx - b|| by less than this factor count as stalled.
constexpr double kStallRatio = 0.9;
constexpr int kStallLimit = 5;

struct DualState {
  Vector lambda;
  Vector shifted;  // x_t - B^T lambda
  Vector x;
  Vector violation;  // B x - b
  double violation_norm = 0.0;
  double phi = 0.0;
};

class PolytopeDual {
 public:
  PolytopeDual(const LinearPolytope& set, const Vector& target) : set_(set), target_(target) {
    // Jacobi row scaling S = diag(1 / ||B^T e_r||) for the Newton systems.
    const Index q = set.op->rows();
    scale_.resize(q);
    Vector e = Vector::Zero(q), row;
    for (Index r = 0; r < q; ++r) {
      e[r] = 1.0;
      set.op->apply_transpose(e, row);
      e[r] = 0.0;
      const double nr = row.norm();
      scale_[r] = nr > 0.0 ? 1.0 / nr : 1.0;
    }
  }

  const Vector& scale() const { return scale_; }

  DualState evaluate(Vector lambda) const {
    DualState s;
    s.lambda = std::move(lambda);
    Vector btl;
    set_.op->apply_transpose(s.lambda, btl);
    s.shifted = target_ - btl;
    s.x.resize(s.shifted.size());
    if (set_.nonneg) {
      kernels::clamp_nonneg(s.shifted, s.x);
    } else {
      s.x = s.shifted;
    }
    Vector bx;
    set_.op->apply(s.x, bx);
    s.violation = bx - set_.rhs;
    s.violation_norm = std::sqrt(kernels::sum_squares(s.violation));
    s.phi = 0.5 * kernels::sum_squares(s.x) + kernels::dot(set_.rhs, s.lambda);
    return s;
  }

  // (S B D B^T S + damping I) v with D the 0/1 pattern of mask > 0.
  Vector hessian_times(const Vector& mask, const Vector& v, double damping) const {
    Vector btv, masked(mask.size()), out;
    const Vector sv = scale_.cwiseProduct(v);
    set_.op->apply_transpose(sv, btv);
    if (set_.nonneg) {
      kernels::masked_copy(mask, btv, masked);
    } else {
      masked = btv;
    }
    set_.op->apply(masked, out);
    out = scale_.cwiseProduct(out) + damping * v;
    return out;
  }

  SubSolution package(const DualState& s, int iters) const {
    SubSolution sol;
    sol.x = s.x;
    sol.lambda.eq = s.lambda;
    if (set_.nonneg) {
      sol.lambda.ineq = s.x - s.shifted;  // complementary slack, >= 0 by construction
    } else {
      sol.lambda.ineq.resize(0);
    }
    const ConstraintSet wrapped(set_);
    sol.residual = residual(wrapped, sol.x, sol.lambda, target_);
    sol.infeas = wrapped.infeasibility(sol.x);
    sol.inner_iters = iters;
    return sol;
  }

 private:
  const LinearPolytope& set_;
  const Vector& target_;
  Vector scale_;
};

// Conjugate gradients on the damped generalized Hessian. Returns false on a
// nonpositive curvature breakdown.
bool conjugate_gradient(const PolytopeDual& dual, const Vector& mask, const Vector& rhs,
                        double damping, double rel_tol, int max_iters, Vector& out) {
  out = Vector::Zero(rhs.size());
  Vector r = rhs;
  Vector p = r;
  double rr = kernels::sum_squares(r);
  const double stop = rel_tol * rel_tol * rr;
  for (int it = 0; it < max_iters && rr > stop; ++it) {
    const Vector hp = dual.hessian_times(mask, p, damping);
    const double php = kernels::dot(p, hp);
    if (!(php > 0.0)) return it > 0;
    const double alpha = rr / php;
    out += alpha * p;
    r -= alpha * hp;
    const double rr_new = kernels::sum_squares(r);
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  return true;
}

}  // namespace

SubSolution project_polytope_ssncg(const LinearPolytope& set, const Vector& x_target,
                                   const SsncgOptions& options) {
  if (!(options.tol > 0.0)) throw ParameterError("ssncg: tol must be positive");
  if (x_target.size() != set.op->cols()) throw InputError("ssncg: target has wrong dimension");
  if (!x_target.allFinite()) throw NumericalError("ssncg: target is not finite");
  const Index q = set.op->rows();

  const PolytopeDual dual(set, x_target);
  Vector lambda0 = Vector::Zero(q);
  bool lambda_is_warm = false;
  if (options.initial_multiplier && options.initial_multiplier->size() == q) {
    lambda0 = *options.initial_multiplier;
    lambda_is_warm = true;
  }
  DualState state = dual.evaluate(std::move(lambda0));
  DualState best = state;

  auto certified = [&](const DualState& s, int iters) {
    if (s.violation_norm <= options.tol) return true;
    if (!options.residual_target) return false;
    const SubSolution sol = dual.package(s, iters);
    return std::sqrt(sol.residual) <= *options.residual_target;
  };

  // A warm start can land on a degenerate clamp pattern where Newton makes no
  // headway; after a few stalled iterations it is dropped for lambda = 0.
  bool warm = lambda_is_warm;
  int stalled = 0;
  double widen = 0.0;
  for (int it = 0; it < options.max_newton_iters; ++it) {
    if (certified(state, it)) return dual.package(state, it);
    if (warm && stalled >= kStallLimit) {
      warm = false;
      stalled = 0;
      state = dual.evaluate(Vector::Zero(q));
      if (certified(state, it)) return dual.package(state, it);
    }
    const double previous_violation = state.violation_norm;

    // Newton direction from the row-scaled system
    // (S B D B^T S + delta I) d' = S (B x - b), d = S d', applied as lambda + d.
    const double rel_tol = std::min(1e-2, state.violation_norm);
    Vector direction;
    // Regularization shrinks with the gradient so plateaus of the clamp
    // (D nearly zero) give bounded steps; it tends to the configured damping.
    double damping = std::max(options.damping, std::min(1.0, state.violation_norm) * kDampingScale);
    // While stalled, entries clamped by less than widen count as active: the
    // plain 0/1 pattern can miss the entries a degenerate solution needs.
    const Vector mask = widen > 0.0 ? Vector(state.shifted.array() + widen) : state.shifted;
    bool ok = false;
    for (int restart = 0; restart < 4 && !ok; ++restart) {
      ok = conjugate_gradient(dual, mask, dual.scale().cwiseProduct(state.violation), damping,
                              rel_tol, options.max_cg_iters, direction);
      damping = std::max(damping * 1e3, 1e-8);
    }
    if (!ok) throw SubsolverError("ssncg: CG breakdown", dual.package(best, it));
    direction = dual.scale().cwiseProduct(direction);

    const double gd = kernels::dot(state.violation, direction);
    // The Armijo test on phi is meaningful only while the predicted decrease
    // is above the rounding level of phi; below it, use the violation.
    const bool phi_resolved =
        1e-4 * gd > 1e3 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(state.phi));
    bool accepted = false;
    double step = 1.0;
    for (int ls = 0; ls < 50; ++ls, step *= 0.5) {
      DualState trial = dual.evaluate(state.lambda + step * direction);
      const bool ok = phi_resolved
                          ? trial.phi <= state.phi - 1e-4 * step * gd
                          : trial.violation_norm <= (1.0 - 1e-4 * step) * state.violation_norm;
      if (ok) {
        state = std::move(trial);
        accepted = true;
        break;
      }
    }
    if (options.violation_log != nullptr) options.violation_log->push_back(state.violation_norm);
    stalled = state.violation_norm > kStallRatio * previous_violation ? stalled + 1 : 0;
    if (stalled >= kStallLimit && !warm) {
      widen = widen > 0.0 ? 100.0 * widen
                          : 1e-12 * (1.0 + state.shifted.lpNorm<Eigen::Infinity>());
      stalled = 0;
    } else if (stalled == 0) {
      widen = 0.0;
    }
    if (state.violation_norm < best.violation_norm) best = state;
    if (!accepted) {
      if (certified(best, it + 1)) return dual.package(best, it + 1);
      throw SubsolverError("ssncg: line search stalled", dual.package(best, it + 1));
    }
  }
  if (certified(best, options.max_newton_iters)) {
    return dual.package(best, options.max_newton_iters);
  }
  throw SubsolverError("ssncg: Newton iteration cap exceeded",
                       dual.package(best, options.max_newton_iters));
}

SubSolution project_polytope_ssncg(const LinearPolytope& set, const Vector& x_target, double tol) {
  SsncgOptions options;
  options.tol = tol;
  return project_polytope_ssncg(set, x_target, options);
}

}  // namespace palmi
