#include <Eigen/Eigenvalues>

#include <cmath>

#include "palmi/core.hpp"
#include "palmi/kernels.hpp"

namespace palmi {

// -- Ellipsoid ------------------------------------------------------------------

Ellipsoid Ellipsoid::diagonal(Vector diag, Vector c, double alpha) {
  if (diag.size() == 0) throw InputError("ellipsoid: empty shape");
  if (c.size() != diag.size()) throw InputError("ellipsoid: c has wrong dimension");
  if (!(diag.array() > 0.0).all() || !diag.allFinite()) {
    throw InputError("ellipsoid: shape must be positive definite");
  }
  if (!(alpha > 0.0)) throw InputError("ellipsoid: alpha must be positive");
  Ellipsoid e;
  e.eig_ = std::move(diag);
  e.c_ = std::move(c);
  e.alpha_ = alpha;
  e.finish();
  return e;
}

Ellipsoid Ellipsoid::dense(Matrix shape, Vector c, double alpha) {
  const Index m = shape.rows();
  if (m == 0 || shape.cols() != m) throw InputError("ellipsoid: shape must be square");
  if (c.size() != m) throw InputError("ellipsoid: c has wrong dimension");
  if (!(alpha > 0.0)) throw InputError("ellipsoid: alpha must be positive");
  if (!shape.isApprox(shape.transpose(), 1e-12)) {
    throw InputError("ellipsoid: shape must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(shape);
  if (es.info() != Eigen::Success) throw NumericalError("ellipsoid: eigendecomposition failed");
  if (!(es.eigenvalues().array() > 0.0).all()) {
    throw InputError("ellipsoid: shape must be positive definite");
  }
  Ellipsoid e;
  e.eig_ = es.eigenvalues();
  e.q_ = es.eigenvectors();
  e.shape_ = std::move(shape);
  e.c_ = std::move(c);
  e.alpha_ = alpha;
  e.finish();
  return e;
}

void Ellipsoid::finish() {
  c_rot_ = to_rotated(c_);
  const Vector center_rot = -(c_rot_.array() / eig_.array()).matrix();
  center_ = from_rotated(center_rot);
  kappa_ = alpha_ + 0.5 * (c_rot_.array().square() / eig_.array()).sum();
}

Vector Ellipsoid::to_rotated(const Vector& x) const {
  if (is_diagonal()) return x;
  return q_.transpose() * x;
}

Vector Ellipsoid::from_rotated(const Vector& u) const {
  if (is_diagonal()) return u;
  return q_ * u;
}

Vector Ellipsoid::apply_shape(const Vector& x) const {
  if (is_diagonal()) return (eig_.array() * x.array()).matrix();
  return shape_ * x;
}

double Ellipsoid::value(const Vector& x) const {
  const Vector bx = apply_shape(x);
  return 0.5 * kernels::dot(x, bx) + kernels::dot(c_, x) - alpha_;
}

Vector Ellipsoid::gradient(const Vector& x) const { return apply_shape(x) + c_; }

Matrix Ellipsoid::shape_matrix() const {
  if (is_diagonal()) return eig_.asDiagonal();
  return shape_;
}

// -- boxes ---------------------------------------------------------------------

SmoothConvex make_box(const Vector& lower, const Vector& upper) {
  if (lower.size() != upper.size()) throw InputError("box: bound dimensions differ");
  if (!(lower.array() <= upper.array()).all()) throw InputError("box: lower > upper");
  const Index m = lower.size();
  SmoothConvex s;
  s.dim = m;
  s.num_constraints = 2 * m;
  s.h = [lower, upper](const Vector& x) {
    Vector h(2 * x.size());
    h.head(x.size()) = lower - x;
    h.tail(x.size()) = x - upper;
    return h;
  };
  s.jacobian = [m](const Vector&) {
    Matrix j(m, 2 * m);
    j.leftCols(m) = -Matrix::Identity(m, m);
    j.rightCols(m) = Matrix::Identity(m, m);
    return j;
  };
  s.projector = [lower, upper](const Vector& x) -> Vector {
    return x.cwiseMax(lower).cwiseMin(upper);
  };
  return s;
}

// -- ConstraintSet ---------------------------------------------------------------

ConstraintSet::ConstraintSet(LinearPolytope p) {
  if (!p.op) throw InputError("polytope: missing operator");
  if (p.rhs.size() != p.op->rows()) throw InputError("polytope: rhs has wrong dimension");
  if (p.witness.size() != p.op->cols()) throw InputError("polytope: witness has wrong dimension");
  Vector bw;
  p.op->apply(p.witness, bw);
  const double scale = 1.0 + p.rhs.lpNorm<Eigen::Infinity>();
  if ((bw - p.rhs).lpNorm<Eigen::Infinity>() > 1e-9 * scale ||
      (p.nonneg && (p.witness.array() < 0.0).any())) {
    throw InputError("polytope: witness is not feasible");
  }
  data_ = std::make_shared<const Variant>(std::move(p));
}

ConstraintSet::ConstraintSet(Ellipsoid e) : data_(std::make_shared<const Variant>(std::move(e))) {}

ConstraintSet::ConstraintSet(SmoothConvex s) {
  if (s.dim <= 0 || s.num_constraints <= 0 || !s.h || !s.jacobian) {
    throw InputError("smooth convex set: h, jacobian and dimensions are required");
  }
  data_ = std::make_shared<const Variant>(std::move(s));
}

SetKind ConstraintSet::kind() const {
  switch (data_->index()) {
    case 0: return SetKind::kLinearPolytope;
    case 1: return SetKind::kEllipsoid;
    default: return SetKind::kSmoothConvex;
  }
}

Index ConstraintSet::dim() const {
  return std::visit(
      [](const auto& s) -> Index {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, LinearPolytope>) return s.op->cols();
        else if constexpr (std::is_same_v<T, Ellipsoid>) return s.dim();
        else return s.dim;
      },
      *data_);
}

Index ConstraintSet::num_eq() const {
  if (const auto* p = std::get_if<LinearPolytope>(data_.get())) return p->op->rows();
  return 0;
}

Index ConstraintSet::num_ineq() const {
  switch (kind()) {
    case SetKind::kLinearPolytope: return polytope().nonneg ? dim() : 0;
    case SetKind::kEllipsoid: return 1;
    case SetKind::kSmoothConvex: return smooth().num_constraints;
  }
  return 0;
}

const LinearPolytope& ConstraintSet::polytope() const {
  if (const auto* p = std::get_if<LinearPolytope>(data_.get())) return *p;
  throw InputError("constraint set is not a linear polytope");
}

const Ellipsoid& ConstraintSet::ellipsoid() const {
  if (const auto* e = std::get_if<Ellipsoid>(data_.get())) return *e;
  throw InputError("constraint set is not an ellipsoid");
}

const SmoothConvex& ConstraintSet::smooth() const {
  if (const auto* s = std::get_if<SmoothConvex>(data_.get())) return *s;
  throw InputError("constraint set is not a smooth convex system");
}

Vector ConstraintSet::eq_values(const Vector& x) const {
  if (x.size() != dim()) throw InputError("constraint evaluation: dimension mismatch");
  if (kind() != SetKind::kLinearPolytope) return Vector();
  const auto& p = polytope();
  Vector bx;
  p.op->apply(x, bx);
  return bx - p.rhs;
}

Vector ConstraintSet::ineq_values(const Vector& x) const {
  if (x.size() != dim()) throw InputError("constraint evaluation: dimension mismatch");
  switch (kind()) {
    case SetKind::kLinearPolytope:
      return polytope().nonneg ? Vector(-x) : Vector();
    case SetKind::kEllipsoid:
      return Vector::Constant(1, ellipsoid().value(x));
    case SetKind::kSmoothConvex:
      return smooth().h(x);
  }
  return Vector();
}

Vector ConstraintSet::jacobian_times(const Vector& x, const Multiplier& lambda) const {
  if (x.size() != dim()) throw InputError("jacobian: dimension mismatch");
  if (lambda.eq.size() != num_eq() || lambda.ineq.size() != num_ineq()) {
    throw InputError("jacobian: multiplier has wrong dimension");
  }
  switch (kind()) {
    case SetKind::kLinearPolytope: {
      const auto& p = polytope();
      Vector out;
      p.op->apply_transpose(lambda.eq, out);
      if (p.nonneg) out -= lambda.ineq;
      return out;
    }
    case SetKind::kEllipsoid:
      return lambda.ineq[0] * ellipsoid().gradient(x);
    case SetKind::kSmoothConvex:
      return smooth().jacobian(x) * lambda.ineq;
  }
  return Vector();
}

double ConstraintSet::infeasibility(const Vector& x) const {
  double v = 0.0;
  const Vector eq = eq_values(x);
  if (eq.size() > 0) v = kernels::max_abs(eq);
  const Vector in = ineq_values(x);
  for (Index j = 0; j < in.size(); ++j) v = std::max(v, in[j]);
  return v;
}

Multiplier ConstraintSet::zero_multiplier() const {
  return Multiplier{Vector::Zero(num_eq()), Vector::Zero(num_ineq())};
}

}  // namespace palmi
