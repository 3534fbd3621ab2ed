#pragma once

// Problem representation for block-structured constrained minimization
//
//   min f(x_1, ..., x_n)   s.t.  x_i in S_i = { w : h_i(w) <= 0 }
//
// together with the inexactness schedules and proximal-parameter policies the
// solvers consume. Everything here is immutable after construction and safe
// to share between threads.

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace palmi {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// -- errors -----------------------------------------------------------------

/// Malformed input: dimension mismatch, invalid spec, bad config.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Out-of-range algorithm parameter (sigma <= 0, gamma <= 1, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite values or breakdown inside a numerical routine.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// -- BlockVec -----------------------------------------------------------------

/// An ordered tuple of real vectors z = (x_1, ..., x_n).
class BlockVec {
 public:
  BlockVec() = default;
  explicit BlockVec(std::vector<Vector> blocks) : blocks_(std::move(blocks)) {}

  static BlockVec zeros(std::span<const Index> dims);
  static BlockVec unflatten(const Vector& flat, std::span<const Index> dims);

  Index num_blocks() const { return static_cast<Index>(blocks_.size()); }
  Vector& operator[](Index i) { return blocks_[static_cast<std::size_t>(i)]; }
  const Vector& operator[](Index i) const { return blocks_[static_cast<std::size_t>(i)]; }

  auto begin() { return blocks_.begin(); }
  auto end() { return blocks_.end(); }
  auto begin() const { return blocks_.begin(); }
  auto end() const { return blocks_.end(); }

  std::vector<Index> dims() const;
  Index total_size() const;
  Vector flatten() const;

  double squared_norm() const;
  double norm() const;
  double distance(const BlockVec& other) const;
  bool all_finite() const;

  friend bool operator==(const BlockVec& a, const BlockVec& b);

 private:
  std::vector<Vector> blocks_;
};

// -- constraint sets ------------------------------------------------------------

/// A linear operator B : R^cols -> R^rows, given by its action and the action
/// of its adjoint. Implementations must be reentrant.
class LinearMap {
 public:
  virtual ~LinearMap() = default;
  virtual Index rows() const = 0;
  virtual Index cols() const = 0;
  virtual void apply(const Vector& x, Vector& out) const = 0;
  virtual void apply_transpose(const Vector& y, Vector& out) const = 0;
};

class DenseLinearMap final : public LinearMap {
 public:
  explicit DenseLinearMap(Matrix matrix) : matrix_(std::move(matrix)) {}
  Index rows() const override { return matrix_.rows(); }
  Index cols() const override { return matrix_.cols(); }
  void apply(const Vector& x, Vector& out) const override { out.noalias() = matrix_ * x; }
  void apply_transpose(const Vector& y, Vector& out) const override {
    out.noalias() = matrix_.transpose() * y;
  }
  const Matrix& matrix() const { return matrix_; }

 private:
  Matrix matrix_;
};

/// { x : Bx = b, x >= 0 } (or the affine set { Bx = b } when nonneg is false).
/// The witness is a feasible point certifying nonemptiness.
struct LinearPolytope {
  std::shared_ptr<const LinearMap> op;
  Vector rhs;
  Vector witness;
  bool nonneg = true;
};

/// { x : 1/2 x^T B x + c^T x <= alpha }, B symmetric positive definite.
///
/// Holds a cached eigendecomposition B = Q diag(eig) Q^T; Q is left empty
/// when B is diagonal, in which case eig is the diagonal itself and the
/// rotated basis coincides with the original one.
class Ellipsoid {
 public:
  static Ellipsoid diagonal(Vector diag, Vector c, double alpha);
  static Ellipsoid dense(Matrix shape, Vector c, double alpha);

  Index dim() const { return eig_.size(); }
  bool is_diagonal() const { return q_.size() == 0; }
  const Vector& eigenvalues() const { return eig_; }
  const Vector& c() const { return c_; }
  double alpha() const { return alpha_; }
  const Vector& c_rotated() const { return c_rot_; }
  /// Minimizer of the constraint function, -B^{-1} c.
  const Vector& center() const { return center_; }
  /// alpha + 1/2 c^T B^{-1} c; the set is the ellipsoid
  /// 1/2 (x - center)^T B (x - center) <= kappa.
  double kappa() const { return kappa_; }

  Vector to_rotated(const Vector& x) const;
  Vector from_rotated(const Vector& u) const;
  Vector apply_shape(const Vector& x) const;  // B x
  /// 1/2 x^T B x + c^T x - alpha
  double value(const Vector& x) const;
  /// B x + c
  Vector gradient(const Vector& x) const;
  Matrix shape_matrix() const;

 private:
  Ellipsoid() = default;
  void finish();

  Vector eig_;
  Matrix q_;
  Matrix shape_;  // only for non-diagonal instances
  Vector c_;
  Vector c_rot_;
  Vector center_;
  double alpha_ = 1.0;
  double kappa_ = 1.0;
};

/// { x : h(x) <= 0 } for a convex differentiable h : R^dim -> R^p. An exact
/// projector may be attached when one is known in closed form (boxes, balls).
struct SmoothConvex {
  Index dim = 0;
  Index num_constraints = 0;
  std::function<Vector(const Vector&)> h;
  std::function<Matrix(const Vector&)> jacobian;  // dim x p, columns are grad h_j
  std::function<Vector(const Vector&)> projector;
};

/// Box [lower, upper] as a SmoothConvex set with an attached clamp projector.
SmoothConvex make_box(const Vector& lower, const Vector& upper);

enum class SetKind { kLinearPolytope, kEllipsoid, kSmoothConvex };

/// Multipliers for a constraint set. eq holds the (sign-free) multipliers of
/// the equality rows of a LinearPolytope; ineq holds the nonnegative
/// multipliers of the inequality constraints (x >= 0 for a polytope, the single
/// quadratic for an ellipsoid, the p components of h for SmoothConvex).
struct Multiplier {
  Vector eq;
  Vector ineq;
};

class ConstraintSet {
 public:
  ConstraintSet(LinearPolytope p);
  ConstraintSet(Ellipsoid e);
  ConstraintSet(SmoothConvex s);

  SetKind kind() const;
  Index dim() const;
  Index num_eq() const;
  Index num_ineq() const;

  const LinearPolytope& polytope() const;
  const Ellipsoid& ellipsoid() const;
  const SmoothConvex& smooth() const;

  /// Equality residual Bx - b (empty unless polytope).
  Vector eq_values(const Vector& x) const;
  /// Inequality part of h(x): -x for a polytope with nonneg, g(x) for an
  /// ellipsoid, h(x) for SmoothConvex.
  Vector ineq_values(const Vector& x) const;
  /// grad h(x) * lambda, combining equality and inequality parts.
  Vector jacobian_times(const Vector& x, const Multiplier& lambda) const;
  /// || max{h(x), 0} ||_inf, with |Bx - b| entering for equalities.
  double infeasibility(const Vector& x) const;

  Multiplier zero_multiplier() const;

 private:
  using Variant = std::variant<LinearPolytope, Ellipsoid, SmoothConvex>;
  std::shared_ptr<const Variant> data_;
};

// -- problems -------------------------------------------------------------------

using ObjectiveFn = std::function<double(const BlockVec&)>;
using BlockGradientFn = std::function<Vector(const BlockVec&, Index)>;

struct BlockProblem {
  std::vector<Index> dims;
  ObjectiveFn objective;
  BlockGradientFn block_gradient;
  std::vector<double> lipschitz;
  std::vector<ConstraintSet> constraints;
  /// f is a quadratic, so gradient differences are exact Hessian actions.
  bool quadratic = false;

  Index num_blocks() const { return static_cast<Index>(dims.size()); }

  /// Throws InputError when dims, constraints and lipschitz disagree.
  void validate() const;
  /// Throws InputError unless z has the problem's block structure.
  void check_point(const BlockVec& z) const;
};

/// grad_i f(z), after checking dimensions. i is zero-based.
Vector eval_block_gradient(const BlockProblem& problem, const BlockVec& z, Index i);

/// Full gradient (grad_1 f, ..., grad_n f).
BlockVec eval_gradient(const BlockProblem& problem, const BlockVec& z);

struct LipschitzOptions {
  double min_value = 1e-12;
  std::uint64_t seed = 0x5eed;
  int max_power_iterations = 2000;
  double power_tolerance = 1e-13;
};

/// Estimate of L_i with || grad_i f(z1) - grad_i f(z2) || <= L_i || z1 - z2 ||.
/// Quadratic problems: operator norm of the i-th Hessian row block by power
/// iteration on gradient differences, best of `trials` starts. Otherwise the
/// largest secant ratio over `trials` random pairs.
double estimate_block_lipschitz(const BlockProblem& problem, Index i, int trials,
                                const LipschitzOptions& options = {});

/// x_i - grad_i f(z_mixed) / sigma: the point whose projection onto S_i solves
/// the proximal linearized subproblem exactly.
Vector prox_target(const BlockProblem& problem, const BlockVec& z_mixed, Index i, double sigma);

// -- schedules --------------------------------------------------------------------

/// Inexactness tolerances eps^(k), nonincreasing and bounded below by a floor.
class EpsilonSchedule {
 public:
  enum class Kind { kConstant, kExponential, kSublinear };

  static EpsilonSchedule constant(double value, double floor = 0.0);
  static EpsilonSchedule exponential(double scale, double ratio, double floor = 0.0);
  static EpsilonSchedule sublinear(double scale, double power, double floor = 0.0);

  Kind kind() const { return kind_; }
  double scale() const { return scale_; }
  /// rho for exponential, ell for sublinear, unused for constant.
  double rate() const { return rate_; }
  double floor() const { return floor_; }

  double at(std::int64_t k) const;
  /// sum_{t >= k} eps^(t)^2: exact for exponential and constant schedules,
  /// the integral upper bound for sublinear ones, +inf when divergent.
  double tail_energy(std::int64_t k) const;

  std::string describe() const;

 private:
  EpsilonSchedule(Kind kind, double scale, double rate, double floor)
      : kind_(kind), scale_(scale), rate_(rate), floor_(floor) {}
  Kind kind_;
  double scale_;
  double rate_;
  double floor_;
};

double epsilon_at(const EpsilonSchedule& schedule, std::int64_t k);
double tail_energy(const EpsilonSchedule& schedule, std::int64_t k);

/// Proximal parameter policy. Fixed emits one value; Bounded keeps every
/// emission in [gamma L, M_u].
class SigmaPolicy {
 public:
  static SigmaPolicy fixed(double sigma);
  /// requested defaults to gamma * L and is clamped into [gamma L, upper].
  static SigmaPolicy bounded(double gamma, double lipschitz, double upper,
                             std::optional<double> requested = std::nullopt);

  bool is_bounded() const { return bounded_; }
  double gamma() const { return gamma_; }
  double lipschitz() const { return lipschitz_; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }

  double initial(Index block) const;
  /// sigma_i^(k+1) given sigma_i^(k). No adaptive rule is applied; Bounded
  /// re-clamps the current value.
  double next(Index block, std::int64_t k, double current) const;

 private:
  SigmaPolicy() = default;
  bool bounded_ = false;
  double value_ = 1.0;
  double gamma_ = 0.0;
  double lipschitz_ = 0.0;
  double lower_ = 0.0;
  double upper_ = std::numeric_limits<double>::infinity();
};

}  // namespace palmi
