#pragma once

// Builders for the two benchmark families.
//
// MMOT: penalized discretized multi-marginal optimal transport with Coulomb
// cost on a 1-D domain. N-1 blocks X_2..X_N of size K x K (column-major),
//   F = sum_i <X_i, Lambda C> + sum_{i<j} (<X_i, Lambda X_j C> + beta <X_i, X_j>),
// each X_i in { W : W 1 = 1, W^T rho = rho, tr W = 0, W >= 0 }.
//
// Ellipsoid QP: min 1/2 z^T A z + b^T z over n blocks of size m, block i in
// { x : 1/2 x^T B_i x + c_i^T x <= 1 } with B_i = diag(10^{(j-1)/(m-1) ncond_i}).

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "palmi/core.hpp"

namespace palmi {

struct MmotSpec {
  int K = 36;
  int N = 3;
  double beta = 0.1;
  double domain_lo = -1.0;
  double domain_hi = 1.0;
  /// "gaussian" (rho proportional to exp(-x^2 / sqrt(pi))) or "tabulated".
  std::string density = "gaussian";
  /// Density values on a uniform grid over the domain (tabulated only).
  std::vector<double> tabulated;

  void validate() const;
};

/// Discretization of the single-electron density into K equal-mass cells.
struct MmotDiscretization {
  Vector edges;        // K + 1 cell boundaries
  Vector barycenters;  // cell mass centers d_k
  Vector marginal;     // rho_k, all equal to 1/K
  Matrix cost;         // Coulomb cost, zero diagonal
};

MmotDiscretization discretize_mmot(const MmotSpec& spec);

/// B(W) = [W 1; W^T rho; tr W] on column-major K x K matrices.
class MmotConstraintMap final : public LinearMap {
 public:
  explicit MmotConstraintMap(Vector marginal) : rho_(std::move(marginal)) {}
  Index rows() const override { return 2 * k() + 1; }
  Index cols() const override { return k() * k(); }
  void apply(const Vector& x, Vector& out) const override;
  void apply_transpose(const Vector& y, Vector& out) const override;

 private:
  Index k() const { return rho_.size(); }
  Vector rho_;
};

BlockProblem build_mmot(const MmotSpec& spec);

/// Entries uniform in [0, 1), one K x K matrix per block.
BlockVec mmot_random_start(const MmotSpec& spec, std::mt19937_64& rng);

struct EllipsoidQpSpec {
  int n = 5;
  int m = 500;
  std::vector<double> ncond = {3.00, 3.25, 3.50, 3.75, 4.00};
  std::uint64_t seed = 0;
  /// Zero c_i (concentric ellipsoids) or standard normal c_i.
  bool random_c = false;

  void validate() const;
};

/// The generated data, exposed for tests and reporting.
struct EllipsoidQpData {
  Matrix a;
  Vector b;
  std::vector<Vector> shape_diagonals;
  std::vector<Vector> c;
};

EllipsoidQpData generate_ellipsoid_qp(const EllipsoidQpSpec& spec);
BlockProblem build_ellipsoid_qp(const EllipsoidQpSpec& spec);
BlockProblem build_ellipsoid_qp(std::shared_ptr<const EllipsoidQpData> data);

/// Standard normal entries.
BlockVec ellipsoid_qp_random_start(const EllipsoidQpSpec& spec, std::mt19937_64& rng);

}  // namespace palmi
