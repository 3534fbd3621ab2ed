#include "doctest.h"

#include <cmath>
#include <random>

#include "palmi/problems.hpp"
#include "palmi/residuals.hpp"
#include "palmi/subsolvers.hpp"

using namespace palmi;

namespace {

double fd_directional(const BlockProblem& p, const BlockVec& z, const BlockVec& dir, double h) {
  BlockVec plus = z, minus = z;
  for (Index i = 0; i < z.num_blocks(); ++i) {
    plus[i] += h * dir[i];
    minus[i] -= h * dir[i];
  }
  return (p.objective(plus) - p.objective(minus)) / (2.0 * h);
}

double gradient_dot(const BlockProblem& p, const BlockVec& z, const BlockVec& dir) {
  double s = 0.0;
  for (Index i = 0; i < z.num_blocks(); ++i) s += eval_block_gradient(p, z, i).dot(dir[i]);
  return s;
}

BlockVec random_like(const BlockVec& z, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  BlockVec out = z;
  for (Vector& b : out) {
    for (Index j = 0; j < b.size(); ++j) b[j] = n01(rng);
  }
  return out;
}

}  // namespace

TEST_CASE("mmot at K = 36, N = 3 has two blocks of 36^2 variables") {
  MmotSpec spec;
  const BlockProblem p = build_mmot(spec);
  CHECK(p.num_blocks() == 2);
  CHECK(p.dims[0] == 36 * 36);
  Index total = 0;
  for (Index d : p.dims) total += d;
  CHECK(total == 2592);
}

TEST_CASE("mmot discretization is equal-mass with a symmetric zero-diagonal cost") {
  for (int k : {2, 5, 12, 36}) {
    MmotSpec spec;
    spec.K = k;
    const MmotDiscretization d = discretize_mmot(spec);
    CHECK(d.marginal.size() == k);
    CHECK((d.marginal.array() == 1.0 / k).all());
    CHECK(d.edges[0] == doctest::Approx(-1.0));
    CHECK(d.edges[k] == doctest::Approx(1.0));
    for (int a = 0; a < k; ++a) {
      CHECK(d.barycenters[a] > d.edges[a]);
      CHECK(d.barycenters[a] < d.edges[a + 1]);
      CHECK(d.cost(a, a) == 0.0);
      for (int b = 0; b < k; ++b) {
        CHECK(d.cost(a, b) == d.cost(b, a));
        if (a != b) {
          CHECK(d.cost(a, b) ==
                doctest::Approx(1.0 / std::abs(d.barycenters[a] - d.barycenters[b])));
        }
      }
    }
    // The Gaussian density is symmetric about 0, so the cells mirror.
    CHECK(d.barycenters[0] == doctest::Approx(-d.barycenters[k - 1]).epsilon(1e-9));
  }
}

TEST_CASE("mmot objective matches a direct summation at K = 4") {
  MmotSpec spec;
  spec.K = 4;
  spec.beta = 0.3;
  const BlockProblem p = build_mmot(spec);
  const MmotDiscretization d = discretize_mmot(spec);
  const int k = 4;
  std::mt19937_64 rng(1);
  const BlockVec z = mmot_random_start(spec, rng);

  auto entry = [&](int block, int a, int b) { return z[block][a + k * b]; };  // column-major
  double f = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) f += entry(i, a, b) * d.marginal[a] * d.cost(a, b);
    }
  }
  for (int a = 0; a < k; ++a) {
    for (int b = 0; b < k; ++b) {
      double xjc = 0.0;
      for (int c = 0; c < k; ++c) xjc += entry(1, a, c) * d.cost(c, b);
      f += entry(0, a, b) * d.marginal[a] * xjc + spec.beta * entry(0, a, b) * entry(1, a, b);
    }
  }
  CHECK(std::abs(p.objective(z) - f) <= 1e-12 * (1.0 + std::abs(f)));

  // Uniform couplings (every entry 1/K) have a closed-form objective.
  const BlockVec uniform({Vector::Constant(k * k, 1.0 / k), Vector::Constant(k * k, 1.0 / k)});
  double fu = 0.0;
  const double total_cost = d.cost.sum();
  fu += 2.0 * total_cost / (k * k);
  for (int a = 0; a < k; ++a) {
    for (int b = 0; b < k; ++b) {
      double xjc = 0.0;
      for (int c = 0; c < k; ++c) xjc += d.cost(c, b) / k;
      fu += (1.0 / k) * (1.0 / k) * xjc + spec.beta / (k * k);
    }
  }
  CHECK(p.objective(uniform) == doctest::Approx(fu).epsilon(1e-12));
}

TEST_CASE("mmot gradient agrees with finite differences") {
  MmotSpec spec;
  spec.K = 6;
  const BlockProblem p = build_mmot(spec);
  std::mt19937_64 rng(2);
  const BlockVec z = mmot_random_start(spec, rng);
  for (int trial = 0; trial < 3; ++trial) {
    const BlockVec dir = random_like(z, rng);
    CHECK(gradient_dot(p, z, dir) == doctest::Approx(fd_directional(p, z, dir, 1e-5)).epsilon(1e-7));
  }
}

TEST_CASE("mmot projections satisfy the marginal constraints") {
  MmotSpec spec;
  spec.K = 8;
  const BlockProblem p = build_mmot(spec);
  const MmotDiscretization d = discretize_mmot(spec);
  std::mt19937_64 rng(4);
  const BlockVec z = mmot_random_start(spec, rng);
  const Vector w = project_exact(p.constraints[0], z[0]);
  const Eigen::Map<const Matrix> m(w.data(), 8, 8);
  CHECK((m.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-9);
  CHECK(((m.transpose() * d.marginal) - d.marginal).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(std::abs(m.trace()) <= 1e-9);
  CHECK(m.minCoeff() >= 0.0);
}

TEST_CASE("mmot specs are validated") {
  MmotSpec spec;
  spec.K = 1;
  CHECK_THROWS_AS(build_mmot(spec), InputError);
  spec = MmotSpec{};
  spec.N = 1;
  CHECK_THROWS_AS(build_mmot(spec), InputError);
  spec = MmotSpec{};
  spec.beta = -1.0;
  CHECK_THROWS_AS(build_mmot(spec), InputError);
}

TEST_CASE("ellipsoid qp at n = 5, m = 500 has the expected size and spectra") {
  EllipsoidQpSpec spec;
  const EllipsoidQpData data = generate_ellipsoid_qp(spec);
  CHECK(data.a.rows() == 2500);
  CHECK((data.a - data.a.transpose()).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(data.shape_diagonals.size() == 5);
  const double ncond[] = {3.00, 3.25, 3.50, 3.75, 4.00};
  for (std::size_t i = 0; i < 5; ++i) {
    const Vector& b = data.shape_diagonals[i];
    CHECK(b[0] == doctest::Approx(1.0));
    CHECK(b[499] == doctest::Approx(std::pow(10.0, ncond[i])).epsilon(1e-12));
    CHECK(data.c[i].isZero());
  }
  const BlockProblem p = build_ellipsoid_qp(spec);
  CHECK(p.num_blocks() == 5);
  for (const ConstraintSet& s : p.constraints) CHECK(s.ellipsoid().alpha() == 1.0);
}

TEST_CASE("ellipsoid qp is bitwise deterministic in the seed") {
  EllipsoidQpSpec spec;
  spec.n = 3;
  spec.m = 20;
  spec.ncond = {1.0, 2.0, 3.0};
  spec.seed = 42;
  const EllipsoidQpData a = generate_ellipsoid_qp(spec);
  const EllipsoidQpData b = generate_ellipsoid_qp(spec);
  CHECK(a.a == b.a);
  CHECK(a.b == b.b);
  spec.seed = 43;
  CHECK_FALSE(generate_ellipsoid_qp(spec).a == a.a);
}

TEST_CASE("ellipsoid qp gradient is Az + b") {
  EllipsoidQpSpec spec;
  spec.n = 3;
  spec.m = 10;
  spec.ncond = {1.0, 1.5, 2.0};
  spec.random_c = true;
  const EllipsoidQpData data = generate_ellipsoid_qp(spec);
  const BlockProblem p = build_ellipsoid_qp(spec);
  std::mt19937_64 rng(8);
  const BlockVec z = ellipsoid_qp_random_start(spec, rng);
  const Vector g = data.a * z.flatten() + data.b;
  for (Index i = 0; i < 3; ++i) {
    CHECK((eval_block_gradient(p, z, i) - g.segment(10 * i, 10)).norm() <= 1e-12 * g.norm());
  }
  const BlockVec dir = random_like(z, rng);
  CHECK(gradient_dot(p, z, dir) == doctest::Approx(fd_directional(p, z, dir, 1e-5)).epsilon(1e-8));
  CHECK_FALSE(data.c[0].isZero());
}

TEST_CASE("ellipsoid qp specs are validated") {
  EllipsoidQpSpec spec;
  spec.ncond = {1.0, 2.0};
  CHECK_THROWS_AS(build_ellipsoid_qp(spec), InputError);
  spec = EllipsoidQpSpec{};
  spec.ncond[2] = 0.0;
  CHECK_THROWS_AS(build_ellipsoid_qp(spec), InputError);
}
