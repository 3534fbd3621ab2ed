#include <algorithm>
#include <cmath>
#include <random>

#include "palmi/core.hpp"

namespace palmi {

void BlockProblem::validate() const {
  const Index n = num_blocks();
  if (n == 0) throw InputError("problem: no blocks");
  if (!objective || !block_gradient) throw InputError("problem: missing oracles");
  if (static_cast<Index>(constraints.size()) != n) {
    throw InputError("problem: need one constraint set per block");
  }
  if (!lipschitz.empty() && static_cast<Index>(lipschitz.size()) != n) {
    throw InputError("problem: need one Lipschitz modulus per block");
  }
  for (Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (dims[k] <= 0) throw InputError("problem: block dimensions must be positive");
    if (constraints[k].dim() != dims[k]) {
      throw InputError("problem: constraint set " + std::to_string(i) +
                       " does not match its block dimension");
    }
    if (!lipschitz.empty() && !(lipschitz[k] > 0.0)) {
      throw InputError("problem: Lipschitz moduli must be positive");
    }
  }
}

void BlockProblem::check_point(const BlockVec& z) const {
  if (z.num_blocks() != num_blocks()) throw InputError("point has the wrong number of blocks");
  for (Index i = 0; i < num_blocks(); ++i) {
    if (z[i].size() != dims[static_cast<std::size_t>(i)]) {
      throw InputError("block " + std::to_string(i) + " has the wrong dimension");
    }
  }
}

Vector eval_block_gradient(const BlockProblem& problem, const BlockVec& z, Index i) {
  problem.check_point(z);
  if (i < 0 || i >= problem.num_blocks()) throw InputError("block index out of range");
  Vector g = problem.block_gradient(z, i);
  if (g.size() != z[i].size()) throw InputError("gradient oracle returned the wrong dimension");
  return g;
}

BlockVec eval_gradient(const BlockProblem& problem, const BlockVec& z) {
  problem.check_point(z);
  std::vector<Vector> g;
  g.reserve(static_cast<std::size_t>(problem.num_blocks()));
  for (Index i = 0; i < problem.num_blocks(); ++i) g.push_back(problem.block_gradient(z, i));
  return BlockVec(std::move(g));
}

namespace {

Vector random_unit(Index m, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Vector v(m);
  for (Index j = 0; j < m; ++j) v[j] = normal(rng);
  const double nv = v.norm();
  return nv > 0.0 ? Vector(v / nv) : Vector(Vector::Unit(m, 0));
}

// ||H_{i,:}|| for quadratic f: power iteration on M M^T with M = H_{i,:}.
// M^T v is the full gradient change when block i moves by v; M w is the block-i
// gradient change when the whole point moves by w.
double quadratic_row_norm(const BlockProblem& problem, Index i, std::mt19937_64& rng,
                          const LipschitzOptions& options) {
  const BlockVec base = BlockVec::zeros(problem.dims);
  const BlockVec g0 = eval_gradient(problem, base);
  const Vector gi0 = g0[i];

  auto apply_mt = [&](const Vector& v) {
    BlockVec p = base;
    p[i] = v;
    BlockVec g = eval_gradient(problem, p);
    for (Index j = 0; j < g.num_blocks(); ++j) g[j] -= g0[j];
    return g;
  };
  auto apply_m = [&](const BlockVec& w) { return Vector(problem.block_gradient(w, i) - gi0); };

  const Index m = problem.dims[static_cast<std::size_t>(i)];
  Vector v = random_unit(m, rng);
  double estimate = 0.0;
  for (int it = 0; it < options.max_power_iterations; ++it) {
    const Vector next = apply_m(apply_mt(v));
    const double rq = v.dot(next);  // Rayleigh quotient of M M^T
    const double nn = next.norm();
    if (!(nn > 0.0)) return 0.0;
    v = next / nn;
    const double prev = estimate;
    estimate = std::sqrt(std::max(rq, 0.0));
    if (it > 2 && std::abs(estimate - prev) <= options.power_tolerance * estimate) break;
  }
  // One last Rayleigh quotient on the converged vector.
  const Vector mv = apply_m(apply_mt(v));
  return std::max(estimate, std::sqrt(std::max(v.dot(mv), 0.0)));
}

double secant_estimate(const BlockProblem& problem, Index i, int trials, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  double best = 0.0;
  for (int t = 0; t < trials; ++t) {
    std::vector<Vector> a, b;
    for (Index m : problem.dims) {
      Vector x(m), y(m);
      for (Index j = 0; j < m; ++j) {
        x[j] = normal(rng);
        y[j] = x[j] + 1e-3 * normal(rng);
      }
      a.push_back(std::move(x));
      b.push_back(std::move(y));
    }
    const BlockVec za(std::move(a)), zb(std::move(b));
    const double dz = za.distance(zb);
    if (!(dz > 0.0)) continue;
    const double dg = (problem.block_gradient(za, i) - problem.block_gradient(zb, i)).norm();
    best = std::max(best, dg / dz);
  }
  return best;
}

}  // namespace

double estimate_block_lipschitz(const BlockProblem& problem, Index i, int trials,
                                const LipschitzOptions& options) {
  if (trials < 1) throw ParameterError("estimate_block_lipschitz: trials must be >= 1");
  if (i < 0 || i >= problem.num_blocks()) throw InputError("block index out of range");
  std::mt19937_64 rng(options.seed + static_cast<std::uint64_t>(i));
  double estimate = 0.0;
  if (problem.quadratic) {
    for (int t = 0; t < trials; ++t) {
      estimate = std::max(estimate, quadratic_row_norm(problem, i, rng, options));
    }
  } else {
    estimate = secant_estimate(problem, i, trials, rng);
  }
  if (!std::isfinite(estimate)) throw NumericalError("Lipschitz estimate is not finite");
  return std::max(estimate, options.min_value);
}

Vector prox_target(const BlockProblem& problem, const BlockVec& z_mixed, Index i, double sigma) {
  if (!(sigma > 0.0)) throw ParameterError("prox_target: sigma must be positive");
  const Vector g = eval_block_gradient(problem, z_mixed, i);
  return z_mixed[i] - g / sigma;
}

}  // namespace palmi
