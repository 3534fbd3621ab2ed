#include <Eigen/Eigenvalues>
#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "palmi/problems.hpp"

namespace palmi {

// -- MMOT -----------------------------------------------------------------------

void MmotSpec::validate() const {
  if (K < 2) throw InputError("mmot: K must be at least 2");
  if (N < 2) throw InputError("mmot: N must be at least 2");
  if (!(beta >= 0.0)) throw InputError("mmot: beta must be nonnegative");
  if (!(domain_lo < domain_hi)) throw InputError("mmot: empty domain");
  if (density == "tabulated") {
    if (tabulated.size() < 2) throw InputError("mmot: tabulated density needs >= 2 values");
    for (double v : tabulated) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("mmot: density must be >= 0");
    }
  } else if (density != "gaussian") {
    throw InputError("mmot: unknown density '" + density + "'");
  }
}

namespace {

// Equal-mass cells and mass centers for rho(x) ~ exp(-x^2 / s^2) on [lo, hi],
// s = pi^{1/4} (so that s^2 = sqrt(pi)).
void gaussian_cells(const MmotSpec& spec, Vector& edges, Vector& centers) {
  const double s = std::pow(std::numbers::pi, 0.25);
  const double lo = spec.domain_lo, hi = spec.domain_hi;
  const double e_lo = std::erf(lo / s), e_hi = std::erf(hi / s);
  const Index k = spec.K;
  edges.resize(k + 1);
  edges[0] = lo;
  edges[k] = hi;
  for (Index j = 1; j < k; ++j) {
    const double level = e_lo + (e_hi - e_lo) * static_cast<double>(j) / static_cast<double>(k);
    edges[j] = s * boost::math::erf_inv(level);
  }
  centers.resize(k);
  for (Index j = 0; j < k; ++j) {
    const double a = edges[j], b = edges[j + 1];
    // int x e^{-x^2/s^2} = -(s^2/2) e^{-x^2/s^2};  int e^{-x^2/s^2} = (s sqrt(pi)/2) erf(x/s)
    const double first = -(s * s / 2.0) * (std::exp(-b * b / (s * s)) - std::exp(-a * a / (s * s)));
    const double mass = (s * std::sqrt(std::numbers::pi) / 2.0) * (std::erf(b / s) - std::erf(a / s));
    centers[j] = first / mass;
  }
}

// Piecewise-linear density through the tabulated values; cells by inverting
// the exact CDF of that interpolant.
void tabulated_cells(const MmotSpec& spec, Vector& edges, Vector& centers) {
  const auto& v = spec.tabulated;
  const Index g = static_cast<Index>(v.size()) - 1;
  const double h = (spec.domain_hi - spec.domain_lo) / static_cast<double>(g);
  Vector cdf(g + 1);
  cdf[0] = 0.0;
  for (Index p = 0; p < g; ++p) {
    cdf[p + 1] = cdf[p] + 0.5 * h * (v[static_cast<std::size_t>(p)] + v[static_cast<std::size_t>(p + 1)]);
  }
  const double total = cdf[g];
  if (!(total > 0.0)) throw InputError("mmot: tabulated density has zero mass");

  // Position where the cumulative mass reaches `target`.
  auto invert = [&](double target) {
    Index p = 0;
    while (p < g - 1 && cdf[p + 1] < target) ++p;
    const double f0 = v[static_cast<std::size_t>(p)], f1 = v[static_cast<std::size_t>(p + 1)];
    const double need = target - cdf[p];
    const double slope = (f1 - f0) / h;
    double t;
    if (std::abs(slope) < 1e-14 * std::max(1.0, std::abs(f0))) {
      t = f0 > 0.0 ? need / f0 : 0.0;
    } else {
      t = (-f0 + std::sqrt(std::max(f0 * f0 + 2.0 * slope * need, 0.0))) / slope;
    }
    return spec.domain_lo + static_cast<double>(p) * h + std::clamp(t, 0.0, h);
  };
  const Index k = spec.K;
  edges.resize(k + 1);
  edges[0] = spec.domain_lo;
  edges[k] = spec.domain_hi;
  for (Index j = 1; j < k; ++j) edges[j] = invert(total * static_cast<double>(j) / static_cast<double>(k));

  // Mass centers by midpoint quadrature on each cell.
  auto density = [&](double x) {
    const double pos = std::clamp((x - spec.domain_lo) / h, 0.0, static_cast<double>(g));
    const Index p = std::min<Index>(static_cast<Index>(pos), g - 1);
    const double w = pos - static_cast<double>(p);
    return (1.0 - w) * v[static_cast<std::size_t>(p)] + w * v[static_cast<std::size_t>(p + 1)];
  };
  centers.resize(k);
  constexpr int kPanels = 2000;
  for (Index j = 0; j < k; ++j) {
    const double a = edges[j], b = edges[j + 1];
    const double step = (b - a) / kPanels;
    double mass = 0.0, first = 0.0;
    for (int q = 0; q < kPanels; ++q) {
      const double x = a + (q + 0.5) * step;
      const double f = density(x);
      mass += f;
      first += f * x;
    }
    centers[j] = mass > 0.0 ? first / mass : 0.5 * (a + b);
  }
}

}  // namespace

MmotDiscretization discretize_mmot(const MmotSpec& spec) {
  spec.validate();
  MmotDiscretization d;
  if (spec.density == "gaussian") {
    gaussian_cells(spec, d.edges, d.barycenters);
  } else {
    tabulated_cells(spec, d.edges, d.barycenters);
  }
  const Index k = spec.K;
  d.marginal = Vector::Constant(k, 1.0 / static_cast<double>(k));
  d.cost = Matrix::Zero(k, k);
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j < k; ++j) {
      if (i != j) d.cost(i, j) = 1.0 / std::abs(d.barycenters[i] - d.barycenters[j]);
    }
  }
  return d;
}

void MmotConstraintMap::apply(const Vector& x, Vector& out) const {
  const Index n = k();
  if (x.size() != n * n) throw InputError("mmot operator: wrong input dimension");
  const Eigen::Map<const Matrix> w(x.data(), n, n);
  out.resize(2 * n + 1);
  out.head(n).noalias() = w.rowwise().sum();
  out.segment(n, n).noalias() = w.transpose() * rho_;
  out[2 * n] = w.trace();
}

void MmotConstraintMap::apply_transpose(const Vector& y, Vector& out) const {
  const Index n = k();
  if (y.size() != 2 * n + 1) throw InputError("mmot operator: wrong adjoint input dimension");
  out.resize(n * n);
  Eigen::Map<Matrix> w(out.data(), n, n);
  // p 1^T + rho q^T + t I
  w.noalias() = y.head(n) * Vector::Ones(n).transpose();
  w.noalias() += rho_ * y.segment(n, n).transpose();
  w.diagonal().array() += y[2 * n];
}

BlockProblem build_mmot(const MmotSpec& spec) {
  const MmotDiscretization disc = discretize_mmot(spec);
  const Index k = spec.K;
  const Index blocks = spec.N - 1;
  const double beta = spec.beta;

  // Lambda C and, for the bilinear terms, X -> Lambda X C.
  auto lambda_c = std::make_shared<const Matrix>(disc.marginal.asDiagonal() * disc.cost);
  auto cost = std::make_shared<const Matrix>(disc.cost);
  auto rho = std::make_shared<const Vector>(disc.marginal);

  BlockProblem p;
  p.quadratic = true;
  p.dims.assign(static_cast<std::size_t>(blocks), k * k);

  auto as_matrix = [k](const Vector& v) { return Eigen::Map<const Matrix>(v.data(), k, k); };

  p.objective = [=](const BlockVec& z) {
    double f = 0.0;
    for (Index i = 0; i < blocks; ++i) {
      const auto xi = as_matrix(z[i]);
      f += (xi.array() * lambda_c->array()).sum();
      for (Index j = i + 1; j < blocks; ++j) {
        const auto xj = as_matrix(z[j]);
        const Matrix lxc = rho->asDiagonal() * (xj * *cost);
        f += (xi.array() * lxc.array()).sum() + beta * (xi.array() * xj.array()).sum();
      }
    }
    return f;
  };
  p.block_gradient = [=](const BlockVec& z, Index i) {
    Matrix g = *lambda_c;
    if (blocks > 1) {
      Matrix others = Matrix::Zero(k, k);
      for (Index j = 0; j < blocks; ++j) {
        if (j != i) others += as_matrix(z[j]);
      }
      g.noalias() += rho->asDiagonal() * (others * *cost);
      g += beta * others;
    }
    return Vector(Eigen::Map<const Vector>(g.data(), k * k));
  };

  // grad_i is affine in sum_{j != i} X_j through X -> Lambda X C + beta X; with
  // Lambda = I / K its norm is max_k |eig_k(C) / K + beta|, scaled by
  // sqrt(N - 2) for the stacked dependence on the other blocks.
  double lipschitz = 1e-12;
  if (blocks > 1) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(disc.cost, Eigen::EigenvaluesOnly);
    const Vector mapped = (es.eigenvalues().array() / static_cast<double>(k) + beta).matrix();
    lipschitz = std::sqrt(static_cast<double>(blocks - 1)) * mapped.cwiseAbs().maxCoeff();
  }
  p.lipschitz.assign(static_cast<std::size_t>(blocks), lipschitz);

  const Matrix witness_m =
      (Matrix::Ones(k, k) - Matrix::Identity(k, k)) / static_cast<double>(k - 1);
  LinearPolytope poly;
  poly.op = std::make_shared<const MmotConstraintMap>(disc.marginal);
  poly.rhs.resize(2 * k + 1);
  poly.rhs << Vector::Ones(k), disc.marginal, 0.0;
  poly.witness = Eigen::Map<const Vector>(witness_m.data(), k * k);
  poly.nonneg = true;
  const ConstraintSet set(poly);
  p.constraints.assign(static_cast<std::size_t>(blocks), set);
  p.validate();
  return p;
}

BlockVec mmot_random_start(const MmotSpec& spec, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Vector> blocks;
  for (int i = 0; i < spec.N - 1; ++i) {
    Vector v(static_cast<Index>(spec.K) * spec.K);
    for (Index j = 0; j < v.size(); ++j) v[j] = unif(rng);
    blocks.push_back(std::move(v));
  }
  return BlockVec(std::move(blocks));
}

// -- ellipsoid QP ------------------------------------------------------------------

void EllipsoidQpSpec::validate() const {
  if (n < 1) throw InputError("eqp: need at least one block");
  if (m < 2) throw InputError("eqp: block dimension must be at least 2");
  if (static_cast<int>(ncond.size()) != n) throw InputError("eqp: need one ncond per block");
  for (double c : ncond) {
    if (!(c > 0.0)) throw InputError("eqp: ncond must be positive");
  }
}

EllipsoidQpData generate_ellipsoid_qp(const EllipsoidQpSpec& spec) {
  spec.validate();
  const Index dim = static_cast<Index>(spec.n) * spec.m;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal;
  EllipsoidQpData d;
  Matrix g(dim, dim);
  for (Index c = 0; c < dim; ++c) {
    for (Index r = 0; r < dim; ++r) g(r, c) = normal(rng);
  }
  d.a = 0.5 * (g + g.transpose());
  d.b.resize(dim);
  for (Index j = 0; j < dim; ++j) d.b[j] = normal(rng);
  for (int i = 0; i < spec.n; ++i) {
    Vector diag(spec.m);
    for (int j = 0; j < spec.m; ++j) {
      diag[j] = std::pow(10.0, static_cast<double>(j) / static_cast<double>(spec.m - 1) *
                                   spec.ncond[static_cast<std::size_t>(i)]);
    }
    d.shape_diagonals.push_back(std::move(diag));
    Vector c = Vector::Zero(spec.m);
    if (spec.random_c) {
      for (int j = 0; j < spec.m; ++j) c[j] = normal(rng);
    }
    d.c.push_back(std::move(c));
  }
  return d;
}

BlockProblem build_ellipsoid_qp(std::shared_ptr<const EllipsoidQpData> data) {
  const Index n = static_cast<Index>(data->shape_diagonals.size());
  const Index m = data->shape_diagonals.front().size();
  BlockProblem p;
  p.quadratic = true;
  p.dims.assign(static_cast<std::size_t>(n), m);

  p.objective = [data](const BlockVec& z) {
    const Vector flat = z.flatten();
    return 0.5 * flat.dot(data->a * flat) + data->b.dot(flat);
  };
  p.block_gradient = [data, m](const BlockVec& z, Index i) {
    Vector g = data->b.segment(i * m, m);
    for (Index j = 0; j < z.num_blocks(); ++j) {
      g.noalias() += data->a.block(i * m, j * m, m, m) * z[j];
    }
    return g;
  };

  // L_i = ||A_{i,:}||_2 by power iteration on A_{i,:} A_{i,:}^T.
  for (Index i = 0; i < n; ++i) {
    const auto rows = data->a.middleRows(i * m, m);
    Vector v = Vector::Ones(m) / std::sqrt(static_cast<double>(m));
    double estimate = 0.0;
    for (int it = 0; it < 1000; ++it) {
      const Vector w = rows * (rows.transpose() * v);
      const double next = std::sqrt(v.dot(w));
      v = w / w.norm();
      if (std::abs(next - estimate) <= 1e-12 * next) {
        estimate = next;
        break;
      }
      estimate = next;
    }
    p.lipschitz.push_back(std::max(estimate, 1e-12));
    p.constraints.emplace_back(Ellipsoid::diagonal(data->shape_diagonals[static_cast<std::size_t>(i)],
                                                   data->c[static_cast<std::size_t>(i)], 1.0));
  }
  p.validate();
  return p;
}

BlockProblem build_ellipsoid_qp(const EllipsoidQpSpec& spec) {
  return build_ellipsoid_qp(std::make_shared<const EllipsoidQpData>(generate_ellipsoid_qp(spec)));
}

BlockVec ellipsoid_qp_random_start(const EllipsoidQpSpec& spec, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::vector<Vector> blocks;
  for (int i = 0; i < spec.n; ++i) {
    Vector v(spec.m);
    for (Index j = 0; j < v.size(); ++j) v[j] = normal(rng);
    blocks.push_back(std::move(v));
  }
  return BlockVec(std::move(blocks));
}

}  // namespace palmi
