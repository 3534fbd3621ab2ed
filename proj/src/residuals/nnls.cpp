#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>

#include "palmi/residuals.hpp"

namespace palmi {

namespace {

// Least squares restricted to the passive columns; other entries are zero.
Vector solve_passive(const Matrix& a, const Vector& y, const std::vector<bool>& passive) {
  std::vector<Index> cols;
  for (Index j = 0; j < a.cols(); ++j) {
    if (passive[static_cast<std::size_t>(j)]) cols.push_back(j);
  }
  Vector z = Vector::Zero(a.cols());
  if (cols.empty()) return z;
  Matrix sub(a.rows(), static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) sub.col(static_cast<Index>(k)) = a.col(cols[k]);
  const Vector sol = Eigen::CompleteOrthogonalDecomposition<Matrix>(sub).solve(y);
  for (std::size_t k = 0; k < cols.size(); ++k) z[cols[k]] = sol[static_cast<Index>(k)];
  return z;
}

}  // namespace

Vector nonneg_least_squares(const Matrix& a, const Vector& y, Index num_free, double tol,
                            int max_iters) {
  const Index n = a.cols();
  if (a.rows() != y.size()) throw InputError("nnls: dimension mismatch");
  if (num_free < 0 || num_free > n) throw InputError("nnls: bad free-variable count");
  if (max_iters <= 0) max_iters = static_cast<int>(3 * n + 10);

  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  for (Index j = 0; j < num_free; ++j) passive[static_cast<std::size_t>(j)] = true;
  Vector w = solve_passive(a, y, passive);

  for (int outer = 0; outer < max_iters; ++outer) {
    const Vector grad = a.transpose() * (y - a * w);
    Index enter = -1;
    double best = tol;
    for (Index j = num_free; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && grad[j] > best) {
        best = grad[j];
        enter = j;
      }
    }
    if (enter < 0) break;
    passive[static_cast<std::size_t>(enter)] = true;

    for (int inner = 0; inner <= n; ++inner) {
      const Vector z = solve_passive(a, y, passive);
      double alpha = 1.0;
      Index blocking = -1;
      for (Index j = num_free; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z[j] <= 0.0) {
          const double denom = w[j] - z[j];
          const double step = denom > 0.0 ? w[j] / denom : 0.0;
          if (step < alpha) {
            alpha = step;
            blocking = j;
          }
        }
      }
      if (blocking < 0) {
        w = z;
        break;
      }
      w += alpha * (z - w);
      for (Index j = num_free; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && (w[j] <= tol || j == blocking)) {
          passive[static_cast<std::size_t>(j)] = false;
          w[j] = 0.0;
        }
      }
    }
  }
  for (Index j = num_free; j < n; ++j) w[j] = std::max(w[j], 0.0);
  return w;
}

}  // namespace palmi
