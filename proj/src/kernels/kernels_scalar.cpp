#include <algorithm>
#include <cmath>

#include "palmi/kernels.hpp"

namespace palmi::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_squares_scalar(const double* a, std::size_t n) { return dot_scalar(a, a, n); }

double max_abs_scalar(const double* a, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(a[i]));
  return m;
}

std::size_t clamp_nonneg_scalar(const double* v, double* out, std::size_t n) {
  std::size_t active = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool pos = v[i] > 0.0;
    out[i] = pos ? v[i] : 0.0;
    active += pos ? 1 : 0;
  }
  return active;
}

void masked_copy_scalar(const double* v, const double* w, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = v[i] > 0.0 ? w[i] : 0.0;
}

void axpy_scalar(const double* a, double s, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + s * b[i];
}

SecularValue secular_diag_scalar(const double* d, const double* u, const double* c, double lambda,
                                 std::size_t n) {
  SecularValue r;
  for (std::size_t j = 0; j < n; ++j) {
    const double inv = 1.0 / (1.0 + lambda * d[j]);
    const double x = (u[j] - lambda * c[j]) * inv;
    const double g = d[j] * u[j] + c[j];
    r.value += 0.5 * d[j] * x * x + c[j] * x;
    r.derivative -= g * g * inv * inv * inv;
  }
  return r;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{
      .name = "scalar",
      .dot = dot_scalar,
      .sum_squares = sum_squares_scalar,
      .max_abs = max_abs_scalar,
      .clamp_nonneg = clamp_nonneg_scalar,
      .masked_copy = masked_copy_scalar,
      .axpy = axpy_scalar,
      .secular_diag = secular_diag_scalar,
  };
  return table;
}

}  // namespace palmi::kernels
