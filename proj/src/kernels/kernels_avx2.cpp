// Compiled with -mavx2 -mfma. Nothing here may run before the dispatcher has
// confirmed CPU support.
#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "palmi/kernels.hpp"

namespace palmi::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_squares_avx2(const double* a, std::size_t n) { return dot_avx2(a, a, n); }

double max_abs_avx2(const double* a, std::size_t n) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  __m256d m = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) m = _mm256_max_pd(m, _mm256_andnot_pd(sign, _mm256_loadu_pd(a + i)));
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, m);
  double r = std::max(std::max(lanes[0], lanes[1]), std::max(lanes[2], lanes[3]));
  for (; i < n; ++i) r = std::max(r, std::abs(a[i]));
  return r;
}

std::size_t clamp_nonneg_avx2(const double* v, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t active = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_loadu_pd(v + i);
    const __m256d pos = _mm256_cmp_pd(x, zero, _CMP_GT_OQ);
    _mm256_storeu_pd(out + i, _mm256_and_pd(x, pos));
    active += static_cast<std::size_t>(__builtin_popcount(_mm256_movemask_pd(pos)));
  }
  for (; i < n; ++i) {
    const bool pos = v[i] > 0.0;
    out[i] = pos ? v[i] : 0.0;
    active += pos ? 1 : 0;
  }
  return active;
}

void masked_copy_avx2(const double* v, const double* w, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d pos = _mm256_cmp_pd(_mm256_loadu_pd(v + i), zero, _CMP_GT_OQ);
    _mm256_storeu_pd(out + i, _mm256_and_pd(_mm256_loadu_pd(w + i), pos));
  }
  for (; i < n; ++i) out[i] = v[i] > 0.0 ? w[i] : 0.0;
}

void axpy_avx2(const double* a, double s, const double* b, double* out, std::size_t n) {
  const __m256d sv = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_fmadd_pd(sv, _mm256_loadu_pd(b + i), _mm256_loadu_pd(a + i)));
  }
  for (; i < n; ++i) out[i] = std::fma(s, b[i], a[i]);
}

SecularValue secular_diag_avx2(const double* d, const double* u, const double* c, double lambda,
                               std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d half = _mm256_set1_pd(0.5);
  const __m256d lam = _mm256_set1_pd(lambda);
  __m256d val = _mm256_setzero_pd();
  __m256d der = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d dj = _mm256_loadu_pd(d + j);
    const __m256d uj = _mm256_loadu_pd(u + j);
    const __m256d cj = _mm256_loadu_pd(c + j);
    const __m256d inv = _mm256_div_pd(one, _mm256_fmadd_pd(lam, dj, one));
    const __m256d x = _mm256_mul_pd(_mm256_fnmadd_pd(lam, cj, uj), inv);
    const __m256d g = _mm256_fmadd_pd(dj, uj, cj);
    // 0.5 d x^2 + c x = x (0.5 d x + c)
    val = _mm256_fmadd_pd(x, _mm256_fmadd_pd(_mm256_mul_pd(half, dj), x, cj), val);
    const __m256d inv3 = _mm256_mul_pd(_mm256_mul_pd(inv, inv), inv);
    der = _mm256_fmadd_pd(_mm256_mul_pd(g, g), inv3, der);
  }
  SecularValue r{hsum(val), -hsum(der)};
  for (; j < n; ++j) {
    const double inv = 1.0 / (1.0 + lambda * d[j]);
    const double x = (u[j] - lambda * c[j]) * inv;
    const double g = d[j] * u[j] + c[j];
    r.value += 0.5 * d[j] * x * x + c[j] * x;
    r.derivative -= g * g * inv * inv * inv;
  }
  return r;
}

}  // namespace

const KernelTable& avx2_table_unchecked() {
  static const KernelTable table{
      .name = "avx2",
      .dot = dot_avx2,
      .sum_squares = sum_squares_avx2,
      .max_abs = max_abs_avx2,
      .clamp_nonneg = clamp_nonneg_avx2,
      .masked_copy = masked_copy_avx2,
      .axpy = axpy_avx2,
      .secular_diag = secular_diag_avx2,
  };
  return table;
}

}  // namespace palmi::kernels
