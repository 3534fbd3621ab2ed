#pragma once

// Data-parallel inner loops shared by the subsolvers and the residual
// evaluator. Each kernel has a portable scalar reference implementation and,
// on x86-64, an AVX2/FMA variant. The variant is picked once per process from
// CPUID; setting PALMI_KERNELS=scalar forces the reference path.

#include <cstddef>
#include <concepts>
#include <string_view>

namespace palmi::kernels {

/// Values and first derivative (in the multiplier) of the diagonal secular
/// function used by the ellipsoid projection.
struct SecularValue {
  double value = 0.0;       // 1/2 sum d x^2 + sum c x, at x_j = (u_j - l c_j)/(1 + l d_j)
  double derivative = 0.0;  // d value / d l
};

struct KernelTable {
  std::string_view name;

  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum_squares)(const double* a, std::size_t n);
  double (*max_abs)(const double* a, std::size_t n);

  // out = max(v, 0); returns the number of strictly positive entries.
  std::size_t (*clamp_nonneg)(const double* v, double* out, std::size_t n);

  // out_j = w_j if v_j > 0 else 0.
  void (*masked_copy)(const double* v, const double* w, double* out, std::size_t n);

  // out = a + s * b
  void (*axpy)(const double* a, double s, const double* b, double* out, std::size_t n);

  SecularValue (*secular_diag)(const double* d, const double* u, const double* c,
                               double lambda, std::size_t n);
};

const KernelTable& scalar_table();

/// nullptr when the AVX2 path is not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_table();

/// Table selected for this process.
const KernelTable& active();

// Convenience wrappers over active(), accepting any contiguous container of
// doubles (std::vector, std::span, Eigen dense vectors).

template <typename V>
concept ConstDoubles = requires(const V& v) {
  { v.data() } -> std::convertible_to<const double*>;
  { v.size() } -> std::convertible_to<std::size_t>;
};

template <typename V>
concept MutableDoubles = requires(V& v) {
  { v.data() } -> std::convertible_to<double*>;
  { v.size() } -> std::convertible_to<std::size_t>;
};

inline std::size_t count(const ConstDoubles auto& v) { return static_cast<std::size_t>(v.size()); }

inline double dot(const ConstDoubles auto& a, const ConstDoubles auto& b) {
  return active().dot(a.data(), b.data(), count(a));
}
inline double sum_squares(const ConstDoubles auto& a) {
  return active().sum_squares(a.data(), count(a));
}
inline double max_abs(const ConstDoubles auto& a) { return active().max_abs(a.data(), count(a)); }
inline std::size_t clamp_nonneg(const ConstDoubles auto& v, MutableDoubles auto& out) {
  return active().clamp_nonneg(v.data(), out.data(), count(v));
}
inline void masked_copy(const ConstDoubles auto& v, const ConstDoubles auto& w,
                        MutableDoubles auto& out) {
  active().masked_copy(v.data(), w.data(), out.data(), count(v));
}
inline void axpy(const ConstDoubles auto& a, double s, const ConstDoubles auto& b,
                 MutableDoubles auto& out) {
  active().axpy(a.data(), s, b.data(), out.data(), count(a));
}
inline SecularValue secular_diag(const ConstDoubles auto& d, const ConstDoubles auto& u,
                                 const ConstDoubles auto& c, double lambda) {
  return active().secular_diag(d.data(), u.data(), c.data(), lambda, count(d));
}

}  // namespace palmi::kernels
