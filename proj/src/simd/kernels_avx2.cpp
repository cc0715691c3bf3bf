// Compiled with -mavx2 -mfma; only reached through the dispatch table when the
// CPU reports both features.

#include <immintrin.h>

#include "sfgmkl/simd.hpp"

namespace sfgmkl::simd::avx2 {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 8 <= n; k += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k + 4), _mm256_loadu_pd(b + k + 4), acc1);
  }
  if (k + 4 <= n) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k), acc0);
    k += 4;
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; k < n; ++k) acc += a[k] * b[k];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    _mm256_storeu_pd(y + k, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + k), _mm256_loadu_pd(y + k)));
  }
  for (; k < n; ++k) y[k] += alpha * x[k];
}

void project(const double* mat, std::size_t n_rows, std::size_t dim, const double* x,
             double* out) {
  std::size_t r = 0;
  // Keep each block of 4 outputs in a register across all coordinates.
  for (; r + 4 <= n_rows; r += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t c = 0; c < dim; ++c) {
      acc = _mm256_fmadd_pd(_mm256_set1_pd(x[c]), _mm256_loadu_pd(mat + c * n_rows + r), acc);
    }
    _mm256_storeu_pd(out + r, acc);
  }
  for (; r < n_rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < dim; ++c) acc += mat[c * n_rows + r] * x[c];
    out[r] = acc;
  }
}

double squared_norm(const double* x, std::size_t n) { return dot(x, x, n); }

}  // namespace sfgmkl::simd::avx2
