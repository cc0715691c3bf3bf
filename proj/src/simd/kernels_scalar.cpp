#include "sfgmkl/simd.hpp"

namespace sfgmkl::simd::scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += a[k] * b[k];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) y[k] += alpha * x[k];
}

void project(const double* mat, std::size_t n_rows, std::size_t dim, const double* x,
             double* out) {
  for (std::size_t r = 0; r < n_rows; ++r) out[r] = 0.0;
  for (std::size_t c = 0; c < dim; ++c) axpy(x[c], mat + c * n_rows, out, n_rows);
}

double squared_norm(const double* x, std::size_t n) { return dot(x, x, n); }

}  // namespace sfgmkl::simd::scalar
