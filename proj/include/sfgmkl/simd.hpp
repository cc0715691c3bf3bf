#pragma once

// Data-parallel inner loops used by the feature maps and learners.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2/FMA variant. The variant is chosen once at startup from the CPU's
// capabilities; set SFGMKL_ISA=scalar in the environment to force the
// reference path.

#include <cstddef>
#include <span>
#include <string_view>

namespace sfgmkl::simd {

enum class Isa { scalar, avx2 };

struct KernelTable {
  // sum_k a[k] * b[k]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[k] += alpha * x[k]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out[r] = sum_c mat[c * n_rows + r] * x[c]   for r < n_rows
  // (mat is stored coordinate-major so the loop over r is contiguous)
  void (*project)(const double* mat, std::size_t n_rows, std::size_t dim, const double* x,
                  double* out);
  // sum_k x[k]^2
  double (*squared_norm)(const double* x, std::size_t n);
};

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void project(const double* mat, std::size_t n_rows, std::size_t dim, const double* x,
             double* out);
double squared_norm(const double* x, std::size_t n);
}  // namespace scalar

#if defined(SFGMKL_HAVE_AVX2)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void project(const double* mat, std::size_t n_rows, std::size_t dim, const double* x,
             double* out);
double squared_norm(const double* x, std::size_t n);
}  // namespace avx2
#endif

bool compiled(Isa isa) noexcept;
bool supported(Isa isa) noexcept;  // compiled in and the CPU has it
const KernelTable& table(Isa isa);  // throws if !supported(isa)
const KernelTable& active() noexcept;
Isa active_isa() noexcept;
std::string_view name(Isa isa) noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline double squared_norm(std::span<const double> x) {
  return active().squared_norm(x.data(), x.size());
}

}  // namespace sfgmkl::simd
