#include <cstdlib>
#include <string>

#include "sfgmkl/error.hpp"
#include "sfgmkl/simd.hpp"

namespace sfgmkl::simd {

namespace {

constexpr KernelTable kScalarTable{scalar::dot, scalar::axpy, scalar::project,
                                   scalar::squared_norm};
#if defined(SFGMKL_HAVE_AVX2)
constexpr KernelTable kAvx2Table{avx2::dot, avx2::axpy, avx2::project, avx2::squared_norm};
#endif

bool cpu_has_avx2() noexcept {
#if defined(SFGMKL_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa select_isa() noexcept {
  if (const char* env = std::getenv("SFGMKL_ISA"); env != nullptr && std::string(env) == "scalar") {
    return Isa::scalar;
  }
  return supported(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

}  // namespace

bool compiled(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2:
#if defined(SFGMKL_HAVE_AVX2)
      return true;
#else
      return false;
#endif
  }
  return false;
}

bool supported(Isa isa) noexcept {
  if (isa == Isa::scalar) return true;
  static const bool avx2_ok = compiled(Isa::avx2) && cpu_has_avx2();
  return avx2_ok;
}

const KernelTable& table(Isa isa) {
  if (!supported(isa)) {
    throw ValidationError("instruction set '" + std::string(name(isa)) + "' is not available");
  }
#if defined(SFGMKL_HAVE_AVX2)
  if (isa == Isa::avx2) return kAvx2Table;
#endif
  return kScalarTable;
}

Isa active_isa() noexcept {
  static const Isa isa = select_isa();
  return isa;
}

const KernelTable& active() noexcept {
  static const KernelTable& t = table(active_isa());
  return t;
}

std::string_view name(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
  }
  return "unknown";
}

}  // namespace sfgmkl::simd
