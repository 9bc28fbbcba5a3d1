#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kacrice/simd/kernels.hpp"

namespace kacrice::simd {
namespace {

bool cpu_has_avx2() {
#if defined(KACRICE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa initial_isa() {
  const bool avx2 = cpu_has_avx2();
  if (const char* env = std::getenv("KACRICE_SIMD")) {
    const std::string want(env);
    if (want == "scalar") return Isa::kScalar;
    if (want == "avx2" && avx2) return Isa::kAvx2;
  }
  return avx2 ? Isa::kAvx2 : Isa::kScalar;
}

std::atomic<Isa>& active_slot() {
  static std::atomic<Isa> slot{initial_isa()};
  return slot;
}

}  // namespace

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  return isa == Isa::kScalar || (isa == Isa::kAvx2 && cpu_has_avx2());
}

Isa active_isa() { return active_slot().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw std::runtime_error(std::string("ISA not supported: ") + isa_name(isa));
  }
  active_slot().store(isa, std::memory_order_relaxed);
}

const Kernels& kernels(Isa isa) {
#if defined(KACRICE_HAVE_AVX2)
  if (isa == Isa::kAvx2) return detail::kAvx2Kernels;
#endif
  (void)isa;
  return detail::kScalarKernels;
}

}  // namespace kacrice::simd
