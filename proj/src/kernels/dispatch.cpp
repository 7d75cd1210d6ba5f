#include <atomic>
#include <cstdlib>
#include <string>

#include "brl/error.hpp"
#include "brl/kernels/kernels.hpp"

namespace brl::kernels {

namespace {

constexpr KernelTable kScalar{&scalar::match_scores, &scalar::max_value, &scalar::exp_shift_sum};
#ifdef BRL_HAVE_AVX2_KERNELS
constexpr KernelTable kAvx2{&avx2::match_scores, &avx2::max_value, &avx2::exp_shift_sum};
#endif

Isa detect() {
  if (const char* env = std::getenv("BRL_ISA"); env != nullptr && *env != '\0') {
    const Isa want = parse_isa(env);
    if (!isa_available(want)) throw ConfigError("BRL_ISA requests an unavailable instruction set");
    return want;
  }
  return isa_available(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<int>& current() {
  static std::atomic<int> isa{static_cast<int>(detect())};
  return isa;
}

}  // namespace

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#ifdef BRL_HAVE_AVX2_KERNELS
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Isa isa) {
  if (!isa_available(isa)) throw ConfigError("kernel table unavailable on this CPU");
#ifdef BRL_HAVE_AVX2_KERNELS
  if (isa == Isa::Avx2) return kAvx2;
#endif
  return kScalar;
}

const KernelTable& active() { return table(active_isa()); }
Isa active_isa() { return static_cast<Isa>(current().load(std::memory_order_relaxed)); }

void set_active_isa(Isa isa) {
  if (!isa_available(isa)) throw ConfigError("kernel table unavailable on this CPU");
  current().store(static_cast<int>(isa), std::memory_order_relaxed);
}

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::Scalar;
  if (name == "avx2") return Isa::Avx2;
  throw ConfigError("unknown instruction set '" + std::string(name) + "'");
}

}  // namespace brl::kernels
