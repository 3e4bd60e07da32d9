#include "alt/simd/kernels.hpp"

#include "alt/util/errors.hpp"

namespace alt::simd {

#if defined(__x86_64__) || defined(_M_X64)
const Kernels& avx2_kernels();
static bool cpu_has_avx2_fma() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif
#if defined(__aarch64__)
const Kernels& neon_kernels();
#endif

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::kScalar: return "scalar";
    case Backend::kAvx2: return "avx2";
    case Backend::kNeon: return "neon";
  }
  return "?";
}

std::vector<const Kernels*> available_kernels() {
  std::vector<const Kernels*> out;
  out.push_back(&scalar_kernels());
#if defined(__x86_64__) || defined(_M_X64)
  if (cpu_has_avx2_fma()) out.push_back(&avx2_kernels());
#endif
#if defined(__aarch64__)
  out.push_back(&neon_kernels());
#endif
  return out;
}

namespace {
const Kernels* g_forced = nullptr;

const Kernels* pick_widest() {
  auto all = available_kernels();
  return all.back();  // ordered narrow -> wide
}
}  // namespace

const Kernels& active() {
  if (g_forced) return *g_forced;
  static const Kernels* chosen = pick_widest();
  return *chosen;
}

void force_backend(Backend b) {
  for (const Kernels* k : available_kernels()) {
    if (k->backend == b) {
      g_forced = k;
      return;
    }
  }
  throw ConfigError(std::string("simd backend unavailable: ") + backend_name(b));
}

void reset_backend() { g_forced = nullptr; }

}  // namespace alt::simd
