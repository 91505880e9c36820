#include "blendnet/kernels.hpp"

#include <cstdlib>
#include <cstring>

#include "blendnet/common.hpp"

namespace blendnet::kern {

#ifdef BLENDNET_BUILD_AVX2
const KernelTable* avx2_table_impl();
#endif

const KernelTable* avx2_table() {
#ifdef BLENDNET_BUILD_AVX2
#if defined(__GNUC__) || defined(__clang__)
  static const bool cpu_ok = __builtin_cpu_supports("avx2");
#else
  static const bool cpu_ok = false;
#endif
  return cpu_ok ? avx2_table_impl() : nullptr;
#else
  return nullptr;
#endif
}

namespace {

const KernelTable* resolve_default() {
  if (const char* env = std::getenv("BLENDNET_SIMD")) {
    if (std::strcmp(env, "scalar") == 0) return &scalar_table();
    if (std::strcmp(env, "avx2") == 0) {
      const KernelTable* t = avx2_table();
      check(t != nullptr, "BLENDNET_SIMD=avx2 requested but AVX2 is unavailable on this machine");
      return t;
    }
    // anything else (including "auto") falls through to auto-detect
  }
  const KernelTable* t = avx2_table();
  return t ? t : &scalar_table();
}

const KernelTable*& active_slot() {
  static const KernelTable* slot = resolve_default();
  return slot;
}

}  // namespace

const KernelTable& active() { return *active_slot(); }

void set_backend(Backend b) {
  switch (b) {
    case Backend::Scalar:
      active_slot() = &scalar_table();
      break;
    case Backend::Avx2: {
      const KernelTable* t = avx2_table();
      check(t != nullptr, "AVX2 backend requested but unavailable");
      active_slot() = t;
      break;
    }
    case Backend::Auto: {
      const KernelTable* t = avx2_table();
      active_slot() = t ? t : &scalar_table();
      break;
    }
  }
}

}  // namespace blendnet::kern
