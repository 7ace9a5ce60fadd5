#include <atomic>
#include <cstdlib>
#include <string_view>

#include "kernels_impl.hpp"

namespace qrot::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(QROT_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const KernelTable* initial_table() {
  const char* env = std::getenv("QROT_KERNELS");
  if (env && std::string_view(env) == "scalar") return &scalar();
  if (const KernelTable* t = avx2()) return t;
  return &scalar();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable& scalar() { return kScalarKernels; }

const KernelTable* avx2() {
#if defined(QROT_HAVE_AVX2)
  static const bool supported = cpu_has_avx2();
  return supported ? &kAvx2Kernels : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

bool select(Variant v) {
  const KernelTable* t = nullptr;
  switch (v) {
    case Variant::Scalar:
      t = &scalar();
      break;
    case Variant::Avx2:
      t = avx2();
      break;
    case Variant::Auto:
      t = avx2() ? avx2() : &scalar();
      break;
  }
  if (!t) return false;
  current().store(t, std::memory_order_release);
  return true;
}

}  // namespace qrot::kernels
