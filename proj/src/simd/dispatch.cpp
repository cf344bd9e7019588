#include <atomic>
#include <cstdlib>
#include <string_view>
#include <vector>

#include "ega/simd.hpp"

namespace ega::simd {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(EGA_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

std::vector<KernelTable> build_available() {
  std::vector<KernelTable> tables{detail::kScalarTable};
#if defined(EGA_HAVE_AVX2)
  if (cpu_has_avx2()) tables.push_back(detail::kAvx2Table);
#endif
#if defined(EGA_HAVE_NEON)
  tables.push_back(detail::kNeonTable);
#endif
  return tables;
}

const std::vector<KernelTable>& tables() {
  static const std::vector<KernelTable> t = build_available();
  return t;
}

const KernelTable* initial() noexcept {
  const auto& t = tables();
  if (const char* env = std::getenv("EGA_SIMD")) {
    std::string_view want(env);
    for (const auto& k : t) {
      if (isa_name(k.isa) == want) return &k;
    }
  }
  // Last entry is the widest available.
  return &t.back();
}

std::atomic<const KernelTable*>& current() noexcept {
  static std::atomic<const KernelTable*> ptr{initial()};
  return ptr;
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

std::span<const KernelTable> available() { return tables(); }

const KernelTable* find(Isa isa) noexcept {
  for (const auto& k : tables()) {
    if (k.isa == isa) return &k;
  }
  return nullptr;
}

const KernelTable& active() noexcept {
  return *current().load(std::memory_order_relaxed);
}

bool select(Isa isa) noexcept {
  const KernelTable* k = find(isa);
  if (k == nullptr) return false;
  current().store(k, std::memory_order_relaxed);
  return true;
}

}  // namespace ega::simd
