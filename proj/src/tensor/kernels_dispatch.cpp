#include <atomic>
#include <cstdlib>
#include <string>

#include "wasr/error.hpp"
#include "wasr/kernels.hpp"

namespace wasr::kernels {

bool cpu_supports_avx2_fma() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& scalar_table() { return detail::scalar_impl(); }

const KernelTable* avx2_table() {
  static const KernelTable* table = cpu_supports_avx2_fma() ? detail::avx2_impl() : nullptr;
  return table;
}

namespace {

const KernelTable* select_default() {
  const char* env = std::getenv("WASR_KERNELS");
  const std::string want = env ? env : "auto";
  if (want == "scalar") return &scalar_table();
  if (const KernelTable* t = avx2_table()) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{select_default()};
  return slot;
}

}  // namespace

const KernelTable& active() { return *active_slot().load(std::memory_order_acquire); }

void set_active(Isa isa) {
  const KernelTable* t = isa == Isa::scalar ? &scalar_table() : avx2_table();
  if (t == nullptr) throw ContractError("kernel ISA '" + std::string(isa_name(isa)) + "' unavailable on this CPU");
  active_slot().store(t, std::memory_order_release);
}

std::string_view isa_name(Isa isa) { return isa == Isa::scalar ? "scalar" : "avx2"; }

}  // namespace wasr::kernels
