#pragma once

// Hot inner loops behind the tensor ops. Every kernel has a portable scalar
// reference implementation; an AVX2+FMA variant is selected at runtime when
// the CPU supports it. Setting WASR_KERNELS=scalar in the environment forces
// the reference path.

#include <cstddef>
#include <span>
#include <string_view>

namespace wasr::kernels {

enum class Isa { scalar, avx2 };

struct KernelTable {
  Isa isa;
  const char* name;
  // C[M,N] += A[M,K] * B[K,N]
  void (*gemm_nn)(int m, int n, int k, const double* a, const double* b, double* c);
  // C[M,N] += A[K,M]^T * B[K,N]
  void (*gemm_tn)(int m, int n, int k, const double* a, const double* b, double* c);
  // C[M,N] += A[M,K] * B[N,K]^T
  void (*gemm_nt)(int m, int n, int k, const double* a, const double* b, double* c);
  // y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
  double (*dot)(std::size_t n, const double* x, const double* y);
};

const KernelTable& scalar_table();

/// Null when the AVX2 variant was not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_table();

bool cpu_supports_avx2_fma();

/// Table used by the tensor ops. Chosen once, on first call.
const KernelTable& active();

/// Overrides the active table (tests, benchmarking). Throws ContractError if
/// the requested ISA is unavailable.
void set_active(Isa isa);

std::string_view isa_name(Isa isa);

namespace detail {
// Defined in the per-ISA translation units.
const KernelTable& scalar_impl();
const KernelTable* avx2_impl();
}  // namespace detail

}  // namespace wasr::kernels
