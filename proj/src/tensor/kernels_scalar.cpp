#include "wasr/kernels.hpp"

namespace wasr::kernels {
namespace {

void gemm_nn(int m, int n, int k, const double* a, const double* b, double* c) {
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<std::ptrdiff_t>(i) * n;
    const double* arow = a + static_cast<std::ptrdiff_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + static_cast<std::ptrdiff_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_tn(int m, int n, int k, const double* a, const double* b, double* c) {
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<std::ptrdiff_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = a[static_cast<std::ptrdiff_t>(p) * m + i];
      if (av == 0.0) continue;
      const double* brow = b + static_cast<std::ptrdiff_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

double dot(std::size_t n, const double* x, const double* y) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void gemm_nt(int m, int n, int k, const double* a, const double* b, double* c) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::ptrdiff_t>(i) * k;
    double* crow = c + static_cast<std::ptrdiff_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      crow[j] += dot(static_cast<std::size_t>(k), arow, b + static_cast<std::ptrdiff_t>(j) * k);
    }
  }
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

const KernelTable kTable{Isa::scalar, "scalar", gemm_nn, gemm_tn, gemm_nt, axpy, dot};

}  // namespace

const KernelTable& detail::scalar_impl() { return kTable; }

}  // namespace wasr::kernels
