// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include "wasr/kernels.hpp"

#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

namespace wasr::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// Shared micro-kernel driver. `a_at(i, p)` reads A's logical element (i, p)
// so the same body serves the NN and TN layouts.
template <class AAt>
void gemm_rows(int m, int n, int k, AAt a_at, const double* b, double* c) {
  int i = 0;
  for (; i + 4 <= m; i += 4) {
    int j = 0;
    for (; j + 8 <= n; j += 8) {
      __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
      __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
      __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
      __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
      for (int p = 0; p < k; ++p) {
        const double* brow = b + static_cast<std::ptrdiff_t>(p) * n + j;
        const __m256d b0 = _mm256_loadu_pd(brow);
        const __m256d b1 = _mm256_loadu_pd(brow + 4);
        __m256d a = _mm256_set1_pd(a_at(i, p));
        c00 = _mm256_fmadd_pd(a, b0, c00);
        c01 = _mm256_fmadd_pd(a, b1, c01);
        a = _mm256_set1_pd(a_at(i + 1, p));
        c10 = _mm256_fmadd_pd(a, b0, c10);
        c11 = _mm256_fmadd_pd(a, b1, c11);
        a = _mm256_set1_pd(a_at(i + 2, p));
        c20 = _mm256_fmadd_pd(a, b0, c20);
        c21 = _mm256_fmadd_pd(a, b1, c21);
        a = _mm256_set1_pd(a_at(i + 3, p));
        c30 = _mm256_fmadd_pd(a, b0, c30);
        c31 = _mm256_fmadd_pd(a, b1, c31);
      }
      auto flush = [&](int row, __m256d lo, __m256d hi) {
        double* cp = c + static_cast<std::ptrdiff_t>(row) * n + j;
        _mm256_storeu_pd(cp, _mm256_add_pd(_mm256_loadu_pd(cp), lo));
        _mm256_storeu_pd(cp + 4, _mm256_add_pd(_mm256_loadu_pd(cp + 4), hi));
      };
      flush(i, c00, c01);
      flush(i + 1, c10, c11);
      flush(i + 2, c20, c21);
      flush(i + 3, c30, c31);
    }
    for (; j < n; ++j) {
      double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
      for (int p = 0; p < k; ++p) {
        const double bv = b[static_cast<std::ptrdiff_t>(p) * n + j];
        s0 += a_at(i, p) * bv;
        s1 += a_at(i + 1, p) * bv;
        s2 += a_at(i + 2, p) * bv;
        s3 += a_at(i + 3, p) * bv;
      }
      c[static_cast<std::ptrdiff_t>(i) * n + j] += s0;
      c[static_cast<std::ptrdiff_t>(i + 1) * n + j] += s1;
      c[static_cast<std::ptrdiff_t>(i + 2) * n + j] += s2;
      c[static_cast<std::ptrdiff_t>(i + 3) * n + j] += s3;
    }
  }
  for (; i < m; ++i) {
    double* crow = c + static_cast<std::ptrdiff_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = a_at(i, p);
      const __m256d a = _mm256_set1_pd(av);
      const double* brow = b + static_cast<std::ptrdiff_t>(p) * n;
      int j = 0;
      for (; j + 4 <= n; j += 4) {
        _mm256_storeu_pd(crow + j, _mm256_fmadd_pd(a, _mm256_loadu_pd(brow + j), _mm256_loadu_pd(crow + j)));
      }
      for (; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nn(int m, int n, int k, const double* a, const double* b, double* c) {
  gemm_rows(m, n, k, [a, k](int i, int p) { return a[static_cast<std::ptrdiff_t>(i) * k + p]; }, b, c);
}

void gemm_tn(int m, int n, int k, const double* a, const double* b, double* c) {
  gemm_rows(m, n, k, [a, m](int i, int p) { return a[static_cast<std::ptrdiff_t>(p) * m + i]; }, b, c);
}

double dot(std::size_t n, const double* x, const double* y) {
  __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), s1);
  }
  for (; i + 4 <= n; i += 4) s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
  double s = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) s += x[i] * y[i];
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
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

const KernelTable kTable{Isa::avx2, "avx2", gemm_nn, gemm_tn, gemm_nt, axpy, dot};

}  // namespace

const KernelTable* detail::avx2_impl() { return &kTable; }

}  // namespace wasr::kernels

#else

namespace wasr::kernels {
const KernelTable* detail::avx2_impl() { return nullptr; }
}  // namespace wasr::kernels

#endif
