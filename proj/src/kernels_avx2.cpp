// AVX2+FMA kernel tier. This translation unit is compiled with -mavx2 -mfma
// (see src/CMakeLists.txt); nothing here runs unless CPUID reports support.

#include "dfd/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

namespace dfd::kernels {
namespace {

double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double a_dot(const double* a, const double* b, size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void a_axpy(double alpha, const double* x, double* y, size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void a_scale(double alpha, double* x, size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] *= alpha;
}

void a_vmul(const double* a, const double* b, double* y, size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) y[i] = a[i] * b[i];
}

void a_vadd(const double* a, const double* b, double* y, size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) y[i] = a[i] + b[i];
}

double a_vsum(const double* x, size_t n) {
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

double a_vmax(const double* x, size_t n) {
  size_t i = 0;
  double m = x[0];
  if (n >= 4) {
    __m256d vm = _mm256_loadu_pd(x);
    for (i = 4; i + 4 <= n; i += 4) vm = _mm256_max_pd(vm, _mm256_loadu_pd(x + i));
    __m128d lo = _mm256_castpd256_pd128(vm);
    __m128d hi = _mm256_extractf128_pd(vm, 1);
    lo = _mm_max_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    m = _mm_cvtsd_f64(_mm_max_sd(lo, swapped));
  }
  for (; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

// Inner update shared by nn and tn forms: crow += sum_q aq * brow_q over a
// block of up to 4 source rows.
inline void fma_rows4(double* crow, const double* b0, const double* b1, const double* b2,
                      const double* b3, double a0, double a1, double a2, double a3,
                      size_t n) {
  const __m256d va0 = _mm256_set1_pd(a0);
  const __m256d va1 = _mm256_set1_pd(a1);
  const __m256d va2 = _mm256_set1_pd(a2);
  const __m256d va3 = _mm256_set1_pd(a3);
  size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    __m256d vc = _mm256_loadu_pd(crow + j);
    vc = _mm256_fmadd_pd(va0, _mm256_loadu_pd(b0 + j), vc);
    vc = _mm256_fmadd_pd(va1, _mm256_loadu_pd(b1 + j), vc);
    vc = _mm256_fmadd_pd(va2, _mm256_loadu_pd(b2 + j), vc);
    vc = _mm256_fmadd_pd(va3, _mm256_loadu_pd(b3 + j), vc);
    _mm256_storeu_pd(crow + j, vc);
  }
  for (; j < n; ++j)
    crow[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
}

void a_matmul_nn(const double* a, size_t lda, const double* b, size_t ldb, double* c,
                 size_t ldc, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    double* crow = c + i * ldc;
    for (size_t j = 0; j < n; ++j) crow[j] = 0.0;
    const double* arow = a + i * lda;
    size_t p = 0;
    for (; p + 4 <= k; p += 4) {
      fma_rows4(crow, b + p * ldb, b + (p + 1) * ldb, b + (p + 2) * ldb,
                b + (p + 3) * ldb, arow[p], arow[p + 1], arow[p + 2], arow[p + 3], n);
    }
    for (; p < k; ++p) a_axpy(arow[p], b + p * ldb, crow, n);
  }
}

void a_matmul_nt(const double* a, size_t lda, const double* b, size_t ldb, double* c,
                 size_t ldc, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const double* arow = a + i * lda;
    double* crow = c + i * ldc;
    for (size_t j = 0; j < n; ++j) crow[j] = a_dot(arow, b + j * ldb, k);
  }
}

void a_matmul_tn_acc(const double* a, size_t lda, const double* b, size_t ldb, double* c,
                     size_t ldc, size_t m, size_t k, size_t n) {
  size_t p = 0;
  for (; p + 4 <= k; p += 4) {
    const double* a0 = a + p * lda;
    const double* a1 = a + (p + 1) * lda;
    const double* a2 = a + (p + 2) * lda;
    const double* a3 = a + (p + 3) * lda;
    const double* b0 = b + p * ldb;
    const double* b1 = b + (p + 1) * ldb;
    const double* b2 = b + (p + 2) * ldb;
    const double* b3 = b + (p + 3) * ldb;
    for (size_t i = 0; i < m; ++i)
      fma_rows4(c + i * ldc, b0, b1, b2, b3, a0[i], a1[i], a2[i], a3[i], n);
  }
  for (; p < k; ++p) {
    const double* arow = a + p * lda;
    const double* brow = b + p * ldb;
    for (size_t i = 0; i < m; ++i) a_axpy(arow[i], brow, c + i * ldc, n);
  }
}

const Ops avx2_table = {
    a_dot, a_axpy, a_scale, a_vmul, a_vadd, a_vsum, a_vmax,
    a_matmul_nn, a_matmul_nt, a_matmul_tn_acc,
};

}  // namespace

const Ops* avx2_ops() { return &avx2_table; }

}  // namespace dfd::kernels

#else  // non-x86 builds fall back to the scalar tier

namespace dfd::kernels {
const Ops* avx2_ops() { return nullptr; }
}  // namespace dfd::kernels

#endif
