#include <cstddef>

#include "dfd/kernels.hpp"

// Reference kernels. Plain loops, no unrolling tricks: these define the
// semantics the AVX2 tier is checked against.

namespace dfd::kernels {
namespace {

double s_dot(const double* a, const double* b, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void s_axpy(double alpha, const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void s_scale(double alpha, double* x, size_t n) {
  for (size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void s_vmul(const double* a, const double* b, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

void s_vadd(const double* a, const double* b, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

double s_vsum(const double* x, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double s_vmax(const double* x, size_t n) {
  double m = x[0];
  for (size_t i = 1; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

void s_matmul_nn(const double* a, size_t lda, const double* b, size_t ldb, double* c,
                 size_t ldc, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    double* crow = c + i * ldc;
    for (size_t j = 0; j < n; ++j) crow[j] = 0.0;
    const double* arow = a + i * lda;
    for (size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * ldb;
      for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void s_matmul_nt(const double* a, size_t lda, const double* b, size_t ldb, double* c,
                 size_t ldc, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const double* arow = a + i * lda;
    double* crow = c + i * ldc;
    for (size_t j = 0; j < n; ++j) crow[j] = s_dot(arow, b + j * ldb, k);
  }
}

void s_matmul_tn_acc(const double* a, size_t lda, const double* b, size_t ldb, double* c,
                     size_t ldc, size_t m, size_t k, size_t n) {
  for (size_t p = 0; p < k; ++p) {
    const double* arow = a + p * lda;
    const double* brow = b + p * ldb;
    for (size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      double* crow = c + i * ldc;
      for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

const Ops scalar_ops = {
    s_dot, s_axpy, s_scale, s_vmul, s_vadd, s_vsum, s_vmax,
    s_matmul_nn, s_matmul_nt, s_matmul_tn_acc,
};

}  // namespace dfd::kernels
