#pragma once

#include <cstddef>

namespace dfd::kernels {

// Data-parallel inner loops behind the DSP and model code. Each operation has
// a scalar reference implementation and an AVX2 variant; the active tier is
// picked once at startup from CPUID and can be forced for testing (or with
// DFD_FORCE_SCALAR=1 in the environment). The two tiers are equivalence-tested
// against each other in tests/unit/test_kernels.cpp.
//
// Matrices are row-major with an explicit leading stride (elements between
// consecutive rows), so callers can hand in column slices of larger matrices
// (e.g. one attention head).

enum class Isa { scalar, avx2 };

const char* isa_name(Isa isa);
Isa active_isa();
bool cpu_has_avx2();

// Forces the dispatch tier. Returns false (and leaves the tier unchanged) if
// the requested tier is not available on this CPU.
bool force_isa(Isa isa);

// y . x
double dot(const double* a, const double* b, size_t n);
// y += alpha * x
void axpy(double alpha, const double* x, double* y, size_t n);
// x *= alpha
void scale(double alpha, double* x, size_t n);
// y = a .* b
void vmul(const double* a, const double* b, double* y, size_t n);
// y = a + b
void vadd(const double* a, const double* b, double* y, size_t n);
double vsum(const double* x, size_t n);
double vmax(const double* x, size_t n);

// C = A (MxK) * B (KxN)
void matmul_nn(const double* a, size_t lda, const double* b, size_t ldb, double* c,
               size_t ldc, size_t m, size_t k, size_t n);
// C = A (MxK) * B(NxK)^T
void matmul_nt(const double* a, size_t lda, const double* b, size_t ldb, double* c,
               size_t ldc, size_t m, size_t k, size_t n);
// C += A (KxM)^T * B (KxN)   (gradient accumulation form)
void matmul_tn_acc(const double* a, size_t lda, const double* b, size_t ldb, double* c,
                   size_t ldc, size_t m, size_t k, size_t n);

// Backend function table; `scalar_ops` is the reference the SIMD tier is
// tested against. avx2_ops() is null when the binary lacks AVX2 support.
struct Ops {
  double (*dot)(const double*, const double*, size_t);
  void (*axpy)(double, const double*, double*, size_t);
  void (*scale)(double, double*, size_t);
  void (*vmul)(const double*, const double*, double*, size_t);
  void (*vadd)(const double*, const double*, double*, size_t);
  double (*vsum)(const double*, size_t);
  double (*vmax)(const double*, size_t);
  void (*matmul_nn)(const double*, size_t, const double*, size_t, double*, size_t,
                    size_t, size_t, size_t);
  void (*matmul_nt)(const double*, size_t, const double*, size_t, double*, size_t,
                    size_t, size_t, size_t);
  void (*matmul_tn_acc)(const double*, size_t, const double*, size_t, double*, size_t,
                        size_t, size_t, size_t);
};

extern const Ops scalar_ops;
const Ops* avx2_ops();  // null if not compiled in

}  // namespace dfd::kernels
