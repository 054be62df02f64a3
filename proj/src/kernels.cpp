#include "dfd/kernels.hpp"

#include <cstdlib>

namespace dfd::kernels {
namespace {

struct Dispatch {
  const Ops* ops;
  Isa isa;
};

Dispatch pick_initial() {
  bool forced_scalar = false;
  if (const char* env = std::getenv("DFD_FORCE_SCALAR"))
    forced_scalar = env[0] != '\0' && env[0] != '0';
  if (!forced_scalar && cpu_has_avx2()) {
    if (const Ops* t = avx2_ops()) return {t, Isa::avx2};
  }
  return {&scalar_ops, Isa::scalar};
}

Dispatch& dispatch() {
  static Dispatch d = pick_initial();
  return d;
}

}  // namespace

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const char* isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

Isa active_isa() { return dispatch().isa; }

bool force_isa(Isa isa) {
  if (isa == Isa::scalar) {
    dispatch() = {&scalar_ops, Isa::scalar};
    return true;
  }
  if (!cpu_has_avx2()) return false;
  const Ops* t = avx2_ops();
  if (!t) return false;
  dispatch() = {t, Isa::avx2};
  return true;
}

double dot(const double* a, const double* b, size_t n) { return dispatch().ops->dot(a, b, n); }

void axpy(double alpha, const double* x, double* y, size_t n) {
  dispatch().ops->axpy(alpha, x, y, n);
}

void scale(double alpha, double* x, size_t n) { dispatch().ops->scale(alpha, x, n); }

void vmul(const double* a, const double* b, double* y, size_t n) {
  dispatch().ops->vmul(a, b, y, n);
}

void vadd(const double* a, const double* b, double* y, size_t n) {
  dispatch().ops->vadd(a, b, y, n);
}

double vsum(const double* x, size_t n) { return dispatch().ops->vsum(x, n); }

double vmax(const double* x, size_t n) { return dispatch().ops->vmax(x, n); }

void matmul_nn(const double* a, size_t lda, const double* b, size_t ldb, double* c,
               size_t ldc, size_t m, size_t k, size_t n) {
  dispatch().ops->matmul_nn(a, lda, b, ldb, c, ldc, m, k, n);
}

void matmul_nt(const double* a, size_t lda, const double* b, size_t ldb, double* c,
               size_t ldc, size_t m, size_t k, size_t n) {
  dispatch().ops->matmul_nt(a, lda, b, ldb, c, ldc, m, k, n);
}

void matmul_tn_acc(const double* a, size_t lda, const double* b, size_t ldb, double* c,
                   size_t ldc, size_t m, size_t k, size_t n) {
  dispatch().ops->matmul_tn_acc(a, lda, b, ldb, c, ldc, m, k, n);
}

}  // namespace dfd::kernels
