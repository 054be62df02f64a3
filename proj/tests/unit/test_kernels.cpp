#include <cmath>
#include <vector>

#include "dfd/kernels.hpp"
#include "dfd/rng.hpp"
#include "doctest.h"

using namespace dfd;
namespace k = dfd::kernels;

namespace {

std::vector<double> random_vec(Rng& rng, size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return v;
}

bool close(double a, double b, double tol) {
  const double d = std::fabs(a - b);
  return d <= tol * std::max({1.0, std::fabs(a), std::fabs(b)});
}

// Naive triple loop, the ground truth for all matmul variants.
std::vector<double> naive_nn(const std::vector<double>& a, const std::vector<double>& b,
                             size_t m, size_t kk, size_t n) {
  std::vector<double> c(m * n, 0.0);
  for (size_t i = 0; i < m; ++i)
    for (size_t p = 0; p < kk; ++p)
      for (size_t j = 0; j < n; ++j) c[i * n + j] += a[i * kk + p] * b[p * n + j];
  return c;
}

}  // namespace

TEST_CASE("dispatch reports a valid tier and can be forced") {
  const k::Isa original = k::active_isa();
  CHECK(k::force_isa(k::Isa::scalar));
  CHECK(k::active_isa() == k::Isa::scalar);
  if (k::cpu_has_avx2()) {
    CHECK(k::force_isa(k::Isa::avx2));
    CHECK(k::active_isa() == k::Isa::avx2);
  }
  k::force_isa(original);
}

TEST_CASE("scalar and avx2 tiers agree on vector ops") {
  const k::Ops* simd = k::cpu_has_avx2() ? k::avx2_ops() : nullptr;
  if (!simd) return;  // nothing to compare on this machine

  Rng rng(7001);
  for (size_t n : {1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 33u, 100u, 255u, 1024u}) {
    auto a = random_vec(rng, n);
    auto b = random_vec(rng, n);

    CHECK(close(k::scalar_ops.dot(a.data(), b.data(), n), simd->dot(a.data(), b.data(), n),
                1e-12));
    CHECK(close(k::scalar_ops.vsum(a.data(), n), simd->vsum(a.data(), n), 1e-12));
    CHECK(k::scalar_ops.vmax(a.data(), n) == simd->vmax(a.data(), n));

    auto y1 = b, y2 = b;
    k::scalar_ops.axpy(0.37, a.data(), y1.data(), n);
    simd->axpy(0.37, a.data(), y2.data(), n);
    for (size_t i = 0; i < n; ++i) CHECK(close(y1[i], y2[i], 1e-13));

    auto s1 = a, s2 = a;
    k::scalar_ops.scale(-1.7, s1.data(), n);
    simd->scale(-1.7, s2.data(), n);
    CHECK(s1 == s2);

    std::vector<double> m1(n), m2(n);
    k::scalar_ops.vmul(a.data(), b.data(), m1.data(), n);
    simd->vmul(a.data(), b.data(), m2.data(), n);
    CHECK(m1 == m2);

    k::scalar_ops.vadd(a.data(), b.data(), m1.data(), n);
    simd->vadd(a.data(), b.data(), m2.data(), n);
    CHECK(m1 == m2);
  }
}

TEST_CASE("matmul variants match the naive loop on both tiers") {
  Rng rng(7002);
  const k::Ops* simd = k::cpu_has_avx2() ? k::avx2_ops() : nullptr;

  for (int trial = 0; trial < 30; ++trial) {
    const size_t m = 1 + rng.uniform_int(24);
    const size_t kk = 1 + rng.uniform_int(40);
    const size_t n = 1 + rng.uniform_int(40);
    auto a = random_vec(rng, m * kk);
    auto b_nn = random_vec(rng, kk * n);

    const auto want = naive_nn(a, b_nn, m, kk, n);

    auto check_tier = [&](const k::Ops& ops) {
      std::vector<double> c(m * n, 0.0);
      ops.matmul_nn(a.data(), kk, b_nn.data(), n, c.data(), n, m, kk, n);
      for (size_t i = 0; i < m * n; ++i) CHECK(close(c[i], want[i], 1e-11));

      // nt form: feed B transposed, expect the same product.
      std::vector<double> bt(n * kk);
      for (size_t p = 0; p < kk; ++p)
        for (size_t j = 0; j < n; ++j) bt[j * kk + p] = b_nn[p * n + j];
      std::vector<double> c2(m * n, 0.0);
      ops.matmul_nt(a.data(), kk, bt.data(), kk, c2.data(), n, m, kk, n);
      for (size_t i = 0; i < m * n; ++i) CHECK(close(c2[i], want[i], 1e-11));

      // tn form accumulates A^T * B where A is stored K x M.
      std::vector<double> at(kk * m);
      for (size_t i = 0; i < m; ++i)
        for (size_t p = 0; p < kk; ++p) at[p * m + i] = a[i * kk + p];
      std::vector<double> c3(m * n, 0.5);
      ops.matmul_tn_acc(at.data(), m, b_nn.data(), n, c3.data(), n, m, kk, n);
      for (size_t i = 0; i < m * n; ++i) CHECK(close(c3[i], want[i] + 0.5, 1e-11));
    };

    check_tier(k::scalar_ops);
    if (simd) check_tier(*simd);
  }
}

TEST_CASE("matmul honors leading strides") {
  Rng rng(7003);
  const size_t m = 5, kk = 7, n = 6;
  const size_t lda = kk + 3, ldb = n + 2, ldc = n + 5;
  auto a = random_vec(rng, m * lda);
  auto b = random_vec(rng, kk * ldb);

  std::vector<double> a_tight(m * kk), b_tight(kk * n);
  for (size_t i = 0; i < m; ++i)
    for (size_t p = 0; p < kk; ++p) a_tight[i * kk + p] = a[i * lda + p];
  for (size_t p = 0; p < kk; ++p)
    for (size_t j = 0; j < n; ++j) b_tight[p * n + j] = b[p * ldb + j];
  const auto want = naive_nn(a_tight, b_tight, m, kk, n);

  std::vector<double> c(m * ldc, -9.0);
  k::matmul_nn(a.data(), lda, b.data(), ldb, c.data(), ldc, m, kk, n);
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = 0; j < n; ++j) CHECK(close(c[i * ldc + j], want[i * n + j], 1e-11));
    for (size_t j = n; j < ldc; ++j) CHECK(c[i * ldc + j] == -9.0);  // untouched padding
  }
}
