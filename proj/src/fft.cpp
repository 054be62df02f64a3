#include "dfd/fft.hpp"

#include <cmath>

#include "dfd/error.hpp"

namespace dfd {

bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void fft_pow2(std::vector<std::complex<double>>& x, bool inverse) {
  const size_t n = x.size();
  if (!is_pow2(n)) fail(Errc::invalid_argument, "fft size must be a power of two");
  if (n == 1) return;

  // Bit-reversal permutation.
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }

  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
    const std::complex<double> wstep(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> u = x[i + j];
        const std::complex<double> v = x[i + j + len / 2] * w;
        x[i + j] = u + v;
        x[i + j + len / 2] = u - v;
        w *= wstep;
      }
    }
  }

  if (inverse) {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (auto& v : x) v *= inv_n;
  }
}

std::vector<std::complex<double>> rfft(const double* x, size_t len, size_t n_fft) {
  std::vector<std::complex<double>> buf(n_fft, {0.0, 0.0});
  const size_t copy = len < n_fft ? len : n_fft;
  for (size_t i = 0; i < copy; ++i) buf[i] = {x[i], 0.0};
  fft_pow2(buf, false);
  buf.resize(n_fft / 2 + 1);
  return buf;
}

}  // namespace dfd
