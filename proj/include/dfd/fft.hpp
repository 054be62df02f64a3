#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace dfd {

// In-place iterative radix-2 FFT. x.size() must be a power of two.
// inverse=true applies the 1/N scaling.
void fft_pow2(std::vector<std::complex<double>>& x, bool inverse);

// Forward transform of a real signal zero-padded (or truncated) to n_fft
// points; returns the n_fft/2 + 1 non-redundant bins. n_fft must be a power
// of two.
std::vector<std::complex<double>> rfft(const double* x, size_t len, size_t n_fft);

bool is_pow2(size_t n);

}  // namespace dfd
