#pragma once

// Brute-force reference computations for tests. Everything here is kept
// deliberately naive and independent of the library's own FFT/metric code so
// it can serve as an oracle for them.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

namespace oracle {

// O(n^2) DFT magnitude spectrum with a Hann window to limit leakage.
// Analyzes at most max_n samples.
inline std::vector<double> dft_magnitude(const std::vector<double>& x, size_t max_n = 4096) {
  const size_t n = std::min(x.size(), max_n);
  std::vector<double> windowed(n);
  for (size_t i = 0; i < n; ++i) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / (n > 1 ? n - 1 : 1));
    windowed[i] = x[i] * w;
  }
  const size_t bins = n / 2 + 1;
  std::vector<double> mag(bins, 0.0);
  for (size_t k = 0; k < bins; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (size_t i = 0; i < n; ++i) {
      const double ang = -2.0 * M_PI * static_cast<double>(k) * static_cast<double>(i) /
                         static_cast<double>(n);
      acc += windowed[i] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    mag[k] = std::abs(acc);
  }
  return mag;
}

// Frequency (Hz) of the strongest DFT bin.
inline double dominant_frequency(const std::vector<double>& x, int sample_rate,
                                 size_t max_n = 4096) {
  const auto mag = dft_magnitude(x, max_n);
  const size_t n = std::min(x.size(), max_n);
  size_t best = 0;
  for (size_t k = 1; k < mag.size(); ++k)
    if (mag[k] > mag[best]) best = k;
  return static_cast<double>(best) * sample_rate / static_cast<double>(n);
}

inline double bin_width_hz(const std::vector<double>& x, int sample_rate,
                           size_t max_n = 4096) {
  const size_t n = std::min(x.size(), max_n);
  return static_cast<double>(sample_rate) / static_cast<double>(n);
}

// Magnitude at one probe frequency (direct correlation, Hann window).
inline double tone_magnitude(const std::vector<double>& x, double freq, int sample_rate,
                             size_t max_n = 4096) {
  const size_t n = std::min(x.size(), max_n);
  std::complex<double> acc(0.0, 0.0);
  for (size_t i = 0; i < n; ++i) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / (n > 1 ? n - 1 : 1));
    const double ang = -2.0 * M_PI * freq * static_cast<double>(i) / sample_rate;
    acc += x[i] * w * std::complex<double>(std::cos(ang), std::sin(ang));
  }
  return std::abs(acc);
}

// Total spectral energy in [f_lo, f_hi].
inline double band_energy(const std::vector<double>& x, int sample_rate, double f_lo,
                          double f_hi, size_t max_n = 4096) {
  const auto mag = dft_magnitude(x, max_n);
  const size_t n = std::min(x.size(), max_n);
  double e = 0.0;
  for (size_t k = 0; k < mag.size(); ++k) {
    const double f = static_cast<double>(k) * sample_rate / static_cast<double>(n);
    if (f >= f_lo && f <= f_hi) e += mag[k] * mag[k];
  }
  return e;
}

inline double rms(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

inline double db_ratio(double a, double b) { return 10.0 * std::log10(a / b); }

}  // namespace oracle
