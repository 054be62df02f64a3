#include "dfd/frontend.hpp"

#include <algorithm>
#include <cmath>

#include "dfd/error.hpp"
#include "dfd/fft.hpp"
#include "dfd/kernels.hpp"

namespace dfd {

void FrontendConfig::validate(int sample_rate) const {
  if (sample_rate <= 0) fail(Errc::invalid_argument, "sample rate must be positive");
  if (!(win_ms > hop_ms && hop_ms > 0.0))
    fail(Errc::bad_config, "frontend requires win_ms > hop_ms > 0");
  if (n_mels < 1) fail(Errc::bad_config, "n_mels must be >= 1");
  if (!is_pow2(static_cast<size_t>(n_fft)))
    fail(Errc::bad_config, "n_fft must be a power of two");
  if (n_fft < win_samples(sample_rate))
    fail(Errc::bad_config, "n_fft smaller than the analysis window");
  if (!(fmin >= 0.0 && fmin < fmax))
    fail(Errc::bad_config, "need 0 <= fmin < fmax");
  if (fmax > sample_rate / 2.0 + 1e-9)
    fail(Errc::bad_config, "fmax beyond Nyquist");
  if (!(log_floor > 0.0)) fail(Errc::bad_config, "log_floor must be > 0");
}

int FrontendConfig::win_samples(int sample_rate) const {
  return static_cast<int>(std::lround(win_ms * sample_rate / 1000.0));
}

int FrontendConfig::hop_samples(int sample_rate) const {
  return static_cast<int>(std::lround(hop_ms * sample_rate / 1000.0));
}

double mel_scale(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double inverse_mel_scale(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

namespace {

// Height of triangle (lo, center, hi) at frequency f.
double tri_at(double f, double lo, double c, double hi) {
  if (f <= lo || f >= hi) return 0.0;
  return f <= c ? (f - lo) / (c - lo) : (hi - f) / (hi - c);
}

// Exact integral of the triangle over [a, b] (piecewise linear, so the
// trapezoid rule per linear segment is exact).
double tri_integral(double a, double b, double lo, double c, double hi) {
  a = std::max(a, lo);
  b = std::min(b, hi);
  if (b <= a) return 0.0;
  double total = 0.0;
  if (a < c) {
    const double r = std::min(b, c);
    total += 0.5 * (tri_at(a, lo, c, hi) + tri_at(r, lo, c, hi)) * (r - a);
  }
  if (b > c) {
    const double l = std::max(a, c);
    total += 0.5 * (tri_at(l, lo, c, hi) + tri_at(b, lo, c, hi)) * (b - l);
  }
  return total;
}

}  // namespace

Mat mel_filterbank(const FrontendConfig& config, int sample_rate) {
  config.validate(sample_rate);
  const int n_bins = config.n_fft / 2 + 1;
  const double bin_width = static_cast<double>(sample_rate) / config.n_fft;

  const double mel_lo = mel_scale(config.fmin);
  const double mel_hi = mel_scale(config.fmax);
  std::vector<double> edges(static_cast<size_t>(config.n_mels) + 2);
  for (size_t i = 0; i < edges.size(); ++i) {
    const double m = mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                  static_cast<double>(config.n_mels + 1);
    edges[i] = inverse_mel_scale(m);
  }

  Mat fb(static_cast<size_t>(config.n_mels), static_cast<size_t>(n_bins), 0.0);
  for (int i = 0; i < config.n_mels; ++i) {
    const double lo = edges[static_cast<size_t>(i)];
    const double c = edges[static_cast<size_t>(i) + 1];
    const double hi = edges[static_cast<size_t>(i) + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double fk = k * bin_width;
      const double w =
          tri_integral(fk - 0.5 * bin_width, fk + 0.5 * bin_width, lo, c, hi) / bin_width;
      if (w > 0.0) fb(static_cast<size_t>(i), static_cast<size_t>(k)) = w;
    }
  }
  return fb;
}

MelSpectrogram compute_logmel(const AudioClip& clip, const FrontendConfig& config) {
  if (clip.samples.empty()) fail(Errc::empty_input, "cannot compute features of an empty clip");
  if (clip.sample_rate != kPipelineRate)
    fail(Errc::invalid_argument, "features expect " + std::to_string(kPipelineRate) +
                                     " Hz input; resample first");
  config.validate(clip.sample_rate);

  const int win = config.win_samples(clip.sample_rate);
  const int hop = config.hop_samples(clip.sample_rate);
  const int64_t len = static_cast<int64_t>(clip.samples.size());
  const size_t n_frames =
      static_cast<size_t>(std::llround(static_cast<double>(len) / hop));
  const int n_bins = config.n_fft / 2 + 1;

  std::vector<double> window(static_cast<size_t>(win));
  for (int k = 0; k < win; ++k)
    window[static_cast<size_t>(k)] =
        0.54 - 0.46 * std::cos(2.0 * M_PI * k / (win - 1));

  // Reflect padding around index i (no edge duplication).
  auto sample_at = [&](int64_t i) -> double {
    if (len == 1) return clip.samples[0];
    const int64_t period = 2 * (len - 1);
    int64_t m = i % period;
    if (m < 0) m += period;
    if (m >= len) m = period - m;
    return clip.samples[static_cast<size_t>(m)];
  };

  Mat power(n_frames, static_cast<size_t>(n_bins));
  std::vector<double> frame(static_cast<size_t>(win));
  for (size_t t = 0; t < n_frames; ++t) {
    const int64_t start = static_cast<int64_t>(t) * hop - win / 2;
    for (int k = 0; k < win; ++k)
      frame[static_cast<size_t>(k)] =
          sample_at(start + k) * window[static_cast<size_t>(k)];
    const auto spec = rfft(frame.data(), frame.size(), static_cast<size_t>(config.n_fft));
    double* prow = power.row(t);
    for (int k = 0; k < n_bins; ++k) prow[k] = std::norm(spec[static_cast<size_t>(k)]);
  }

  MelSpectrogram out;
  out.config = config;
  out.frame_rate = 1000.0 / config.hop_ms;
  out.values = Mat(static_cast<size_t>(config.n_mels), n_frames);
  if (n_frames > 0) {
    const Mat fb = mel_filterbank(config, clip.sample_rate);
    kernels::matmul_nt(fb.data(), fb.cols(), power.data(), power.cols(),
                       out.values.data(), out.values.cols(), fb.rows(),
                       fb.cols(), n_frames);
  }
  const double floor_log = std::log(config.log_floor);
  for (size_t i = 0; i < out.values.size(); ++i) {
    double& v = out.values.data()[i];
    v = v > config.log_floor ? std::log(v) : floor_log;
  }
  return out;
}

}  // namespace dfd
