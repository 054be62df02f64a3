#pragma once

#include "dfd/audio.hpp"
#include "dfd/mat.hpp"

namespace dfd {

struct FrontendConfig {
  double win_ms = 25.0;    // Hamming window length
  double hop_ms = 10.0;    // frame step -> 100 frames/s
  int n_mels = 128;
  int n_fft = 512;
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_floor = 1e-10;  // power floor applied before the log

  void validate(int sample_rate) const;
  int win_samples(int sample_rate) const;
  int hop_samples(int sample_rate) const;
};

// Log-mel features, one column per frame.
struct MelSpectrogram {
  Mat values;  // n_mels x n_frames, natural-log power
  double frame_rate = 100.0;
  FrontendConfig config;

  size_t n_mels() const { return values.rows(); }
  size_t n_frames() const { return values.cols(); }
};

// HTK mel scale: m = 2595 * log10(1 + f/700).
double mel_scale(double hz);
double inverse_mel_scale(double mel);

// Triangular filters with centers equally spaced in mel between fmin and fmax.
// Each weight is the triangle's exact average over the FFT bin's frequency
// interval rather than a point sample; with 128 filters at n_fft=512 several
// low filters are narrower than one bin and point sampling would leave them
// empty. Shape: n_mels x (n_fft/2 + 1).
Mat mel_filterbank(const FrontendConfig& config, int sample_rate);

// STFT (Hamming window, reflect-padded so n_frames = round(samples/hop)),
// power spectrum, filterbank, floor, natural log. Requires the canonical
// 16 kHz rate.
MelSpectrogram compute_logmel(const AudioClip& clip, const FrontendConfig& config);

}  // namespace dfd
