#include <cmath>
#include <vector>

#include "dfd/audio.hpp"
#include "dfd/error.hpp"
#include "dfd/frontend.hpp"
#include "doctest.h"

using namespace dfd;

namespace {

AudioClip tone(double freq, double seconds, double amp = 0.5) {
  AudioClip c;
  c.sample_rate = kPipelineRate;
  const size_t n = static_cast<size_t>(seconds * kPipelineRate);
  c.samples.resize(n);
  for (size_t i = 0; i < n; ++i)
    c.samples[i] = amp * std::sin(2.0 * M_PI * freq * static_cast<double>(i) / kPipelineRate);
  return c;
}

AudioClip silence(double seconds) {
  AudioClip c;
  c.sample_rate = kPipelineRate;
  c.samples.assign(static_cast<size_t>(seconds * kPipelineRate), 0.0);
  return c;
}

// Filter center frequencies recomputed from the definition, independent of
// mel_filterbank's construction.
std::vector<double> filter_centers(const FrontendConfig& cfg) {
  std::vector<double> centers(static_cast<size_t>(cfg.n_mels));
  const double lo = mel_scale(cfg.fmin), hi = mel_scale(cfg.fmax);
  for (int i = 0; i < cfg.n_mels; ++i)
    centers[static_cast<size_t>(i)] =
        inverse_mel_scale(lo + (hi - lo) * (i + 1) / static_cast<double>(cfg.n_mels + 1));
  return centers;
}

}  // namespace

TEST_CASE("mel scale identities") {
  CHECK(mel_scale(0.0) == 0.0);
  CHECK(mel_scale(700.0) == doctest::Approx(2595.0 * std::log10(2.0)).epsilon(1e-12));
  for (double m : {100.0, 1000.0, 2500.0})
    CHECK(mel_scale(inverse_mel_scale(m)) == doctest::Approx(m).epsilon(1e-9));
  for (double f : {50.0, 440.0, 7900.0})
    CHECK(inverse_mel_scale(mel_scale(f)) == doctest::Approx(f).epsilon(1e-9));
}

TEST_CASE("filterbank rows are positive and unimodal") {
  FrontendConfig cfg;
  const Mat fb = mel_filterbank(cfg, kPipelineRate);
  REQUIRE(fb.rows() == 128);
  REQUIRE(fb.cols() == 257);

  for (size_t i = 0; i < fb.rows(); ++i) {
    double sum = 0.0;
    size_t argmax = 0;
    for (size_t k = 0; k < fb.cols(); ++k) {
      CHECK(fb(i, k) >= 0.0);
      sum += fb(i, k);
      if (fb(i, k) > fb(i, argmax)) argmax = k;
    }
    CHECK(sum > 0.0);
    for (size_t k = 1; k <= argmax; ++k) CHECK(fb(i, k) >= fb(i, k - 1) - 1e-15);
    for (size_t k = argmax + 1; k < fb.cols(); ++k) CHECK(fb(i, k) <= fb(i, k - 1) + 1e-15);
  }
}

TEST_CASE("filterbank covers every bin strictly inside the band") {
  FrontendConfig cfg;
  const Mat fb = mel_filterbank(cfg, kPipelineRate);
  const double bin_hz = static_cast<double>(kPipelineRate) / cfg.n_fft;
  for (size_t k = 0; k < fb.cols(); ++k) {
    const double f = static_cast<double>(k) * bin_hz;
    if (f <= cfg.fmin || f >= cfg.fmax) continue;
    double col = 0.0;
    for (size_t i = 0; i < fb.rows(); ++i) col += fb(i, k);
    CHECK(col > 0.0);
  }
}

TEST_CASE("wide filters peak at the bin nearest their center") {
  FrontendConfig cfg;
  cfg.n_mels = 16;  // wide triangles, several bins each
  const Mat fb = mel_filterbank(cfg, kPipelineRate);
  const auto centers = filter_centers(cfg);
  const double bin_hz = static_cast<double>(kPipelineRate) / cfg.n_fft;
  for (size_t i = 0; i < fb.rows(); ++i) {
    const size_t near = static_cast<size_t>(std::lround(centers[i] / bin_hz));
    size_t argmax = 0;
    for (size_t k = 1; k < fb.cols(); ++k)
      if (fb(i, k) > fb(i, argmax)) argmax = k;
    CHECK(std::llabs(static_cast<long long>(argmax) - static_cast<long long>(near)) <= 1);
  }
}

TEST_CASE("one second gives a 128 x 100 spectrogram") {
  const auto mel = compute_logmel(tone(440.0, 1.0), FrontendConfig{});
  CHECK(mel.n_mels() == 128);
  CHECK(mel.n_frames() == 100);
}

TEST_CASE("frame count law holds across durations") {
  for (double t : {0.5, 1.0, 2.0, 3.17}) {
    const auto mel = compute_logmel(tone(330.0, t), FrontendConfig{});
    CHECK(mel.n_frames() == static_cast<size_t>(std::llround(100.0 * t)));
  }
}

TEST_CASE("digital silence hits the log floor everywhere") {
  FrontendConfig cfg;
  const auto mel = compute_logmel(silence(0.8), cfg);
  const double floor_log = std::log(cfg.log_floor);
  for (size_t i = 0; i < mel.values.size(); ++i)
    CHECK(mel.values.data()[i] == floor_log);
}

TEST_CASE("a pure tone lands in the filter nearest its frequency") {
  FrontendConfig cfg;
  const auto mel = compute_logmel(tone(440.0, 1.0), cfg);
  std::vector<double> mean(mel.n_mels(), 0.0);
  for (size_t i = 0; i < mel.n_mels(); ++i) {
    for (size_t t = 0; t < mel.n_frames(); ++t) mean[i] += mel.values(i, t);
    mean[i] /= static_cast<double>(mel.n_frames());
  }
  size_t argmax = 0;
  for (size_t i = 1; i < mean.size(); ++i)
    if (mean[i] > mean[argmax]) argmax = i;

  const auto centers = filter_centers(cfg);
  size_t nearest = 0;
  for (size_t i = 1; i < centers.size(); ++i)
    if (std::fabs(centers[i] - 440.0) < std::fabs(centers[nearest] - 440.0)) nearest = i;
  CHECK(std::llabs(static_cast<long long>(argmax) - static_cast<long long>(nearest)) <= 1);
}

TEST_CASE("doubling the waveform never decreases un-floored values") {
  FrontendConfig cfg;
  auto clip = tone(523.0, 0.7, 0.3);
  const auto a = compute_logmel(clip, cfg);
  for (auto& s : clip.samples) s *= 2.0;
  const auto b = compute_logmel(clip, cfg);
  REQUIRE(a.values.same_shape(b.values));
  for (size_t i = 0; i < a.values.size(); ++i)
    CHECK(b.values.data()[i] >= a.values.data()[i] - 1e-12);
}

TEST_CASE("identical input gives bitwise-identical features") {
  const auto clip = tone(777.0, 1.3, 0.4);
  const auto a = compute_logmel(clip, FrontendConfig{});
  const auto b = compute_logmel(clip, FrontendConfig{});
  CHECK(a.values == b.values);
}

TEST_CASE("frontend rejects empty and wrong-rate input") {
  AudioClip empty;
  empty.sample_rate = kPipelineRate;
  CHECK_THROWS_AS(compute_logmel(empty, FrontendConfig{}), Error);

  auto clip = tone(440.0, 0.5);
  clip.sample_rate = 8000;
  try {
    compute_logmel(clip, FrontendConfig{});
    FAIL("expected invalid_argument");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::invalid_argument);
  }

  FrontendConfig bad;
  bad.fmax = 9000.0;  // beyond Nyquist at 16 kHz
  CHECK_THROWS_AS(mel_filterbank(bad, kPipelineRate), Error);
}
