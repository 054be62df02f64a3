#include "dfd/augment.hpp"

#include <algorithm>
#include <cmath>

#include "dfd/error.hpp"

namespace dfd {

void AugmentPolicy::validate() const {
  if (!(mixup_alpha > 0.0)) fail(Errc::bad_config, "mixup_alpha must be > 0");
  if (specaug_max_time < 0 || specaug_max_freq < 0)
    fail(Errc::bad_config, "mask maxima must be >= 0");
  // 0 disables the waveform techniques (used by tests and eval configs).
  if (!(lowres_fraction >= 0.0 && lowres_fraction <= 1.0))
    fail(Errc::bad_config, "lowres_fraction must be in [0, 1]");
  if (!(mixup_fixed_lambda >= 0.0 && mixup_fixed_lambda <= 1.0))
    fail(Errc::bad_config, "mixup_fixed_lambda must be in [0, 1]");
  if (!(bandpass_low >= 0.0 && bandpass_low < bandpass_high))
    fail(Errc::bad_config, "bandpass band is invalid");
}

std::pair<MelSpectrogram, SoftLabel> mixup(const MelSpectrogram& a, const MelSpectrogram& b,
                                           SoftLabel la, SoftLabel lb, double lambda) {
  if (!a.values.same_shape(b.values))
    fail(Errc::shape_mismatch, "mixup inputs must have equal shape (crop first)");
  if (!(lambda >= 0.0 && lambda <= 1.0))
    fail(Errc::invalid_argument, "mixup lambda must be in [0, 1]");

  MelSpectrogram out = a;
  const double* pa = a.values.data();
  const double* pb = b.values.data();
  double* po = out.values.data();
  const double mu = 1.0 - lambda;
  for (size_t i = 0; i < out.values.size(); ++i) po[i] = lambda * pa[i] + mu * pb[i];
  return {std::move(out), SoftLabel{lambda * la.p_fake + mu * lb.p_fake}};
}

double sample_mixup_lambda(const AugmentPolicy& policy, Rng& rng) {
  switch (policy.mixup_mode) {
    case MixupMode::off: return 1.0;
    case MixupMode::fixed: return policy.mixup_fixed_lambda;
    case MixupMode::beta: return rng.beta(policy.mixup_alpha, policy.mixup_alpha);
  }
  return 1.0;
}

MelSpectrogram spec_augment(const MelSpectrogram& s, const AugmentPolicy& policy, Rng& rng) {
  MelSpectrogram out = s;
  const size_t n_mels = s.n_mels();
  const size_t n_frames = s.n_frames();
  if (n_mels == 0 || n_frames == 0) return out;

  const size_t max_t = std::min<size_t>(static_cast<size_t>(policy.specaug_max_time), n_frames);
  const size_t max_f = std::min<size_t>(static_cast<size_t>(policy.specaug_max_freq), n_mels);
  const size_t t_width = rng.uniform_int(max_t + 1);
  const size_t t_start = t_width < n_frames ? rng.uniform_int(n_frames - t_width + 1) : 0;
  const size_t f_width = rng.uniform_int(max_f + 1);
  const size_t f_start = f_width < n_mels ? rng.uniform_int(n_mels - f_width + 1) : 0;

  const double mean = [&] {
    double acc = 0.0;
    for (size_t i = 0; i < s.values.size(); ++i) acc += s.values.data()[i];
    return acc / static_cast<double>(s.values.size());
  }();

  for (size_t i = 0; i < n_mels; ++i)
    for (size_t t = t_start; t < t_start + t_width; ++t) out.values(i, t) = mean;
  for (size_t i = f_start; i < f_start + f_width; ++i)
    for (size_t t = 0; t < n_frames; ++t) out.values(i, t) = mean;
  return out;
}

// ---- Butterworth biquads -----------------------------------------------------

namespace {

struct Biquad {
  double b0, b1, b2, a1, a2;

  void apply(std::vector<double>& x) const {
    double z1 = 0.0, z2 = 0.0;  // transposed direct form II
    for (auto& v : x) {
      const double in = v;
      const double out = b0 * in + z1;
      z1 = b1 * in - a1 * out + z2;
      z2 = b2 * in - a2 * out;
      v = out;
    }
  }
};

// RBJ cookbook sections; a 4th-order Butterworth edge is the cascade of the
// two Q values 1/(2 cos(pi/8)) and 1/(2 cos(3pi/8)).
Biquad lowpass_biquad(double fc, double fs, double q) {
  const double w0 = 2.0 * M_PI * fc / fs;
  const double cw = std::cos(w0), sw = std::sin(w0);
  const double alpha = sw / (2.0 * q);
  const double a0 = 1.0 + alpha;
  return {(1.0 - cw) / 2.0 / a0, (1.0 - cw) / a0, (1.0 - cw) / 2.0 / a0,
          -2.0 * cw / a0, (1.0 - alpha) / a0};
}

Biquad highpass_biquad(double fc, double fs, double q) {
  const double w0 = 2.0 * M_PI * fc / fs;
  const double cw = std::cos(w0), sw = std::sin(w0);
  const double alpha = sw / (2.0 * q);
  const double a0 = 1.0 + alpha;
  return {(1.0 + cw) / 2.0 / a0, -(1.0 + cw) / a0, (1.0 + cw) / 2.0 / a0,
          -2.0 * cw / a0, (1.0 - alpha) / a0};
}

constexpr double kButterQ1 = 0.54119610014619698;   // 1/(2 cos(pi/8))
constexpr double kButterQ2 = 1.30656296487637653;   // 1/(2 cos(3pi/8))

void clamp_unit(std::vector<double>& x) {
  for (auto& v : x) v = std::clamp(v, -1.0, 1.0);
}

}  // namespace

AudioClip bandpass(const AudioClip& clip, double low_hz, double high_hz) {
  const double nyquist = clip.sample_rate / 2.0;
  if (!(low_hz >= 0.0 && low_hz < high_hz && high_hz <= nyquist))
    fail(Errc::invalid_argument, "bandpass requires 0 <= low < high <= Nyquist");

  AudioClip out = clip;
  if (low_hz > 0.0) {
    highpass_biquad(low_hz, clip.sample_rate, kButterQ1).apply(out.samples);
    highpass_biquad(low_hz, clip.sample_rate, kButterQ2).apply(out.samples);
  }
  if (high_hz < nyquist) {
    lowpass_biquad(high_hz, clip.sample_rate, kButterQ1).apply(out.samples);
    lowpass_biquad(high_hz, clip.sample_rate, kButterQ2).apply(out.samples);
  }
  clamp_unit(out.samples);
  return out;
}

AudioClip codec_sim(const AudioClip& clip, Codec kind) {
  if (clip.sample_rate != kPipelineRate)
    fail(Errc::invalid_argument, "codec_sim expects the canonical 16 kHz rate");

  switch (kind) {
    case Codec::mu_law_8bit: {
      constexpr double mu = 255.0;
      AudioClip out = clip;
      for (auto& v : out.samples) {
        const double x = std::clamp(v, -1.0, 1.0);
        const double companded =
            std::copysign(std::log1p(mu * std::fabs(x)) / std::log1p(mu), x);
        const double code = std::round(companded * 127.0) / 127.0;  // 8-bit grid
        v = std::copysign((std::pow(1.0 + mu, std::fabs(code)) - 1.0) / mu, code);
      }
      return out;
    }
    case Codec::down_up_8k: {
      AudioClip out = resample(resample(clip, 8000), kPipelineRate);
      // The round trip may drift by one sample; pad/trim back.
      out.samples.resize(clip.samples.size(), 0.0);
      clamp_unit(out.samples);
      return out;
    }
    case Codec::bitcrush_6bit: {
      AudioClip out = clip;
      for (auto& v : out.samples)
        v = std::clamp(std::round(v * 32.0) / 32.0, -1.0, 1.0);
      return out;
    }
  }
  fail(Errc::invalid_argument, "unknown codec kind");
}

namespace {

const char* technique_label(int t) {
  switch (t) {
    case 0: return "wave/bandpass";
    case 1: return "wave/mu_law";
    case 2: return "wave/down_up";
    default: return "wave/bitcrush";
  }
}

}  // namespace

void apply_waveform_policy(std::vector<AudioClip>& batch, const AugmentPolicy& policy,
                           const Rng& rng) {
  if (!policy.waveform_stage) return;
  policy.validate();
  for (size_t i = 0; i < batch.size(); ++i) {
    for (int t = 0; t < 4; ++t) {
      Rng pick = rng.derive(technique_label(t), i);
      if (pick.uniform() >= policy.lowres_fraction) continue;
      switch (t) {
        case 0: batch[i] = bandpass(batch[i], policy.bandpass_low, policy.bandpass_high); break;
        case 1: batch[i] = codec_sim(batch[i], Codec::mu_law_8bit); break;
        case 2: batch[i] = codec_sim(batch[i], Codec::down_up_8k); break;
        default: batch[i] = codec_sim(batch[i], Codec::bitcrush_6bit); break;
      }
    }
  }
}

namespace {

MelSpectrogram crop_frames(const MelSpectrogram& s, size_t n_frames) {
  if (s.n_frames() == n_frames) return s;
  MelSpectrogram out = s;
  out.values = Mat(s.n_mels(), n_frames);
  for (size_t i = 0; i < s.n_mels(); ++i)
    for (size_t t = 0; t < n_frames; ++t) out.values(i, t) = s.values(i, t);
  return out;
}

}  // namespace

void apply_spectrogram_policy(std::vector<SpecBatchItem>& batch, const AugmentPolicy& policy,
                              const Rng& rng) {
  if (!policy.spectrogram_stage || batch.empty()) return;
  policy.validate();
  const std::vector<SpecBatchItem> originals = batch;
  for (size_t i = 0; i < batch.size(); ++i) {
    Rng stream = rng.derive("spec", i);
    if (policy.mixup_mode != MixupMode::off) {
      const size_t j = stream.uniform_int(originals.size());
      const double lambda = sample_mixup_lambda(policy, stream);
      const auto& partner = originals[j];
      const size_t frames = std::min(batch[i].mel.n_frames(), partner.mel.n_frames());
      auto self = crop_frames(originals[i].mel, frames);
      auto other = crop_frames(partner.mel, frames);
      auto [mixed, label] =
          mixup(self, other, originals[i].label, partner.label, lambda);
      batch[i].mel = std::move(mixed);
      batch[i].label = label;
    }
    batch[i].mel = spec_augment(batch[i].mel, policy, stream);
  }
}

}  // namespace dfd
