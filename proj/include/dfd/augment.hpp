#pragma once

#include <utility>
#include <vector>

#include "dfd/audio.hpp"
#include "dfd/frontend.hpp"
#include "dfd/rng.hpp"

namespace dfd {

// Soft class target: 1 = fake, 0 = bonafide. Mixup produces intermediates.
struct SoftLabel {
  double p_fake = 0.0;
};

enum class MixupMode { beta, fixed, off };

struct AugmentPolicy {
  double mixup_alpha = 0.5;          // Beta(alpha, alpha) shape
  MixupMode mixup_mode = MixupMode::beta;
  double mixup_fixed_lambda = 1.0;   // used when mixup_mode == fixed
  int specaug_max_time = 192;        // max masked frames
  int specaug_max_freq = 48;         // max masked mel bins
  double lowres_fraction = 0.10;     // share of items per waveform technique
  double bandpass_low = 300.0;       // band for the bandpass technique
  double bandpass_high = 3400.0;
  bool waveform_stage = true;
  bool spectrogram_stage = true;

  void validate() const;
};

// Convex blend of two equally-shaped spectrograms and their labels.
std::pair<MelSpectrogram, SoftLabel> mixup(const MelSpectrogram& a, const MelSpectrogram& b,
                                           SoftLabel la, SoftLabel lb, double lambda);

// Mixing coefficient per policy: Beta(alpha, alpha), the fixed value, or 1
// (identity) when mixup is off.
double sample_mixup_lambda(const AugmentPolicy& policy, Rng& rng);

// One time mask and one frequency mask, widths uniform in {0..max}, filled
// with the spectrogram's pre-mask mean.
MelSpectrogram spec_augment(const MelSpectrogram& s, const AugmentPolicy& policy, Rng& rng);

// 4th-order Butterworth band edges (two biquads per edge), causal single pass.
AudioClip bandpass(const AudioClip& clip, double low_hz, double high_hz);

enum class Codec { mu_law_8bit, down_up_8k, bitcrush_6bit };

// Lossy-channel proxies: mu-law companding, an 8 kHz round trip, and coarse
// amplitude quantization.
AudioClip codec_sim(const AudioClip& clip, Codec kind);

// Waveform stage: each low-resolution technique independently hits a
// ~lowres_fraction subset, chosen per (technique, item) from derived RNG
// streams so the outcome is order-independent.
void apply_waveform_policy(std::vector<AudioClip>& batch, const AugmentPolicy& policy,
                           const Rng& rng);

struct SpecBatchItem {
  MelSpectrogram mel;
  SoftLabel label;
};

// Spectrogram stage: mixup against a random partner (longer member cropped to
// the shorter), then SpecAugment. In-place; partners are the pre-mixup inputs.
void apply_spectrogram_policy(std::vector<SpecBatchItem>& batch, const AugmentPolicy& policy,
                              const Rng& rng);

}  // namespace dfd
