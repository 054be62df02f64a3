#pragma once

#include <string>
#include <vector>

namespace dfd {

// Every stage downstream of I/O assumes this rate. read_wav accepts any rate;
// callers resample before feeding the pipeline.
inline constexpr int kPipelineRate = 16000;

// Mono waveform, samples in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 0;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

// Reads a RIFF/WAVE file. PCM16 or float32, mono or stereo (stereo is
// downmixed by channel averaging). Integer samples are scaled by 1/32768.
AudioClip read_wav(const std::string& path);

// Writes mono PCM16. Round-trip error is bounded by one quantization step
// (1/32768 per sample).
void write_wav(const AudioClip& clip, const std::string& path);

// Windowed-sinc (Kaiser) resampler, polyphase for rational ratios.
// Same-rate input is returned unchanged.
AudioClip resample(const AudioClip& clip, int target_rate);

}  // namespace dfd
