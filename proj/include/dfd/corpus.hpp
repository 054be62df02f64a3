#pragma once

#include <map>
#include <string>
#include <vector>

#include "dfd/audio.hpp"
#include "dfd/manifest.hpp"

namespace dfd {

// Artificial "fake system" families. Each stamps a measurably different
// signature onto a bonafide-like base signal:
//   A_comb          periodic spectral notches (feedforward comb)
//   B_bandlimit     3.4 kHz low-pass plus 8-bit quantization
//   C_vocoder_buzz  fixed-phase harmonic resynthesis at the 10 ms frame rate
enum class FakeSystem { A_comb, B_bandlimit, C_vocoder_buzz };

const char* fake_system_name(FakeSystem s);
FakeSystem fake_system_from_name(const std::string& name);

// Voice-like synthetic signal: randomized F0 contour with vibrato, three
// formant resonances, a breath-noise floor, and a slow amplitude envelope.
// Deterministic per (seed, duration).
AudioClip gen_bonafide(uint64_t seed, double duration_s);

// Same base as gen_bonafide(seed, duration) with the family artifact applied.
AudioClip gen_fake(FakeSystem system, uint64_t seed, double duration_s);

struct CorpusSpec {
  struct SplitCounts {
    int bonafide = 0;
    std::map<std::string, int> fakes;  // system name -> count
  };
  std::map<std::string, SplitCounts> splits;  // split name -> counts
  double min_duration_s = 1.0;
  double max_duration_s = 4.0;
  std::string out_dir;
  uint64_t seed = 0;

  static CorpusSpec from_json_file(const std::string& path);
  void validate() const;
};

// Writes WAVs plus manifest.jsonl under spec.out_dir. Per-file seeds derive
// from (spec.seed, split, system, index), so regeneration is byte-identical
// and order-independent. Returns the manifest entries.
std::vector<ManifestEntry> make_dataset(const CorpusSpec& spec, int threads = 0);

}  // namespace dfd
