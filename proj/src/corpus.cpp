#include "dfd/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dfd/error.hpp"
#include "dfd/fft.hpp"
#include "dfd/kernels.hpp"
#include "dfd/parallel.hpp"
#include "dfd/rng.hpp"
#include "json.hpp"

namespace dfd {

const char* fake_system_name(FakeSystem s) {
  switch (s) {
    case FakeSystem::A_comb: return "A_comb";
    case FakeSystem::B_bandlimit: return "B_bandlimit";
    case FakeSystem::C_vocoder_buzz: return "C_vocoder_buzz";
  }
  return "?";
}

FakeSystem fake_system_from_name(const std::string& name) {
  if (name == "A_comb") return FakeSystem::A_comb;
  if (name == "B_bandlimit") return FakeSystem::B_bandlimit;
  if (name == "C_vocoder_buzz") return FakeSystem::C_vocoder_buzz;
  fail(Errc::invalid_argument, "unknown fake system: " + name);
}

namespace {

constexpr int kRate = kPipelineRate;

struct Resonator {
  double a1, a2, b0;
  double y1 = 0.0, y2 = 0.0;

  Resonator(double freq, double bandwidth) {
    const double r = std::exp(-M_PI * bandwidth / kRate);
    a1 = 2.0 * r * std::cos(2.0 * M_PI * freq / kRate);
    a2 = -r * r;
    b0 = 1.0 - r;
  }

  double tick(double x) {
    const double y = b0 * x + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

void normalize_peak(std::vector<double>& x, double target) {
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::fabs(v));
  if (peak <= 0.0) return;
  const double g = target / peak;
  kernels::scale(g, x.data(), x.size());
}

}  // namespace

AudioClip gen_bonafide(uint64_t seed, double duration_s) {
  if (!(duration_s >= 0.5 && duration_s <= 10.0))
    fail(Errc::invalid_argument, "duration must be in [0.5, 10] s");

  Rng rng(seed);
  const double f0_base = rng.uniform(100.0, 260.0);
  const double vib_rate = rng.uniform(4.5, 6.5);
  const double vib_depth = rng.uniform(0.01, 0.03);
  const double syllable_rate = rng.uniform(2.0, 5.0);
  const double syllable_phase = rng.uniform(0.0, 2.0 * M_PI);
  const double noise_level = rng.uniform(0.08, 0.16);
  const double peak_target = rng.uniform(0.6, 0.9);

  Resonator f1(rng.uniform(350.0, 850.0), rng.uniform(60.0, 110.0));
  Resonator f2(rng.uniform(1000.0, 2200.0), rng.uniform(90.0, 160.0));
  Resonator f3(rng.uniform(2300.0, 3200.0), rng.uniform(130.0, 220.0));

  const size_t n = static_cast<size_t>(std::llround(duration_s * kRate));
  AudioClip clip;
  clip.sample_rate = kRate;
  clip.samples.resize(n);

  double phase = rng.uniform(0.0, 1.0);
  double drift = 0.0;
  double noise_lp = 0.0;
  const double noise_alpha = std::exp(-2.0 * M_PI * 6000.0 / kRate);
  const double edge = 0.03 * kRate;  // 30 ms fade at both ends

  for (size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kRate;
    drift = 0.9995 * drift + 0.0012 * rng.uniform(-1.0, 1.0);
    const double f0 = f0_base * (1.0 + drift) *
                      (1.0 + vib_depth * std::sin(2.0 * M_PI * vib_rate * t));
    phase += f0 / kRate;
    phase -= std::floor(phase);
    const double saw = 2.0 * phase - 1.0;

    const double voiced = f1.tick(saw) + 0.7 * f2.tick(saw) + 0.4 * f3.tick(saw);

    const double white = rng.uniform(-1.0, 1.0);
    noise_lp = noise_alpha * noise_lp + (1.0 - noise_alpha) * white;
    const double breath = 0.5 * white + 0.5 * noise_lp;

    double env = 0.25 + 0.75 * std::pow(
        0.5 + 0.5 * std::sin(2.0 * M_PI * syllable_rate * t + syllable_phase), 2.0);
    if (static_cast<double>(i) < edge) env *= static_cast<double>(i) / edge;
    if (static_cast<double>(n - 1 - i) < edge) env *= static_cast<double>(n - 1 - i) / edge;

    clip.samples[i] = env * (voiced + noise_level * breath);
  }
  normalize_peak(clip.samples, peak_target);
  return clip;
}

namespace {

AudioClip apply_comb(AudioClip clip, Rng& rng) {
  const double spacing = rng.uniform(300.0, 500.0);
  const int delay = std::max(2, static_cast<int>(std::lround(kRate / spacing)));
  const double g = 0.9;
  std::vector<double> out(clip.samples.size());
  for (size_t i = 0; i < clip.samples.size(); ++i) {
    const double delayed = i >= static_cast<size_t>(delay)
                               ? clip.samples[i - static_cast<size_t>(delay)]
                               : 0.0;
    out[i] = clip.samples[i] - g * delayed;
  }
  clip.samples = std::move(out);
  return clip;
}

// Order-6 Butterworth low-pass, three biquad sections.
AudioClip apply_bandlimit(AudioClip clip) {
  constexpr double cutoff = 3400.0;
  const double qs[3] = {0.51763809020504153,   // 1/(2 cos(pi/12))
                        0.70710678118654752,   // 1/(2 cos(3pi/12))
                        1.93185165257813657};  // 1/(2 cos(5pi/12))
  for (double q : qs) {
    const double w0 = 2.0 * M_PI * cutoff / kRate;
    const double cw = std::cos(w0), sw = std::sin(w0);
    const double alpha = sw / (2.0 * q);
    const double a0 = 1.0 + alpha;
    const double b0 = (1.0 - cw) / 2.0 / a0, b1 = (1.0 - cw) / a0, b2 = b0;
    const double a1 = -2.0 * cw / a0, a2 = (1.0 - alpha) / a0;
    double z1 = 0.0, z2 = 0.0;
    for (auto& v : clip.samples) {
      const double in = v;
      const double out = b0 * in + z1;
      z1 = b1 * in - a1 * out + z2;
      z2 = b2 * in - a2 * out;
      v = out;
    }
  }
  // 8-bit amplitude grid.
  for (auto& v : clip.samples) v = std::clamp(std::round(v * 128.0) / 128.0, -1.0, 1.0);
  return clip;
}

// Magnitude-only resynthesis on a fixed 100 Hz harmonic grid with zero phase,
// overlap-added at the 10 ms frame rate. The fixed phase turns every frame
// into a pulse aligned to the frame grid, the classic vocoder buzz. Per-clip
// tilt and wet/dry mix give the family internal variety, so one example does
// not cover it.
AudioClip apply_vocoder_buzz(const AudioClip& in, Rng& rng) {
  constexpr int win = 320;            // 20 ms
  constexpr int hop = 160;            // 10 ms, also the harmonic period
  constexpr int n_fft = 512;
  constexpr int n_harmonics = 79;     // 100 Hz .. 7.9 kHz

  const double buzz_mix = rng.uniform(0.55, 0.95);
  const double tilt = rng.uniform(0.6, 1.4);

  // One period of each harmonic: cos(2 pi k n / hop), k = 1..n_harmonics.
  static const std::vector<double> harmonic_table = [] {
    std::vector<double> t(static_cast<size_t>(n_harmonics) * hop);
    for (int k = 1; k <= n_harmonics; ++k)
      for (int n = 0; n < hop; ++n)
        t[static_cast<size_t>(k - 1) * hop + static_cast<size_t>(n)] =
            std::cos(2.0 * M_PI * k * n / static_cast<double>(hop));
    return t;
  }();

  std::vector<double> window(win);
  for (int i = 0; i < win; ++i)
    window[static_cast<size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / win);

  const size_t len = in.samples.size();
  AudioClip out;
  out.sample_rate = in.sample_rate;
  out.samples.assign(len, 0.0);

  std::vector<double> frame(win);
  std::vector<double> mags(n_harmonics);
  std::vector<double> period(hop);
  const double bin_hz = static_cast<double>(kRate) / n_fft;

  for (size_t start = 0; start + win <= len + hop; start += hop) {
    for (int i = 0; i < win; ++i) {
      const size_t idx = start + static_cast<size_t>(i);
      frame[static_cast<size_t>(i)] =
          (idx < len ? in.samples[idx] : 0.0) * window[static_cast<size_t>(i)];
    }
    const auto spec = rfft(frame.data(), frame.size(), n_fft);
    for (int k = 1; k <= n_harmonics; ++k) {
      const int bin = static_cast<int>(std::lround(k * 100.0 / bin_hz));
      mags[static_cast<size_t>(k - 1)] =
          std::abs(spec[static_cast<size_t>(bin)]) * std::pow(k, tilt - 1.0);
    }
    kernels::matmul_nn(mags.data(), mags.size(), harmonic_table.data(), hop, period.data(),
                       static_cast<size_t>(hop), 1, mags.size(), static_cast<size_t>(hop));
    for (int i = 0; i < win; ++i) {
      const size_t idx = start + static_cast<size_t>(i);
      if (idx >= len) break;
      out.samples[idx] += period[static_cast<size_t>(i % hop)] * window[static_cast<size_t>(i)];
    }
  }

  // Scale the buzz to the dry level before mixing so buzz_mix acts as a
  // meaningful wet/dry ratio.
  double dry_peak = 0.0, wet_peak = 0.0;
  for (double v : in.samples) dry_peak = std::max(dry_peak, std::fabs(v));
  for (double v : out.samples) wet_peak = std::max(wet_peak, std::fabs(v));
  const double gain = wet_peak > 0.0 ? dry_peak / wet_peak : 1.0;
  for (size_t i = 0; i < len; ++i)
    out.samples[i] = buzz_mix * gain * out.samples[i] + (1.0 - buzz_mix) * in.samples[i];
  return out;
}

}  // namespace

AudioClip gen_fake(FakeSystem system, uint64_t seed, double duration_s) {
  AudioClip base = gen_bonafide(seed, duration_s);
  double base_peak = 0.0;
  for (double v : base.samples) base_peak = std::max(base_peak, std::fabs(v));

  Rng rng = Rng(seed).derive(std::string("artifact/") + fake_system_name(system));
  AudioClip out;
  switch (system) {
    case FakeSystem::A_comb: out = apply_comb(std::move(base), rng); break;
    case FakeSystem::B_bandlimit: out = apply_bandlimit(std::move(base)); break;
    case FakeSystem::C_vocoder_buzz: out = apply_vocoder_buzz(base, rng); break;
  }
  normalize_peak(out.samples, base_peak);
  return out;
}

void CorpusSpec::validate() const {
  if (splits.empty()) fail(Errc::bad_config, "corpus spec has no splits");
  for (const auto& [name, counts] : splits) {
    if (name != "train" && name != "pool" && name != "eval")
      fail(Errc::bad_config, "unknown split '" + name + "' (expected train/pool/eval)");
    if (counts.bonafide < 0) fail(Errc::bad_config, "negative bonafide count");
    for (const auto& [sys, count] : counts.fakes) {
      fake_system_from_name(sys);
      if (count < 0) fail(Errc::bad_config, "negative count for system " + sys);
    }
  }
  if (!(min_duration_s >= 0.5 && max_duration_s <= 10.0 && min_duration_s <= max_duration_s))
    fail(Errc::bad_config, "durations must satisfy 0.5 <= min <= max <= 10");
  if (out_dir.empty()) fail(Errc::bad_config, "out_dir is required");
}

CorpusSpec CorpusSpec::from_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(Errc::file_missing, "cannot open corpus spec: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::bad_config, "corpus spec is not valid JSON: " + std::string(e.what()));
  }

  CorpusSpec spec;
  for (const auto& [key, value] : j.items()) {
    if (key == "splits") {
      for (const auto& [split, counts] : value.items()) {
        CorpusSpec::SplitCounts sc;
        for (const auto& [ckey, cval] : counts.items()) {
          if (ckey == "bonafide")
            sc.bonafide = cval.get<int>();
          else
            sc.fakes[ckey] = cval.get<int>();
        }
        spec.splits[split] = std::move(sc);
      }
    } else if (key == "min_duration_s") {
      spec.min_duration_s = value.get<double>();
    } else if (key == "max_duration_s") {
      spec.max_duration_s = value.get<double>();
    } else if (key == "out_dir") {
      spec.out_dir = value.get<std::string>();
    } else if (key == "seed") {
      spec.seed = value.get<uint64_t>();
    } else {
      fail(Errc::bad_config, "unknown key in corpus spec: " + key);
    }
  }
  return spec;
}

std::vector<ManifestEntry> make_dataset(const CorpusSpec& spec, int threads) {
  spec.validate();

  struct Task {
    std::string split;
    std::string system;  // "-" for bonafide
    int index = 0;
    std::string rel_path;
  };
  std::vector<Task> tasks;
  char name_buf[160];
  for (const auto& [split, counts] : spec.splits) {
    for (int i = 0; i < counts.bonafide; ++i) {
      std::snprintf(name_buf, sizeof(name_buf), "%s/bonafide_%05d.wav", split.c_str(), i);
      tasks.push_back({split, "-", i, name_buf});
    }
    for (const auto& [sys, count] : counts.fakes) {
      for (int i = 0; i < count; ++i) {
        std::snprintf(name_buf, sizeof(name_buf), "%s/fake_%s_%05d.wav", split.c_str(),
                      sys.c_str(), i);
        tasks.push_back({split, sys, i, name_buf});
      }
    }
  }

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(spec.out_dir, ec);
  if (ec) fail(Errc::unwritable_path, "cannot create " + spec.out_dir);
  for (const auto& [split, counts] : spec.splits) {
    fs::create_directories(fs::path(spec.out_dir) / split, ec);
    if (ec) fail(Errc::unwritable_path, "cannot create split dir under " + spec.out_dir);
  }

  const Rng root(spec.seed);
  parallel_for(tasks.size(), threads, [&](size_t ti) {
    const Task& task = tasks[ti];
    Rng file_rng =
        root.derive(task.split + "/" + task.system, static_cast<uint64_t>(task.index));
    const double duration =
        spec.min_duration_s +
        (spec.max_duration_s - spec.min_duration_s) * file_rng.derive("dur").uniform();
    const uint64_t clip_seed = file_rng.derive("clip").seed();
    const AudioClip clip = task.system == "-"
                               ? gen_bonafide(clip_seed, duration)
                               : gen_fake(fake_system_from_name(task.system), clip_seed,
                                          duration);
    write_wav(clip, (fs::path(spec.out_dir) / task.rel_path).string());
  });

  std::vector<ManifestEntry> entries;
  entries.reserve(tasks.size());
  for (const auto& task : tasks)
    entries.push_back({task.rel_path, task.system == "-" ? 0 : 1, task.system, task.split});
  write_manifest(entries, (fs::path(spec.out_dir) / "manifest.jsonl").string());
  return entries;
}

}  // namespace dfd
