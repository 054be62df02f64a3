#include "dfd/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "dfd/error.hpp"

namespace dfd {

namespace {

// ---- RIFF plumbing ---------------------------------------------------------

uint32_t read_u32le(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t read_u16le(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void put_u32le(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16le(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

struct FmtChunk {
  uint16_t format = 0;
  uint16_t channels = 0;
  uint32_t sample_rate = 0;
  uint16_t bits = 0;
};

}  // namespace

AudioClip read_wav(const std::string& path) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec))
    fail(Errc::file_missing, "no such file: " + path);

  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_error, "cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const size_t size = bytes.size();

  if (size < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
    fail(Errc::malformed_wav, "not a RIFF/WAVE file: " + path);

  FmtChunk fmt;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  size_t data_size = 0;

  size_t off = 12;
  while (off + 8 <= size) {
    const unsigned char* hdr = p + off;
    const uint32_t chunk_size = read_u32le(hdr + 4);
    const size_t body = off + 8;
    if (body + chunk_size > size)
      fail(Errc::malformed_wav, "chunk overruns file: " + path);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_size < 16) fail(Errc::malformed_wav, "fmt chunk too short: " + path);
      fmt.format = read_u16le(p + body);
      fmt.channels = read_u16le(p + body + 2);
      fmt.sample_rate = read_u32le(p + body + 4);
      fmt.bits = read_u16le(p + body + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = p + body;
      data_size = chunk_size;
    }
    off = body + chunk_size + (chunk_size & 1);  // chunks are word-aligned
  }

  if (!have_fmt) fail(Errc::malformed_wav, "missing fmt chunk: " + path);
  if (!data) fail(Errc::malformed_wav, "missing data chunk: " + path);
  if (fmt.channels < 1 || fmt.channels > 2)
    fail(Errc::unsupported_codec, "only mono/stereo supported: " + path);
  if (fmt.sample_rate == 0) fail(Errc::malformed_wav, "zero sample rate: " + path);

  const bool pcm16 = fmt.format == 1 && fmt.bits == 16;
  const bool f32 = fmt.format == 3 && fmt.bits == 32;
  if (!pcm16 && !f32)
    fail(Errc::unsupported_codec,
         "unsupported encoding (format tag " + std::to_string(fmt.format) + ", " +
             std::to_string(fmt.bits) + " bit): " + path);

  const size_t bytes_per_sample = fmt.bits / 8;
  const size_t frame_bytes = bytes_per_sample * fmt.channels;
  if (frame_bytes == 0 || data_size % frame_bytes != 0)
    fail(Errc::malformed_wav, "data size not a whole number of frames: " + path);
  const size_t frames = data_size / frame_bytes;

  AudioClip clip;
  clip.sample_rate = static_cast<int>(fmt.sample_rate);
  clip.samples.resize(frames);
  for (size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (unsigned ch = 0; ch < fmt.channels; ++ch) {
      const unsigned char* s = data + i * frame_bytes + ch * bytes_per_sample;
      if (pcm16) {
        int16_t v;
        std::memcpy(&v, s, 2);
        acc += static_cast<double>(v) / 32768.0;
      } else {
        float v;
        std::memcpy(&v, s, 4);
        acc += static_cast<double>(v);
      }
    }
    clip.samples[i] = acc / fmt.channels;
  }
  return clip;
}

void write_wav(const AudioClip& clip, const std::string& path) {
  if (clip.samples.empty()) fail(Errc::empty_input, "refusing to write empty clip");
  if (clip.sample_rate <= 0) fail(Errc::invalid_argument, "clip has no sample rate");

  const uint32_t n = static_cast<uint32_t>(clip.samples.size());
  const uint32_t data_size = n * 2;

  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  put_u32le(out, 36 + data_size);
  out += "WAVE";
  out += "fmt ";
  put_u32le(out, 16);
  put_u16le(out, 1);  // PCM
  put_u16le(out, 1);  // mono
  put_u32le(out, static_cast<uint32_t>(clip.sample_rate));
  put_u32le(out, static_cast<uint32_t>(clip.sample_rate) * 2);
  put_u16le(out, 2);
  put_u16le(out, 16);
  out += "data";
  put_u32le(out, data_size);
  for (uint32_t i = 0; i < n; ++i) {
    double scaled = std::round(clip.samples[i] * 32768.0);
    if (scaled > 32767.0) scaled = 32767.0;
    if (scaled < -32768.0) scaled = -32768.0;
    put_u16le(out, static_cast<uint16_t>(static_cast<int16_t>(scaled)));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(Errc::unwritable_path, "cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  f.flush();
  if (!f) fail(Errc::unwritable_path, "write failed: " + path);
}

// ---- Resampler --------------------------------------------------------------

namespace {

// Zeroth-order modified Bessel function, power series.
double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double half_sq = 0.25 * x * x;
  for (int k = 1; k < 64; ++k) {
    term *= half_sq / (static_cast<double>(k) * k);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

double sinc(double x) {
  if (std::fabs(x) < 1e-12) return 1.0;
  const double px = M_PI * x;
  return std::sin(px) / px;
}

constexpr int kHalfZeroCrossings = 32;  // filter length knob; see README
constexpr double kKaiserBeta = 9.0;

// Windowed-sinc tap at offset u (input-sample units). cutoff in (0, 1]
// relative to the input Nyquist.
double tap(double u, double cutoff, double half_support) {
  const double w = u / half_support;
  if (std::fabs(w) >= 1.0) return 0.0;
  const double kaiser =
      bessel_i0(kKaiserBeta * std::sqrt(1.0 - w * w)) / bessel_i0(kKaiserBeta);
  return cutoff * sinc(cutoff * u) * kaiser;
}

}  // namespace

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) fail(Errc::invalid_argument, "target rate must be positive");
  if (clip.sample_rate <= 0) fail(Errc::invalid_argument, "clip has no sample rate");
  if (target_rate == clip.sample_rate) return clip;

  const int64_t in_rate = clip.sample_rate;
  const int64_t out_rate = target_rate;
  const int64_t g = std::gcd(in_rate, out_rate);
  const int64_t up = out_rate / g;    // L
  const int64_t down = in_rate / g;   // M

  const double cutoff = out_rate < in_rate
                            ? static_cast<double>(out_rate) / static_cast<double>(in_rate)
                            : 1.0;
  const double half_support = kHalfZeroCrossings / cutoff;
  const int half_taps = static_cast<int>(std::ceil(half_support));
  const int n_taps = 2 * half_taps + 1;

  const int64_t in_len = static_cast<int64_t>(clip.samples.size());
  const int64_t out_len = static_cast<int64_t>(
      std::llround(static_cast<double>(in_len) * out_rate / in_rate));

  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.assign(static_cast<size_t>(out_len), 0.0);
  if (in_len == 0) return out;

  // Phase table: output sample n sits at input position (n*down)/up, so the
  // fractional offset cycles through q/up for q in [0, up). Each phase row is
  // normalized to unit DC gain.
  std::vector<std::vector<double>> phases(static_cast<size_t>(up));
  for (int64_t q = 0; q < up; ++q) {
    auto& row = phases[static_cast<size_t>(q)];
    row.resize(static_cast<size_t>(n_taps));
    const double frac = static_cast<double>(q) / static_cast<double>(up);
    double sum = 0.0;
    for (int j = 0; j < n_taps; ++j) {
      const double u = frac + static_cast<double>(half_taps - j);
      row[static_cast<size_t>(j)] = tap(u, cutoff, half_support);
      sum += row[static_cast<size_t>(j)];
    }
    for (auto& v : row)
      v /= sum;
  }

  const double* x = clip.samples.data();
  for (int64_t n = 0; n < out_len; ++n) {
    const int64_t num = n * down;
    const int64_t m0 = num / up;
    const int64_t q = num % up;
    const auto& row = phases[static_cast<size_t>(q)];
    double acc = 0.0;
    for (int j = 0; j < n_taps; ++j) {
      const int64_t m = m0 - half_taps + j;
      if (m < 0 || m >= in_len) continue;
      acc += row[static_cast<size_t>(j)] * x[m];
    }
    out.samples[static_cast<size_t>(n)] = acc;
  }
  return out;
}

}  // namespace dfd
