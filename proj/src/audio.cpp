#include "cough/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "cough/error.hpp"
#include "cough/util.hpp"

namespace cough {

namespace {

std::uint32_t rd_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t rd_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void wr_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

void wr_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

// Zeroth-order modified Bessel function, power series.
double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double x2 = x * x / 4.0;
  for (int k = 1; k < 64; ++k) {
    term *= x2 / (k * k);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = M_PI * x;
  return std::sin(px) / px;
}

}  // namespace

AudioClip read_wav(const std::filesystem::path& path, const std::string& id) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("IoError", "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t n = bytes.size();

  if (n < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
    throw Error("MalformedHeader", path.string() + " is not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  bool have_fmt = false;

  std::size_t off = 12;
  while (off + 8 <= n) {
    const unsigned char* chunk = p + off;
    const std::uint32_t chunk_size = rd_u32(chunk + 4);
    const std::size_t body = off + 8;
    if (body + chunk_size > n) throw Error("MalformedHeader", "truncated chunk in " + path.string());
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw Error("MalformedHeader", "fmt chunk too small");
      format = rd_u16(p + body);
      channels = rd_u16(p + body + 2);
      rate = rd_u32(p + body + 4);
      bits = rd_u16(p + body + 14);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = p + body;
      data_len = chunk_size;
    }
    off = body + chunk_size + (chunk_size & 1);  // chunks are word-aligned
  }

  if (!have_fmt || rate == 0) throw Error("MalformedHeader", "missing fmt chunk in " + path.string());
  if (channels != 1 && channels != 2)
    throw Error("UnsupportedEncoding", "only mono or stereo supported, got " + std::to_string(channels));
  const bool pcm16 = (format == 1 && bits == 16);
  const bool float32 = (format == 3 && bits == 32);
  if (!pcm16 && !float32)
    throw Error("UnsupportedEncoding",
                "format " + std::to_string(format) + "/" + std::to_string(bits) + " bits unsupported");
  const std::size_t bytes_per = (pcm16 ? 2u : 4u) * channels;
  const std::size_t frames = data ? data_len / bytes_per : 0;
  if (frames == 0) throw Error("EmptyAudio", path.string() + " has no samples");

  AudioClip clip;
  clip.id = id.empty() ? path.stem().string() : id;
  clip.sample_rate_hz = static_cast<int>(rate);
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) {
      const unsigned char* s = data + i * bytes_per + static_cast<std::size_t>(c) * (pcm16 ? 2 : 4);
      if (pcm16) {
        const auto v = static_cast<std::int16_t>(rd_u16(s));
        acc += static_cast<double>(v) / 32768.0;
      } else {
        float v;
        std::uint32_t u = rd_u32(s);
        std::memcpy(&v, &u, 4);
        acc += static_cast<double>(v);
      }
    }
    clip.samples[i] = acc / channels;
  }
  return clip;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  const std::uint32_t n = static_cast<std::uint32_t>(clip.samples.size());
  std::string out;
  out.reserve(44 + 2 * n);
  out += "RIFF";
  wr_u32(out, 36 + 2 * n);
  out += "WAVEfmt ";
  wr_u32(out, 16);
  wr_u16(out, 1);  // PCM
  wr_u16(out, 1);  // mono
  wr_u32(out, static_cast<std::uint32_t>(clip.sample_rate_hz));
  wr_u32(out, static_cast<std::uint32_t>(clip.sample_rate_hz) * 2);
  wr_u16(out, 2);
  wr_u16(out, 16);
  out += "data";
  wr_u32(out, 2 * n);
  for (double x : clip.samples) {
    double v = std::clamp(x, -1.0, 1.0) * 32768.0;
    long q = std::lround(v);
    q = std::clamp(q, -32768l, 32767l);
    wr_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  atomic_write_file(path, out);
}

AudioClip resample(const AudioClip& clip, int target_hz) {
  if (target_hz <= 0) throw Error("BadConfig", "target sample rate must be positive");
  if (target_hz == clip.sample_rate_hz) return clip;

  constexpr int kHalfTaps = 32;
  constexpr double kBeta = 8.0;
  const double ratio = static_cast<double>(target_hz) / clip.sample_rate_hz;
  const double cutoff = std::min(1.0, ratio);  // relative to source Nyquist
  const std::size_t out_len =
      static_cast<std::size_t>(std::llround(static_cast<double>(clip.samples.size()) * ratio));
  const double i0_beta = bessel_i0(kBeta);

  AudioClip out;
  out.id = clip.id;
  out.sample_rate_hz = target_hz;
  out.samples.resize(out_len);

  const auto& x = clip.samples;
  const auto len = static_cast<long>(x.size());
  for (std::size_t i = 0; i < out_len; ++i) {
    const double t = static_cast<double>(i) / ratio;  // position in source samples
    const long j0 = static_cast<long>(std::ceil(t)) - kHalfTaps;
    const long j1 = static_cast<long>(std::floor(t)) + kHalfTaps;
    double acc = 0.0, wsum = 0.0;
    for (long j = j0; j <= j1; ++j) {
      const double d = t - static_cast<double>(j);
      const double u = d / kHalfTaps;
      if (u <= -1.0 || u >= 1.0) continue;
      const double w = bessel_i0(kBeta * std::sqrt(1.0 - u * u)) / i0_beta;
      const double k = cutoff * sinc(cutoff * d) * w;
      wsum += k;
      if (j >= 0 && j < len) acc += k * x[static_cast<std::size_t>(j)];
    }
    out.samples[i] = wsum > 0.0 ? acc / wsum : 0.0;
  }
  return out;
}

AudioClip peak_normalize(const AudioClip& clip) {
  double peak = 0.0;
  for (double x : clip.samples) peak = std::max(peak, std::abs(x));
  if (peak == 0.0) return clip;
  AudioClip out = clip;
  for (double& x : out.samples) x /= peak;
  return out;
}

std::vector<SampleRange> detect_activity(const AudioClip& clip, const ActivityConfig& cfg) {
  const double sr = clip.sample_rate_hz;
  const auto frame_len = static_cast<std::size_t>(std::lround(cfg.frame_ms * sr / 1000.0));
  const auto hop = static_cast<std::size_t>(std::lround(cfg.hop_ms * sr / 1000.0));
  if (clip.samples.size() <= frame_len)
    throw Error("ClipTooShort", "clip shorter than one activity frame");

  const std::size_t n_frames = (clip.samples.size() - frame_len) / hop + 1;
  std::vector<double> energy(n_frames);
  double max_energy = 0.0;
  for (std::size_t t = 0; t < n_frames; ++t) {
    double e = 0.0;
    for (std::size_t i = t * hop; i < t * hop + frame_len; ++i) e += clip.samples[i] * clip.samples[i];
    energy[t] = e;
    max_energy = std::max(max_energy, e);
  }
  if (max_energy == 0.0) return {};

  const double thresh = cfg.rel_energy_threshold * max_energy;
  // frame-index runs of active frames
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  for (std::size_t t = 0; t < n_frames; ++t) {
    if (energy[t] < thresh) continue;
    if (!runs.empty() && runs.back().second == t)
      runs.back().second = t + 1;
    else
      runs.push_back({t, t + 1});
  }

  const auto merge_gap = static_cast<std::size_t>(std::lround(cfg.merge_gap_ms * sr / 1000.0));
  const auto pad = static_cast<std::size_t>(std::lround(cfg.pad_ms * sr / 1000.0));

  // merge runs separated by less than merge_gap, then pad and clamp
  std::vector<SampleRange> merged;
  for (const auto& [t0, t1] : runs) {
    const std::size_t s0 = t0 * hop;
    const std::size_t s1 = (t1 - 1) * hop + frame_len;
    if (!merged.empty() && s0 < merged.back().second + merge_gap)
      merged.back().second = std::max(merged.back().second, s1);
    else
      merged.push_back({s0, s1});
  }
  std::vector<SampleRange> out;
  for (auto [s0, s1] : merged) {
    s0 = s0 > pad ? s0 - pad : 0;
    s1 = std::min(clip.samples.size(), s1 + pad);
    if (!out.empty() && s0 <= out.back().second)
      out.back().second = std::max(out.back().second, s1);
    else
      out.push_back({s0, s1});
  }
  return out;
}

AudioClip trim_to_activity(const AudioClip& clip, const std::vector<SampleRange>& ranges) {
  AudioClip out;
  out.id = clip.id;
  out.sample_rate_hz = clip.sample_rate_hz;
  for (const auto& [s0, s1] : ranges)
    out.samples.insert(out.samples.end(), clip.samples.begin() + static_cast<long>(s0),
                       clip.samples.begin() + static_cast<long>(s1));
  return out;
}

}  // namespace cough
