#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>
#include <fstream>

#include "cough/audio.hpp"
#include "cough/error.hpp"
#include "cough/rng.hpp"
#include "support.hpp"

using namespace cough;
using testsup::TempDir;

namespace {

// minimal hand-rolled WAV writer for encodings the library writer does not produce
void write_raw_wav(const std::filesystem::path& path, int sr, int channels, int bits, int format,
                   const std::vector<std::int16_t>& pcm16, const std::vector<float>& f32 = {}) {
  std::ofstream f(path, std::ios::binary);
  auto u32 = [&](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
  auto u16 = [&](std::uint16_t v) { f.write(reinterpret_cast<const char*>(&v), 2); };
  const std::uint32_t data_len =
      bits == 16 ? pcm16.size() * 2 : f32.size() * 4;
  f.write("RIFF", 4);
  u32(36 + data_len);
  f.write("WAVEfmt ", 8);
  u32(16);
  u16(static_cast<std::uint16_t>(format));
  u16(static_cast<std::uint16_t>(channels));
  u32(static_cast<std::uint32_t>(sr));
  u32(static_cast<std::uint32_t>(sr * channels * bits / 8));
  u16(static_cast<std::uint16_t>(channels * bits / 8));
  u16(static_cast<std::uint16_t>(bits));
  f.write("data", 4);
  u32(data_len);
  if (bits == 16)
    f.write(reinterpret_cast<const char*>(pcm16.data()), static_cast<std::streamsize>(data_len));
  else
    f.write(reinterpret_cast<const char*>(f32.data()), static_cast<std::streamsize>(data_len));
}

}  // namespace

TEST_CASE("read_wav silence and basic fields") {
  TempDir tmp("wav");
  AudioClip clip;
  clip.id = "silence";
  clip.sample_rate_hz = 16000;
  clip.samples.assign(16000, 0.0);
  write_wav(tmp / "silence.wav", clip);
  const auto back = read_wav(tmp / "silence.wav");
  CHECK(back.sample_rate_hz == 16000);
  CHECK(back.samples.size() == 16000);
  for (double x : back.samples) CHECK(x == 0.0);
}

TEST_CASE("read_wav pcm16 scale endpoints") {
  TempDir tmp("wav");
  write_raw_wav(tmp / "e.wav", 8000, 1, 16, 1, {-32768, 32767, 0});
  const auto clip = read_wav(tmp / "e.wav");
  CHECK(clip.samples[0] == -1.0);
  CHECK(clip.samples[1] == 32767.0 / 32768.0);
  CHECK(clip.samples[2] == 0.0);
}

TEST_CASE("read_wav stereo averages to mono") {
  TempDir tmp("wav");
  std::vector<std::int16_t> inter;
  for (int i = 0; i < 100; ++i) {
    inter.push_back(16384);   // 0.5
    inter.push_back(-16384);  // -0.5
  }
  write_raw_wav(tmp / "st.wav", 16000, 2, 16, 1, inter);
  const auto clip = read_wav(tmp / "st.wav");
  CHECK(clip.samples.size() == 100);
  for (double x : clip.samples) CHECK(x == 0.0);
}

TEST_CASE("read_wav float32") {
  TempDir tmp("wav");
  write_raw_wav(tmp / "f.wav", 16000, 1, 32, 3, {}, {0.25f, -0.75f});
  const auto clip = read_wav(tmp / "f.wav");
  CHECK(clip.samples[0] == doctest::Approx(0.25));
  CHECK(clip.samples[1] == doctest::Approx(-0.75));
}

TEST_CASE("read_wav error kinds") {
  TempDir tmp("wav");
  {
    std::ofstream f(tmp / "bad.wav", std::ios::binary);
    f << "NOTRIFFDATA_";
  }
  CHECK_THROWS_WITH_AS(read_wav(tmp / "bad.wav"), doctest::Contains("MalformedHeader"), Error);

  write_raw_wav(tmp / "u8.wav", 8000, 1, 8, 1, {0, 0});  // 8-bit pcm unsupported
  CHECK_THROWS_WITH_AS(read_wav(tmp / "u8.wav"), doctest::Contains("UnsupportedEncoding"), Error);

  write_raw_wav(tmp / "empty.wav", 8000, 1, 16, 1, {});
  CHECK_THROWS_WITH_AS(read_wav(tmp / "empty.wav"), doctest::Contains("EmptyAudio"), Error);
}

TEST_CASE("pcm16 write/read round-trips bit-exactly") {
  TempDir tmp("wav");
  Rng rng(99);
  AudioClip clip;
  clip.sample_rate_hz = 16000;
  for (int i = 0; i < 5000; ++i)
    clip.samples.push_back(static_cast<double>(static_cast<int>(rng.below(65536)) - 32768) /
                           32768.0);
  write_wav(tmp / "a.wav", clip);
  const auto first = read_wav(tmp / "a.wav");
  write_wav(tmp / "b.wav", first);
  const auto second = read_wav(tmp / "b.wav");
  REQUIRE(first.samples.size() == second.samples.size());
  for (std::size_t i = 0; i < first.samples.size(); ++i)
    CHECK(first.samples[i] == second.samples[i]);
}

TEST_CASE("resample identity is bit-identical") {
  const auto clip = testsup::make_noise_clip(1, 16000, 4000);
  const auto out = resample(clip, 16000);
  REQUIRE(out.samples.size() == clip.samples.size());
  for (std::size_t i = 0; i < out.samples.size(); ++i) CHECK(out.samples[i] == clip.samples[i]);
}

TEST_CASE("resample 48k sinusoid to 16k matches analytic signal") {
  const double freq = 1000.0;
  const auto clip = testsup::make_tone(freq, 48000, 48000);
  const auto out = resample(clip, 16000);
  CHECK(out.samples.size() == 16000);
  double max_err = 0.0;
  for (std::size_t i = 32; i + 32 < out.samples.size(); ++i) {
    const double expect = 0.8 * std::sin(2.0 * M_PI * freq * static_cast<double>(i) / 16000.0);
    max_err = std::max(max_err, std::abs(out.samples[i] - expect));
  }
  CHECK(max_err < 1e-3);
}

TEST_CASE("resample passes DC through") {
  AudioClip clip;
  clip.sample_rate_hz = 48000;
  clip.samples.assign(4800, 0.3);
  const auto out = resample(clip, 16000);
  for (std::size_t i = 32; i + 32 < out.samples.size(); ++i)
    CHECK(out.samples[i] == doctest::Approx(0.3).epsilon(1e-3));
}

TEST_CASE("resample round trip preserves band-limited signals") {
  // sum of tones below 6 kHz
  AudioClip clip;
  clip.sample_rate_hz = 16000;
  clip.samples.assign(8000, 0.0);
  for (double f : {440.0, 1330.0, 2700.0, 5500.0})
    for (std::size_t i = 0; i < clip.samples.size(); ++i)
      clip.samples[i] += 0.2 * std::sin(2.0 * M_PI * f * static_cast<double>(i) / 16000.0);
  const auto up = resample(clip, 48000);
  const auto back = resample(up, 16000);
  REQUIRE(back.samples.size() == clip.samples.size());
  double max_err = 0.0;
  for (std::size_t i = 32; i + 32 < clip.samples.size(); ++i)
    max_err = std::max(max_err, std::abs(back.samples[i] - clip.samples[i]));
  CHECK(max_err < 1e-2);
}

TEST_CASE("peak_normalize examples and idempotence") {
  AudioClip clip;
  clip.sample_rate_hz = 16000;
  clip.samples = {0.25, -0.5};
  auto out = peak_normalize(clip);
  CHECK(out.samples[0] == 0.5);
  CHECK(out.samples[1] == -1.0);

  clip.samples = {0.0, 0.0, 0.0};
  out = peak_normalize(clip);
  for (double x : out.samples) CHECK(x == 0.0);

  clip.samples = {1.0, 0.2};
  out = peak_normalize(clip);
  CHECK(out.samples[0] == 1.0);
  CHECK(out.samples[1] == 0.2);

  const auto noisy = testsup::make_noise_clip(5, 16000, 3000);
  const auto once = peak_normalize(noisy);
  const auto twice = peak_normalize(once);
  for (std::size_t i = 0; i < once.samples.size(); ++i) CHECK(once.samples[i] == twice.samples[i]);
}

TEST_CASE("detect_activity trivial cases") {
  AudioClip clip;
  clip.sample_rate_hz = 16000;
  clip.samples.assign(16000, 0.0);
  CHECK(detect_activity(clip).empty());

  const auto noisy = testsup::make_noise_clip(2, 16000, 16000, 0.9);
  const auto ranges = detect_activity(noisy);
  REQUIRE(ranges.size() == 1);
  CHECK(ranges[0].first == 0);
  CHECK(ranges[0].second == noisy.samples.size());
}

TEST_CASE("detect_activity finds a burst with an independent frame-energy oracle") {
  const int sr = 16000;
  AudioClip clip;
  clip.sample_rate_hz = sr;
  clip.samples.assign(3 * sr, 0.0);
  Rng rng(7);
  const std::size_t b0 = sr, b1 = sr + sr / 2;  // burst at [1.0 s, 1.5 s)
  for (std::size_t i = b0; i < b1; ++i) clip.samples[i] = 0.7 * rng.normal();

  const auto ranges = detect_activity(clip);
  REQUIRE(ranges.size() == 1);
  const double slack_samples = (25.0 + 100.0) / 1000.0 * sr;  // frame + pad
  CHECK(ranges[0].first <= b0);
  CHECK(ranges[0].second >= b1);
  CHECK(static_cast<double>(b0 - ranges[0].first) <= slack_samples);
  CHECK(static_cast<double>(ranges[0].second - b1) <= slack_samples);

  // oracle: brute-force frame energies with the same defaults
  const std::size_t frame = 400, hop = 160;
  double max_e = 0.0;
  std::vector<double> energies;
  for (std::size_t s = 0; s + frame <= clip.samples.size(); s += hop) {
    double e = 0.0;
    for (std::size_t i = s; i < s + frame; ++i) e += clip.samples[i] * clip.samples[i];
    energies.push_back(e);
    max_e = std::max(max_e, e);
  }
  for (std::size_t t = 0; t < energies.size(); ++t) {
    const bool active = energies[t] >= 0.01 * max_e;
    const std::size_t mid = t * hop + frame / 2;
    if (active) {
      CHECK(mid >= ranges[0].first);
      CHECK(mid < ranges[0].second + frame);
    }
  }
}

TEST_CASE("detect_activity output is disjoint, sorted, in bounds") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    AudioClip clip;
    clip.sample_rate_hz = 16000;
    clip.samples.assign(8000 + rng.below(16000), 0.0);
    // sprinkle a few bursts
    const int n_bursts = 1 + static_cast<int>(rng.below(4));
    for (int b = 0; b < n_bursts; ++b) {
      const std::size_t start = rng.below(clip.samples.size() - 800);
      for (std::size_t i = start; i < start + 800; ++i) clip.samples[i] = rng.normal() * 0.5;
    }
    const auto ranges = detect_activity(clip);
    std::size_t prev_end = 0;
    bool first = true;
    for (const auto& [s, e] : ranges) {
      CHECK(s < e);
      CHECK(e <= clip.samples.size());
      if (!first) CHECK(s > prev_end);
      prev_end = e;
      first = false;
    }
  }
}

TEST_CASE("detect_activity rejects too-short clips") {
  AudioClip clip;
  clip.sample_rate_hz = 16000;
  clip.samples.assign(100, 0.5);
  CHECK_THROWS_WITH_AS(detect_activity(clip), doctest::Contains("ClipTooShort"), Error);
}

TEST_CASE("trim_to_activity concatenates ranges") {
  AudioClip clip;
  clip.sample_rate_hz = 16000;
  for (int i = 0; i < 100; ++i) clip.samples.push_back(i);
  const auto out = trim_to_activity(clip, {{10, 13}, {50, 52}});
  REQUIRE(out.samples.size() == 5);
  CHECK(out.samples[0] == 10.0);
  CHECK(out.samples[2] == 12.0);
  CHECK(out.samples[3] == 50.0);
}
