#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>

#include "cough/dsp.hpp"
#include "cough/error.hpp"
#include "cough/rng.hpp"
#include "support.hpp"

using namespace cough;
using dsp::cdouble;

namespace {

// naive O(N^2) DFT, the oracle for the fft
std::vector<cdouble> naive_dft(const std::vector<double>& x, std::size_t n) {
  std::vector<cdouble> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    cdouble acc{0.0, 0.0};
    for (std::size_t i = 0; i < x.size() && i < n; ++i) {
      const double ang = -2.0 * M_PI * static_cast<double>(k) * static_cast<double>(i) /
                         static_cast<double>(n);
      acc += x[i] * cdouble{std::cos(ang), std::sin(ang)};
    }
    out[k] = acc;
  }
  return out;
}

}  // namespace

TEST_CASE("fft of an impulse is flat") {
  const auto out = dsp::fft(std::span<const double>(std::vector<double>{1, 0, 0, 0}), 4);
  for (const auto& v : out) {
    CHECK(v.real() == doctest::Approx(1.0));
    CHECK(std::abs(v.imag()) < 1e-15);
  }
}

TEST_CASE("fft of a bin-centered cosine concentrates in two bins") {
  std::vector<double> x(8);
  for (std::size_t n = 0; n < 8; ++n) x[n] = std::cos(2.0 * M_PI * 2.0 * n / 8.0);
  const auto out = dsp::fft(std::span<const double>(x), 8);
  CHECK(out[2].real() == doctest::Approx(4.0));
  CHECK(out[6].real() == doctest::Approx(4.0));
  for (std::size_t k = 0; k < 8; ++k) {
    if (k == 2 || k == 6) continue;
    CHECK(std::abs(out[k]) < 1e-12);
  }
}

TEST_CASE("fft matches the naive DFT and satisfies Parseval") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = std::size_t{1} << (2 + rng.below(5));  // 4..64
    std::vector<double> x(n);
    for (double& v : x) v = rng.normal();
    const auto fast = dsp::fft(std::span<const double>(x), n);
    const auto slow = naive_dft(x, n);
    for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(fast[k] - slow[k]) < 1e-10);

    double time_energy = 0.0, freq_energy = 0.0;
    for (double v : x) time_energy += v * v;
    for (const auto& v : fast) freq_energy += std::norm(v);
    freq_energy /= static_cast<double>(n);
    CHECK(freq_energy == doctest::Approx(time_energy).epsilon(1e-9));
  }
}

TEST_CASE("fft rejects non-power-of-two sizes") {
  std::vector<double> x(6, 1.0);
  CHECK_THROWS_WITH_AS(dsp::fft(std::span<const double>(x), 6), doctest::Contains("NotPowerOfTwo"),
                       Error);
}

TEST_CASE("stft frame counts and zero input") {
  AudioClip zeros;
  zeros.sample_rate_hz = 16000;
  zeros.samples.assign(4096, 0.0);
  const auto m = dsp::stft(zeros, 1024, 512);
  for (const auto& frame : m.frames)
    for (const auto& v : frame) CHECK(std::abs(v) == 0.0);

  AudioClip c2048;
  c2048.sample_rate_hz = 16000;
  c2048.samples.assign(2048, 0.1);
  CHECK(dsp::stft(c2048, 1024, 512).frames.size() == 3);

  AudioClip tiny;
  tiny.sample_rate_hz = 16000;
  tiny.samples.assign(100, 0.5);
  CHECK(dsp::stft(tiny, 1024, 512).frames.size() == 1);
}

TEST_CASE("stft satisfies per-frame Parseval against the windowed energy") {
  const auto clip = testsup::make_noise_clip(3, 16000, 5000);
  const auto m = dsp::stft(clip, 1024, 512);
  const auto w = dsp::hann_window(1024);
  for (std::size_t t = 0; t < m.frames.size(); ++t) {
    double time_energy = 0.0;
    for (std::size_t i = 0; i < 1024; ++i) {
      const std::size_t idx = t * 512 + i;
      const double s = idx < clip.samples.size() ? clip.samples[idx] * w[i] : 0.0;
      time_energy += s * s;
    }
    // rebuild full-spectrum energy from the half spectrum
    double freq_energy = std::norm(m.frames[t][0]) + std::norm(m.frames[t][512]);
    for (std::size_t k = 1; k < 512; ++k) freq_energy += 2.0 * std::norm(m.frames[t][k]);
    freq_energy /= 1024.0;
    CHECK(freq_energy == doctest::Approx(time_energy).epsilon(1e-9));
  }
}

TEST_CASE("istft reconstructs stft input in the interior") {
  const auto clip = testsup::make_noise_clip(5, 16000, 4000);
  const auto rec = dsp::istft(dsp::stft(clip, 1024, 512));
  for (std::size_t i = 1024; i + 1024 < clip.samples.size(); ++i)
    CHECK(std::abs(rec.samples[i] - clip.samples[i]) < 1e-6);
}

TEST_CASE("istft of zero frames is zero") {
  dsp::StftMatrix m;
  m.n_fft = 256;
  m.hop = 128;
  m.sample_rate_hz = 16000;
  m.frames.assign(4, std::vector<cdouble>(129, cdouble{0.0, 0.0}));
  const auto clip = dsp::istft(m);
  for (double x : clip.samples) CHECK(x == 0.0);
}

TEST_CASE("istft of one frame matches a hand overlap-add oracle") {
  Rng rng(17);
  dsp::StftMatrix m;
  m.n_fft = 256;
  m.hop = 128;
  m.sample_rate_hz = 16000;
  std::vector<cdouble> half(129);
  for (auto& v : half) v = cdouble{rng.normal(), rng.normal()};
  half[0] = cdouble{half[0].real(), 0.0};
  half[128] = cdouble{half[128].real(), 0.0};
  m.frames.push_back(half);

  const auto clip = dsp::istft(m);

  // oracle: conjugate-symmetric inverse DFT by direct summation, then
  // window-sum normalization with the same floor convention
  std::vector<cdouble> full(256);
  for (std::size_t k = 0; k < 129; ++k) full[k] = half[k];
  for (std::size_t k = 129; k < 256; ++k) full[k] = std::conj(half[256 - k]);
  const auto w = dsp::hann_window(256);
  for (std::size_t i = 0; i < 256; ++i) {
    cdouble acc{0.0, 0.0};
    for (std::size_t k = 0; k < 256; ++k) {
      const double ang = 2.0 * M_PI * static_cast<double>(k) * static_cast<double>(i) / 256.0;
      acc += full[k] * cdouble{std::cos(ang), std::sin(ang)};
    }
    const double sample = acc.real() / 256.0;
    const double reconstructed = w[i] > 1e-8 ? sample / w[i] : 0.0;
    CHECK(std::abs(clip.samples[i] - reconstructed) < 1e-9 * std::max(1.0, std::abs(reconstructed)));
  }
}

TEST_CASE("istft requires half-overlap hop") {
  dsp::StftMatrix m;
  m.n_fft = 256;
  m.hop = 64;
  m.frames.assign(2, std::vector<cdouble>(129, cdouble{0.0, 0.0}));
  CHECK_THROWS_WITH_AS(dsp::istft(m), doctest::Contains("UnsupportedHop"), Error);
}

TEST_CASE("mel scale value and filterbank shape") {
  CHECK(dsp::hz_to_mel(1000.0) == doctest::Approx(2595.0 * std::log10(1.0 + 1000.0 / 700.0)));
  CHECK(dsp::hz_to_mel(1000.0) == doctest::Approx(999.99).epsilon(1e-4));

  const auto single = dsp::mel_filterbank(1, 100.0, 4000.0, 512, 16000);
  double apex_hz = 0.0, apex_w = 0.0;
  const double bin_hz = 16000.0 / 512.0;
  for (std::size_t k = 0; k < single.weights[0].size(); ++k) {
    const double f = bin_hz * static_cast<double>(k);
    const double w = single.weights[0][k];
    if (f < 100.0 || f > 4000.0) CHECK(w == 0.0);
    if (w > apex_w) {
      apex_w = w;
      apex_hz = f;
    }
  }
  const double mid_mel = (dsp::hz_to_mel(100.0) + dsp::hz_to_mel(4000.0)) / 2.0;
  CHECK(apex_hz == doctest::Approx(dsp::mel_to_hz(mid_mel)).epsilon(0.05));

  const auto fb = dsp::mel_filterbank(26, 0.0, 8000.0, 512, 16000);
  for (std::size_t b = 1; b < fb.center_hz.size(); ++b) CHECK(fb.center_hz[b] > fb.center_hz[b - 1]);
  for (const auto& row : fb.weights) {
    double total = 0.0;
    for (double w : row) total += w;
    CHECK(total > 0.0);
  }
}

TEST_CASE("mel filterbank rejects bad ranges") {
  CHECK_THROWS_WITH_AS(dsp::mel_filterbank(26, 4000.0, 100.0, 512, 16000),
                       doctest::Contains("BadFrequencyRange"), Error);
  CHECK_THROWS_WITH_AS(dsp::mel_filterbank(26, 0.0, 9000.0, 512, 16000),
                       doctest::Contains("BadFrequencyRange"), Error);
}

TEST_CASE("dct_ii examples and orthonormality") {
  std::vector<double> constant(16, 0.7);
  const auto c = dsp::dct_ii(constant, 16);
  CHECK(c[0] == doctest::Approx(0.7 * std::sqrt(16.0)));
  for (std::size_t k = 1; k < c.size(); ++k) CHECK(std::abs(c[k]) < 1e-12);

  Rng rng(23);
  std::vector<double> x(8);
  for (double& v : x) v = rng.normal();
  const auto fast = dsp::dct_ii(x, 8);
  for (std::size_t k = 0; k < 8; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < 8; ++i)
      acc += x[i] * std::cos(M_PI * k * (2.0 * i + 1.0) / 16.0);
    acc *= k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
    CHECK(std::abs(fast[k] - acc) < 1e-12);
  }

  // inverse via the transpose of the orthonormal basis
  std::vector<double> back(8, 0.0);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t k = 0; k < 8; ++k) {
      const double basis = (k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0)) *
                           std::cos(M_PI * k * (2.0 * i + 1.0) / 16.0);
      back[i] += fast[k] * basis;
    }
  for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(back[i] - x[i]) < 1e-12);
}

TEST_CASE("lpc recovers an AR(2) process") {
  Rng rng(31);
  std::vector<double> x(4000, 0.0);
  for (std::size_t n = 2; n < x.size(); ++n)
    x[n] = 1.6 * x[n - 1] - 0.8 * x[n - 2] + rng.normal();
  const auto lp = dsp::lpc(std::span<const double>(x), 2);
  CHECK(lp.coeffs[0] == doctest::Approx(1.6).epsilon(0.05 / 1.6));
  CHECK(lp.coeffs[1] == doctest::Approx(-0.8).epsilon(0.05 / 0.8));
  CHECK(lp.gain >= 0.0);
}

TEST_CASE("lpc on white noise gives near-zero coefficients") {
  Rng rng(37);
  std::vector<double> x(8000);
  for (double& v : x) v = rng.normal();
  const auto lp = dsp::lpc(std::span<const double>(x), 2);
  CHECK(std::abs(lp.coeffs[0]) < 0.1);
  CHECK(std::abs(lp.coeffs[1]) < 0.1);
}

TEST_CASE("lpc gain is never negative and non-increasing in order") {
  Rng rng(41);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> frame(64);
    for (double& v : frame) v = rng.normal();
    const auto lp = dsp::lpc(std::span<const double>(frame), 1 + static_cast<int>(rng.below(12)));
    CHECK(lp.gain >= 0.0);
  }

  std::vector<double> frame(400);
  for (std::size_t i = 0; i < frame.size(); ++i)
    frame[i] = std::sin(0.3 * static_cast<double>(i)) + 0.3 * rng.normal();
  double prev = std::numeric_limits<double>::infinity();
  for (int order = 1; order <= 10; ++order) {
    const auto lp = dsp::lpc(std::span<const double>(frame), order);
    CHECK(lp.gain <= prev + 1e-9);
    prev = lp.gain;
  }
}

TEST_CASE("lpc rejects degenerate frames") {
  std::vector<double> zeros(100, 0.0);
  CHECK_THROWS_WITH_AS(dsp::lpc(std::span<const double>(zeros), 4),
                       doctest::Contains("DegenerateFrame"), Error);
}

TEST_CASE("autocorr_pitch finds a 200 Hz sawtooth") {
  const int sr = 16000;
  std::vector<double> x(1600);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double phase = std::fmod(200.0 * static_cast<double>(i) / sr, 1.0);
    x[i] = 2.0 * phase - 1.0;
  }
  const auto f0 = dsp::autocorr_pitch(std::span<const double>(x), sr);
  REQUIRE(f0.has_value());
  CHECK(*f0 == doctest::Approx(200.0).epsilon(3.0 / 200.0));
}

TEST_CASE("autocorr_pitch calls white noise unvoiced almost always") {
  int unvoiced = 0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    Rng rng(1000 + trial);
    std::vector<double> x(1600);
    for (double& v : x) v = rng.normal();
    if (!dsp::autocorr_pitch(std::span<const double>(x), 16000).has_value()) ++unvoiced;
  }
  CHECK(unvoiced >= 99);
}

TEST_CASE("autocorr_pitch edge cases") {
  std::vector<double> silence(1600, 0.0);
  CHECK(!dsp::autocorr_pitch(std::span<const double>(silence), 16000).has_value());

  std::vector<double> tiny(100, 0.5);
  CHECK_THROWS_WITH_AS(dsp::autocorr_pitch(std::span<const double>(tiny), 16000),
                       doctest::Contains("FrameTooShort"), Error);
}

TEST_CASE("vtlp warp kernel identity and tone shift") {
  Rng rng(47);
  std::vector<cdouble> half(257);
  for (auto& v : half) v = cdouble{rng.normal(), rng.normal()};
  const auto same = dsp::vtlp_warp_spectrum(half, 1.0, 16000.0);
  for (std::size_t k = 0; k < half.size(); ++k) CHECK(std::abs(same[k] - half[k]) < 1e-12);
}
