#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cough/dsp.hpp"
#include "cough/error.hpp"
#include "cough/features.hpp"
#include "cough/rng.hpp"
#include "support.hpp"

using namespace cough;
using feat::FeatureMatrix;

namespace {

// independent +-2 regression oracle with edge replication
double delta_oracle(const FeatureMatrix& m, std::size_t t, std::size_t c) {
  auto row = [&](std::ptrdiff_t i) {
    i = std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(m.rows) - 1);
    return m.at(static_cast<std::size_t>(i), c);
  };
  const auto ti = static_cast<std::ptrdiff_t>(t);
  return (1.0 * (row(ti + 1) - row(ti - 1)) + 2.0 * (row(ti + 2) - row(ti - 2))) / 10.0;
}

}  // namespace

TEST_CASE("feature widths are 39 / 24 / 63 / 189 with shared framing") {
  const auto clip = testsup::make_noise_clip(1, 16000, 8000);
  const auto m39 = feat::mfcc39(clip);
  const auto m24 = feat::handcrafted24(clip);
  const auto m189 = feat::assemble_features(clip);
  CHECK(m39.cols == 39);
  CHECK(m24.cols == 24);
  CHECK(m189.cols == 189);
  CHECK(m39.rows == m24.rows);
  CHECK(m39.rows == m189.rows);
  CHECK(m39.rows >= 1);
}

TEST_CASE("constant clip gives identical frames and exactly zero deltas") {
  AudioClip clip;
  clip.sample_rate_hz = 16000;
  clip.samples.assign(4000, 0.3);
  const auto m = feat::assemble_features(clip);
  REQUIRE(m.rows >= 5);
  for (std::size_t t = 0; t < m.rows; ++t)
    for (std::size_t c = 63; c < 189; ++c) CHECK(m.at(t, c) == 0.0);
  const auto m39 = feat::mfcc39(clip);
  for (std::size_t t = 0; t < m39.rows; ++t)
    for (std::size_t c = 13; c < 39; ++c) CHECK(m39.at(t, c) == 0.0);
}

TEST_CASE("delta block matches the regression-formula oracle") {
  const auto clip = testsup::make_noise_clip(3, 16000, 6000);
  const auto m = feat::assemble_features(clip);
  // rebuild the base-63 block and apply the oracle
  FeatureMatrix base;
  base.rows = m.rows;
  base.cols = 63;
  base.data.resize(base.rows * 63);
  for (std::size_t t = 0; t < m.rows; ++t)
    for (std::size_t c = 0; c < 63; ++c) base.at(t, c) = m.at(t, c);
  for (std::size_t t = 0; t < m.rows; ++t)
    for (std::size_t c = 0; c < 63; ++c)
      CHECK(m.at(t, 63 + c) == doctest::Approx(delta_oracle(base, t, c)).epsilon(1e-12));
}

TEST_CASE("white noise deltas are statistically small next to statics") {
  const auto clip = testsup::make_noise_clip(5, 16000, 32000, 0.6);
  const auto m = feat::mfcc39(clip);
  for (std::size_t c = 0; c < 13; ++c) {
    double static_mean = 0.0;
    for (std::size_t t = 0; t < m.rows; ++t) static_mean += m.at(t, c);
    static_mean /= static_cast<double>(m.rows);
    double static_sd = 0.0, delta_absmean = 0.0, ddelta_absmean = 0.0;
    for (std::size_t t = 0; t < m.rows; ++t) {
      static_sd += (m.at(t, c) - static_mean) * (m.at(t, c) - static_mean);
      delta_absmean += std::abs(m.at(t, 13 + c));
      ddelta_absmean += std::abs(m.at(t, 26 + c));
    }
    static_sd = std::sqrt(static_sd / static_cast<double>(m.rows));
    delta_absmean /= static_cast<double>(m.rows);
    ddelta_absmean /= static_cast<double>(m.rows);
    // regression smoothing shrinks deltas well below the static spread
    CHECK(delta_absmean < static_sd);
    CHECK(ddelta_absmean < static_sd);
  }
}

TEST_CASE("all-zero clip produces the degenerate-frame conventions") {
  AudioClip clip;
  clip.sample_rate_hz = 16000;
  clip.samples.assign(2000, 0.0);
  const auto m = feat::handcrafted24(clip);
  for (std::size_t t = 0; t < m.rows; ++t) {
    CHECK(m.at(t, 0) == 0.0);   // energy
    CHECK(m.at(t, 1) == 0.0);   // f0
    for (int i = 2; i <= 5; ++i) CHECK(m.at(t, static_cast<std::size_t>(i)) == 0.0);  // formants
    CHECK(m.at(t, 6) == 0.0);   // alpha ratio (equal floors)
    CHECK(m.at(t, 7) == 0.0);   // rap
    CHECK(m.at(t, 8) == 0.0);   // flatness
    CHECK(m.at(t, 9) == 0.0);   // kurtosis
    for (int i = 10; i <= 16; ++i) CHECK(m.at(t, static_cast<std::size_t>(i)) == 0.0);  // contrast
    CHECK(m.at(t, 19) == 0.0);  // centroid
    CHECK(m.at(t, 20) == 0.0);  // roll-off
    CHECK(m.at(t, 21) == 0.0);  // bandwidth
    CHECK(m.at(t, 22) == 0.0);  // rms
    CHECK(m.at(t, 23) == 0.0);  // zcr
  }
}

TEST_CASE("pure tone centroid lands within one bin of the tone") {
  const auto clip = testsup::make_tone(1000.0, 16000, 8000);
  const auto m = feat::handcrafted24(clip);
  const double bin_hz = 16000.0 / 512.0;
  // skip edge frames where the tone is partially windowed
  for (std::size_t t = 1; t + 1 < m.rows; ++t)
    CHECK(std::abs(m.at(t, 19) - 1000.0) <= bin_hz);

  // independent oracle on one interior frame: centroid from a naive DFT
  const std::size_t start = 5 * 160;
  const auto w = dsp::hann_window(400);
  std::vector<double> frame(512, 0.0);
  for (std::size_t i = 0; i < 400; ++i) frame[i] = clip.samples[start + i] * w[i];
  double mag_sum = 0.0, weighted = 0.0;
  for (std::size_t k = 0; k <= 256; ++k) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t i = 0; i < 512; ++i) {
      const double ang = -2.0 * M_PI * static_cast<double>(k) * static_cast<double>(i) / 512.0;
      acc += frame[i] * std::complex<double>{std::cos(ang), std::sin(ang)};
    }
    mag_sum += std::abs(acc);
    weighted += std::abs(acc) * bin_hz * static_cast<double>(k);
  }
  CHECK(m.at(5, 19) == doctest::Approx(weighted / mag_sum).epsilon(1e-9));
}

TEST_CASE("alpha ratio sign follows the 1400 Hz split") {
  const auto hi = feat::handcrafted24(testsup::make_tone(3000.0, 16000, 6000));
  const auto lo = feat::handcrafted24(testsup::make_tone(500.0, 16000, 6000));
  for (std::size_t t = 1; t + 1 < hi.rows; ++t) CHECK(hi.at(t, 6) > 0.0);
  for (std::size_t t = 1; t + 1 < lo.rows; ++t) CHECK(lo.at(t, 6) < 0.0);
}

TEST_CASE("every emitted value is finite under a random-clip fuzz") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    AudioClip clip;
    clip.sample_rate_hz = 16000;
    clip.samples.resize(500 + rng.below(2500));
    const double amp = std::pow(10.0, rng.uniform(-6.0, 0.0));
    for (auto& x : clip.samples) x = amp * rng.normal();
    const auto m = feat::assemble_features(clip);
    for (double v : m.data) CHECK(std::isfinite(v));
  }
}

TEST_CASE("amplitude scaling leaves scale-free features unchanged") {
  const auto clip = testsup::make_noise_clip(9, 16000, 6000, 0.3);
  AudioClip scaled = clip;
  for (double& x : scaled.samples) x *= 3.7;
  const auto a = feat::handcrafted24(clip);
  const auto b = feat::handcrafted24(scaled);
  REQUIRE(a.rows == b.rows);
  // scale-free: f0, formants, alpha, rap, flatness, contrast, centroid,
  // roll-off, bandwidth, zcr
  const std::size_t scale_free[] = {1, 2, 3, 4, 5, 6, 7, 8, 10, 11, 12, 13, 14, 15, 16, 19, 20, 21, 23};
  for (std::size_t t = 0; t < a.rows; ++t) {
    for (std::size_t c : scale_free)
      CHECK(std::abs(a.at(t, c) - b.at(t, c)) <
            1e-6 * std::max(1.0, std::abs(a.at(t, c))));
    CHECK(b.at(t, 22) == doctest::Approx(3.7 * a.at(t, 22)).epsilon(1e-9));        // rms
    CHECK(b.at(t, 0) == doctest::Approx(3.7 * 3.7 * a.at(t, 0)).epsilon(1e-9));    // energy
  }
}

TEST_CASE("normalize utt-wise zeroes column means and is idempotent") {
  const auto clip = testsup::make_noise_clip(13, 16000, 5000);
  const auto m = feat::assemble_features(clip);
  const auto n1 = feat::normalize(m, feat::NormMode::kUttWise);
  for (std::size_t c = 0; c < n1.cols; ++c) {
    double mu = 0.0;
    for (std::size_t t = 0; t < n1.rows; ++t) mu += n1.at(t, c);
    CHECK(std::abs(mu / static_cast<double>(n1.rows)) < 1e-10);
  }
  const auto n2 = feat::normalize(n1, feat::NormMode::kUttWise);
  for (std::size_t i = 0; i < n1.data.size(); ++i)
    CHECK(std::abs(n2.data[i] - n1.data[i]) < 1e-12);
}

TEST_CASE("normalize global subtracts the supplied mean") {
  const auto clip = testsup::make_noise_clip(15, 16000, 4000);
  const auto m = feat::assemble_features(clip);
  feat::NormalizationStats zero;
  zero.mean.assign(189, 0.0);
  zero.n_frames_seen = 1;
  const auto same = feat::normalize(m, feat::NormMode::kGlobal, &zero);
  for (std::size_t i = 0; i < m.data.size(); ++i) CHECK(same.data[i] == m.data[i]);

  CHECK_THROWS_WITH_AS(feat::normalize(m, feat::NormMode::kGlobal, nullptr),
                       doctest::Contains("MissingStats"), Error);
}

TEST_CASE("global mean over its own dataset recenters the concatenation") {
  std::vector<FeatureMatrix> mats;
  for (std::uint64_t s = 0; s < 4; ++s)
    mats.push_back(feat::assemble_features(testsup::make_noise_clip(20 + s, 16000, 3000 + 500 * s)));
  std::vector<const FeatureMatrix*> ptrs;
  for (const auto& m : mats) ptrs.push_back(&m);
  const auto stats = feat::compute_global_mean(ptrs);

  std::vector<double> col_sum(189, 0.0);
  std::size_t n = 0;
  for (const auto& m : mats) {
    const auto norm = feat::normalize(m, feat::NormMode::kGlobal, &stats);
    for (std::size_t t = 0; t < norm.rows; ++t)
      for (std::size_t c = 0; c < 189; ++c) col_sum[c] += norm.at(t, c);
    n += norm.rows;
  }
  for (double s : col_sum) CHECK(std::abs(s / static_cast<double>(n)) < 1e-9);
}

TEST_CASE("compute_global_mean weighting and oracle") {
  FeatureMatrix a;
  a.rows = 1;
  a.cols = 2;
  a.data = {1.0, 10.0};
  FeatureMatrix b;
  b.rows = 3;
  b.cols = 2;
  b.data = {5.0, 2.0, 5.0, 2.0, 5.0, 2.0};
  const auto stats = feat::compute_global_mean({&a, &b});
  CHECK(stats.n_frames_seen == 4);
  CHECK(stats.mean[0] == doctest::Approx((1.0 + 15.0) / 4.0));
  CHECK(stats.mean[1] == doctest::Approx((10.0 + 6.0) / 4.0));

  // concatenate-then-mean oracle over random matrices
  Rng rng(77);
  std::vector<FeatureMatrix> mats;
  std::vector<double> all;
  for (int i = 0; i < 10; ++i) {
    FeatureMatrix m;
    m.rows = 1 + rng.below(6);
    m.cols = 3;
    m.data.resize(m.rows * 3);
    for (double& v : m.data) v = rng.normal();
    mats.push_back(std::move(m));
  }
  std::vector<const FeatureMatrix*> ptrs;
  for (const auto& m : mats) ptrs.push_back(&m);
  const auto gs = feat::compute_global_mean(ptrs);
  for (std::size_t c = 0; c < 3; ++c) {
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& m : mats)
      for (std::size_t t = 0; t < m.rows; ++t) {
        acc += m.at(t, c);
        ++n;
      }
    CHECK(std::abs(gs.mean[c] - acc / static_cast<double>(n)) < 1e-12);
  }

  CHECK_THROWS_WITH_AS(feat::compute_global_mean({}), doctest::Contains("EmptyDataset"), Error);
}

TEST_CASE("feature cache round-trips bit-exactly and rejects damage") {
  testsup::TempDir tmp("cache");
  Rng rng(31);
  FeatureMatrix m;
  m.clip_id = "clip_x";
  m.rows = 7;
  m.cols = 189;
  m.data.resize(7 * 189);
  for (double& v : m.data) v = rng.normal();

  feat::write_cache(tmp / "x.fc", m);
  const auto back = feat::read_cache(tmp / "x.fc");
  CHECK(back.clip_id == m.clip_id);
  CHECK(back.rows == m.rows);
  CHECK(back.cols == m.cols);
  for (std::size_t i = 0; i < m.data.size(); ++i) CHECK(back.data[i] == m.data[i]);

  // rewriting produces identical bytes
  const auto bytes1 = feat::cache_to_bytes(m);
  const auto bytes2 = feat::cache_to_bytes(back);
  CHECK(bytes1 == bytes2);

  auto truncated = bytes1.substr(0, bytes1.size() - 9);
  CHECK_THROWS_WITH_AS(feat::cache_from_bytes(truncated), doctest::Contains("Corrupt"), Error);
  auto wrong_magic = bytes1;
  wrong_magic[0] = 'X';
  CHECK_THROWS_WITH_AS(feat::cache_from_bytes(wrong_magic), doctest::Contains("Corrupt"), Error);
}

TEST_CASE("stats file round-trips") {
  testsup::TempDir tmp("stats");
  feat::NormalizationStats stats;
  stats.n_frames_seen = 42;
  stats.mean = {0.5, -1.25, 3.14159265358979};
  feat::write_stats(tmp / "s.json", stats);
  const auto back = feat::read_stats(tmp / "s.json");
  CHECK(back.n_frames_seen == 42);
  REQUIRE(back.mean.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(back.mean[i] == doctest::Approx(stats.mean[i]).epsilon(1e-15));
}

TEST_CASE("empty clips are rejected") {
  AudioClip clip;
  clip.sample_rate_hz = 16000;
  CHECK_THROWS_WITH_AS(feat::assemble_features(clip), doctest::Contains("EmptyClip"), Error);
}
