#include "cough/augment.hpp"

#include <algorithm>
#include <cmath>

#include "cough/error.hpp"
#include "cough/rng.hpp"

namespace cough::aug {

namespace {
constexpr std::size_t kNfft = 1024;
constexpr std::size_t kHop = 512;
}  // namespace

SpectrumProfile spectrum_profile(const AudioClip& clip) {
  const auto m = dsp::stft(clip, kNfft, kHop);
  SpectrumProfile p;
  p.clip_id = clip.id;
  p.mean_mag.assign(m.n_bins(), 0.0);
  for (const auto& frame : m.frames)
    for (std::size_t k = 0; k < frame.size(); ++k) p.mean_mag[k] += std::abs(frame[k]);
  const double inv = 1.0 / static_cast<double>(m.frames.size());
  for (double& v : p.mean_mag) v *= inv;
  return p;
}

std::vector<std::string> nearest_neighbors(const SpectrumProfile& target,
                                           const std::vector<SpectrumProfile>& pool, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > pool.size())
    throw Error("PoolTooSmall",
                "need k in [1, pool size]; k=" + std::to_string(k) + " pool=" +
                    std::to_string(pool.size()));
  std::vector<std::pair<double, std::string>> ranked;
  ranked.reserve(pool.size());
  for (const auto& p : pool) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < target.mean_mag.size(); ++i) {
      const double d = target.mean_mag[i] - p.mean_mag[i];
      d2 += d * d;
    }
    ranked.push_back({d2, p.clip_id});
  }
  std::sort(ranked.begin(), ranked.end());
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) out.push_back(ranked[static_cast<std::size_t>(i)].second);
  return out;
}

AudioClip spectrum_interpolate(const AudioClip& anchor, const AudioClip& neighbor, double lambda) {
  const auto a = dsp::stft(anchor, kNfft, kHop);
  const auto b = dsp::stft(neighbor, kNfft, kHop);

  dsp::StftMatrix mix;
  mix.n_fft = kNfft;
  mix.hop = kHop;
  mix.sample_rate_hz = anchor.sample_rate_hz;
  mix.frames.resize(a.frames.size());
  for (std::size_t t = 0; t < a.frames.size(); ++t) {
    const auto& fa = a.frames[t];
    const auto& fb = b.frames[t % b.frames.size()];  // truncate or cycle
    auto& fm = mix.frames[t];
    fm.resize(fa.size());
    for (std::size_t k = 0; k < fa.size(); ++k)
      fm[k] = lambda * fa[k] + (1.0 - lambda) * fb[k];
  }

  AudioClip out = istft(mix);
  out.id = anchor.id;
  out.samples.resize(anchor.samples.size());
  return peak_normalize(out);
}

std::vector<std::pair<AudioClip, Provenance>> augment_positives(
    const std::vector<AudioClip>& positives, const AugmentConfig& cfg) {
  if (positives.size() < static_cast<std::size_t>(cfg.k_neighbors) + 1)
    throw Error("PoolTooSmall", "spectrum interpolation needs at least k+1 positives");

  std::vector<SpectrumProfile> profiles;
  profiles.reserve(positives.size());
  for (const auto& clip : positives) profiles.push_back(spectrum_profile(clip));

  std::vector<std::pair<AudioClip, Provenance>> out;
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const auto& anchor = positives[i];
    std::vector<SpectrumProfile> pool;
    pool.reserve(profiles.size() - 1);
    for (std::size_t j = 0; j < profiles.size(); ++j)
      if (j != i) pool.push_back(profiles[j]);
    const auto neighbors = nearest_neighbors(profiles[i], pool, cfg.k_neighbors);

    const std::uint64_t seed = derive_seed(cfg.rng_seed, anchor.id);
    Rng rng(seed);
    for (std::size_t r = 0; r < neighbors.size(); ++r) {
      const double lambda = rng.uniform();
      const auto nb = std::find_if(positives.begin(), positives.end(),
                                   [&](const AudioClip& c) { return c.id == neighbors[r]; });
      AudioClip clip = spectrum_interpolate(anchor, *nb, lambda);
      clip.id = anchor.id + "_si" + std::to_string(r + 1);
      Provenance prov;
      prov.clip_id = clip.id;
      prov.anchor_id = anchor.id;
      prov.neighbor_id = neighbors[r];
      prov.method = "spectrum";
      prov.lambda = lambda;
      prov.seed = seed;
      out.push_back({std::move(clip), std::move(prov)});
    }
  }
  return out;
}

AudioClip add_noise(const AudioClip& clip, const AudioClip& noise, double snr_db,
                    NoiseMixInfo* info) {
  if (noise.samples.empty() || std::all_of(noise.samples.begin(), noise.samples.end(),
                                           [](double x) { return x == 0.0; }))
    throw Error("SilentNoise", "noise clip has no energy");

  std::vector<SampleRange> active;
  try {
    active = detect_activity(clip);
  } catch (const Error&) {
    active.clear();
  }
  if (active.empty()) {
    // clip shorter than a VAD frame still counts if it has energy
    bool silent = std::all_of(clip.samples.begin(), clip.samples.end(),
                              [](double x) { return x == 0.0; });
    if (silent) throw Error("SilentSignal", "signal clip has no active region");
    active.push_back({0, clip.samples.size()});
  }

  std::vector<double> looped(clip.samples.size());
  for (std::size_t i = 0; i < looped.size(); ++i) looped[i] = noise.samples[i % noise.samples.size()];

  double p_sig = 0.0, p_noise = 0.0;
  std::size_t n_active = 0;
  for (const auto& [s0, s1] : active) {
    for (std::size_t i = s0; i < s1; ++i) {
      p_sig += clip.samples[i] * clip.samples[i];
      p_noise += looped[i] * looped[i];
      ++n_active;
    }
  }
  p_sig /= static_cast<double>(n_active);
  p_noise /= static_cast<double>(n_active);
  if (p_sig <= 0.0) throw Error("SilentSignal", "signal clip has no active region");
  if (p_noise <= 0.0) throw Error("SilentNoise", "noise has no energy over the active region");

  const double gain = std::sqrt(p_sig / (p_noise * std::pow(10.0, snr_db / 10.0)));

  AudioClip out;
  out.id = clip.id;
  out.sample_rate_hz = clip.sample_rate_hz;
  out.samples.resize(clip.samples.size());
  double peak = 0.0;
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    out.samples[i] = clip.samples[i] + gain * looped[i];
    peak = std::max(peak, std::abs(out.samples[i]));
  }
  const double rescale = peak > 1.0 ? 1.0 / peak : 1.0;
  if (rescale != 1.0)
    for (double& x : out.samples) x *= rescale;

  if (info != nullptr) {
    info->noise_gain = gain;
    info->rescale = rescale;
    info->measured_snr_db = 10.0 * std::log10(p_sig / (gain * gain * p_noise));
  }
  return out;
}

dsp::StftMatrix vtlp_warp(const dsp::StftMatrix& m, double alpha, double warp_min,
                          double warp_max) {
  if (!(alpha >= warp_min && alpha <= warp_max))
    throw Error("BadAlpha", "warp factor " + std::to_string(alpha) + " outside [" +
                                std::to_string(warp_min) + ", " + std::to_string(warp_max) + "]");
  dsp::StftMatrix out;
  out.n_fft = m.n_fft;
  out.hop = m.hop;
  out.sample_rate_hz = m.sample_rate_hz;
  out.frames.reserve(m.frames.size());
  for (const auto& frame : m.frames)
    out.frames.push_back(dsp::vtlp_warp_spectrum(frame, alpha, m.sample_rate_hz));
  return out;
}

AudioClip make_noise(NoiseColor color, std::size_t n_samples, int sample_rate_hz,
                     std::uint64_t seed) {
  Rng rng(seed);
  AudioClip out;
  out.sample_rate_hz = sample_rate_hz;
  out.samples.resize(n_samples);
  switch (color) {
    case NoiseColor::kWhite:
      for (auto& x : out.samples) x = rng.normal();
      break;
    case NoiseColor::kPink: {
      // Voss-McCartney style sum of octave-spaced hold generators
      constexpr int kRows = 12;
      double rows[kRows];
      for (double& r : rows) r = rng.normal();
      for (std::size_t i = 0; i < n_samples; ++i) {
        for (int b = 0; b < kRows; ++b)
          if (i % (1ull << b) == 0) rows[b] = rng.normal();
        double acc = 0.0;
        for (double r : rows) acc += r;
        out.samples[i] = acc / kRows;
      }
      break;
    }
    case NoiseColor::kBrown: {
      double acc = 0.0;
      for (auto& x : out.samples) {
        acc = 0.995 * acc + rng.normal();  // leaky integrator keeps it bounded
        x = acc;
      }
      break;
    }
  }
  out = peak_normalize(out);
  out.id = "noise";
  return out;
}

}  // namespace cough::aug
