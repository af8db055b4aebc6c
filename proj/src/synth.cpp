#include "cough/synth.hpp"

#include <algorithm>
#include <cmath>

#include "cough/dsp.hpp"
#include "cough/rng.hpp"

namespace cough::synth {

namespace {

// white noise shaped to [lo_hz, hi_hz] with tilt_db_per_octave applied from
// the band's low edge; raised-cosine band edges 100 Hz wide
std::vector<double> shaped_noise(Rng& rng, std::size_t n, int sr, double lo_hz, double hi_hz,
                                 double tilt_db_per_octave) {
  std::size_t n_fft = 1;
  while (n_fft < n) n_fft <<= 1;
  std::vector<double> white(n_fft);
  for (double& x : white) x = rng.normal();
  auto spec = dsp::fft(std::span<const double>(white), n_fft);

  const double bin_hz = static_cast<double>(sr) / static_cast<double>(n_fft);
  const double edge = 100.0;
  for (std::size_t k = 0; k <= n_fft / 2; ++k) {
    const double f = bin_hz * static_cast<double>(k);
    double g = 0.0;
    if (f >= lo_hz && f <= hi_hz) {
      g = std::pow(10.0, tilt_db_per_octave * std::log2(std::max(f, lo_hz) / lo_hz) / 20.0);
      if (f < lo_hz + edge) g *= 0.5 - 0.5 * std::cos(M_PI * (f - lo_hz) / edge);
      if (f > hi_hz - edge) g *= 0.5 - 0.5 * std::cos(M_PI * (hi_hz - f) / edge);
    }
    spec[k] *= g;
    if (k > 0 && k < n_fft / 2) spec[n_fft - k] = std::conj(spec[k]);
  }
  const auto shaped = dsp::ifft(spec);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = shaped[i].real();
  return out;
}

void apply_burst_envelope(std::vector<double>& x, int sr, double attack_ms, double decay_tau_ms) {
  const auto attack = static_cast<std::size_t>(attack_ms * sr / 1000.0);
  const double tau = decay_tau_ms * sr / 1000.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double env;
    if (i < attack)
      env = static_cast<double>(i) / static_cast<double>(attack);
    else
      env = std::exp(-static_cast<double>(i - attack) / tau);
    x[i] *= env;
  }
}

}  // namespace

AudioClip make_clip(int label, std::uint64_t seed, int sr) {
  Rng rng(seed);
  const double duration_s = rng.uniform(0.5, 2.0);
  const auto total = static_cast<std::size_t>(std::lround(duration_s * sr));

  AudioClip clip;
  clip.sample_rate_hz = sr;
  clip.samples.assign(total, 0.0);

  if (label == 0) {
    // single burst, 1-4 kHz, shallow tilt, fast decay
    auto burst = shaped_noise(rng, total, sr, 1000.0, 4000.0, -3.0);
    apply_burst_envelope(burst, sr, 10.0, rng.uniform(80.0, 150.0));
    clip.samples = std::move(burst);
  } else {
    // 2-3 bursts, 0.2-1.5 kHz, steep tilt, slower decay, per-burst level
    const int n_bursts = 2 + static_cast<int>(rng.below(2));
    const auto gap = static_cast<std::size_t>(rng.uniform(60.0, 150.0) * sr / 1000.0);
    const std::size_t seg =
        (total - std::min(total, gap * static_cast<std::size_t>(n_bursts - 1))) /
        static_cast<std::size_t>(n_bursts);
    std::size_t pos = 0;
    for (int b = 0; b < n_bursts && seg > 0; ++b) {
      auto burst = shaped_noise(rng, seg, sr, 200.0, 1500.0, -12.0);
      apply_burst_envelope(burst, sr, 15.0, rng.uniform(150.0, 250.0));
      const double level = rng.uniform(0.5, 1.0);
      for (std::size_t i = 0; i < seg && pos + i < total; ++i)
        clip.samples[pos + i] += level * burst[i];
      pos += seg + gap;
    }
  }

  clip = peak_normalize(clip);
  for (double& x : clip.samples) x *= 0.9;
  return clip;
}

Manifest generate_dataset(const std::filesystem::path& out_dir, const SynthConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  Manifest m;
  auto emit_class = [&](int label, int count, const std::string& prefix) {
    // stratified fold assignment: seeded shuffle, then round-robin
    std::vector<int> order(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng shuffle(derive_seed(cfg.seed, prefix + ".folds"));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle.below(i)]);

    for (int i = 0; i < count; ++i) {
      char idbuf[32];
      std::snprintf(idbuf, sizeof idbuf, "%s%04d", prefix.c_str(), i + 1);
      const std::string id = idbuf;
      AudioClip clip = make_clip(label, derive_seed(cfg.seed, id), cfg.sample_rate_hz);
      clip.id = id;
      const fs::path wav = out_dir / (id + ".wav");
      write_wav(wav, clip);
      ManifestRow row;
      row.clip_id = id;
      row.path = wav.string();
      row.label = label;
      row.fold = std::to_string(order[static_cast<std::size_t>(i)] % 5 + 1);
      m.rows.push_back(std::move(row));
    }
  };
  emit_class(0, cfg.n_neg, "neg");
  emit_class(1, cfg.n_pos, "pos");
  write_manifest(out_dir / "manifest.csv", m);
  return m;
}

}  // namespace cough::synth
