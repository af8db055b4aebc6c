#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cough/audio.hpp"
#include "cough/dsp.hpp"

namespace cough::aug {

// Time-averaged magnitude of the 1024-point half spectrum; the neighbor
// search key for spectrum interpolation.
struct SpectrumProfile {
  std::string clip_id;
  std::vector<double> mean_mag;  // 513 bins
};

struct AugmentConfig {
  int k_neighbors = 5;
  double snr_db_min = 5.0;
  double snr_db_max = 20.0;
  double warp_min = 0.85;
  double warp_max = 1.15;
  std::uint64_t rng_seed = 0;
};

struct Provenance {
  std::string clip_id;
  std::string anchor_id;
  std::string neighbor_id;  // spectrum method only
  std::string method;       // "spectrum" | "noise" | "vtlp"
  double lambda = 0.0;
  double snr_db = 0.0;
  double alpha = 0.0;
  std::uint64_t seed = 0;
};

SpectrumProfile spectrum_profile(const AudioClip& clip);

// k ids from the pool with smallest Euclidean distance to the target's
// mean_mag, ascending, ties broken by lexicographic clip_id. The pool must
// not contain the target itself.
std::vector<std::string> nearest_neighbors(const SpectrumProfile& target,
                                           const std::vector<SpectrumProfile>& pool, int k);

// Complex STFT interpolation: output = istft(lambda*A + (1-lambda)*B), with
// B length-matched to A's frame count by truncation or cyclic frame
// repetition, then peak-normalized and cut to the anchor's duration.
AudioClip spectrum_interpolate(const AudioClip& anchor, const AudioClip& neighbor, double lambda);

// For each positive, one interpolated clip per nearest neighbor (k per
// anchor). Lambdas are uniform(0,1) from a per-anchor stream derived from
// cfg.rng_seed, so results are independent of processing order.
std::vector<std::pair<AudioClip, Provenance>> augment_positives(
    const std::vector<AudioClip>& positives, const AugmentConfig& cfg);

struct NoiseMixInfo {
  double noise_gain = 0.0;
  double rescale = 1.0;          // applied to the mixture when it clips
  double measured_snr_db = 0.0;  // of the two addends before rescaling
};

// Noise is looped or truncated to the clip length and scaled so the mean
// power over the clip's active region matches snr_db, then the mixture is
// rescaled to peak 1 if it clips.
AudioClip add_noise(const AudioClip& clip, const AudioClip& noise, double snr_db,
                    NoiseMixInfo* info = nullptr);

// Piecewise-linear frequency warp of every frame; see dsp::vtlp_warp_spectrum.
dsp::StftMatrix vtlp_warp(const dsp::StftMatrix& m, double alpha, double warp_min = 0.85,
                          double warp_max = 1.15);

enum class NoiseColor { kWhite, kPink, kBrown };

// Synthetic noise for tests and --synthetic-noise runs.
AudioClip make_noise(NoiseColor color, std::size_t n_samples, int sample_rate_hz,
                     std::uint64_t seed);

}  // namespace cough::aug
