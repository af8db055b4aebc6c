#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cough/audio.hpp"

namespace cough::feat {

// Per-frame layout of the 63 base dimensions:
//   [0..38]  MFCC: 13 cepstra (C0..C12), 13 deltas, 13 double deltas
//   [39]     frame energy sum(x^2)
//   [40]     f0 in Hz (0 when unvoiced)
//   [41..44] formants F1..F4 in Hz (0 when absent)
//   [45]     alpha ratio in dB (energy above vs below 1400 Hz)
//   [46]     RAP, 3-point relative average perturbation (0 when unvoiced)
//   [47]     spectral flatness
//   [48]     spectral kurtosis (excess, of magnitude bins)
//   [49..55] spectral contrast, 7 bands
//   [56..57] spectral polynomial coefficients (quadratic, linear)
//   [58]     spectral centroid Hz
//   [59]     spectral roll-off Hz at 0.85 energy
//   [60]     spectral bandwidth Hz
//   [61]     RMS
//   [62]     zero-crossing rate
inline constexpr int kMfccDims = 39;
inline constexpr int kHandcraftedDims = 24;
inline constexpr int kBaseDims = 63;
inline constexpr int kFeatureDims = 189;

struct FeatureConfig {
  double frame_ms = 25.0;
  double hop_ms = 10.0;
  int n_mels = 26;
  int n_cepstra = 13;
  double mel_fmin_hz = 0.0;     // mel_fmax 0 means Nyquist
  double mel_fmax_hz = 0.0;
  double alpha_split_hz = 1400.0;
  double rolloff_fraction = 0.85;
  double contrast_quantile = 0.02;
  int lpc_order = 12;
  double pitch_fmin_hz = 60.0;
  double pitch_fmax_hz = 450.0;
  double voicing_threshold = 0.3;
  double pitch_window_ms = 40.0;
  double vtlp_alpha = 1.0;      // spectra are warped before spectral features when != 1
  double vtlp_hi_ratio = 0.8;
};

struct FeatureMatrix {
  std::string clip_id;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// T x 39: 13 MFCCs then their deltas and double deltas.
FeatureMatrix mfcc39(const AudioClip& clip, const FeatureConfig& cfg = {});

// T x 24: handcrafted dimensions [39..62] above. Framing identical to
// mfcc39, so row counts always match.
FeatureMatrix handcrafted24(const AudioClip& clip, const FeatureConfig& cfg = {});

// T x 189: [mfcc39 | handcrafted24] followed by deltas and double deltas of
// the combined 63.
FeatureMatrix assemble_features(const AudioClip& clip, const FeatureConfig& cfg = {});

// Regression delta with window +-2 and edge replication:
// d_t = sum_{n=1,2} n (x_{t+n} - x_{t-n}) / (2 sum n^2)
FeatureMatrix delta(const FeatureMatrix& m);

struct NormalizationStats {
  std::vector<double> mean;
  std::int64_t n_frames_seen = 0;
};

enum class NormMode { kUttWise, kGlobal };

// Mean subtraction only. UttWise subtracts the matrix's own column means;
// Global subtracts stats->mean.
FeatureMatrix normalize(const FeatureMatrix& m, NormMode mode,
                        const NormalizationStats* stats = nullptr);

// Frame-weighted mean over all rows of all matrices.
NormalizationStats compute_global_mean(const std::vector<const FeatureMatrix*>& dataset);

// Feature cache file: magic, version, clip id, dimensions, then row-major
// little-endian doubles.
std::string cache_to_bytes(const FeatureMatrix& m);
FeatureMatrix cache_from_bytes(const std::string& bytes);
void write_cache(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix read_cache(const std::filesystem::path& path);

void write_stats(const std::filesystem::path& path, const NormalizationStats& stats);
NormalizationStats read_stats(const std::filesystem::path& path);

}  // namespace cough::feat
