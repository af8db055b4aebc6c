#include "cough/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "cough/dsp.hpp"
#include "cough/error.hpp"
#include "cough/util.hpp"
#include "json.hpp"

namespace cough::feat {

namespace {

constexpr double kLogFloor = 1e-10;    // mel log energies
constexpr double kPowerFloor = 1e-12;  // band energies in dB ratios
constexpr double kAlphaClampDb = 60.0;

struct Framing {
  std::size_t frame_len = 0;
  std::size_t hop = 0;
  std::size_t n_fft = 0;
  std::size_t n_frames = 0;
};

Framing make_framing(const AudioClip& clip, const FeatureConfig& cfg) {
  Framing fr;
  fr.frame_len = static_cast<std::size_t>(std::lround(cfg.frame_ms * clip.sample_rate_hz / 1000.0));
  fr.hop = static_cast<std::size_t>(std::lround(cfg.hop_ms * clip.sample_rate_hz / 1000.0));
  fr.n_fft = 1;
  while (fr.n_fft < fr.frame_len) fr.n_fft <<= 1;
  const std::size_t len = clip.samples.size();
  fr.n_frames = len > fr.frame_len ? (len - fr.frame_len) / fr.hop + 1 : 1;
  return fr;
}

// everything computed once per frame and shared by the feature assemblers
struct FrameAnalysis {
  std::vector<double> mfcc;     // n_cepstra
  std::vector<double> mag;      // n_fft/2+1
  std::vector<double> power;    // n_fft/2+1
  double energy = 0.0;
  double rms = 0.0;
  double zcr = 0.0;
  double f0 = 0.0;              // 0 = unvoiced
  double formants[4] = {0, 0, 0, 0};
};

std::vector<double> frame_samples(const AudioClip& clip, std::size_t start, std::size_t len) {
  std::vector<double> out(len, 0.0);
  for (std::size_t i = 0; i < len; ++i) {
    const std::size_t idx = start + i;
    if (idx < clip.samples.size()) out[i] = clip.samples[idx];
  }
  return out;
}

std::vector<FrameAnalysis> analyze_frames(const AudioClip& clip, const FeatureConfig& cfg,
                                          const Framing& fr) {
  const int sr = clip.sample_rate_hz;
  const double nyquist = sr / 2.0;
  const double mel_fmax = cfg.mel_fmax_hz > 0.0 ? cfg.mel_fmax_hz : nyquist;
  const auto mel = dsp::mel_filterbank(cfg.n_mels, cfg.mel_fmin_hz, mel_fmax, fr.n_fft, sr);
  const auto window = dsp::hann_window(fr.frame_len);

  const auto pitch_win =
      static_cast<std::size_t>(std::lround(cfg.pitch_window_ms * sr / 1000.0));

  std::vector<FrameAnalysis> frames(fr.n_frames);
  for (std::size_t t = 0; t < fr.n_frames; ++t) {
    FrameAnalysis& fa = frames[t];
    const std::size_t start = t * fr.hop;
    const auto raw = frame_samples(clip, start, fr.frame_len);

    // time-domain features on the raw frame
    double energy = 0.0;
    for (double x : raw) energy += x * x;
    fa.energy = energy;
    fa.rms = std::sqrt(energy / static_cast<double>(raw.size()));
    std::size_t crossings = 0;
    for (std::size_t i = 1; i < raw.size(); ++i)
      if (raw[i - 1] * raw[i] < 0.0) ++crossings;
    fa.zcr = static_cast<double>(crossings) / static_cast<double>(raw.size());

    // spectral path: Hann window, zero-pad, optional VTLP warp
    std::vector<double> windowed(raw);
    for (std::size_t i = 0; i < windowed.size(); ++i) windowed[i] *= window[i];
    auto half = dsp::rfft(windowed, fr.n_fft);
    if (cfg.vtlp_alpha != 1.0)
      half = dsp::vtlp_warp_spectrum(half, cfg.vtlp_alpha, sr, cfg.vtlp_hi_ratio);
    fa.mag.resize(half.size());
    fa.power.resize(half.size());
    for (std::size_t k = 0; k < half.size(); ++k) {
      fa.mag[k] = std::abs(half[k]);
      fa.power[k] = fa.mag[k] * fa.mag[k];
    }

    auto mel_e = mel.apply(fa.power);
    for (double& e : mel_e) e = std::log(std::max(e, kLogFloor));
    fa.mfcc = dsp::dct_ii(mel_e, static_cast<std::size_t>(cfg.n_cepstra));

    // pitch on a wider window centered on this frame
    const std::size_t center = start + fr.frame_len / 2;
    const std::size_t pstart = center >= pitch_win / 2 ? center - pitch_win / 2 : 0;
    const auto pframe = frame_samples(clip, pstart, pitch_win);
    const auto f0 = dsp::autocorr_pitch(pframe, sr, cfg.pitch_fmin_hz, cfg.pitch_fmax_hz,
                                        cfg.voicing_threshold);
    fa.f0 = f0.value_or(0.0);

    // formants from LPC on the windowed raw frame
    if (energy > 0.0) {
      try {
        const auto lp = dsp::lpc(windowed, cfg.lpc_order);
        const auto roots = dsp::lpc_root_frequencies(lp, sr);
        int fi = 0;
        for (const auto& [freq, bw] : roots) {
          if (fi >= 4) break;
          if (freq > 90.0 && freq < 7600.0 && bw < 400.0) fa.formants[fi++] = freq;
        }
      } catch (const Error&) {
        // degenerate frame: formants stay 0
      }
    }
  }
  return frames;
}

double spectral_flatness(const std::vector<double>& power) {
  double mean_p = 0.0;
  for (double p : power) mean_p += p;
  mean_p /= static_cast<double>(power.size());
  if (mean_p <= 0.0) return 0.0;
  double mean_log = 0.0;
  for (double p : power) mean_log += std::log(std::max(p, 1e-30));
  mean_log /= static_cast<double>(power.size());
  return std::exp(mean_log) / mean_p;
}

double spectral_kurtosis(const std::vector<double>& mag) {
  const double n = static_cast<double>(mag.size());
  double mu = 0.0;
  for (double m : mag) mu += m;
  mu /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double m : mag) {
    const double d = m - mu;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m4 /= n;
  if (m2 <= 1e-30) return 0.0;
  return m4 / (m2 * m2) - 3.0;
}

void spectral_contrast(const std::vector<double>& power, double bin_hz, double nyquist,
                       double quantile, double* out7) {
  // librosa-style octave edges: 0, 200, 400, ..., 6400, Nyquist
  double edges[8] = {0.0, 200.0, 400.0, 800.0, 1600.0, 3200.0, 6400.0, nyquist};
  for (int b = 0; b < 7; ++b) {
    const double lo = std::min(edges[b], nyquist);
    const double hi = std::min(edges[b + 1], nyquist);
    std::vector<double> logs;
    for (std::size_t k = 0; k < power.size(); ++k) {
      const double f = bin_hz * static_cast<double>(k);
      if (f >= lo && (f < hi || (b == 6 && f <= hi)))
        logs.push_back(std::log(std::max(power[k], kPowerFloor)));
    }
    if (logs.empty()) {
      out7[b] = 0.0;
      continue;
    }
    std::sort(logs.begin(), logs.end());
    const auto q = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(quantile * static_cast<double>(logs.size()))));
    double bottom = 0.0, top = 0.0;
    for (std::size_t i = 0; i < q; ++i) {
      bottom += logs[i];
      top += logs[logs.size() - 1 - i];
    }
    out7[b] = (top - bottom) / static_cast<double>(q);
  }
}

// degree-2 least squares of magnitude against normalized frequency,
// returning (quadratic, linear)
void spectral_poly(const std::vector<double>& mag, double* quad, double* lin) {
  const std::size_t n = mag.size();
  double s[5] = {0, 0, 0, 0, 0};  // sums of u^0..u^4
  double b0 = 0.0, b1 = 0.0, b2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double u = static_cast<double>(k) / static_cast<double>(n - 1);
    double up = 1.0;
    for (int p = 0; p <= 4; ++p) {
      s[p] += up;
      up *= u;
    }
    b0 += mag[k];
    b1 += mag[k] * u;
    b2 += mag[k] * u * u;
  }
  // solve [s0 s1 s2; s1 s2 s3; s2 s3 s4] [c0 c1 c2]' = [b0 b1 b2]'
  double A[3][4] = {{s[0], s[1], s[2], b0}, {s[1], s[2], s[3], b1}, {s[2], s[3], s[4], b2}};
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
    std::swap(A[col], A[piv]);
    if (std::abs(A[col][col]) < 1e-30) {
      *quad = *lin = 0.0;
      return;
    }
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = A[r][col] / A[col][col];
      for (int c = col; c < 4; ++c) A[r][c] -= f * A[col][c];
    }
  }
  *lin = A[1][3] / A[1][1];
  *quad = A[2][3] / A[2][2];
}

double rap_around(const std::vector<FrameAnalysis>& frames, std::size_t t) {
  if (frames[t].f0 <= 0.0) return 0.0;
  std::vector<double> periods;
  const std::size_t lo = t >= 2 ? t - 2 : 0;
  const std::size_t hi = std::min(frames.size() - 1, t + 2);
  for (std::size_t i = lo; i <= hi; ++i)
    if (frames[i].f0 > 0.0) periods.push_back(1.0 / frames[i].f0);
  const std::size_t m = periods.size();
  if (m < 3) return 0.0;
  double mean_t = std::accumulate(periods.begin(), periods.end(), 0.0) / static_cast<double>(m);
  if (mean_t <= 0.0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 1; i + 1 < m; ++i)
    acc += std::abs(periods[i] - (periods[i - 1] + periods[i] + periods[i + 1]) / 3.0);
  return acc / static_cast<double>(m - 2) / mean_t;
}

void fill_handcrafted(const std::vector<FrameAnalysis>& frames, const FeatureConfig& cfg, int sr,
                      std::size_t n_fft, FeatureMatrix& out, std::size_t col0) {
  const double nyquist = sr / 2.0;
  const double bin_hz = static_cast<double>(sr) / static_cast<double>(n_fft);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const FrameAnalysis& fa = frames[t];
    double* row = &out.at(t, col0);
    row[0] = fa.energy;
    row[1] = fa.f0;
    for (int i = 0; i < 4; ++i) row[2 + i] = fa.formants[i];

    double e_below = 0.0, e_above = 0.0;
    for (std::size_t k = 0; k < fa.power.size(); ++k) {
      const double f = bin_hz * static_cast<double>(k);
      (f <= cfg.alpha_split_hz ? e_below : e_above) += fa.power[k];
    }
    const double alpha_db =
        10.0 * std::log10(std::max(e_above, kPowerFloor) / std::max(e_below, kPowerFloor));
    row[6] = std::clamp(alpha_db, -kAlphaClampDb, kAlphaClampDb);

    row[7] = rap_around(frames, t);
    row[8] = spectral_flatness(fa.power);
    row[9] = spectral_kurtosis(fa.mag);
    spectral_contrast(fa.power, bin_hz, nyquist, cfg.contrast_quantile, row + 10);
    spectral_poly(fa.mag, &row[17], &row[18]);

    double mag_sum = 0.0, weighted = 0.0;
    for (std::size_t k = 0; k < fa.mag.size(); ++k) {
      mag_sum += fa.mag[k];
      weighted += fa.mag[k] * bin_hz * static_cast<double>(k);
    }
    const double centroid = mag_sum > 0.0 ? weighted / mag_sum : 0.0;
    row[19] = centroid;

    double pow_total = 0.0;
    for (double p : fa.power) pow_total += p;
    double rolloff = 0.0;
    if (pow_total > 0.0) {
      double acc = 0.0;
      for (std::size_t k = 0; k < fa.power.size(); ++k) {
        acc += fa.power[k];
        if (acc >= cfg.rolloff_fraction * pow_total) {
          rolloff = bin_hz * static_cast<double>(k);
          break;
        }
      }
    }
    row[20] = rolloff;

    double bw_acc = 0.0;
    for (std::size_t k = 0; k < fa.mag.size(); ++k) {
      const double d = bin_hz * static_cast<double>(k) - centroid;
      bw_acc += fa.mag[k] * d * d;
    }
    row[21] = mag_sum > 0.0 ? std::sqrt(bw_acc / mag_sum) : 0.0;
    row[22] = fa.rms;
    row[23] = fa.zcr;
  }
}

void fill_mfcc(const std::vector<FrameAnalysis>& frames, int n_cepstra, FeatureMatrix& out) {
  // statics, then regression deltas of the statics, then deltas of those
  const std::size_t nc = static_cast<std::size_t>(n_cepstra);
  FeatureMatrix statics;
  statics.rows = frames.size();
  statics.cols = nc;
  statics.data.resize(statics.rows * nc);
  for (std::size_t t = 0; t < frames.size(); ++t)
    std::copy(frames[t].mfcc.begin(), frames[t].mfcc.end(), &statics.at(t, 0));
  const auto d1 = delta(statics);
  const auto d2 = delta(d1);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    for (std::size_t c = 0; c < nc; ++c) {
      out.at(t, c) = statics.at(t, c);
      out.at(t, nc + c) = d1.at(t, c);
      out.at(t, 2 * nc + c) = d2.at(t, c);
    }
  }
}

std::vector<FrameAnalysis> analyze_clip(const AudioClip& clip, const FeatureConfig& cfg,
                                        Framing& fr) {
  if (clip.samples.empty()) throw Error("EmptyClip", "cannot extract features from an empty clip");
  fr = make_framing(clip, cfg);
  return analyze_frames(clip, cfg, fr);
}

}  // namespace

FeatureMatrix delta(const FeatureMatrix& m) {
  FeatureMatrix out;
  out.clip_id = m.clip_id;
  out.rows = m.rows;
  out.cols = m.cols;
  out.data.assign(m.data.size(), 0.0);
  const auto row_at = [&](std::ptrdiff_t t) {
    const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(m.rows) - 1;
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(t, 0, last));
  };
  for (std::size_t t = 0; t < m.rows; ++t) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      double acc = 0.0;
      for (int n = 1; n <= 2; ++n) {
        const auto tp = row_at(static_cast<std::ptrdiff_t>(t) + n);
        const auto tm = row_at(static_cast<std::ptrdiff_t>(t) - n);
        acc += n * (m.at(tp, c) - m.at(tm, c));
      }
      out.at(t, c) = acc / 10.0;  // 2 * (1^2 + 2^2)
    }
  }
  return out;
}

FeatureMatrix mfcc39(const AudioClip& clip, const FeatureConfig& cfg) {
  Framing fr;
  const auto frames = analyze_clip(clip, cfg, fr);
  FeatureMatrix out;
  out.clip_id = clip.id;
  out.rows = frames.size();
  out.cols = static_cast<std::size_t>(kMfccDims);
  out.data.assign(out.rows * out.cols, 0.0);
  fill_mfcc(frames, cfg.n_cepstra, out);
  return out;
}

FeatureMatrix handcrafted24(const AudioClip& clip, const FeatureConfig& cfg) {
  Framing fr;
  const auto frames = analyze_clip(clip, cfg, fr);
  FeatureMatrix out;
  out.clip_id = clip.id;
  out.rows = frames.size();
  out.cols = static_cast<std::size_t>(kHandcraftedDims);
  out.data.assign(out.rows * out.cols, 0.0);
  fill_handcrafted(frames, cfg, clip.sample_rate_hz, fr.n_fft, out, 0);
  return out;
}

FeatureMatrix assemble_features(const AudioClip& clip, const FeatureConfig& cfg) {
  Framing fr;
  const auto frames = analyze_clip(clip, cfg, fr);

  FeatureMatrix base;
  base.clip_id = clip.id;
  base.rows = frames.size();
  base.cols = static_cast<std::size_t>(kBaseDims);
  base.data.assign(base.rows * base.cols, 0.0);
  fill_mfcc(frames, cfg.n_cepstra, base);
  fill_handcrafted(frames, cfg, clip.sample_rate_hz, fr.n_fft, base,
                   static_cast<std::size_t>(kMfccDims));

  const auto d1 = delta(base);
  const auto d2 = delta(d1);

  FeatureMatrix out;
  out.clip_id = clip.id;
  out.rows = base.rows;
  out.cols = static_cast<std::size_t>(kFeatureDims);
  out.data.resize(out.rows * out.cols);
  for (std::size_t t = 0; t < out.rows; ++t) {
    for (std::size_t c = 0; c < base.cols; ++c) {
      out.at(t, c) = base.at(t, c);
      out.at(t, base.cols + c) = d1.at(t, c);
      out.at(t, 2 * base.cols + c) = d2.at(t, c);
    }
  }
  return out;
}

FeatureMatrix normalize(const FeatureMatrix& m, NormMode mode, const NormalizationStats* stats) {
  FeatureMatrix out = m;
  if (mode == NormMode::kUttWise) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      double mu = 0.0;
      for (std::size_t t = 0; t < m.rows; ++t) mu += m.at(t, c);
      mu /= static_cast<double>(m.rows);
      for (std::size_t t = 0; t < m.rows; ++t) out.at(t, c) -= mu;
    }
    return out;
  }
  if (stats == nullptr || stats->mean.size() != m.cols)
    throw Error("MissingStats", "global normalization requires matching stats");
  for (std::size_t t = 0; t < m.rows; ++t)
    for (std::size_t c = 0; c < m.cols; ++c) out.at(t, c) -= stats->mean[c];
  return out;
}

NormalizationStats compute_global_mean(const std::vector<const FeatureMatrix*>& dataset) {
  if (dataset.empty()) throw Error("EmptyDataset", "global mean of an empty dataset");
  const std::size_t cols = dataset.front()->cols;
  std::vector<double> sum(cols, 0.0), comp(cols, 0.0);  // Kahan accumulation
  std::int64_t n = 0;
  for (const FeatureMatrix* m : dataset) {
    if (m->cols != cols) throw Error("BadShape", "inconsistent widths in global mean");
    for (std::size_t t = 0; t < m->rows; ++t) {
      for (std::size_t c = 0; c < cols; ++c) {
        const double y = m->at(t, c) - comp[c];
        const double s = sum[c] + y;
        comp[c] = (s - sum[c]) - y;
        sum[c] = s;
      }
      ++n;
    }
  }
  NormalizationStats stats;
  stats.n_frames_seen = n;
  stats.mean.resize(cols);
  for (std::size_t c = 0; c < cols; ++c) stats.mean[c] = sum[c] / static_cast<double>(n);
  return stats;
}

namespace {

constexpr char kCacheMagic[4] = {'C', 'F', 'C', '1'};
constexpr std::uint32_t kCacheVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string& bytes, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + i])) << (8 * i);
  return v;
}

}  // namespace

std::string cache_to_bytes(const FeatureMatrix& m) {
  std::string out(kCacheMagic, 4);
  put_u32(out, kCacheVersion);
  put_u32(out, static_cast<std::uint32_t>(m.clip_id.size()));
  out += m.clip_id;
  put_u32(out, static_cast<std::uint32_t>(m.rows));
  put_u32(out, static_cast<std::uint32_t>(m.cols));
  for (double d : m.data) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
  return out;
}

FeatureMatrix cache_from_bytes(const std::string& bytes) {
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kCacheMagic, 4) != 0)
    throw Error("Corrupt", "bad feature cache magic");
  if (get_u32(bytes, 4) != kCacheVersion) throw Error("VersionMismatch", "feature cache version");
  const std::uint32_t id_len = get_u32(bytes, 8);
  std::size_t off = 12;
  if (bytes.size() < off + id_len + 8) throw Error("Corrupt", "truncated feature cache header");
  FeatureMatrix m;
  m.clip_id = bytes.substr(off, id_len);
  off += id_len;
  m.rows = get_u32(bytes, off);
  m.cols = get_u32(bytes, off + 4);
  off += 8;
  const std::size_t need = m.rows * m.cols * 8;
  if (bytes.size() != off + need) throw Error("Corrupt", "feature cache size mismatch");
  m.data.resize(m.rows * m.cols);
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[off + i * 8 + b]))
              << (8 * b);
    std::memcpy(&m.data[i], &bits, 8);
  }
  return m;
}

void write_cache(const std::filesystem::path& path, const FeatureMatrix& m) {
  atomic_write_file(path, cache_to_bytes(m));
}

FeatureMatrix read_cache(const std::filesystem::path& path) {
  return cache_from_bytes(read_file(path));
}

void write_stats(const std::filesystem::path& path, const NormalizationStats& stats) {
  nlohmann::json j;
  j["n_frames_seen"] = stats.n_frames_seen;
  j["mean"] = stats.mean;
  atomic_write_file(path, j.dump(2) + "\n");
}

NormalizationStats read_stats(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error("Corrupt", std::string("stats file: ") + e.what());
  }
  NormalizationStats stats;
  stats.n_frames_seen = j.at("n_frames_seen").get<std::int64_t>();
  stats.mean = j.at("mean").get<std::vector<double>>();
  return stats;
}

}  // namespace cough::feat
