#include "cough/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cough/error.hpp"

namespace cough::dsp {

namespace {

bool is_pow2(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

// in-place iterative radix-2 Cooley-Tukey; sign = -1 forward, +1 inverse
void fft_inplace(std::vector<cdouble>& a, int sign) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * M_PI / static_cast<double>(len);
    const cdouble wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      cdouble w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const cdouble u = a[i + j];
        const cdouble v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

}  // namespace

std::vector<cdouble> fft(std::span<const cdouble> x, std::size_t n_fft) {
  if (!is_pow2(n_fft)) throw Error("NotPowerOfTwo", "n_fft = " + std::to_string(n_fft));
  std::vector<cdouble> a(n_fft, cdouble{0.0, 0.0});
  std::copy_n(x.begin(), std::min(x.size(), n_fft), a.begin());
  fft_inplace(a, -1);
  return a;
}

std::vector<cdouble> fft(std::span<const double> x, std::size_t n_fft) {
  if (!is_pow2(n_fft)) throw Error("NotPowerOfTwo", "n_fft = " + std::to_string(n_fft));
  std::vector<cdouble> a(n_fft, cdouble{0.0, 0.0});
  const std::size_t m = std::min(x.size(), n_fft);
  for (std::size_t i = 0; i < m; ++i) a[i] = cdouble{x[i], 0.0};
  fft_inplace(a, -1);
  return a;
}

std::vector<cdouble> ifft(std::span<const cdouble> X) {
  if (!is_pow2(X.size())) throw Error("NotPowerOfTwo", "length = " + std::to_string(X.size()));
  std::vector<cdouble> a(X.begin(), X.end());
  fft_inplace(a, +1);
  const double inv = 1.0 / static_cast<double>(a.size());
  for (auto& v : a) v *= inv;
  return a;
}

std::vector<cdouble> rfft(std::span<const double> x, std::size_t n_fft) {
  auto full = fft(x, n_fft);
  full.resize(n_fft / 2 + 1);
  return full;
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

StftMatrix stft(const AudioClip& clip, std::size_t n_fft, std::size_t hop) {
  if (!is_pow2(n_fft)) throw Error("NotPowerOfTwo", "n_fft = " + std::to_string(n_fft));
  if (hop == 0 || hop > n_fft) throw Error("BadConfig", "hop must be in (0, n_fft]");

  StftMatrix m;
  m.n_fft = n_fft;
  m.hop = hop;
  m.sample_rate_hz = clip.sample_rate_hz;
  const auto w = hann_window(n_fft);

  const std::size_t len = clip.samples.size();
  const std::size_t n_frames = len >= n_fft ? (len - n_fft) / hop + 1 : 1;
  m.frames.reserve(n_frames);
  std::vector<double> buf(n_fft);
  for (std::size_t t = 0; t < n_frames; ++t) {
    const std::size_t start = t * hop;
    for (std::size_t i = 0; i < n_fft; ++i) {
      const std::size_t idx = start + i;
      buf[i] = idx < len ? clip.samples[idx] * w[i] : 0.0;
    }
    m.frames.push_back(rfft(buf, n_fft));
  }
  return m;
}

AudioClip istft(const StftMatrix& m) {
  if (m.hop != m.n_fft / 2)
    throw Error("UnsupportedHop", "istft requires hop = n_fft/2, got hop " + std::to_string(m.hop));
  if (m.frames.empty()) throw Error("BadShape", "istft of empty frame list");

  const std::size_t n_fft = m.n_fft;
  const std::size_t n_bins = m.n_bins();
  const auto w = hann_window(n_fft);
  const std::size_t out_len = (m.frames.size() - 1) * m.hop + n_fft;

  std::vector<double> acc(out_len, 0.0), wsum(out_len, 0.0);
  std::vector<cdouble> full(n_fft);
  for (std::size_t t = 0; t < m.frames.size(); ++t) {
    const auto& half = m.frames[t];
    if (half.size() != n_bins) throw Error("BadShape", "inconsistent frame width in istft");
    for (std::size_t k = 0; k < n_bins; ++k) full[k] = half[k];
    for (std::size_t k = n_bins; k < n_fft; ++k) full[k] = std::conj(half[n_fft - k]);
    const auto x = ifft(full);
    const std::size_t start = t * m.hop;
    for (std::size_t i = 0; i < n_fft; ++i) {
      acc[start + i] += x[i].real();
      wsum[start + i] += w[i];
    }
  }

  AudioClip out;
  out.sample_rate_hz = m.sample_rate_hz;
  out.samples.resize(out_len);
  for (std::size_t i = 0; i < out_len; ++i)
    out.samples[i] = wsum[i] > 1e-8 ? acc[i] / wsum[i] : 0.0;
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> MelFilterbank::apply(std::span<const double> power) const {
  std::vector<double> out(static_cast<std::size_t>(n_mels), 0.0);
  for (std::size_t b = 0; b < weights.size(); ++b) {
    double acc = 0.0;
    const auto& wrow = weights[b];
    for (std::size_t k = 0; k < wrow.size() && k < power.size(); ++k) acc += wrow[k] * power[k];
    out[b] = acc;
  }
  return out;
}

MelFilterbank mel_filterbank(int n_mels, double fmin_hz, double fmax_hz, std::size_t n_fft,
                             int sample_rate_hz) {
  const double nyquist = sample_rate_hz / 2.0;
  if (!(fmin_hz >= 0.0 && fmin_hz < fmax_hz && fmax_hz <= nyquist))
    throw Error("BadFrequencyRange",
                "need 0 <= fmin < fmax <= Nyquist, got [" + std::to_string(fmin_hz) + ", " +
                    std::to_string(fmax_hz) + "] at rate " + std::to_string(sample_rate_hz));
  if (n_mels < 1) throw Error("BadConfig", "n_mels must be >= 1");

  const std::size_t n_bins = n_fft / 2 + 1;
  const double mel_lo = hz_to_mel(fmin_hz);
  const double mel_hi = hz_to_mel(fmax_hz);
  // n_mels + 2 edge points, triangles between consecutive triples
  std::vector<double> edges_hz(static_cast<std::size_t>(n_mels) + 2);
  for (std::size_t i = 0; i < edges_hz.size(); ++i)
    edges_hz[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                         static_cast<double>(n_mels + 1));

  MelFilterbank fb;
  fb.n_mels = n_mels;
  fb.fmin_hz = fmin_hz;
  fb.fmax_hz = fmax_hz;
  fb.weights.assign(static_cast<std::size_t>(n_mels), std::vector<double>(n_bins, 0.0));
  fb.center_hz.resize(static_cast<std::size_t>(n_mels));
  const double bin_hz = static_cast<double>(sample_rate_hz) / static_cast<double>(n_fft);
  for (int b = 0; b < n_mels; ++b) {
    const double lo = edges_hz[static_cast<std::size_t>(b)];
    const double mid = edges_hz[static_cast<std::size_t>(b) + 1];
    const double hi = edges_hz[static_cast<std::size_t>(b) + 2];
    fb.center_hz[static_cast<std::size_t>(b)] = mid;
    bool any = false;
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = bin_hz * static_cast<double>(k);
      double w = 0.0;
      if (f > lo && f < mid)
        w = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi)
        w = (hi - f) / (hi - mid);
      fb.weights[static_cast<std::size_t>(b)][k] = w;
      any = any || w > 0.0;
    }
    // a triangle narrower than one bin still needs positive total weight
    if (!any) {
      const auto k = static_cast<std::size_t>(std::min(
          static_cast<double>(n_bins - 1), std::max(0.0, std::round(mid / bin_hz))));
      fb.weights[static_cast<std::size_t>(b)][k] = 1.0;
    }
  }
  return fb;
}

std::vector<double> dct_ii(std::span<const double> v, std::size_t n_out) {
  const std::size_t n = v.size();
  if (n_out > n) throw Error("BadConfig", "dct output longer than input");
  std::vector<double> out(n_out, 0.0);
  const double norm0 = std::sqrt(1.0 / static_cast<double>(n));
  const double norm = std::sqrt(2.0 / static_cast<double>(n));
  for (std::size_t k = 0; k < n_out; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      acc += v[i] * std::cos(M_PI * static_cast<double>(k) * (2.0 * static_cast<double>(i) + 1.0) /
                             (2.0 * static_cast<double>(n)));
    out[k] = acc * (k == 0 ? norm0 : norm);
  }
  return out;
}

LpcResult lpc(std::span<const double> frame, int order) {
  if (order <= 0 || static_cast<std::size_t>(order) >= frame.size())
    throw Error("BadConfig", "lpc order must be in [1, frame length)");
  std::vector<double> r(static_cast<std::size_t>(order) + 1, 0.0);
  for (int lag = 0; lag <= order; ++lag) {
    double acc = 0.0;
    for (std::size_t i = static_cast<std::size_t>(lag); i < frame.size(); ++i)
      acc += frame[i] * frame[i - static_cast<std::size_t>(lag)];
    r[static_cast<std::size_t>(lag)] = acc;
  }
  if (r[0] <= 0.0) throw Error("DegenerateFrame", "zero-energy frame in lpc");

  // Levinson-Durbin. a[] holds coefficients in the prediction convention
  // x[n] ~ sum a_k x[n-k].
  std::vector<double> a(static_cast<std::size_t>(order) + 1, 0.0);
  std::vector<double> prev(a);
  double err = r[0];
  for (int m = 1; m <= order; ++m) {
    double k = r[static_cast<std::size_t>(m)];
    for (int i = 1; i < m; ++i) k -= a[static_cast<std::size_t>(i)] * r[static_cast<std::size_t>(m - i)];
    if (err <= 0.0) throw Error("DegenerateFrame", "singular autocorrelation in lpc");
    k /= err;
    prev = a;
    a[static_cast<std::size_t>(m)] = k;
    for (int i = 1; i < m; ++i)
      a[static_cast<std::size_t>(i)] =
          prev[static_cast<std::size_t>(i)] - k * prev[static_cast<std::size_t>(m - i)];
    err *= (1.0 - k * k);
    if (err < 0.0) err = 0.0;
  }
  LpcResult out;
  out.coeffs.assign(a.begin() + 1, a.end());
  out.gain = err;
  return out;
}

std::vector<std::pair<double, double>> lpc_root_frequencies(const LpcResult& lp, int sample_rate_hz) {
  // roots of z^p - a_1 z^{p-1} - ... - a_p via Durand-Kerner
  const std::size_t p = lp.coeffs.size();
  std::vector<cdouble> poly(p + 1);  // poly[i] = coefficient of z^{p-i}
  poly[0] = 1.0;
  for (std::size_t i = 0; i < p; ++i) poly[i + 1] = -lp.coeffs[i];

  std::vector<cdouble> roots(p);
  cdouble seed(0.4, 0.9);
  cdouble acc(1.0, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    acc *= seed;
    roots[i] = acc;
  }
  auto eval = [&](cdouble z) {
    cdouble v = poly[0];
    for (std::size_t i = 1; i <= p; ++i) v = v * z + poly[i];
    return v;
  };
  for (int iter = 0; iter < 400; ++iter) {
    double max_step = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      cdouble denom(1.0, 0.0);
      for (std::size_t j = 0; j < p; ++j)
        if (j != i) denom *= roots[i] - roots[j];
      if (std::abs(denom) < 1e-30) continue;
      const cdouble delta = eval(roots[i]) / denom;
      roots[i] -= delta;
      max_step = std::max(max_step, std::abs(delta));
    }
    if (max_step < 1e-13) break;
  }

  std::vector<std::pair<double, double>> out;
  for (const auto& z : roots) {
    const double mag = std::abs(z);
    if (!(std::isfinite(mag)) || mag <= 0.0) continue;
    const double freq = std::atan2(z.imag(), z.real()) / (2.0 * M_PI) * sample_rate_hz;
    if (freq <= 0.0) continue;  // keep one of each conjugate pair
    const double bw = -std::log(mag) * sample_rate_hz / M_PI;
    out.push_back({freq, bw});
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<double> autocorr_pitch(std::span<const double> frame, int sample_rate_hz,
                                     double fmin_hz, double fmax_hz, double voicing_threshold) {
  const auto min_len = static_cast<std::size_t>(std::ceil(2.0 * sample_rate_hz / fmin_hz));
  if (frame.size() < min_len)
    throw Error("FrameTooShort", "pitch frame needs >= " + std::to_string(min_len) + " samples");

  double energy = 0.0;
  for (double x : frame) energy += x * x;
  if (energy <= 0.0) return std::nullopt;

  const auto lag_min = static_cast<std::size_t>(std::floor(sample_rate_hz / fmax_hz));
  const auto lag_max = static_cast<std::size_t>(std::ceil(sample_rate_hz / fmin_hz));
  double best_val = -1.0;
  std::size_t best_lag = 0;
  std::vector<double> ncc(lag_max + 1, 0.0);
  for (std::size_t lag = lag_min; lag <= lag_max && lag < frame.size(); ++lag) {
    double num = 0.0, e0 = 0.0, e1 = 0.0;
    for (std::size_t i = 0; i + lag < frame.size(); ++i) {
      num += frame[i] * frame[i + lag];
      e0 += frame[i] * frame[i];
      e1 += frame[i + lag] * frame[i + lag];
    }
    const double d = std::sqrt(e0 * e1);
    const double v = d > 0.0 ? num / d : 0.0;
    ncc[lag] = v;
    if (v > best_val) {
      best_val = v;
      best_lag = lag;
    }
  }
  if (best_lag == 0 || best_val < voicing_threshold) return std::nullopt;

  // parabolic refinement around the peak lag
  double lag = static_cast<double>(best_lag);
  if (best_lag > lag_min && best_lag < lag_max && best_lag + 1 < frame.size()) {
    const double y0 = ncc[best_lag - 1], y1 = ncc[best_lag], y2 = ncc[best_lag + 1];
    const double denom = y0 - 2.0 * y1 + y2;
    if (std::abs(denom) > 1e-12) {
      const double shift = 0.5 * (y0 - y2) / denom;
      if (std::abs(shift) < 1.0) lag += shift;
    }
  }
  return sample_rate_hz / lag;
}

std::vector<cdouble> vtlp_warp_spectrum(std::span<const cdouble> half_spectrum, double alpha,
                                        double sample_rate_hz, double hi_ratio) {
  if (!(alpha > 0.0)) throw Error("BadAlpha", "warp factor must be positive");
  const std::size_t n_bins = half_spectrum.size();
  const double nyquist = sample_rate_hz / 2.0;
  const double f_hi = hi_ratio * nyquist;
  const double boundary = f_hi * std::min(alpha, 1.0) / alpha;  // in source frequency

  // forward map g: source f -> warped f'
  const double g_boundary = alpha * boundary;
  auto g_inverse = [&](double f_out) {
    if (f_out <= g_boundary) return f_out / alpha;
    // linear segment mapping (boundary, nyquist] onto (g_boundary, nyquist]
    const double slope = (nyquist - boundary) / (nyquist - g_boundary);
    return boundary + (f_out - g_boundary) * slope;
  };

  const double bin_hz = nyquist / static_cast<double>(n_bins - 1);
  std::vector<cdouble> out(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k) {
    const double f_src = g_inverse(bin_hz * static_cast<double>(k));
    const double pos = std::clamp(f_src / bin_hz, 0.0, static_cast<double>(n_bins - 1));
    const auto k0 = static_cast<std::size_t>(std::floor(pos));
    const std::size_t k1 = std::min(k0 + 1, n_bins - 1);
    const double frac = pos - static_cast<double>(k0);
    const double mag =
        (1.0 - frac) * std::abs(half_spectrum[k0]) + frac * std::abs(half_spectrum[k1]);
    const auto nearest = static_cast<std::size_t>(std::llround(pos));
    const cdouble src = half_spectrum[std::min(nearest, n_bins - 1)];
    const double src_mag = std::abs(src);
    const cdouble phase = src_mag > 0.0 ? src / src_mag : cdouble{1.0, 0.0};
    out[k] = mag * phase;
  }
  return out;
}

}  // namespace cough::dsp
