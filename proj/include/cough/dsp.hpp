#pragma once

#include <complex>
#include <optional>
#include <span>
#include <vector>

#include "cough/audio.hpp"

namespace cough::dsp {

using cdouble = std::complex<double>;

// Unnormalized forward DFT, X[k] = sum_n x[n] e^{-2*pi*i*k*n/N}. Input is
// zero-padded or truncated to n_fft, which must be a power of two.
std::vector<cdouble> fft(std::span<const double> x, std::size_t n_fft);
std::vector<cdouble> fft(std::span<const cdouble> x, std::size_t n_fft);

// Inverse of fft (includes the 1/N factor).
std::vector<cdouble> ifft(std::span<const cdouble> X);

// Bins [0, n_fft/2] of the DFT of real input.
std::vector<cdouble> rfft(std::span<const double> x, std::size_t n_fft);

// Periodic Hann window, COLA at hop = n/2.
std::vector<double> hann_window(std::size_t n);

struct StftMatrix {
  std::vector<std::vector<cdouble>> frames;  // half spectra, n_fft/2+1 bins
  std::size_t n_fft = 0;
  std::size_t hop = 0;
  int sample_rate_hz = 0;

  std::size_t n_bins() const { return n_fft / 2 + 1; }
};

// Hann-windowed half-spectra; frame t covers samples [t*hop, t*hop + n_fft).
// Clips shorter than n_fft are zero-padded to a single frame.
StftMatrix stft(const AudioClip& clip, std::size_t n_fft = 1024, std::size_t hop = 512);

// Overlap-add synthesis with window-sum normalization. Requires
// hop = n_fft/2 (Hann COLA); interior samples reconstruct the stft input.
AudioClip istft(const StftMatrix& m);

// Mel scale: m(f) = 2595 log10(1 + f/700).
double hz_to_mel(double hz);
double mel_to_hz(double mel);

struct MelFilterbank {
  int n_mels = 0;
  double fmin_hz = 0.0;
  double fmax_hz = 0.0;
  std::vector<std::vector<double>> weights;  // n_mels x (n_fft/2+1), non-negative
  std::vector<double> center_hz;             // triangle apexes

  // mel-band energies of a power spectrum (n_fft/2+1 bins)
  std::vector<double> apply(std::span<const double> power) const;
};

// Triangular filters with centers equally spaced on the mel scale.
MelFilterbank mel_filterbank(int n_mels, double fmin_hz, double fmax_hz, std::size_t n_fft,
                             int sample_rate_hz);

// Orthonormal DCT-II, first n_out coefficients.
std::vector<double> dct_ii(std::span<const double> v, std::size_t n_out);

struct LpcResult {
  std::vector<double> coeffs;  // a[1..order]; prediction x[n] ~ sum_k a_k x[n-k]
  double gain = 0.0;           // residual energy, >= 0
};

// Levinson-Durbin on the frame autocorrelation.
LpcResult lpc(std::span<const double> frame, int order);

// Roots of the LPC polynomial mapped to (frequency_hz, bandwidth_hz) pairs,
// sorted by frequency. Durand-Kerner root finding.
std::vector<std::pair<double, double>> lpc_root_frequencies(const LpcResult& lp, int sample_rate_hz);

// Peak of the normalized autocorrelation searched over lags
// [sr/fmax, sr/fmin]. Returns nullopt (unvoiced) when the peak is below
// voicing_threshold or the frame is silent.
std::optional<double> autocorr_pitch(std::span<const double> frame, int sample_rate_hz,
                                     double fmin_hz = 60.0, double fmax_hz = 450.0,
                                     double voicing_threshold = 0.3);

// Piecewise-linear VTLP frequency warp of one half spectrum: below the
// boundary F_hi*min(alpha,1)/alpha frequencies scale by alpha; above, a
// linear segment maps the remainder onto (., Nyquist]. Magnitude is linearly
// interpolated along bins, phase taken from the nearest source bin.
// F_hi = hi_ratio * Nyquist.
std::vector<cdouble> vtlp_warp_spectrum(std::span<const cdouble> half_spectrum, double alpha,
                                        double sample_rate_hz, double hi_ratio = 0.8);

}  // namespace cough::dsp
