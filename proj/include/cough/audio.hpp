#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace cough {

// Mono waveform. Samples are real amplitudes in [-1, 1] after peak
// normalization; the unit of ingestion and augmentation.
struct AudioClip {
  std::string id;
  int sample_rate_hz = 0;
  std::vector<double> samples;

  std::size_t size() const { return samples.size(); }
  double duration_s() const {
    return sample_rate_hz > 0 ? static_cast<double>(samples.size()) / sample_rate_hz : 0.0;
  }
};

struct ActivityConfig {
  double frame_ms = 25.0;
  double hop_ms = 10.0;
  double rel_energy_threshold = 0.01;  // fraction of the max frame energy
  double merge_gap_ms = 200.0;
  double pad_ms = 100.0;
};

using SampleRange = std::pair<std::size_t, std::size_t>;  // [start, end)

// RIFF/WAVE reader. Accepts 16-bit integer PCM and 32-bit float PCM, 1 or 2
// channels; stereo is averaged to mono. 16-bit values map to v / 32768.
AudioClip read_wav(const std::filesystem::path& path, const std::string& id = "");

// Always writes mono 16-bit PCM, no dithering. Samples are clamped to
// [-1, 1] and quantized with round(x * 32768) clamped to int16 range, so a
// clip read from 16-bit PCM round-trips bit-exactly.
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

// Band-limited windowed-sinc resampling (Kaiser beta=8, 32 taps per side).
// Output length = round(len * target / src). Identity when rates match.
AudioClip resample(const AudioClip& clip, int target_hz);

// Scale so max |sample| = 1; all-zero clips pass through unchanged.
AudioClip peak_normalize(const AudioClip& clip);

// Frame-energy activity detector. A frame is active when its energy is at
// least rel_energy_threshold times the max frame energy. Active regions
// closer than merge_gap_ms are merged, then padded by pad_ms and clamped.
// All-zero clips yield no ranges.
std::vector<SampleRange> detect_activity(const AudioClip& clip, const ActivityConfig& cfg = {});

// Concatenation of the active ranges, in order.
AudioClip trim_to_activity(const AudioClip& clip, const std::vector<SampleRange>& ranges);

}  // namespace cough
