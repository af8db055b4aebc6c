#pragma once

#include <cstdint>
#include <filesystem>

#include "cough/audio.hpp"
#include "cough/manifest.hpp"

namespace cough::synth {

struct SynthConfig {
  int n_neg = 160;
  int n_pos = 10;  // default 16:1 imbalance
  std::uint64_t seed = 0;
  int sample_rate_hz = 16000;
};

// One synthetic cough-like clip. Class 0 is a single burst of band-passed
// noise in 1-4 kHz with a shallow spectral tilt; class 1 is a short train
// of 2-3 bursts in 0.2-1.5 kHz with a steeper tilt and slower decay, so the
// classes differ both in band (survives global normalization) and in
// temporal envelope (survives per-utterance mean removal). Durations are
// uniform in 0.5-2.0 s.
AudioClip make_clip(int label, std::uint64_t seed, int sample_rate_hz = 16000);

// Writes WAVs plus manifest.csv with a stratified 5-fold assignment.
Manifest generate_dataset(const std::filesystem::path& out_dir, const SynthConfig& cfg);

}  // namespace cough::synth
