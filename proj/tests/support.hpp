#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "cough/audio.hpp"
#include "cough/rng.hpp"

namespace testsup {

// unique scratch directory, removed on destruction
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("cough_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline cough::AudioClip make_tone(double freq_hz, int sr, std::size_t n, double amp = 0.8,
                                  const std::string& id = "tone") {
  cough::AudioClip clip;
  clip.id = id;
  clip.sample_rate_hz = sr;
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    clip.samples[i] = amp * std::sin(2.0 * M_PI * freq_hz * static_cast<double>(i) / sr);
  return clip;
}

inline cough::AudioClip make_noise_clip(std::uint64_t seed, int sr, std::size_t n,
                                        double amp = 0.5, const std::string& id = "noise") {
  cough::Rng rng(seed);
  cough::AudioClip clip;
  clip.id = id;
  clip.sample_rate_hz = sr;
  clip.samples.resize(n);
  for (auto& x : clip.samples) x = amp * rng.normal();
  return clip;
}

}  // namespace testsup
