#pragma once

#include <stdexcept>
#include <string>

namespace cough {

// Single exception type carrying a stable error kind tag. Kinds are part of
// the library contract; callers dispatch on `kind`, not on message text.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& msg)
      : std::runtime_error(kind + ": " + msg), kind_(std::move(kind)) {}

  const std::string& kind() const { return kind_; }

  // Errors caused by bad inputs (files, flags, configs) as opposed to
  // failures that occur mid-computation. The CLI maps these to exit code 1.
  bool is_validation() const {
    static const char* kinds[] = {
        "MalformedHeader", "UnsupportedEncoding", "EmptyAudio",
        "BadManifest",     "BadConfig",           "BadLabel",
        "PoolTooSmall",    "MissingNoiseDir",     "LeakageDetected",
        "SingleClass",     "IdMismatch",          "VersionMismatch",
        "BadVariant",      "BadShape",            "BadAlpha",
        "BadFrequencyRange", "MissingStats",      "EmptyDataset",
        "NotPowerOfTwo",   "UnsupportedHop",      "ClipTooShort",
        "FrameTooShort",   "EmptyClip",           "NoPositives",
        "NoNegatives",     "NonScalarOutput",     "ShapeMismatch",
    };
    for (const char* k : kinds)
      if (kind_ == k) return true;
    return false;
  }

 private:
  std::string kind_;
};

}  // namespace cough
