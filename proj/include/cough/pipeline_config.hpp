#pragma once

#include <cstdint>
#include <filesystem>

#include "cough/audio.hpp"
#include "cough/augment.hpp"
#include "cough/features.hpp"
#include "cough/models.hpp"
#include "cough/training.hpp"

namespace cough {

// Single JSON document holding every stage's knobs plus the run seed.
// Unknown keys and type mismatches are rejected before any work starts.
struct PipelineConfig {
  std::uint64_t seed = 1234;
  ActivityConfig activity;
  feat::FeatureConfig features;
  aug::AugmentConfig augment;
  nn::ModelConfig model;
  train::TrainConfig train;
  double min_sensitivity = 0.8;
};

PipelineConfig default_pipeline_config();
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
PipelineConfig pipeline_config_from_json_text(const std::string& text);
void write_pipeline_config(const std::filesystem::path& path, const PipelineConfig& cfg);

}  // namespace cough
