#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cough/features.hpp"
#include "cough/losses.hpp"
#include "cough/models.hpp"

namespace cough::train {

struct TrainConfig {
  std::string loss = "ce";  // ce | auroc | jvae
  double wt_pos = 1.0;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;  // decoupled, applied as p -= lr * wd * p
  int epochs = 30;
  int batch_size = 32;
  std::uint64_t seed = 0;
  feat::NormMode norm_mode = feat::NormMode::kUttWise;
  nn::JvaeLossWeights jvae_weights{};
};

struct FoldSpec {
  int fold_id = 0;
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
};

struct ClipData {
  std::string id;
  int label = 0;
  feat::FeatureMatrix features;  // unnormalized
};

using Dataset = std::map<std::string, ClipData>;

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_auc = 0.0;
  double wall_ms = 0.0;
};

struct FoldResult {
  int fold_id = 0;
  std::vector<EpochStats> history;
  double best_val_auc = 0.0;
  int best_epoch = 0;
  std::unique_ptr<nn::Model> model;  // parameters restored to the best epoch
  feat::NormalizationStats train_stats;  // global mean of the fold's training split
};

// Adam with decoupled weight decay (beta1 0.9, beta2 0.999, eps 1e-8).
class AdamW {
 public:
  AdamW(double lr, double weight_decay) : lr_(lr), weight_decay_(weight_decay) {}
  void step(std::vector<ad::Parameter>& params);

 private:
  double lr_;
  double weight_decay_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  int t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Windows of (context_len + seq_len) frames at the given stride (default
// seq_len). Context before frame 0 is zero-padded; a trailing partial
// window is completed by edge replication and emitted once.
std::vector<std::vector<double>> make_sequences(const feat::FeatureMatrix& m, int seq_len,
                                                int context_len = 20, int stride = 0);

// One fold's training run. Dispatches on cfg.loss; model and batch order
// derive from cfg.seed and spec.fold_id only, so distinct folds can run
// concurrently with serial-identical results.
FoldResult train_fold(const Dataset& data, const FoldSpec& spec, const nn::ModelConfig& model_cfg,
                      const TrainConfig& cfg,
                      const std::function<void(const EpochStats&)>& on_epoch = {});

// anchor_of maps augmented clip ids to their source clip; training refuses
// folds whose training split contains a clip derived from a validation
// anchor.
std::vector<FoldResult> run_folds(const Dataset& data, const std::vector<FoldSpec>& folds,
                                  const nn::ModelConfig& model_cfg, const TrainConfig& cfg,
                                  const std::map<std::string, std::string>& anchor_of = {},
                                  int jobs = 1,
                                  const std::function<void(int, const EpochStats&)>& on_epoch = {});

// Max best_val_auc, ties broken by lower fold_id.
const FoldResult& select_best(const std::vector<FoldResult>& results);

}  // namespace cough::train
