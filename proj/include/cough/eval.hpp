#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cough/features.hpp"
#include "cough/models.hpp"

namespace cough::eval {

struct ScoredUtterance {
  std::string clip_id;
  int label = 0;       // 0 non-target, 1 target
  double score = 0.0;  // in [0,1]
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
};

struct EvalReport {
  double auc = 0.0;
  double specificity_at_80_sens = 0.0;
  double spec_threshold = 0.0;
  double min_sensitivity = 0.8;
  int n_pos = 0;
  int n_neg = 0;
  std::vector<RocPoint> roc_points;
};

// One aggregated score in [0,1] per clip. CE models average the softmax
// positive-class probability over all loss-bearing outputs; single-output
// models apply a sigmoid to the mean raw output; the JVAE averages its
// per-frame class probability. Normalization must match training.
double score_utterance(nn::Model& model, const feat::FeatureMatrix& raw, feat::NormMode mode,
                       const feat::NormalizationStats* stats = nullptr);

// ROC from all distinct thresholds (prediction positive when score >=
// threshold), endpoints (0,0) and (1,1) included.
std::vector<RocPoint> roc_curve(const std::vector<ScoredUtterance>& scored);

// Trapezoidal area under the ROC; equals the Mann-Whitney statistic
// (fraction of pos/neg pairs correctly ordered, ties counted 1/2).
double auc(const std::vector<ScoredUtterance>& scored);

// Maximum specificity over thresholds achieving sensitivity >=
// min_sensitivity; thresholds scanned at midpoints between consecutive
// distinct scores plus sentinels beyond both ends.
std::pair<double, double> specificity_at_sensitivity(const std::vector<ScoredUtterance>& scored,
                                                     double min_sensitivity = 0.8);

// Per-clip arithmetic mean of scores across models. Every set must cover
// the same clip ids with the same labels.
std::vector<ScoredUtterance> ensemble(const std::vector<std::vector<ScoredUtterance>>& score_sets);

EvalReport make_report(const std::vector<ScoredUtterance>& scored, double min_sensitivity = 0.8);

void write_report(const std::filesystem::path& path, const EvalReport& report);
void write_roc_csv(const std::filesystem::path& path, const std::vector<RocPoint>& points);
void write_scores_csv(const std::filesystem::path& path,
                      const std::vector<ScoredUtterance>& scored);
std::vector<ScoredUtterance> read_scores_csv(const std::filesystem::path& path);

}  // namespace cough::eval
