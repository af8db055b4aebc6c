#include "cough/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "cough/error.hpp"
#include "cough/eval.hpp"
#include "cough/rng.hpp"
#include "cough/util.hpp"

namespace cough::train {

using ad::Tape;
using ad::Tensor;
using ad::Value;

void AdamW::step(std::vector<ad::Parameter>& params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.value.size(), 0.0);
      v_.emplace_back(p.value.size(), 0.0);
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    for (std::size_t j = 0; j < p.value.v.size(); ++j) {
      const double g = p.grad.v[j];
      m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
      v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
      const double mhat = m_[i][j] / bc1;
      const double vhat = v_[i][j] / bc2;
      const double prev = p.value.v[j];
      p.value.v[j] = prev - lr_ * mhat / (std::sqrt(vhat) + eps_) - lr_ * weight_decay_ * prev;
    }
  }
}

std::vector<std::vector<double>> make_sequences(const feat::FeatureMatrix& m, int seq_len,
                                                int context_len, int stride) {
  if (m.rows < 1) throw Error("EmptyClip", "make_sequences on an empty matrix");
  if (stride <= 0) stride = seq_len;
  const auto T = static_cast<std::ptrdiff_t>(m.rows);
  const auto width = m.cols;

  std::vector<std::vector<double>> windows;
  for (std::ptrdiff_t start = 0; start < T; start += stride) {
    std::vector<double> w(static_cast<std::size_t>(context_len + seq_len) * width, 0.0);
    for (std::ptrdiff_t j = -context_len; j < seq_len; ++j) {
      const std::ptrdiff_t frame = start + j;
      const auto row = static_cast<std::size_t>(j + context_len);
      if (frame < 0) continue;  // zero-padded leading context
      const auto src = static_cast<std::size_t>(std::min(frame, T - 1));  // edge-replicated tail
      std::copy_n(&m.data[src * width], width, &w[row * width]);
    }
    windows.push_back(std::move(w));
  }
  return windows;
}

namespace {

struct PreparedClip {
  const ClipData* clip = nullptr;
  feat::FeatureMatrix normalized;
};

struct FoldData {
  std::vector<PreparedClip> train;
  std::vector<PreparedClip> val;
  feat::NormalizationStats stats;  // training-split global mean
};

FoldData prepare_fold(const Dataset& data, const FoldSpec& spec, const TrainConfig& cfg) {
  auto fetch = [&](const std::string& id) -> const ClipData& {
    auto it = data.find(id);
    if (it == data.end()) throw Error("BadManifest", "clip '" + id + "' missing from dataset");
    return it->second;
  };

  FoldData fd;
  std::vector<const feat::FeatureMatrix*> train_mats;
  for (const auto& id : spec.train_ids) train_mats.push_back(&fetch(id).features);
  fd.stats = feat::compute_global_mean(train_mats);

  const feat::NormalizationStats* stats =
      cfg.norm_mode == feat::NormMode::kGlobal ? &fd.stats : nullptr;
  for (const auto& id : spec.train_ids) {
    const ClipData& c = fetch(id);
    fd.train.push_back({&c, feat::normalize(c.features, cfg.norm_mode, stats)});
  }
  for (const auto& id : spec.val_ids) {
    const ClipData& c = fetch(id);
    fd.val.push_back({&c, feat::normalize(c.features, cfg.norm_mode, stats)});
  }
  return fd;
}

double validation_auc(nn::Model& model, const std::vector<PreparedClip>& val,
                      const TrainConfig& cfg, const feat::NormalizationStats& stats) {
  std::vector<eval::ScoredUtterance> scored;
  scored.reserve(val.size());
  const feat::NormalizationStats* sp =
      cfg.norm_mode == feat::NormMode::kGlobal ? &stats : nullptr;
  for (const auto& pc : val) {
    const double s = eval::score_utterance(model, pc.clip->features, cfg.norm_mode, sp);
    scored.push_back({pc.clip->id, pc.clip->label, s});
  }
  return eval::auc(scored);
}

struct Snapshot {
  std::vector<std::vector<double>> params;
  std::vector<std::vector<double>> buffers;
};

Snapshot take_snapshot(nn::Model& model) {
  Snapshot s;
  for (const auto& p : model.params()) s.params.push_back(p.value.v);
  for (auto& [name, buf] : model.buffers()) s.buffers.push_back(*buf);
  return s;
}

void restore_snapshot(nn::Model& model, const Snapshot& s) {
  for (std::size_t i = 0; i < s.params.size(); ++i) model.params()[i].value.v = s.params[i];
  auto buffers = model.buffers();
  for (std::size_t i = 0; i < s.buffers.size(); ++i) *buffers[i].second = s.buffers[i];
}

// Expanded per-row labels for a window batch; uni/bidir emit seq_len rows
// per window in t-major order, segment and frame models one row per sample.
std::vector<int> expand_labels(const std::vector<int>& window_labels, int rows_per_window) {
  if (rows_per_window == 1) return window_labels;
  std::vector<int> out(window_labels.size() * static_cast<std::size_t>(rows_per_window));
  const std::size_t B = window_labels.size();
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = window_labels[r % B];
  return out;
}

double run_ce_or_jvae_epoch(nn::Model& model, const nn::ModelConfig& mc, const TrainConfig& cfg,
                            std::vector<std::pair<std::vector<double>, int>>& samples,
                            int sample_width, AdamW& opt, Rng& shuffle_rng) {
  // seeded Fisher-Yates, identical across reruns
  for (std::size_t i = samples.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(shuffle_rng.below(i));
    std::swap(samples[i - 1], samples[j]);
  }

  const bool jvae = cfg.loss == "jvae";
  auto* jm = jvae ? dynamic_cast<nn::JvaeModel*>(&model) : nullptr;
  double loss_sum = 0.0;
  int n_batches = 0;
  for (std::size_t off = 0; off < samples.size(); off += static_cast<std::size_t>(cfg.batch_size)) {
    const std::size_t B = std::min(static_cast<std::size_t>(cfg.batch_size), samples.size() - off);
    std::vector<int> labels(B);
    Tensor batch;
    if (mc.is_sequence_model()) {
      batch = Tensor::zeros({static_cast<int>(B), mc.window_len(), mc.in_dim});
      for (std::size_t b = 0; b < B; ++b) {
        std::copy(samples[off + b].first.begin(), samples[off + b].first.end(),
                  batch.v.begin() + static_cast<std::ptrdiff_t>(b * samples[off + b].first.size()));
        labels[b] = samples[off + b].second;
      }
    } else {
      batch = Tensor::zeros({static_cast<int>(B), sample_width});
      for (std::size_t b = 0; b < B; ++b) {
        std::copy(samples[off + b].first.begin(), samples[off + b].first.end(),
                  batch.v.begin() + static_cast<std::ptrdiff_t>(b) * sample_width);
        labels[b] = samples[off + b].second;
      }
    }

    Tape tape;
    for (auto& p : model.params()) p.zero_grad();
    Value loss;
    if (jvae) {
      const auto outs = jm->forward_jvae(tape, batch, nullptr);
      loss = nn::jvae_loss(tape, tape.constant(batch), outs, labels, cfg.jvae_weights, cfg.wt_pos);
    } else {
      Value logits = model.forward(tape, batch, /*training=*/true);
      const auto row_labels = expand_labels(labels, model.rows_per_window());
      loss = nn::weighted_ce(tape, logits, row_labels, cfg.wt_pos);
    }
    const double lv = tape.scalar(loss);
    if (!std::isfinite(lv)) throw Error("Diverged", "loss became non-finite");
    tape.backward(loss);
    opt.step(model.params());
    loss_sum += lv;
    ++n_batches;
  }
  return n_batches > 0 ? loss_sum / n_batches : 0.0;
}

// utterance scalar: mean of the model's single-output rows over all of the
// clip's windows (sequence models) or frames (frame models)
Value utterance_scalar(nn::Model& model, const nn::ModelConfig& mc, Tape& tape,
                       const feat::FeatureMatrix& normalized) {
  Tensor batch;
  if (mc.is_sequence_model()) {
    auto windows = make_sequences(normalized, mc.seq_len, mc.context_len);
    batch = Tensor::zeros({static_cast<int>(windows.size()), mc.window_len(), mc.in_dim});
    for (std::size_t w = 0; w < windows.size(); ++w)
      std::copy(windows[w].begin(), windows[w].end(),
                batch.v.begin() + static_cast<std::ptrdiff_t>(w * windows[w].size()));
  } else {
    batch = Tensor::zeros({static_cast<int>(normalized.rows), static_cast<int>(normalized.cols)});
    std::copy(normalized.data.begin(), normalized.data.end(), batch.v.begin());
  }
  Value out = model.forward(tape, batch, /*training=*/true);
  return ad::mean_all(tape, out);
}

double run_auroc_epoch(nn::Model& model, const nn::ModelConfig& mc, const TrainConfig& cfg,
                       const std::vector<const PreparedClip*>& negatives,
                       const std::vector<const PreparedClip*>& positives, AdamW& opt,
                       Rng& pair_rng) {
  double loss_sum = 0.0;
  for (const PreparedClip* neg : negatives) {
    const PreparedClip* pos = positives[pair_rng.below(positives.size())];
    Tape tape;
    for (auto& p : model.params()) p.zero_grad();
    Value v_n = utterance_scalar(model, mc, tape, neg->normalized);
    Value v_p = utterance_scalar(model, mc, tape, pos->normalized);
    Value loss = nn::auroc_loss(tape, v_p, v_n);
    const double lv = tape.scalar(loss);
    if (!std::isfinite(lv)) throw Error("Diverged", "loss became non-finite");
    tape.backward(loss);
    opt.step(model.params());
    loss_sum += lv;
  }
  return negatives.empty() ? 0.0 : loss_sum / static_cast<double>(negatives.size());
}

}  // namespace

FoldResult train_fold(const Dataset& data, const FoldSpec& spec, const nn::ModelConfig& model_cfg,
                      const TrainConfig& cfg,
                      const std::function<void(const EpochStats&)>& on_epoch) {
  if (spec.train_ids.empty() || spec.val_ids.empty())
    throw Error("BadManifest", "fold " + std::to_string(spec.fold_id) + " has an empty split");
  if (cfg.loss == "ce" && model_cfg.out_dim != 2)
    throw Error("BadConfig", "cross-entropy training needs out_dim = 2");
  if (cfg.loss == "auroc" && model_cfg.out_dim != 1)
    throw Error("BadConfig", "auroc training needs out_dim = 1");
  if (cfg.loss == "jvae" && model_cfg.arch != nn::Arch::kJvae)
    throw Error("BadConfig", "jvae loss requires the jvae architecture");

  const std::string fold_tag = "fold" + std::to_string(spec.fold_id);
  FoldData fd = prepare_fold(data, spec, cfg);

  FoldResult result;
  result.fold_id = spec.fold_id;
  result.train_stats = fd.stats;
  result.model = nn::build_model(model_cfg, derive_seed(cfg.seed, fold_tag + ".model"));
  nn::Model& model = *result.model;

  AdamW opt(cfg.learning_rate, cfg.weight_decay);
  Rng shuffle_rng(derive_seed(cfg.seed, fold_tag + ".shuffle"));
  Rng pair_rng(derive_seed(cfg.seed, fold_tag + ".pairs"));

  // training samples
  std::vector<std::pair<std::vector<double>, int>> samples;
  std::vector<const PreparedClip*> negatives, positives;
  if (cfg.loss == "auroc") {
    for (const auto& pc : fd.train)
      (pc.clip->label == 1 ? positives : negatives).push_back(&pc);
    if (positives.empty()) throw Error("NoPositives", "auroc pairing needs positives");
    if (negatives.empty()) throw Error("NoNegatives", "auroc pairing needs negatives");
  } else if (model_cfg.is_sequence_model()) {
    for (const auto& pc : fd.train)
      for (auto& w : make_sequences(pc.normalized, model_cfg.seq_len, model_cfg.context_len))
        samples.push_back({std::move(w), pc.clip->label});
  } else {
    for (const auto& pc : fd.train)
      for (std::size_t r = 0; r < pc.normalized.rows; ++r)
        samples.push_back({{pc.normalized.data.begin() + static_cast<std::ptrdiff_t>(r * pc.normalized.cols),
                            pc.normalized.data.begin() + static_cast<std::ptrdiff_t>((r + 1) * pc.normalized.cols)},
                           pc.clip->label});
  }

  Snapshot best;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double train_loss;
    if (cfg.loss == "auroc")
      train_loss = run_auroc_epoch(model, model_cfg, cfg, negatives, positives, opt, pair_rng);
    else
      train_loss = run_ce_or_jvae_epoch(model, model_cfg, cfg, samples, model_cfg.in_dim, opt,
                                        shuffle_rng);

    const double val_auc = validation_auc(model, fd.val, cfg, fd.stats);
    const auto t1 = std::chrono::steady_clock::now();

    EpochStats es;
    es.epoch = epoch;
    es.train_loss = train_loss;
    es.val_auc = val_auc;
    es.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    result.history.push_back(es);
    if (on_epoch) on_epoch(es);

    if (result.history.size() == 1 || val_auc > result.best_val_auc) {
      result.best_val_auc = val_auc;
      result.best_epoch = epoch;
      best = take_snapshot(model);
    }
  }
  restore_snapshot(model, best);
  return result;
}

std::vector<FoldResult> run_folds(const Dataset& data, const std::vector<FoldSpec>& folds,
                                  const nn::ModelConfig& model_cfg, const TrainConfig& cfg,
                                  const std::map<std::string, std::string>& anchor_of, int jobs,
                                  const std::function<void(int, const EpochStats&)>& on_epoch) {
  if (folds.empty()) throw Error("BadConfig", "no folds to run");

  // leakage gate: a training clip derived from a validation anchor
  for (const auto& fold : folds) {
    for (const auto& id : fold.train_ids) {
      auto it = anchor_of.find(id);
      if (it == anchor_of.end()) continue;
      if (std::find(fold.val_ids.begin(), fold.val_ids.end(), it->second) != fold.val_ids.end())
        throw Error("LeakageDetected", "clip '" + id + "' in fold " +
                                           std::to_string(fold.fold_id) +
                                           " training derives from validation anchor '" +
                                           it->second + "'");
    }
  }

  std::vector<FoldResult> results(folds.size());
  parallel_for(folds.size(), jobs, [&](std::size_t i) {
    results[i] = train_fold(data, folds[i], model_cfg, cfg,
                            on_epoch ? [&, i](const EpochStats& es) {
                              on_epoch(folds[i].fold_id, es);
                            } : std::function<void(const EpochStats&)>{});
  });
  return results;
}

const FoldResult& select_best(const std::vector<FoldResult>& results) {
  if (results.empty()) throw Error("BadConfig", "select_best on empty results");
  std::size_t best = 0;
  for (std::size_t i = 1; i < results.size(); ++i) {
    if (results[i].best_val_auc > results[best].best_val_auc ||
        (results[i].best_val_auc == results[best].best_val_auc &&
         results[i].fold_id < results[best].fold_id))
      best = i;
  }
  return results[best];
}

}  // namespace cough::train
