#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "cough/autodiff.hpp"
#include "cough/rng.hpp"

namespace cough::nn {

enum class Arch { kLstm, kCnn, kMlp, kJvae };
enum class LstmVariant { kUni, kBidir, kSeqToConcat, kSeqToLast1 };

std::string to_string(Arch a);
std::string to_string(LstmVariant v);
Arch arch_from_string(const std::string& s);
LstmVariant variant_from_string(const std::string& s);

struct ModelConfig {
  Arch arch = Arch::kLstm;
  LstmVariant variant = LstmVariant::kUni;
  int layers = 1;
  int hidden_dim = 48;
  int seq_len = 30;
  int context_len = 20;
  int in_dim = 189;
  int in_channels = 3;  // cnn: 189 = 63 x 3
  int filter_len = 5;   // cnn; the residual option uses 3
  bool residual = false;
  int out_dim = 2;  // 2 for CE, 1 for AUROC / JVAE

  int latent_dim() const { return (hidden_dim + 1) / 2; }  // jvae
  bool is_sequence_model() const { return arch == Arch::kLstm; }
  int window_len() const { return context_len + seq_len; }
};

struct JvaeValues {
  ad::Value x_hat;    // (B, in_dim)
  ad::Value y_logit;  // (B, 1)
  ad::Value y_prob;   // (B, 1)
  ad::Value mu;       // (B, z_dim)
  ad::Value log_var;  // (B, z_dim)
  ad::Value z;        // (B, z_dim)
};

// One classifier instance: configuration plus named parameters. Sequence
// models consume (W, context+seq, in_dim) batches and emit logits for the
// loss-bearing region only; frame models consume (F, in_dim).
class Model {
 public:
  explicit Model(const ModelConfig& cfg) : cfg_(cfg) {}
  virtual ~Model() = default;

  const ModelConfig& config() const { return cfg_; }
  std::vector<ad::Parameter>& params() { return params_; }
  const std::vector<ad::Parameter>& params() const { return params_; }

  // Rows-as-samples logits:
  //   lstm uni/bidir   -> (W * seq_len, out_dim), t-major row order
  //   lstm s2c/s2l1    -> (W, out_dim)
  //   cnn/mlp          -> (F, out_dim)
  //   jvae             -> (F, 1) classification logits
  virtual ad::Value forward(ad::Tape& t, const ad::Tensor& batch, bool training) = 0;

  // logits rows produced per window (or per frame for frame models)
  virtual int rows_per_window() const = 0;

  // non-trainable state that must survive checkpointing (batchnorm stats)
  virtual std::vector<std::pair<std::string, std::vector<double>*>> buffers() { return {}; }

  std::int64_t n_scalar_params() const {
    std::int64_t n = 0;
    for (const auto& p : params_) n += static_cast<std::int64_t>(p.value.size());
    return n;
  }

 protected:
  ad::Parameter& add_param(const std::string& name, ad::Tensor init);
  ModelConfig cfg_;
  std::vector<ad::Parameter> params_;
};

// JVAE extension: full heads. eps, when given, freezes the latent noise
// (used by gradient checks); otherwise the model draws from its own stream.
class JvaeModel;

std::unique_ptr<Model> build_lstm(const ModelConfig& cfg, std::uint64_t seed);
std::unique_ptr<Model> build_cnn(const ModelConfig& cfg, std::uint64_t seed);
std::unique_ptr<Model> build_mlp(const ModelConfig& cfg, std::uint64_t seed);
std::unique_ptr<JvaeModel> build_jvae(const ModelConfig& cfg, std::uint64_t seed);

// Dispatch on cfg.arch.
std::unique_ptr<Model> build_model(const ModelConfig& cfg, std::uint64_t seed);

class JvaeModel : public Model {
 public:
  JvaeModel(const ModelConfig& cfg, std::uint64_t seed);

  JvaeValues forward_jvae(ad::Tape& t, const ad::Tensor& batch, const ad::Tensor* eps = nullptr);
  ad::Value forward(ad::Tape& t, const ad::Tensor& batch, bool training) override;
  int rows_per_window() const override { return 1; }

 private:
  Rng noise_;
};

struct CheckpointMeta {
  int fold = 0;
  int epoch = 0;
  double val_auc = 0.0;
  std::string loss = "ce";
  std::string norm_mode = "utt_wise";
  double wt_pos = 1.0;
  std::vector<double> global_mean;  // present when norm_mode == "global"
};

// Structured text checkpoint: metadata plus named parameter arrays encoded
// as hex-encoded IEEE-754 doubles; round-trips bit-exactly.
void save_checkpoint(const Model& model, const CheckpointMeta& meta,
                     const std::filesystem::path& path);

struct LoadedCheckpoint {
  std::unique_ptr<Model> model;
  CheckpointMeta meta;
};

// Throws VersionMismatch on format or (when expected is non-null)
// configuration disagreement; Corrupt on damaged payloads.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                 const ModelConfig* expected = nullptr);

}  // namespace cough::nn
