#include "cough/models.hpp"

#include <algorithm>
#include <cmath>

#include "cough/error.hpp"
#include "cough/util.hpp"
#include "json.hpp"

namespace cough::nn {

using ad::Tape;
using ad::Tensor;
using ad::Value;

std::string to_string(Arch a) {
  switch (a) {
    case Arch::kLstm: return "lstm";
    case Arch::kCnn: return "cnn";
    case Arch::kMlp: return "mlp";
    case Arch::kJvae: return "jvae";
  }
  return "?";
}

std::string to_string(LstmVariant v) {
  switch (v) {
    case LstmVariant::kUni: return "uni";
    case LstmVariant::kBidir: return "bidir";
    case LstmVariant::kSeqToConcat: return "seq_to_concat";
    case LstmVariant::kSeqToLast1: return "seq_to_last1";
  }
  return "?";
}

Arch arch_from_string(const std::string& s) {
  if (s == "lstm") return Arch::kLstm;
  if (s == "cnn") return Arch::kCnn;
  if (s == "mlp") return Arch::kMlp;
  if (s == "jvae") return Arch::kJvae;
  throw Error("BadConfig", "unknown arch '" + s + "'");
}

LstmVariant variant_from_string(const std::string& s) {
  if (s == "uni") return LstmVariant::kUni;
  if (s == "bidir") return LstmVariant::kBidir;
  if (s == "seq_to_concat") return LstmVariant::kSeqToConcat;
  if (s == "seq_to_last1") return LstmVariant::kSeqToLast1;
  throw Error("BadVariant", "unknown lstm variant '" + s + "'");
}

ad::Parameter& Model::add_param(const std::string& name, Tensor init) {
  params_.emplace_back(name, std::move(init));
  return params_.back();
}

namespace {

Tensor rand_uniform(Rng& rng, std::vector<int> shape, double bound) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& x : t.v) x = rng.uniform(-bound, bound);
  return t;
}

void check_frame_batch(const Tensor& batch, const ModelConfig& cfg) {
  if (batch.shape.size() != 2 || batch.cols() != cfg.in_dim)
    throw Error("ShapeMismatch", "expected (frames, " + std::to_string(cfg.in_dim) + ") batch");
}

// ---- LSTM -----------------------------------------------------------------

class LstmModel final : public Model {
 public:
  LstmModel(const ModelConfig& cfg, std::uint64_t seed) : Model(cfg) {
    if (cfg.arch != Arch::kLstm) throw Error("BadVariant", "LstmModel needs arch=lstm");
    if (cfg.layers < 1 || cfg.hidden_dim < 1 || cfg.seq_len < 1 || cfg.context_len < 0)
      throw Error("BadConfig", "bad lstm dimensions");
    Rng rng(seed);
    const int n = cfg.hidden_dim;
    const double bound = 1.0 / std::sqrt(static_cast<double>(n));
    const bool bidir = cfg.variant == LstmVariant::kBidir;
    const int dirs = bidir ? 2 : 1;
    for (int l = 0; l < cfg.layers; ++l) {
      const int in = l == 0 ? cfg.in_dim : n * dirs;
      for (int d = 0; d < dirs; ++d) {
        const std::string prefix =
            "l" + std::to_string(l) + (bidir ? (d == 0 ? ".fwd" : ".bwd") : "");
        add_param(prefix + ".Wx", rand_uniform(rng, {4 * n, in}, bound));
        add_param(prefix + ".Wh", rand_uniform(rng, {4 * n, n}, bound));
        auto& b = add_param(prefix + ".b", rand_uniform(rng, {4 * n}, bound));
        for (int i = n; i < 2 * n; ++i) b.value.v[static_cast<std::size_t>(i)] += 1.0;  // forget gate
      }
    }
    int head_in = n * dirs;
    if (cfg.variant == LstmVariant::kSeqToConcat) head_in = n * cfg.seq_len;
    add_param("head.W", rand_uniform(rng, {cfg.out_dim, head_in}, bound));
    // pairwise-trained single-output heads carry no offset (unidentifiable)
    if (cfg.out_dim != 1) add_param("head.b", rand_uniform(rng, {cfg.out_dim}, bound));
  }

  int rows_per_window() const override {
    return (cfg_.variant == LstmVariant::kUni || cfg_.variant == LstmVariant::kBidir)
               ? cfg_.seq_len
               : 1;
  }

  Value forward(Tape& t, const Tensor& batch, bool) override {
    if (batch.shape.size() != 3 || batch.dim(1) != cfg_.window_len() ||
        batch.dim(2) != cfg_.in_dim)
      throw Error("ShapeMismatch", "expected (windows, " + std::to_string(cfg_.window_len()) +
                                       ", " + std::to_string(cfg_.in_dim) + ") batch");
    const int W = batch.dim(0);
    const int T = batch.dim(1);
    const int D = batch.dim(2);
    const int n = cfg_.hidden_dim;
    const bool bidir = cfg_.variant == LstmVariant::kBidir;
    const int dirs = bidir ? 2 : 1;

    // timestep inputs as (D, W) columns-as-windows
    std::vector<Value> xs(static_cast<std::size_t>(T));
    for (int step = 0; step < T; ++step) {
      Tensor xt = Tensor::zeros({D, W});
      for (int w = 0; w < W; ++w)
        for (int d = 0; d < D; ++d)
          xt.at(d, w) =
              batch.v[(static_cast<std::size_t>(w) * T + step) * D + d];
      xs[static_cast<std::size_t>(step)] = t.constant(std::move(xt));
    }

    std::size_t pi = 0;  // parameter cursor, mirrors construction order
    for (int l = 0; l < cfg_.layers; ++l) {
      std::vector<Value> outs(static_cast<std::size_t>(T));
      std::vector<std::vector<Value>> dir_h(static_cast<std::size_t>(dirs));
      for (int d = 0; d < dirs; ++d) {
        Value wx = t.leaf(params_[pi++]);
        Value wh = t.leaf(params_[pi++]);
        Value b = t.leaf(params_[pi++]);
        dir_h[static_cast<std::size_t>(d)] = run_direction(t, xs, wx, wh, b, n, W, d == 1);
      }
      if (bidir) {
        for (int step = 0; step < T; ++step) {
          const Value both[2] = {dir_h[0][static_cast<std::size_t>(step)],
                                 dir_h[1][static_cast<std::size_t>(step)]};
          outs[static_cast<std::size_t>(step)] = ad::concat_rows(t, both);
        }
      } else {
        outs = dir_h[0];
      }
      xs = std::move(outs);
    }

    Value head_w = t.leaf(params_[pi++]);
    auto head = [&](Value h) {
      Value logits = ad::matmul(t, head_w, h);
      if (cfg_.out_dim != 1) logits = ad::add_bias_col(t, logits, t.leaf(params_[pi]));
      return ad::transpose(t, logits);
    };
    const int ctx = cfg_.context_len;

    switch (cfg_.variant) {
      case LstmVariant::kUni:
      case LstmVariant::kBidir: {
        std::vector<Value> loss_bearing(xs.begin() + ctx, xs.end());
        Value hcat = ad::concat_cols(t, loss_bearing);  // (n*dirs, seq_len*W), t-major
        return head(hcat);                              // (seq_len*W, out)
      }
      case LstmVariant::kSeqToConcat: {
        std::vector<Value> loss_bearing(xs.begin() + ctx, xs.end());
        Value super = ad::concat_rows(t, loss_bearing);  // (n*seq_len, W)
        return head(super);                              // (W, out)
      }
      case LstmVariant::kSeqToLast1:
        return head(xs.back());  // (W, out)
    }
    throw Error("BadVariant", "unreachable");
  }

 private:
  // One directional pass over the timestep inputs; returns hidden state per step.
  static std::vector<Value> run_direction(Tape& t, const std::vector<Value>& xs, Value wx,
                                          Value wh, Value b, int n, int W, bool reversed) {
    const int T = static_cast<int>(xs.size());
    std::vector<Value> hs(static_cast<std::size_t>(T));
    Value h = t.constant(Tensor::zeros({n, W}));
    Value c = t.constant(Tensor::zeros({n, W}));
    for (int i = 0; i < T; ++i) {
      const int step = reversed ? T - 1 - i : i;
      Value gates = ad::add_bias_col(
          t, ad::add(t, ad::matmul(t, wx, xs[static_cast<std::size_t>(step)]), ad::matmul(t, wh, h)),
          b);
      Value ig = ad::sigmoid(t, ad::slice_rows(t, gates, 0, n));
      Value fg = ad::sigmoid(t, ad::slice_rows(t, gates, n, 2 * n));
      Value gg = ad::tanh_op(t, ad::slice_rows(t, gates, 2 * n, 3 * n));
      Value og = ad::sigmoid(t, ad::slice_rows(t, gates, 3 * n, 4 * n));
      c = ad::add(t, ad::mul(t, fg, c), ad::mul(t, ig, gg));
      h = ad::mul(t, og, ad::tanh_op(t, c));
      hs[static_cast<std::size_t>(step)] = h;
    }
    return hs;
  }
};

// ---- CNN ------------------------------------------------------------------

class CnnModel final : public Model {
 public:
  CnnModel(const ModelConfig& cfg, std::uint64_t seed) : Model(cfg) {
    if (cfg.arch != Arch::kCnn) throw Error("BadVariant", "CnnModel needs arch=cnn");
    if (cfg.in_dim % cfg.in_channels != 0)
      throw Error("BadShape", "in_dim must factor into in_channels");
    if (cfg.filter_len % 2 == 0) throw Error("BadShape", "filter length must be odd");
    if (cfg.layers < 1) throw Error("BadConfig", "cnn needs at least one layer");
    Rng rng(seed);
    const int ch = cfg.hidden_dim;
    const int K = cfg.filter_len;
    for (int l = 0; l < cfg.layers; ++l) {
      const int cin = l == 0 ? cfg.in_channels : ch;
      const double bound = 1.0 / std::sqrt(static_cast<double>(cin * K));
      // no conv bias: the following batchnorm absorbs any per-channel offset
      add_param("conv" + std::to_string(l) + ".W", rand_uniform(rng, {ch, cin, K}, bound));
      add_param("bn" + std::to_string(l) + ".gamma", Tensor::full({ch}, 1.0));
      add_param("bn" + std::to_string(l) + ".beta", Tensor::zeros({ch}));
      bn_.emplace_back(ch);
    }
    const double hbound = 1.0 / std::sqrt(static_cast<double>(ch));
    add_param("head.W", rand_uniform(rng, {ch, cfg.out_dim}, hbound));
    // a single-output head trained on pairwise score differences cannot
    // identify a global offset, so it carries none
    if (cfg.out_dim != 1) add_param("head.b", rand_uniform(rng, {cfg.out_dim}, hbound));
  }

  int rows_per_window() const override { return 1; }

  std::vector<std::pair<std::string, std::vector<double>*>> buffers() override {
    std::vector<std::pair<std::string, std::vector<double>*>> out;
    for (std::size_t i = 0; i < bn_.size(); ++i) {
      out.push_back({"bn" + std::to_string(i) + ".running_mean", &bn_[i].running_mean});
      out.push_back({"bn" + std::to_string(i) + ".running_var", &bn_[i].running_var});
    }
    return out;
  }

  Value forward(Tape& t, const Tensor& batch, bool training) override {
    check_frame_batch(batch, cfg_);
    const int F = batch.rows();
    const int C = cfg_.in_channels;
    const int L = cfg_.in_dim / C;

    // rows reshape to (F, C, L): channel c holds the c-th 63-wide block
    Tensor x3 = Tensor::zeros({F, C, L});
    for (int f = 0; f < F; ++f)
      for (int c = 0; c < C; ++c)
        for (int l = 0; l < L; ++l)
          x3.v[(static_cast<std::size_t>(f) * C + c) * L + l] = batch.at(f, c * L + l);
    Value x = t.constant(std::move(x3));

    std::size_t pi = 0;
    auto conv_bn = [&](Value in, std::size_t layer, bool with_relu) {
      Value w = t.leaf(params_[pi++]);
      Value gamma = t.leaf(params_[pi++]);
      Value beta = t.leaf(params_[pi++]);
      Value y = ad::batchnorm1d(t, ad::conv1d(t, in, w), gamma, beta, bn_[layer], training);
      return with_relu ? ad::relu(t, y) : y;
    };

    std::size_t layer = 0;
    x = conv_bn(x, layer++, true);
    if (cfg_.residual) {
      // identity skip over pairs of conv blocks
      while (layer + 1 < static_cast<std::size_t>(cfg_.layers)) {
        Value u = conv_bn(x, layer++, true);
        Value v = conv_bn(u, layer++, false);
        x = ad::relu(t, ad::add(t, x, v));
      }
      if (layer < static_cast<std::size_t>(cfg_.layers)) x = conv_bn(x, layer++, true);
    } else {
      while (layer < static_cast<std::size_t>(cfg_.layers)) x = conv_bn(x, layer++, true);
    }

    Value pooled = ad::pool_mean_last(t, x);  // (F, ch)
    Value head_w = t.leaf(params_[pi++]);
    Value out = ad::matmul(t, pooled, head_w);  // (F, out)
    if (cfg_.out_dim != 1) out = ad::add_bias_row(t, out, t.leaf(params_[pi++]));
    return out;
  }

 private:
  std::vector<ad::BatchNormState> bn_;
};

// ---- MLP --------------------------------------------------------------------

class MlpModel final : public Model {
 public:
  MlpModel(const ModelConfig& cfg, std::uint64_t seed) : Model(cfg) {
    if (cfg.arch != Arch::kMlp) throw Error("BadVariant", "MlpModel needs arch=mlp");
    if (cfg.layers < 0) throw Error("BadConfig", "negative layer count");
    Rng rng(seed);
    int in = cfg.in_dim;
    for (int l = 0; l < cfg.layers; ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      add_param("fc" + std::to_string(l) + ".W", rand_uniform(rng, {in, cfg.hidden_dim}, bound));
      add_param("fc" + std::to_string(l) + ".b", rand_uniform(rng, {cfg.hidden_dim}, bound));
      in = cfg.hidden_dim;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    add_param("head.W", rand_uniform(rng, {in, cfg.out_dim}, bound));
    if (cfg.out_dim != 1) add_param("head.b", rand_uniform(rng, {cfg.out_dim}, bound));
  }

  int rows_per_window() const override { return 1; }

  Value forward(Tape& t, const Tensor& batch, bool) override {
    check_frame_batch(batch, cfg_);
    Value x = t.constant(batch);
    std::size_t pi = 0;
    for (int l = 0; l < cfg_.layers; ++l) {
      Value w = t.leaf(params_[pi++]);
      Value b = t.leaf(params_[pi++]);
      x = ad::relu(t, ad::add_bias_row(t, ad::matmul(t, x, w), b));
    }
    Value out = ad::matmul(t, x, t.leaf(params_[pi++]));
    if (cfg_.out_dim != 1) out = ad::add_bias_row(t, out, t.leaf(params_[pi]));
    return out;
  }
};

}  // namespace

// ---- JVAE -------------------------------------------------------------------

JvaeModel::JvaeModel(const ModelConfig& cfg, std::uint64_t seed) : Model(cfg), noise_(seed ^ 0x9e3779b97f4a7c15ull) {
  if (cfg.arch != Arch::kJvae) throw Error("BadVariant", "JvaeModel needs arch=jvae");
  if (cfg.layers < 1) throw Error("BadConfig", "jvae needs at least one encoder layer");
  Rng rng(seed);
  const int h = cfg_.hidden_dim;
  const int zd = cfg_.latent_dim();
  int in = cfg_.in_dim;
  for (int l = 0; l < cfg_.layers; ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    add_param("enc" + std::to_string(l) + ".W", rand_uniform(rng, {in, h}, bound));
    add_param("enc" + std::to_string(l) + ".b", rand_uniform(rng, {h}, bound));
    in = h;
  }
  const double hb = 1.0 / std::sqrt(static_cast<double>(h));
  add_param("mu.W", rand_uniform(rng, {h, zd}, hb));
  add_param("mu.b", rand_uniform(rng, {zd}, hb));
  add_param("logvar.W", rand_uniform(rng, {h, zd}, hb));
  add_param("logvar.b", rand_uniform(rng, {zd}, hb));
  in = zd;
  for (int l = 0; l < cfg_.layers; ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    add_param("dec" + std::to_string(l) + ".W", rand_uniform(rng, {in, h}, bound));
    add_param("dec" + std::to_string(l) + ".b", rand_uniform(rng, {h}, bound));
    in = h;
  }
  add_param("recon.W", rand_uniform(rng, {h, cfg_.in_dim}, hb));
  add_param("recon.b", rand_uniform(rng, {cfg_.in_dim}, hb));
  const double cb = 1.0 / std::sqrt(static_cast<double>(cfg_.in_dim + zd));
  add_param("cls.W", rand_uniform(rng, {cfg_.in_dim + zd, 1}, cb));
  add_param("cls.b", rand_uniform(rng, {1}, cb));
}

JvaeValues JvaeModel::forward_jvae(Tape& t, const Tensor& batch, const Tensor* eps) {
  check_frame_batch(batch, cfg_);
  const int B = batch.rows();
  const int zd = cfg_.latent_dim();
  Value x = t.constant(batch);

  std::size_t pi = 0;
  auto linear = [&](Value in) {
    Value w = t.leaf(params_[pi++]);
    Value b = t.leaf(params_[pi++]);
    return ad::add_bias_row(t, ad::matmul(t, in, w), b);
  };

  Value hsig = x;
  for (int l = 0; l < cfg_.layers; ++l) hsig = ad::relu(t, linear(hsig));
  JvaeValues out;
  out.mu = linear(hsig);
  out.log_var = linear(hsig);

  Tensor noise;
  if (eps != nullptr) {
    noise = *eps;
  } else {
    noise = Tensor::zeros({B, zd});
    for (double& v : noise.v) v = noise_.normal();
  }
  if (noise.shape != std::vector<int>{B, zd})
    throw Error("ShapeMismatch", "jvae eps must be (batch, latent_dim)");
  out.z = ad::gaussian_sample(t, out.mu, out.log_var, noise);

  Value d = out.z;
  for (int l = 0; l < cfg_.layers; ++l) d = ad::relu(t, linear(d));
  out.x_hat = linear(d);

  const Value xz[2] = {x, out.z};
  out.y_logit = linear(ad::concat_cols(t, xz));
  out.y_prob = ad::sigmoid(t, out.y_logit);
  return out;
}

Value JvaeModel::forward(Tape& t, const Tensor& batch, bool) {
  return forward_jvae(t, batch, nullptr).y_logit;
}

std::unique_ptr<Model> build_lstm(const ModelConfig& cfg, std::uint64_t seed) {
  return std::make_unique<LstmModel>(cfg, seed);
}
std::unique_ptr<Model> build_cnn(const ModelConfig& cfg, std::uint64_t seed) {
  return std::make_unique<CnnModel>(cfg, seed);
}
std::unique_ptr<Model> build_mlp(const ModelConfig& cfg, std::uint64_t seed) {
  return std::make_unique<MlpModel>(cfg, seed);
}
std::unique_ptr<JvaeModel> build_jvae(const ModelConfig& cfg, std::uint64_t seed) {
  return std::make_unique<JvaeModel>(cfg, seed);
}

std::unique_ptr<Model> build_model(const ModelConfig& cfg, std::uint64_t seed) {
  switch (cfg.arch) {
    case Arch::kLstm: return build_lstm(cfg, seed);
    case Arch::kCnn: return build_cnn(cfg, seed);
    case Arch::kMlp: return build_mlp(cfg, seed);
    case Arch::kJvae: return build_jvae(cfg, seed);
  }
  throw Error("BadVariant", "unknown arch");
}

// ---- checkpoints -------------------------------------------------------------

namespace {

constexpr int kCheckpointVersion = 1;

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"arch", to_string(c.arch)},
          {"variant", to_string(c.variant)},
          {"layers", c.layers},
          {"hidden_dim", c.hidden_dim},
          {"seq_len", c.seq_len},
          {"context_len", c.context_len},
          {"in_dim", c.in_dim},
          {"in_channels", c.in_channels},
          {"filter_len", c.filter_len},
          {"residual", c.residual},
          {"out_dim", c.out_dim}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.arch = arch_from_string(j.at("arch").get<std::string>());
  c.variant = variant_from_string(j.at("variant").get<std::string>());
  c.layers = j.at("layers").get<int>();
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.seq_len = j.at("seq_len").get<int>();
  c.context_len = j.at("context_len").get<int>();
  c.in_dim = j.at("in_dim").get<int>();
  c.in_channels = j.at("in_channels").get<int>();
  c.filter_len = j.at("filter_len").get<int>();
  c.residual = j.at("residual").get<bool>();
  c.out_dim = j.at("out_dim").get<int>();
  return c;
}

bool config_equal(const ModelConfig& a, const ModelConfig& b) {
  return config_to_json(a) == config_to_json(b);
}

}  // namespace

void save_checkpoint(const Model& model, const CheckpointMeta& meta,
                     const std::filesystem::path& path) {
  nlohmann::json j;
  j["format_version"] = kCheckpointVersion;
  j["config"] = config_to_json(model.config());
  j["meta"] = {{"fold", meta.fold},       {"epoch", meta.epoch},
               {"val_auc", meta.val_auc}, {"loss", meta.loss},
               {"norm_mode", meta.norm_mode}, {"wt_pos", meta.wt_pos},
               {"global_mean", doubles_to_hex(meta.global_mean)}};
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : model.params())
    params.push_back(
        {{"name", p.name}, {"shape", p.value.shape}, {"data", doubles_to_hex(p.value.v)}});
  j["params"] = std::move(params);
  nlohmann::json buffers = nlohmann::json::array();
  for (auto& [name, vec] : const_cast<Model&>(model).buffers())
    buffers.push_back({{"name", name}, {"data", doubles_to_hex(*vec)}});
  j["buffers"] = std::move(buffers);
  atomic_write_file(path, j.dump(1) + "\n");
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig* expected) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error("Corrupt", "checkpoint parse: " + std::string(e.what()));
  }
  try {
    if (!j.contains("format_version") || j.at("format_version").get<int>() != kCheckpointVersion)
      throw Error("VersionMismatch", "unsupported checkpoint format version");
    const ModelConfig cfg = config_from_json(j.at("config"));
    if (expected != nullptr && !config_equal(cfg, *expected))
      throw Error("VersionMismatch", "checkpoint config does not match the requested model");

    LoadedCheckpoint out;
    out.model = build_model(cfg, 0);
    const auto& meta = j.at("meta");
    out.meta.fold = meta.at("fold").get<int>();
    out.meta.epoch = meta.at("epoch").get<int>();
    out.meta.val_auc = meta.at("val_auc").get<double>();
    out.meta.loss = meta.at("loss").get<std::string>();
    out.meta.norm_mode = meta.at("norm_mode").get<std::string>();
    out.meta.wt_pos = meta.at("wt_pos").get<double>();
    out.meta.global_mean = hex_to_doubles(meta.at("global_mean").get<std::string>());

    auto& params = out.model->params();
    const auto& jp = j.at("params");
    if (jp.size() != params.size()) throw Error("Corrupt", "checkpoint parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& entry = jp.at(i);
      if (entry.at("name").get<std::string>() != params[i].name)
        throw Error("Corrupt", "checkpoint parameter name mismatch at index " + std::to_string(i));
      if (entry.at("shape").get<std::vector<int>>() != params[i].value.shape)
        throw Error("Corrupt", "checkpoint parameter shape mismatch for " + params[i].name);
      auto data = hex_to_doubles(entry.at("data").get<std::string>());
      if (data.size() != params[i].value.v.size())
        throw Error("Corrupt", "checkpoint parameter size mismatch for " + params[i].name);
      params[i].value.v = std::move(data);
    }
    auto buffers = out.model->buffers();
    const auto& jb = j.at("buffers");
    if (jb.size() != buffers.size()) throw Error("Corrupt", "checkpoint buffer count mismatch");
    for (std::size_t i = 0; i < buffers.size(); ++i) {
      const auto& entry = jb.at(i);
      if (entry.at("name").get<std::string>() != buffers[i].first)
        throw Error("Corrupt", "checkpoint buffer name mismatch");
      auto data = hex_to_doubles(entry.at("data").get<std::string>());
      if (data.size() != buffers[i].second->size())
        throw Error("Corrupt", "checkpoint buffer size mismatch");
      *buffers[i].second = std::move(data);
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error("Corrupt", "checkpoint structure: " + std::string(e.what()));
  }
}

}  // namespace cough::nn
