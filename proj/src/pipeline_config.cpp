#include "cough/pipeline_config.hpp"

#include <set>

#include "cough/error.hpp"
#include "cough/util.hpp"
#include "json.hpp"

namespace cough {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, _] : j.items())
    if (!allowed.contains(key))
      throw Error("BadConfig", "unknown key '" + key + "' in " + where);
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error("BadConfig", std::string("bad type for '") + key + "'");
  }
}

void parse_activity(const json& j, ActivityConfig& a) {
  reject_unknown(j, {"frame_ms", "hop_ms", "rel_energy_threshold", "merge_gap_ms", "pad_ms"},
                 "activity");
  get_if(j, "frame_ms", a.frame_ms);
  get_if(j, "hop_ms", a.hop_ms);
  get_if(j, "rel_energy_threshold", a.rel_energy_threshold);
  get_if(j, "merge_gap_ms", a.merge_gap_ms);
  get_if(j, "pad_ms", a.pad_ms);
  if (!(a.frame_ms >= a.hop_ms && a.hop_ms > 0.0))
    throw Error("BadConfig", "activity needs frame_ms >= hop_ms > 0");
  if (!(a.rel_energy_threshold > 0.0 && a.rel_energy_threshold < 1.0))
    throw Error("BadConfig", "rel_energy_threshold must be in (0,1)");
}

void parse_augment(const json& j, aug::AugmentConfig& a) {
  reject_unknown(j, {"k_neighbors", "snr_db_min", "snr_db_max", "warp_min", "warp_max"},
                 "augment");
  get_if(j, "k_neighbors", a.k_neighbors);
  get_if(j, "snr_db_min", a.snr_db_min);
  get_if(j, "snr_db_max", a.snr_db_max);
  get_if(j, "warp_min", a.warp_min);
  get_if(j, "warp_max", a.warp_max);
  if (a.k_neighbors < 1) throw Error("BadConfig", "k_neighbors must be >= 1");
  if (!(a.snr_db_min <= a.snr_db_max)) throw Error("BadConfig", "snr_db_min must be <= snr_db_max");
  if (!(a.warp_min > 0.0 && a.warp_min <= a.warp_max))
    throw Error("BadConfig", "need 0 < warp_min <= warp_max");
}

void parse_model(const json& j, nn::ModelConfig& m) {
  reject_unknown(j,
                 {"arch", "variant", "layers", "hidden_dim", "seq_len", "context_len",
                  "in_channels", "filter_len", "residual", "out_dim"},
                 "model");
  std::string arch = to_string(m.arch), variant = to_string(m.variant);
  get_if(j, "arch", arch);
  get_if(j, "variant", variant);
  m.arch = nn::arch_from_string(arch);
  m.variant = nn::variant_from_string(variant);
  get_if(j, "layers", m.layers);
  get_if(j, "hidden_dim", m.hidden_dim);
  get_if(j, "seq_len", m.seq_len);
  get_if(j, "context_len", m.context_len);
  get_if(j, "in_channels", m.in_channels);
  get_if(j, "filter_len", m.filter_len);
  get_if(j, "residual", m.residual);
  get_if(j, "out_dim", m.out_dim);
  if (m.hidden_dim < 1 || m.seq_len < 1 || m.layers < 0 || m.context_len < 0)
    throw Error("BadConfig", "bad model dimensions");
  if (m.out_dim != 1 && m.out_dim != 2) throw Error("BadConfig", "out_dim must be 1 or 2");
}

void parse_train(const json& j, train::TrainConfig& t) {
  reject_unknown(j,
                 {"loss", "wt_pos", "learning_rate", "weight_decay", "epochs", "batch_size",
                  "norm_mode", "jvae_lambda1", "jvae_lambda2", "jvae_lambda3"},
                 "train");
  get_if(j, "loss", t.loss);
  if (t.loss != "ce" && t.loss != "auroc" && t.loss != "jvae")
    throw Error("BadConfig", "loss must be ce, auroc or jvae");
  get_if(j, "wt_pos", t.wt_pos);
  get_if(j, "learning_rate", t.learning_rate);
  get_if(j, "weight_decay", t.weight_decay);
  get_if(j, "epochs", t.epochs);
  get_if(j, "batch_size", t.batch_size);
  std::string norm = t.norm_mode == feat::NormMode::kGlobal ? "global" : "utt_wise";
  get_if(j, "norm_mode", norm);
  if (norm == "utt_wise")
    t.norm_mode = feat::NormMode::kUttWise;
  else if (norm == "global")
    t.norm_mode = feat::NormMode::kGlobal;
  else
    throw Error("BadConfig", "norm_mode must be utt_wise or global");
  get_if(j, "jvae_lambda1", t.jvae_weights.lambda1);
  get_if(j, "jvae_lambda2", t.jvae_weights.lambda2);
  get_if(j, "jvae_lambda3", t.jvae_weights.lambda3);
  if (!(t.learning_rate > 0.0)) throw Error("BadConfig", "learning_rate must be positive");
  if (t.epochs < 1) throw Error("BadConfig", "epochs must be >= 1");
  if (t.batch_size < 1) throw Error("BadConfig", "batch_size must be >= 1");
  if (t.wt_pos < 1.0) throw Error("BadConfig", "wt_pos must be >= 1");
}

}  // namespace

PipelineConfig default_pipeline_config() { return PipelineConfig{}; }

PipelineConfig pipeline_config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error("BadConfig", "config parse: " + std::string(e.what()));
  }
  reject_unknown(j, {"seed", "activity", "features", "augment", "model", "train", "eval"},
                 "config root");
  PipelineConfig cfg;
  get_if(j, "seed", cfg.seed);
  if (j.contains("activity")) parse_activity(j.at("activity"), cfg.activity);
  if (j.contains("augment")) parse_augment(j.at("augment"), cfg.augment);
  if (j.contains("model")) parse_model(j.at("model"), cfg.model);
  if (j.contains("train")) parse_train(j.at("train"), cfg.train);
  if (j.contains("eval")) {
    reject_unknown(j.at("eval"), {"min_sensitivity"}, "eval");
    get_if(j.at("eval"), "min_sensitivity", cfg.min_sensitivity);
    if (!(cfg.min_sensitivity >= 0.0 && cfg.min_sensitivity <= 1.0))
      throw Error("BadConfig", "min_sensitivity must be in [0,1]");
  }
  if (j.contains("features")) {
    const auto& f = j.at("features");
    reject_unknown(f, {"n_mels", "n_cepstra"}, "features");
    get_if(f, "n_mels", cfg.features.n_mels);
    get_if(f, "n_cepstra", cfg.features.n_cepstra);
    if (cfg.features.n_mels < cfg.features.n_cepstra || cfg.features.n_cepstra < 1)
      throw Error("BadConfig", "need n_mels >= n_cepstra >= 1");
  }
  cfg.augment.rng_seed = cfg.seed;
  cfg.train.seed = cfg.seed;
  return cfg;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  return pipeline_config_from_json_text(read_file(path));
}

void write_pipeline_config(const std::filesystem::path& path, const PipelineConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["activity"] = {{"frame_ms", cfg.activity.frame_ms},
                   {"hop_ms", cfg.activity.hop_ms},
                   {"rel_energy_threshold", cfg.activity.rel_energy_threshold},
                   {"merge_gap_ms", cfg.activity.merge_gap_ms},
                   {"pad_ms", cfg.activity.pad_ms}};
  j["augment"] = {{"k_neighbors", cfg.augment.k_neighbors},
                  {"snr_db_min", cfg.augment.snr_db_min},
                  {"snr_db_max", cfg.augment.snr_db_max},
                  {"warp_min", cfg.augment.warp_min},
                  {"warp_max", cfg.augment.warp_max}};
  j["model"] = {{"arch", to_string(cfg.model.arch)},
                {"variant", to_string(cfg.model.variant)},
                {"layers", cfg.model.layers},
                {"hidden_dim", cfg.model.hidden_dim},
                {"seq_len", cfg.model.seq_len},
                {"context_len", cfg.model.context_len},
                {"in_channels", cfg.model.in_channels},
                {"filter_len", cfg.model.filter_len},
                {"residual", cfg.model.residual},
                {"out_dim", cfg.model.out_dim}};
  j["train"] = {{"loss", cfg.train.loss},
                {"wt_pos", cfg.train.wt_pos},
                {"learning_rate", cfg.train.learning_rate},
                {"weight_decay", cfg.train.weight_decay},
                {"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"norm_mode",
                 cfg.train.norm_mode == feat::NormMode::kGlobal ? "global" : "utt_wise"}};
  j["eval"] = {{"min_sensitivity", cfg.min_sensitivity}};
  atomic_write_file(path, j.dump(2) + "\n");
}

}  // namespace cough
