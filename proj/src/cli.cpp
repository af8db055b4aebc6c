#include "cough/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "cough/audio.hpp"
#include "cough/augment.hpp"
#include "cough/error.hpp"
#include "cough/eval.hpp"
#include "cough/features.hpp"
#include "cough/gradcheck.hpp"
#include "cough/manifest.hpp"
#include "cough/pipeline_config.hpp"
#include "cough/rng.hpp"
#include "cough/synth.hpp"
#include "cough/training.hpp"
#include "cough/util.hpp"
#include "json.hpp"

namespace cough::cli {

namespace fs = std::filesystem;

namespace {

constexpr int kPipelineRateHz = 16000;

PipelineConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return default_pipeline_config();
  return load_pipeline_config(path);
}

// read -> resample -> activity trim -> peak normalize; nullopt when the
// clip has no active region
std::optional<AudioClip> condition_clip(const fs::path& path, const std::string& id,
                                        const ActivityConfig& activity) {
  AudioClip clip = read_wav(path, id);
  clip = resample(clip, kPipelineRateHz);
  std::vector<SampleRange> ranges;
  try {
    ranges = detect_activity(clip, activity);
  } catch (const Error& e) {
    if (e.kind() != "ClipTooShort") throw;
    ranges = {{0, clip.samples.size()}};  // shorter than one VAD frame: keep whole clip
  }
  if (ranges.empty()) return std::nullopt;
  return peak_normalize(trim_to_activity(clip, ranges));
}

struct FeaturizeOutcome {
  std::vector<std::string> skipped_ids;
  std::vector<std::string> skip_reasons;
};

FeaturizeOutcome featurize_all(const Manifest& manifest, const fs::path& out_dir,
                               const PipelineConfig& cfg, int jobs) {
  fs::create_directories(out_dir);
  std::vector<std::string> errors(manifest.rows.size());
  parallel_for(manifest.rows.size(), jobs, [&](std::size_t i) {
    const ManifestRow& row = manifest.rows[i];
    const fs::path target = out_dir / (row.clip_id + ".fc");
    try {
      if (row.path.size() > 3 && row.path.substr(row.path.size() - 3) == ".fc") {
        // row already points at a feature cache (vtlp output)
        if (!fs::exists(row.path)) throw Error("IoError", "missing cache " + row.path);
        if (fs::path(row.path) != target) atomic_write_file(target, read_file(row.path));
        return;
      }
      auto clip = condition_clip(row.path, row.clip_id, cfg.activity);
      if (!clip.has_value()) {
        errors[i] = "EmptyAfterVAD";
        return;
      }
      const auto features = feat::assemble_features(*clip, cfg.features);
      feat::write_cache(target, features);
    } catch (const Error& e) {
      errors[i] = e.kind();
    }
  });

  FeaturizeOutcome outcome;
  std::ostringstream log;
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    if (errors[i].empty()) continue;
    outcome.skipped_ids.push_back(manifest.rows[i].clip_id);
    outcome.skip_reasons.push_back(errors[i]);
    nlohmann::json j{{"clip_id", manifest.rows[i].clip_id}, {"error", errors[i]}};
    log << j.dump() << "\n";
    std::cerr << "skipped " << manifest.rows[i].clip_id << ": " << errors[i] << "\n";
  }
  atomic_write_file(out_dir / "featurize_log.jsonl", log.str());
  return outcome;
}

void write_fold_stats(const Manifest& manifest, const fs::path& out_dir,
                      const std::set<std::string>& skipped) {
  for (int k = 1; k <= 5; ++k) {
    const std::string fold = std::to_string(k);
    std::vector<feat::FeatureMatrix> mats;
    for (const auto& row : manifest.rows) {
      if (row.is_test() || row.fold == fold || skipped.contains(row.clip_id)) continue;
      mats.push_back(feat::read_cache(out_dir / (row.clip_id + ".fc")));
    }
    if (mats.empty()) continue;
    std::vector<const feat::FeatureMatrix*> ptrs;
    for (const auto& m : mats) ptrs.push_back(&m);
    feat::write_stats(out_dir / ("global_mean_fold" + fold + ".json"),
                      feat::compute_global_mean(ptrs));
  }
}

int cmd_featurize(const std::string& manifest_path, const std::string& out_dir,
                  const std::string& config_path, bool strict, int jobs) {
  const PipelineConfig cfg = load_config_or_default(config_path);
  const Manifest manifest = read_manifest(manifest_path);
  const auto outcome = featurize_all(manifest, out_dir, cfg, jobs);
  std::set<std::string> skipped(outcome.skipped_ids.begin(), outcome.skipped_ids.end());
  write_fold_stats(manifest, out_dir, skipped);
  std::cout << "featurized " << manifest.rows.size() - skipped.size() << "/"
            << manifest.rows.size() << " clips -> " << out_dir << "\n";
  if (strict && !skipped.empty()) return 2;
  return 0;
}

AudioClip load_noise_clip(const std::string& noise_dir, bool synthetic, std::size_t want_len,
                          Rng& rng) {
  if (!noise_dir.empty()) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(noise_dir))
      if (entry.path().extension() == ".wav") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error("MissingNoiseDir", "no .wav files in " + noise_dir);
    const auto& pick = files[rng.below(files.size())];
    return resample(read_wav(pick), kPipelineRateHz);
  }
  if (!synthetic)
    throw Error("MissingNoiseDir", "noise augmentation needs --noise-dir or --synthetic-noise");
  const auto color = static_cast<aug::NoiseColor>(rng.below(3));
  return aug::make_noise(color, want_len, kPipelineRateHz, rng.next_u64());
}

int cmd_augment(const std::string& manifest_path, const std::string& method,
                const std::string& out_dir, const std::string& config_path,
                const std::string& features_dir, const std::string& noise_dir,
                bool synthetic_noise, bool replace, int k_override,
                std::optional<std::uint64_t> seed_override) {
  PipelineConfig cfg = load_config_or_default(config_path);
  if (seed_override) {
    cfg.seed = *seed_override;
    cfg.augment.rng_seed = *seed_override;
  }
  if (k_override > 0) cfg.augment.k_neighbors = k_override;
  const Manifest manifest = read_manifest(manifest_path);
  fs::create_directories(out_dir);

  Manifest extended;
  if (!replace) extended.rows = manifest.rows;
  std::vector<aug::Provenance> provenance;

  if (method == "spectrum") {
    std::vector<AudioClip> positives;
    std::map<std::string, const ManifestRow*> row_of;
    for (const auto& row : manifest.rows) {
      if (row.is_test() || row.label != 1) continue;
      AudioClip clip = read_wav(row.path, row.clip_id);
      clip = peak_normalize(resample(clip, kPipelineRateHz));
      positives.push_back(std::move(clip));
      row_of[row.clip_id] = &row;
    }
    auto augmented = aug::augment_positives(positives, cfg.augment);
    for (auto& [clip, prov] : augmented) {
      const fs::path wav = fs::path(out_dir) / (clip.id + ".wav");
      write_wav(wav, clip);
      const ManifestRow* anchor = row_of.at(prov.anchor_id);
      extended.rows.push_back({clip.id, wav.string(), 1, anchor->fold});
      provenance.push_back(prov);
    }
  } else if (method == "noise") {
    for (const auto& row : manifest.rows) {
      if (row.is_test()) continue;
      Rng rng(derive_seed(cfg.seed, "noise." + row.clip_id));
      AudioClip clip = resample(read_wav(row.path, row.clip_id), kPipelineRateHz);
      const AudioClip noise = load_noise_clip(noise_dir, synthetic_noise, clip.samples.size(), rng);
      const double snr = rng.uniform(cfg.augment.snr_db_min, cfg.augment.snr_db_max);
      AudioClip noisy = aug::add_noise(clip, noise, snr);
      noisy.id = row.clip_id + "_n1";
      const fs::path wav = fs::path(out_dir) / (noisy.id + ".wav");
      write_wav(wav, noisy);
      extended.rows.push_back({noisy.id, wav.string(), row.label, row.fold});
      aug::Provenance prov;
      prov.clip_id = noisy.id;
      prov.anchor_id = row.clip_id;
      prov.method = "noise";
      prov.snr_db = snr;
      prov.seed = derive_seed(cfg.seed, "noise." + row.clip_id);
      provenance.push_back(prov);
    }
    if (replace) {
      // keep test rows when substituting the training data
      for (const auto& row : manifest.rows)
        if (row.is_test()) extended.rows.push_back(row);
    }
  } else if (method == "vtlp") {
    if (features_dir.empty())
      throw Error("BadConfig", "vtlp augmentation writes feature caches; pass --features");
    fs::create_directories(features_dir);
    for (const auto& row : manifest.rows) {
      if (row.is_test()) continue;
      Rng rng(derive_seed(cfg.seed, "vtlp." + row.clip_id));
      const double alpha = rng.uniform(cfg.augment.warp_min, cfg.augment.warp_max);
      auto clip = condition_clip(row.path, row.clip_id, cfg.activity);
      if (!clip.has_value()) {
        std::cerr << "skipped " << row.clip_id << ": EmptyAfterVAD\n";
        continue;
      }
      feat::FeatureConfig fc = cfg.features;
      fc.vtlp_alpha = alpha;
      auto features = feat::assemble_features(*clip, fc);
      const std::string new_id = row.clip_id + "_v1";
      features.clip_id = new_id;
      const fs::path cache = fs::path(features_dir) / (new_id + ".fc");
      feat::write_cache(cache, features);
      extended.rows.push_back({new_id, cache.string(), row.label, row.fold});
      aug::Provenance prov;
      prov.clip_id = new_id;
      prov.anchor_id = row.clip_id;
      prov.method = "vtlp";
      prov.alpha = alpha;
      prov.seed = derive_seed(cfg.seed, "vtlp." + row.clip_id);
      provenance.push_back(prov);
    }
  } else {
    throw Error("BadConfig", "method must be spectrum, noise or vtlp");
  }

  write_manifest(fs::path(out_dir) / "manifest.csv", extended);
  write_provenance(fs::path(out_dir) / "provenance.jsonl", provenance);
  std::cout << method << " augmentation: " << provenance.size() << " new clips, manifest "
            << (fs::path(out_dir) / "manifest.csv").string() << "\n";
  return 0;
}

train::Dataset load_dataset(const Manifest& manifest, const fs::path& features_dir) {
  std::vector<std::string> ids;
  for (const auto& row : manifest.rows) ids.push_back(row.clip_id);
  std::vector<train::ClipData> loaded(ids.size());
  parallel_for(ids.size(), 0, [&](std::size_t i) {
    const ManifestRow& row = manifest.rows[i];
    train::ClipData cd;
    cd.id = row.clip_id;
    cd.label = row.label;
    cd.features = feat::read_cache(features_dir / (row.clip_id + ".fc"));
    loaded[i] = std::move(cd);
  });
  train::Dataset data;
  for (auto& cd : loaded) data[cd.id] = std::move(cd);
  return data;
}

std::map<std::string, std::string> load_anchor_map(const std::string& provenance_path,
                                                   const std::string& manifest_path) {
  fs::path path = provenance_path;
  if (path.empty()) {
    const fs::path sibling = fs::path(manifest_path).parent_path() / "provenance.jsonl";
    if (!fs::exists(sibling)) return {};
    path = sibling;
  }
  std::map<std::string, std::string> anchor_of;
  for (const auto& p : read_provenance(path)) anchor_of[p.clip_id] = p.anchor_id;
  return anchor_of;
}

int cmd_train(const std::string& manifest_path, const std::string& features_dir,
              const std::string& config_path, const std::string& out_dir, int n_folds,
              std::optional<std::uint64_t> seed_override, int jobs,
              const std::string& provenance_path) {
  PipelineConfig cfg = load_config_or_default(config_path);
  if (seed_override) {
    cfg.seed = *seed_override;
    cfg.train.seed = *seed_override;
  }
  const Manifest manifest = read_manifest(manifest_path);
  const auto folds = build_fold_specs(manifest, n_folds);
  const auto anchor_of = load_anchor_map(provenance_path, manifest_path);

  // drop rows without caches (clips skipped at featurize time)
  Manifest present;
  for (const auto& row : manifest.rows)
    if (fs::exists(fs::path(features_dir) / (row.clip_id + ".fc"))) present.rows.push_back(row);
  const train::Dataset data = load_dataset(present, features_dir);

  std::vector<train::FoldSpec> usable;
  for (const auto& f : folds) {
    train::FoldSpec spec;
    spec.fold_id = f.fold_id;
    for (const auto& id : f.train_ids)
      if (data.contains(id)) spec.train_ids.push_back(id);
    for (const auto& id : f.val_ids)
      if (data.contains(id)) spec.val_ids.push_back(id);
    usable.push_back(std::move(spec));
  }

  fs::create_directories(out_dir);
  auto results = train::run_folds(data, usable, cfg.model, cfg.train, anchor_of, jobs);

  std::ostringstream epoch_log;
  for (const auto& r : results)
    for (const auto& es : r.history) {
      nlohmann::json j{{"fold", r.fold_id},
                       {"epoch", es.epoch},
                       {"train_loss", es.train_loss},
                       {"val_auc", es.val_auc},
                       {"wall_ms", es.wall_ms}};
      epoch_log << j.dump() << "\n";
    }
  atomic_write_file(fs::path(out_dir) / "epochs.jsonl", epoch_log.str());

  for (const auto& r : results) {
    nn::CheckpointMeta meta;
    meta.fold = r.fold_id;
    meta.epoch = r.best_epoch;
    meta.val_auc = r.best_val_auc;
    meta.loss = cfg.train.loss;
    meta.norm_mode = cfg.train.norm_mode == feat::NormMode::kGlobal ? "global" : "utt_wise";
    meta.wt_pos = cfg.train.wt_pos;
    if (cfg.train.norm_mode == feat::NormMode::kGlobal) meta.global_mean = r.train_stats.mean;
    nn::save_checkpoint(*r.model, meta,
                        fs::path(out_dir) / ("fold" + std::to_string(r.fold_id) + ".ckpt"));
  }

  const auto& best = train::select_best(results);
  nlohmann::json sel{{"best_fold", best.fold_id},
                     {"best_epoch", best.best_epoch},
                     {"best_val_auc", best.best_val_auc},
                     {"checkpoint", "fold" + std::to_string(best.fold_id) + ".ckpt"}};
  atomic_write_file(fs::path(out_dir) / "selection.json", sel.dump(2) + "\n");
  std::cout << "best fold " << best.fold_id << " val AUC " << best.best_val_auc << " (epoch "
            << best.best_epoch << ")\n";
  return 0;
}

std::vector<const ManifestRow*> subset_rows(const Manifest& manifest, const std::string& subset) {
  std::vector<const ManifestRow*> rows;
  for (const auto& row : manifest.rows) {
    if (subset == "all") {
      if (!row.is_test()) rows.push_back(&row);
    } else if (subset == "test") {
      if (row.is_test()) rows.push_back(&row);
    } else if (subset.rfind("fold", 0) == 0) {
      if (row.fold == subset.substr(4)) rows.push_back(&row);
    } else {
      throw Error("BadConfig", "subset must be all, test or fold<k>");
    }
  }
  if (rows.empty()) throw Error("BadManifest", "subset '" + subset + "' selects no rows");
  return rows;
}

int cmd_evaluate(const std::vector<std::string>& checkpoints, const std::string& manifest_path,
                 const std::string& features_dir, const std::string& subset,
                 const std::string& out_dir, double min_sensitivity) {
  if (checkpoints.empty()) throw Error("BadConfig", "evaluate needs at least one --checkpoint");
  const Manifest manifest = read_manifest(manifest_path);
  const auto rows = subset_rows(manifest, subset);

  std::vector<std::vector<eval::ScoredUtterance>> score_sets;
  for (const auto& ckpt : checkpoints) {
    auto loaded = nn::load_checkpoint(ckpt);
    const feat::NormMode mode = loaded.meta.norm_mode == "global" ? feat::NormMode::kGlobal
                                                                  : feat::NormMode::kUttWise;
    feat::NormalizationStats stats;
    stats.mean = loaded.meta.global_mean;
    stats.n_frames_seen = 1;
    std::vector<eval::ScoredUtterance> scored;
    for (const ManifestRow* row : rows) {
      const auto features = feat::read_cache(fs::path(features_dir) / (row->clip_id + ".fc"));
      const double s = eval::score_utterance(
          *loaded.model, features, mode,
          mode == feat::NormMode::kGlobal ? &stats : nullptr);
      scored.push_back({row->clip_id, row->label, s});
    }
    score_sets.push_back(std::move(scored));
  }
  const auto combined = score_sets.size() == 1 ? score_sets[0] : eval::ensemble(score_sets);

  fs::create_directories(out_dir);
  const auto report = eval::make_report(combined, min_sensitivity);
  eval::write_report(fs::path(out_dir) / "report.json", report);
  eval::write_roc_csv(fs::path(out_dir) / "roc.csv", report.roc_points);
  eval::write_scores_csv(fs::path(out_dir) / "scores.csv", combined);
  std::cout << "auc " << report.auc << " specificity@sens>=" << report.min_sensitivity << " "
            << report.specificity_at_80_sens << " (" << report.n_pos << " pos / " << report.n_neg
            << " neg)\n";
  return 0;
}

int cmd_ensemble(const std::vector<std::string>& score_files, const std::string& out_dir,
                 double min_sensitivity) {
  if (score_files.empty()) throw Error("BadConfig", "ensemble needs at least one --scores file");
  std::vector<std::vector<eval::ScoredUtterance>> sets;
  for (const auto& f : score_files) sets.push_back(eval::read_scores_csv(f));
  const auto combined = eval::ensemble(sets);
  fs::create_directories(out_dir);
  const auto report = eval::make_report(combined, min_sensitivity);
  eval::write_report(fs::path(out_dir) / "report.json", report);
  eval::write_roc_csv(fs::path(out_dir) / "roc.csv", report.roc_points);
  eval::write_scores_csv(fs::path(out_dir) / "scores.csv", combined);
  std::cout << "ensemble of " << sets.size() << ": auc " << report.auc << "\n";
  return 0;
}

int cmd_synth(const std::string& out_dir, int n_neg, int n_pos, std::uint64_t seed) {
  if (n_neg < 5 || n_pos < 5) throw Error("BadConfig", "need at least 5 clips per class");
  synth::SynthConfig cfg;
  cfg.n_neg = n_neg;
  cfg.n_pos = n_pos;
  cfg.seed = seed;
  const auto manifest = synth::generate_dataset(out_dir, cfg);
  std::cout << "wrote " << manifest.rows.size() << " clips + manifest to " << out_dir << "\n";
  return 0;
}

int cmd_gradcheck(double tol, double h) {
  const auto cases = nn::gradcheck_grid(h, tol);
  bool all_pass = true;
  for (const auto& c : cases) {
    std::printf("%-22s %-6s max_rel_err=%.3e %s\n", c.arch.c_str(), c.loss.c_str(), c.max_rel_err,
                c.pass ? "PASS" : "FAIL");
    all_pass = all_pass && c.pass;
  }
  return all_pass ? 0 : 2;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"acoustic cough screening pipeline"};
  app.require_subcommand(1);

  std::string manifest_path, out_dir, config_path, features_dir, method, noise_dir, subset = "all",
              provenance_path;
  std::vector<std::string> checkpoints, score_files;
  bool strict = false, synthetic_noise = false, replace = false;
  int jobs = 0, n_folds = 5, k_neighbors = 0, n_neg = 160, n_pos = 10;
  double tol = 1e-4, h = 1e-5, min_sensitivity = 0.8;
  std::optional<std::uint64_t> seed;

  auto* featurize = app.add_subcommand("featurize", "extract feature caches from a manifest");
  featurize->add_option("--manifest", manifest_path)->required();
  featurize->add_option("--out", out_dir)->required();
  featurize->add_option("--config", config_path);
  featurize->add_flag("--strict", strict, "fail when any clip cannot be featurized");
  featurize->add_option("--jobs", jobs);

  auto* augment = app.add_subcommand("augment", "augment training clips");
  augment->add_option("--manifest", manifest_path)->required();
  augment->add_option("--method", method)->required()->check(CLI::IsMember({"spectrum", "noise", "vtlp"}));
  augment->add_option("--out", out_dir)->required();
  augment->add_option("--config", config_path);
  augment->add_option("--features", features_dir, "feature cache dir (vtlp)");
  augment->add_option("--noise-dir", noise_dir);
  augment->add_flag("--synthetic-noise", synthetic_noise);
  augment->add_flag("--replace", replace, "substitute rows instead of extending");
  augment->add_option("--k", k_neighbors, "neighbor count for spectrum method");
  augment->add_option("--seed", seed);

  auto* train_cmd = app.add_subcommand("train", "run the k-fold training harness");
  train_cmd->add_option("--manifest", manifest_path)->required();
  train_cmd->add_option("--features", features_dir)->required();
  train_cmd->add_option("--out", out_dir)->required();
  train_cmd->add_option("--config", config_path);
  train_cmd->add_option("--folds", n_folds)->check(CLI::Range(1, 5));
  train_cmd->add_option("--seed", seed);
  train_cmd->add_option("--jobs", jobs);
  train_cmd->add_option("--provenance", provenance_path);

  auto* evaluate = app.add_subcommand("evaluate", "score clips and report ROC metrics");
  evaluate->add_option("--checkpoint", checkpoints)->required();
  evaluate->add_option("--manifest", manifest_path)->required();
  evaluate->add_option("--features", features_dir)->required();
  evaluate->add_option("--out", out_dir)->required();
  evaluate->add_option("--subset", subset);
  evaluate->add_option("--min-sensitivity", min_sensitivity);

  auto* ensemble_cmd = app.add_subcommand("ensemble", "average per-clip scores across models");
  ensemble_cmd->add_option("--scores", score_files)->required();
  ensemble_cmd->add_option("--out", out_dir)->required();
  ensemble_cmd->add_option("--min-sensitivity", min_sensitivity);

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic labeled dataset");
  synth_cmd->add_option("--out", out_dir)->required();
  synth_cmd->add_option("--n-neg", n_neg);
  synth_cmd->add_option("--n-pos", n_pos);
  synth_cmd->add_option("--seed", seed);

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference checks for every model/loss");
  gradcheck->add_option("--tol", tol);
  gradcheck->add_option("--fd-step", h);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (featurize->parsed())
      return cmd_featurize(manifest_path, out_dir, config_path, strict, jobs);
    if (augment->parsed())
      return cmd_augment(manifest_path, method, out_dir, config_path, features_dir, noise_dir,
                         synthetic_noise, replace, k_neighbors, seed);
    if (train_cmd->parsed())
      return cmd_train(manifest_path, features_dir, config_path, out_dir, n_folds, seed, jobs,
                       provenance_path);
    if (evaluate->parsed())
      return cmd_evaluate(checkpoints, manifest_path, features_dir, subset, out_dir,
                          min_sensitivity);
    if (ensemble_cmd->parsed()) return cmd_ensemble(score_files, out_dir, min_sensitivity);
    if (synth_cmd->parsed()) return cmd_synth(out_dir, n_neg, n_pos, seed.value_or(0));
    if (gradcheck->parsed()) return cmd_gradcheck(tol, h);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_validation() ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace cough::cli
