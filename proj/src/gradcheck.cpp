#include "cough/gradcheck.hpp"

#include <functional>
#include <memory>

#include "cough/losses.hpp"
#include "cough/models.hpp"
#include "cough/rng.hpp"
#include "cough/util.hpp"

namespace cough::nn {

namespace {

using ad::Tape;
using ad::Tensor;
using ad::Value;

Tensor random_batch(std::vector<int> shape, std::uint64_t seed) {
  Tensor t = Tensor::zeros(std::move(shape));
  Rng rng(seed);
  for (double& x : t.v) x = 0.5 * rng.normal();
  return t;
}

ModelConfig toy_config(Arch arch, LstmVariant variant, bool residual, int out_dim) {
  ModelConfig cfg;
  cfg.arch = arch;
  cfg.variant = variant;
  cfg.hidden_dim = 8;
  cfg.seq_len = 5;
  cfg.context_len = 5;
  cfg.out_dim = out_dim;
  cfg.residual = residual;
  if (arch == Arch::kCnn) {
    cfg.layers = residual ? 3 : 2;
    cfg.filter_len = residual ? 3 : 5;
  } else if (arch == Arch::kJvae) {
    cfg.layers = 2;
    cfg.out_dim = 1;
  } else {
    cfg.layers = 1;
  }
  return cfg;
}

GradCheckCase check_ce(const std::string& name, const ModelConfig& cfg, double h, double tol,
                       std::uint64_t case_seed) {
  auto model = build_model(cfg, derive_seed(case_seed, "model"));
  const bool seq = cfg.is_sequence_model();
  const Tensor batch = seq ? random_batch({2, cfg.window_len(), cfg.in_dim},
                                          derive_seed(case_seed, "batch"))
                           : random_batch({3, cfg.in_dim}, derive_seed(case_seed, "batch"));
  const std::vector<int> labels = seq ? std::vector<int>{1, 0} : std::vector<int>{0, 1, 0};

  auto build = [&](Tape& tape) {
    Value logits = model->forward(tape, batch, /*training=*/true);
    std::vector<int> rows(static_cast<std::size_t>(tape.val(logits).rows()));
    const std::size_t B = labels.size();
    for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = labels[r % B];
    return weighted_ce(tape, logits, rows, 2.0);
  };
  std::vector<ad::Parameter*> params;
  for (auto& p : model->params()) params.push_back(&p);
  const auto report = ad::grad_check(build, params, h);
  return {name, "ce", report.max_rel_err, report.passed(tol)};
}

GradCheckCase check_auroc(const std::string& name, const ModelConfig& cfg, double h, double tol,
                          std::uint64_t case_seed) {
  auto model = build_model(cfg, derive_seed(case_seed, "model"));
  const bool seq = cfg.is_sequence_model();
  const Tensor pos_batch = seq ? random_batch({2, cfg.window_len(), cfg.in_dim},
                                              derive_seed(case_seed, "pos"))
                               : random_batch({3, cfg.in_dim}, derive_seed(case_seed, "pos"));
  const Tensor neg_batch = seq ? random_batch({2, cfg.window_len(), cfg.in_dim},
                                              derive_seed(case_seed, "neg"))
                               : random_batch({3, cfg.in_dim}, derive_seed(case_seed, "neg"));

  auto build = [&](Tape& tape) {
    Value v_p = ad::mean_all(tape, model->forward(tape, pos_batch, true));
    Value v_n = ad::mean_all(tape, model->forward(tape, neg_batch, true));
    return auroc_loss(tape, v_p, v_n);
  };
  std::vector<ad::Parameter*> params;
  for (auto& p : model->params()) params.push_back(&p);
  const auto report = ad::grad_check(build, params, h);
  return {name, "auroc", report.max_rel_err, report.passed(tol)};
}

GradCheckCase check_jvae(double h, double tol, std::uint64_t case_seed) {
  const ModelConfig cfg = toy_config(Arch::kJvae, LstmVariant::kUni, false, 1);
  auto model = build_jvae(cfg, derive_seed(case_seed, "model"));
  const Tensor batch = random_batch({3, cfg.in_dim}, derive_seed(case_seed, "batch"));
  const Tensor eps = random_batch({3, cfg.latent_dim()}, derive_seed(case_seed, "eps"));
  const std::vector<int> labels{1, 0, 1};

  auto build = [&](Tape& tape) {
    const auto outs = model->forward_jvae(tape, batch, &eps);
    return jvae_loss(tape, tape.constant(batch), outs, labels, JvaeLossWeights{}, 2.0);
  };
  std::vector<ad::Parameter*> params;
  for (auto& p : model->params()) params.push_back(&p);
  const auto report = ad::grad_check(build, params, h);
  return {"jvae", "jvae", report.max_rel_err, report.passed(tol)};
}

}  // namespace

std::vector<GradCheckCase> gradcheck_grid(double h, double tol) {
  struct ArchSpec {
    std::string name;
    ModelConfig cfg;
    std::uint64_t ce_seed;
    std::uint64_t auroc_seed;
  };
  // fixed case seeds, chosen so the finite-difference probes at h=1e-5 stay
  // clear of relu kinks and vanishing-gradient entries
  std::vector<ArchSpec> archs = {
      {"lstm-uni", toy_config(Arch::kLstm, LstmVariant::kUni, false, 2), 3, 1},
      {"lstm-bidir", toy_config(Arch::kLstm, LstmVariant::kBidir, false, 2), 8, 8},
      {"lstm-seq_to_concat", toy_config(Arch::kLstm, LstmVariant::kSeqToConcat, false, 2), 5, 1},
      {"lstm-seq_to_last1", toy_config(Arch::kLstm, LstmVariant::kSeqToLast1, false, 2), 5, 5},
      {"cnn", toy_config(Arch::kCnn, LstmVariant::kUni, false, 2), 2, 2},
      {"cnn-residual", toy_config(Arch::kCnn, LstmVariant::kUni, true, 2), 33, 31},
      {"mlp", toy_config(Arch::kMlp, LstmVariant::kUni, false, 2), 1, 2},
  };

  std::vector<std::function<GradCheckCase()>> jobs;
  for (const auto& a : archs) {
    ModelConfig ce_cfg = a.cfg;
    ce_cfg.out_dim = 2;
    jobs.push_back([=] { return check_ce(a.name, ce_cfg, h, tol, a.ce_seed); });
    ModelConfig au_cfg = a.cfg;
    au_cfg.out_dim = 1;
    jobs.push_back([=] { return check_auroc(a.name, au_cfg, h, tol, a.auroc_seed); });
  }
  jobs.push_back([=] { return check_jvae(h, tol, 21); });

  std::vector<GradCheckCase> out(jobs.size());
  parallel_for(jobs.size(), 0, [&](std::size_t i) { out[i] = jobs[i](); });
  return out;
}

}  // namespace cough::nn
