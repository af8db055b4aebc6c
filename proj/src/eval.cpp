#include "cough/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "cough/error.hpp"
#include "cough/training.hpp"
#include "cough/util.hpp"
#include "json.hpp"

namespace cough::eval {

namespace {

void require_both_classes(const std::vector<ScoredUtterance>& scored) {
  int n_pos = 0, n_neg = 0;
  for (const auto& s : scored) (s.label == 1 ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0)
    throw Error("SingleClass", "metrics need at least one positive and one negative");
}

}  // namespace

double score_utterance(nn::Model& model, const feat::FeatureMatrix& raw, feat::NormMode mode,
                       const feat::NormalizationStats* stats) {
  const auto& mc = model.config();
  if (raw.cols != static_cast<std::size_t>(mc.in_dim))
    throw Error("ShapeMismatch", "feature width " + std::to_string(raw.cols) +
                                     " does not match model input " + std::to_string(mc.in_dim));
  const auto normalized = feat::normalize(raw, mode, stats);

  ad::Tape tape;
  ad::Tensor batch;
  if (mc.is_sequence_model()) {
    auto windows = train::make_sequences(normalized, mc.seq_len, mc.context_len);
    batch = ad::Tensor::zeros({static_cast<int>(windows.size()), mc.window_len(), mc.in_dim});
    for (std::size_t w = 0; w < windows.size(); ++w)
      std::copy(windows[w].begin(), windows[w].end(),
                batch.v.begin() + static_cast<std::ptrdiff_t>(w * windows[w].size()));
  } else {
    batch = ad::Tensor::zeros({static_cast<int>(normalized.rows), static_cast<int>(normalized.cols)});
    std::copy(normalized.data.begin(), normalized.data.end(), batch.v.begin());
  }

  if (mc.arch == nn::Arch::kJvae) {
    auto* jm = dynamic_cast<nn::JvaeModel*>(&model);
    // score with the posterior mean: z = mu, so scoring is deterministic
    const ad::Tensor zero_eps = ad::Tensor::zeros({batch.rows(), mc.latent_dim()});
    const auto outs = jm->forward_jvae(tape, batch, &zero_eps);
    const auto& probs = tape.val(outs.y_prob);
    double acc = 0.0;
    for (double p : probs.v) acc += p;
    return acc / static_cast<double>(probs.size());
  }

  const ad::Value logits = model.forward(tape, batch, /*training=*/false);
  const auto& out = tape.val(logits);
  if (mc.out_dim == 2) {
    // mean softmax positive-class probability over loss-bearing outputs
    double acc = 0.0;
    for (int r = 0; r < out.rows(); ++r) {
      const double a = out.at(r, 0), b = out.at(r, 1);
      const double m = std::max(a, b);
      const double pa = std::exp(a - m), pb = std::exp(b - m);
      acc += pb / (pa + pb);
    }
    return acc / static_cast<double>(out.rows());
  }
  // single-output models: sigmoid of the mean raw output
  double acc = 0.0;
  for (double v : out.v) acc += v;
  const double mean = acc / static_cast<double>(out.size());
  return mean >= 0.0 ? 1.0 / (1.0 + std::exp(-mean)) : std::exp(mean) / (1.0 + std::exp(mean));
}

std::vector<RocPoint> roc_curve(const std::vector<ScoredUtterance>& scored) {
  require_both_classes(scored);
  std::vector<ScoredUtterance> sorted = scored;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.score > b.score; });
  double n_pos = 0, n_neg = 0;
  for (const auto& s : scored) (s.label == 1 ? n_pos : n_neg)++;

  std::vector<RocPoint> points;
  points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  double tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double score = sorted[i].score;
    while (i < sorted.size() && sorted[i].score == score) {
      (sorted[i].label == 1 ? tp : fp)++;
      ++i;
    }
    points.push_back({fp / n_neg, tp / n_pos, score});
  }
  return points;
}

double auc(const std::vector<ScoredUtterance>& scored) {
  const auto points = roc_curve(scored);
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i)
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
  return area;
}

std::pair<double, double> specificity_at_sensitivity(const std::vector<ScoredUtterance>& scored,
                                                     double min_sensitivity) {
  require_both_classes(scored);
  std::vector<double> distinct;
  distinct.reserve(scored.size());
  for (const auto& s : scored) distinct.push_back(s.score);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  std::vector<double> thresholds;
  thresholds.push_back(distinct.front() - 1.0);  // everything positive
  for (std::size_t i = 1; i < distinct.size(); ++i)
    thresholds.push_back((distinct[i - 1] + distinct[i]) / 2.0);
  thresholds.push_back(distinct.back() + 1.0);  // everything negative

  double n_pos = 0, n_neg = 0;
  for (const auto& s : scored) (s.label == 1 ? n_pos : n_neg)++;

  double best_spec = -1.0, best_thr = thresholds.front();
  for (double thr : thresholds) {
    double tp = 0, tn = 0;
    for (const auto& s : scored) {
      const bool predicted_pos = s.score >= thr;
      if (s.label == 1 && predicted_pos) tp++;
      if (s.label == 0 && !predicted_pos) tn++;
    }
    const double sens = tp / n_pos;
    const double spec = tn / n_neg;
    if (sens >= min_sensitivity && spec > best_spec) {
      best_spec = spec;
      best_thr = thr;
    }
  }
  if (best_spec < 0.0)
    throw Error("SingleClass", "no threshold reaches the requested sensitivity");
  return {best_spec, best_thr};
}

std::vector<ScoredUtterance> ensemble(
    const std::vector<std::vector<ScoredUtterance>>& score_sets) {
  if (score_sets.empty()) throw Error("IdMismatch", "no score sets to ensemble");
  const auto& first = score_sets.front();
  std::map<std::string, std::pair<int, double>> acc;  // id -> (label, sum)
  for (const auto& s : first) acc[s.clip_id] = {s.label, 0.0};
  for (const auto& set : score_sets) {
    if (set.size() != first.size())
      throw Error("IdMismatch", "score sets cover different numbers of clips");
    for (const auto& s : set) {
      auto it = acc.find(s.clip_id);
      if (it == acc.end() || it->second.first != s.label)
        throw Error("IdMismatch", "score sets disagree on clip " + s.clip_id);
      it->second.second += s.score;
    }
  }
  std::vector<ScoredUtterance> out;
  out.reserve(first.size());
  for (const auto& s : first)
    out.push_back(
        {s.clip_id, s.label, acc[s.clip_id].second / static_cast<double>(score_sets.size())});
  return out;
}

EvalReport make_report(const std::vector<ScoredUtterance>& scored, double min_sensitivity) {
  EvalReport r;
  r.auc = auc(scored);
  const auto [spec, thr] = specificity_at_sensitivity(scored, min_sensitivity);
  r.specificity_at_80_sens = spec;
  r.spec_threshold = thr;
  r.min_sensitivity = min_sensitivity;
  for (const auto& s : scored) (s.label == 1 ? r.n_pos : r.n_neg)++;
  r.roc_points = roc_curve(scored);
  return r;
}

void write_report(const std::filesystem::path& path, const EvalReport& report) {
  nlohmann::json j;
  j["auc"] = report.auc;
  j["specificity_at_80_sens"] = report.specificity_at_80_sens;
  j["threshold"] = report.spec_threshold;
  j["min_sensitivity"] = report.min_sensitivity;
  j["n_pos"] = report.n_pos;
  j["n_neg"] = report.n_neg;
  atomic_write_file(path, j.dump(2) + "\n");
}

void write_roc_csv(const std::filesystem::path& path, const std::vector<RocPoint>& points) {
  std::ostringstream ss;
  ss << "fpr,tpr,threshold\n";
  ss.precision(17);
  for (const auto& p : points) ss << p.fpr << "," << p.tpr << "," << p.threshold << "\n";
  atomic_write_file(path, ss.str());
}

void write_scores_csv(const std::filesystem::path& path,
                      const std::vector<ScoredUtterance>& scored) {
  std::ostringstream ss;
  ss << "clip_id,label,score\n";
  ss.precision(17);
  for (const auto& s : scored) ss << s.clip_id << "," << s.label << "," << s.score << "\n";
  atomic_write_file(path, ss.str());
}

std::vector<ScoredUtterance> read_scores_csv(const std::filesystem::path& path) {
  std::istringstream ss(read_file(path));
  std::string line;
  if (!std::getline(ss, line) || line != "clip_id,label,score")
    throw Error("BadManifest", "bad scores csv header in " + path.string());
  std::vector<ScoredUtterance> out;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw Error("BadManifest", "bad scores csv row: " + line);
    ScoredUtterance s;
    s.clip_id = line.substr(0, c1);
    s.label = std::stoi(line.substr(c1 + 1, c2 - c1 - 1));
    s.score = std::stod(line.substr(c2 + 1));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace cough::eval
