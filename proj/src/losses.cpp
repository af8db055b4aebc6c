#include "cough/losses.hpp"

#include <vector>

#include "cough/error.hpp"

namespace cough::nn {

using ad::Tape;
using ad::Value;

Value weighted_ce(Tape& t, Value logits, std::span<const int> labels, double wt_pos) {
  std::vector<double> weights(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1)
      throw Error("BadLabel", "labels must be binary, got " + std::to_string(labels[i]));
    weights[i] = labels[i] == 1 ? wt_pos : 1.0;
  }
  return ad::softmax_ce(t, logits, labels, weights);
}

Value auroc_loss(Tape& t, Value v_p, Value v_n) {
  // BCE(sigmoid(d), 1) = softplus(-d); BCE(sigmoid(-d), 0) = softplus(-d)
  const Value term_pos = ad::softplus(t, ad::mul_scalar(t, ad::sub(t, v_p, v_n), -1.0));
  const Value term_neg = ad::softplus(t, ad::sub(t, v_n, v_p));
  return ad::sum_all(t, ad::add(t, term_pos, term_neg));
}

Value jvae_loss(Tape& t, Value x, const JvaeValues& out, std::span<const int> labels,
                const JvaeLossWeights& w, double wt_pos) {
  const int batch = t.val(x).rows();
  if (static_cast<int>(labels.size()) != batch)
    throw Error("ShapeMismatch", "jvae_loss label count != batch");

  // reconstruction: mean over batch and dims
  const Value diff = ad::sub(t, x, out.x_hat);
  const Value mse = ad::mean_all(t, ad::mul(t, diff, diff));

  // per-sample BCE from the logit: softplus(l) - y*l, weighted mean
  double wsum = 0.0;
  std::vector<double> ys(labels.size()), ws(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw Error("BadLabel", "labels must be binary");
    ys[i] = static_cast<double>(labels[i]);
    ws[i] = labels[i] == 1 ? wt_pos : 1.0;
    wsum += ws[i];
  }
  const Value sp = ad::softplus(t, out.y_logit);                       // (B,1)
  const Value yl = ad::mul(t, out.y_logit, t.constant(ad::Tensor::from({batch, 1}, ys)));
  const Value per_sample = ad::sub(t, sp, yl);                         // (B,1)
  for (double& v : ws) v /= wsum;
  const Value bce =
      ad::sum_all(t, ad::mul(t, per_sample, t.constant(ad::Tensor::from({batch, 1}, ws))));

  // KLD vs standard normal, closed form, averaged over the batch
  const Value mu2 = ad::mul(t, out.mu, out.mu);
  const Value ev = ad::exp_op(t, out.log_var);
  Value inner = ad::add_scalar(t, ad::sub(t, ad::sub(t, out.log_var, mu2), ev), 1.0);
  const Value kld = ad::mul_scalar(t, ad::mean_all(t, ad::sum_cols(t, inner)), -0.5);

  Value total = ad::mul_scalar(t, mse, w.lambda1);
  total = ad::add(t, total, ad::mul_scalar(t, bce, w.lambda2));
  total = ad::add(t, total, ad::mul_scalar(t, kld, w.lambda3));
  return total;
}

}  // namespace cough::nn
