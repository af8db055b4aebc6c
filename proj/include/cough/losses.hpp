#pragma once

#include <span>

#include "cough/autodiff.hpp"
#include "cough/models.hpp"

namespace cough::nn {

struct JvaeLossWeights {
  double lambda1 = 1.0;   // reconstruction MSE
  double lambda2 = 10.0;  // classification BCE
  double lambda3 = 0.1;   // KL divergence
};

// Mean cross-entropy over frames with positive-label terms weighted wt_pos
// (weighted mean: wt_pos for label 1, 1 for label 0). logits (N,2).
ad::Value weighted_ce(ad::Tape& t, ad::Value logits, std::span<const int> labels, double wt_pos);

// Pairwise AUC surrogate on utterance scalars:
//   BCE(sigmoid(v_p - v_n), 1) + BCE(sigmoid(v_n - v_p), 0)
// in stable softplus form. The two terms are algebraically equal; both are
// kept so the total carries the factor of two.
ad::Value auroc_loss(ad::Tape& t, ad::Value v_p, ad::Value v_n);

// lambda1 * MSE(x, x_hat) + lambda2 * BCE(y_prob, y) + lambda3 * KLD, where
// KLD = -1/2 sum_d (1 + log_var - mu^2 - exp(log_var)) averaged over the
// batch. MSE is the mean over dims and batch; BCE is a weighted mean with
// wt_pos on positive frames.
ad::Value jvae_loss(ad::Tape& t, ad::Value x, const JvaeValues& out, std::span<const int> labels,
                    const JvaeLossWeights& w, double wt_pos = 1.0);

}  // namespace cough::nn
