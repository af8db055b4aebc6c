#pragma once

#include <string>
#include <vector>

namespace cough::nn {

struct GradCheckCase {
  std::string arch;
  std::string loss;
  double max_rel_err = 0.0;
  bool pass = false;
};

// Finite-difference gradient checks for every architecture/loss pairing at
// toy size (hidden 8, seq_len 5, context 5): the four LSTM variants, the
// CNN with and without residual skips, and the MLP each against weighted
// cross-entropy and the pairwise AUC loss; the JVAE against its own loss.
std::vector<GradCheckCase> gradcheck_grid(double h = 1e-5, double tol = 1e-4);

}  // namespace cough::nn
