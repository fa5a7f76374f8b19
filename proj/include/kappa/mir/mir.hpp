#pragma once

#include <vector>

#include "kappa/dataset.hpp"
#include "kappa/mir/entropy.hpp"
#include "kappa/types.hpp"

namespace kappa::mir {

struct MirReport {
  double mir_bits_per_sample = 0.0;
  double mir_kbits_per_sec = 0.0;
  double logdet_bits = 0.0;  // log2 |det W|
  std::vector<double> h_x;   // per-channel entropies, bits
  std::vector<double> h_y;   // per-component entropies, bits
  double srate = 0.0;
  Estimator estimator = Estimator::mspacing;
};

/// bits/sample -> kbits/sec.
double mir_rate(double mir_bits_per_sample, double srate);

/// log2 |det W| via LU. Throws SingularUnmixing when it is not finite.
double log2_abs_det(const Matrix& w);

/// Entropy of every row of `samples`, in bits.
std::vector<double> row_entropies(const Matrix& samples, const EntropyConfig& config = {});

/// Mutual information reduction of y = W x:
///   log2|det W| + sum_i h(x_i) - sum_i h(y_i).
MirReport mir(const EegDataset& dataset, const Matrix& total_unmixing, const EntropyConfig& config = {});

/// Same, with the channel entropies supplied (e.g. cached across trials).
MirReport mir(const EegDataset& dataset, const Matrix& total_unmixing, std::vector<double> h_x,
              const EntropyConfig& config = {});

}  // namespace kappa::mir
