#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace kappa::mir {

enum class Estimator { mspacing, histogram };

std::string_view estimator_name(Estimator e) noexcept;
/// Accepts "mspacing"/"m-spacing" and "hist"/"histogram"; throws ConfigError.
Estimator parse_estimator(std::string_view text);

struct EntropyConfig {
  Estimator estimator = Estimator::mspacing;
  std::size_t hist_bins = 512;    // histogram only
  double hist_range_sd = 5.0;     // histogram range = mean +/- this many sd
};

struct EntropyEstimate {
  double value = 0.0;  // bits per sample
  std::size_t n_samples = 0;
  Estimator estimator = Estimator::mspacing;
  std::size_t param = 0;  // m for m-spacing, bin count for histogram
};

/// Differential entropy of a 1-D sample in bits.
///
/// m-spacing: sorted sample x(1..N), m = floor(sqrt N),
///   H = mean_i ln(x(min(i+m,N)) - x(max(i-m,1))) + psi(N+1) - psi(2m),
/// converted to bits. Spacings that are exactly zero (tied values) are
/// floored at 1e-12 of the sample range.
///
/// Throws InvalidArgument when N < 10 and DegenerateSignal for a constant
/// signal.
EntropyEstimate marginal_entropy(std::span<const double> signal, const EntropyConfig& config = {});

}  // namespace kappa::mir
