#pragma once

#include <cstddef>
#include <span>

namespace kappa::stats {

/// Descriptive statistics of one group of trial outcomes.
struct Summary {
  double median = 0.0;
  double mean = 0.0;
  double std = 0.0;  // sample std (n - 1); 0 when n == 1
  double p10 = 0.0;
  double p90 = 0.0;
  std::size_t n = 0;
  bool single = false;  // n == 1, std undefined and reported as 0
};

/// Percentile by linear interpolation between order statistics at
/// position (n - 1) * pct / 100 of the sorted sample.
double percentile_sorted(std::span<const double> sorted, double pct);

/// Throws EmptyGroup on empty input.
Summary summarize(std::span<const double> values);

}  // namespace kappa::stats
