#include "kappa/stats/summary.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "kappa/error.hpp"

namespace kappa::stats {

double percentile_sorted(std::span<const double> sorted, double pct) {
  require(!sorted.empty(), Errc::EmptyGroup, "percentile of an empty group");
  const double pos = static_cast<double>(sorted.size() - 1) * pct / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Summary summarize(std::span<const double> values) {
  require(!values.empty(), Errc::EmptyGroup, "summary of an empty group");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  Summary s;
  s.n = v.size();
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  } else {
    s.single = true;
  }
  s.median = percentile_sorted(v, 50.0);
  s.p10 = percentile_sorted(v, 10.0);
  s.p90 = percentile_sorted(v, 90.0);
  return s;
}

}  // namespace kappa::stats
