#include "kappa/mir/entropy.hpp"

#include <gsl/gsl_sf_psi.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "../core/gsl_quiet.hpp"
#include "kappa/error.hpp"

namespace kappa::mir {
namespace {

double mspacing_nats(std::vector<double>& x, std::size_t& m_out) {
  detail::quiet_gsl();
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  const auto m = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  m_out = m;
  const double floor_spacing = 1e-12 * (x.back() - x.front());
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t hi = std::min(i + m, n - 1);
    const std::size_t lo = i >= m ? i - m : 0;
    const double d = x[hi] - x[lo];
    acc += std::log(d > 0.0 ? d : floor_spacing);
  }
  return acc / static_cast<double>(n) + gsl_sf_psi(static_cast<double>(n) + 1.0) -
         gsl_sf_psi(2.0 * static_cast<double>(m));
}

double histogram_nats(std::span<const double> x, std::size_t bins, double range_sd) {
  require(bins >= 2, Errc::ConfigError, "histogram estimator needs at least 2 bins");
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / n);
  if (!(sd > 0.0)) fail(Errc::DegenerateSignal, "marginal_entropy: zero variance");
  const double lo = mean - range_sd * sd;
  const double width = 2.0 * range_sd * sd / static_cast<double>(bins);
  std::vector<double> count(bins, 0.0);
  for (double v : x) {
    const double pos = std::floor((v - lo) / width);
    const auto b = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(bins - 1)));
    count[b] += 1.0;
  }
  double h = 0.0;
  for (double c : count) {
    if (c > 0.0) h -= (c / n) * std::log(c / n);
  }
  return h + std::log(width);
}

}  // namespace

std::string_view estimator_name(Estimator e) noexcept {
  return e == Estimator::mspacing ? "m-spacing" : "histogram";
}

Estimator parse_estimator(std::string_view text) {
  if (text == "mspacing" || text == "m-spacing") return Estimator::mspacing;
  if (text == "hist" || text == "histogram") return Estimator::histogram;
  fail(Errc::ConfigError, "unknown entropy estimator '" + std::string(text) + "' (expected mspacing or hist)");
}

EntropyEstimate marginal_entropy(std::span<const double> signal, const EntropyConfig& config) {
  if (signal.size() < 10) fail(Errc::InvalidArgument, "marginal_entropy: need at least 10 samples");
  double lo = signal[0], hi = signal[0], sum = 0.0;
  for (double v : signal) {
    if (!std::isfinite(v)) fail(Errc::InvalidArgument, "marginal_entropy: non-finite sample");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    sum += v;
  }
  const double mean = sum / static_cast<double>(signal.size());
  if (hi - lo < 1e-12 * std::fabs(mean) + 1e-300) fail(Errc::DegenerateSignal, "marginal_entropy: constant signal");

  EntropyEstimate est;
  est.n_samples = signal.size();
  est.estimator = config.estimator;
  double nats;
  if (config.estimator == Estimator::mspacing) {
    std::vector<double> x(signal.begin(), signal.end());
    nats = mspacing_nats(x, est.param);
  } else {
    est.param = config.hist_bins;
    nats = histogram_nats(signal, config.hist_bins, config.hist_range_sd);
  }
  est.value = nats / std::numbers::ln2;
  if (!std::isfinite(est.value)) fail(Errc::NumericalFailure, "marginal_entropy: non-finite estimate");
  return est;
}

}  // namespace kappa::mir
