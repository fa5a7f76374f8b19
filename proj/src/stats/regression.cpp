#include "kappa/stats/regression.hpp"

#include <gsl/gsl_sf_gamma.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "../core/gsl_quiet.hpp"
#include "kappa/error.hpp"

namespace kappa::stats {

std::string_view fit_model_name(FitModel model) noexcept {
  return model == FitModel::linear ? "linear" : "logarithmic";
}

double t_test_p_value(double t, double dof) {
  require(dof > 0.0, Errc::InvalidArgument, "t_test_p_value: dof must be positive");
  if (std::isnan(t)) return 1.0;
  if (std::isinf(t)) return 0.0;
  // P(|T| > |t|) = I_{dof/(dof+t^2)}(dof/2, 1/2)
  detail::quiet_gsl();
  const double x = dof / (dof + t * t);
  return std::clamp(gsl_sf_beta_inc(0.5 * dof, 0.5, x), 0.0, 1.0);
}

RegressionFit linear_fit(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), Errc::DimensionMismatch, "linear_fit: x and y differ in length");
  const std::size_t n = x.size();
  if (n < 2) fail(Errc::DegenerateX, "linear_fit: need at least 2 points");
  const double nd = static_cast<double>(n);
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / nd;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / nd;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  const double x_scale = std::max(std::fabs(mx), 1e-300);
  if (!(sxx > 1e-24 * nd * x_scale * x_scale) || !std::isfinite(sxx)) {
    fail(Errc::DegenerateX, "linear_fit: x is constant");
  }

  RegressionFit fit;
  fit.model = FitModel::linear;
  fit.n = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;

  double ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ss_res += r * r;
  }
  fit.rmse = std::sqrt(ss_res / nd);

  if (syy == 0.0) {
    fit.slope = 0.0;
    fit.intercept = my;
    fit.r_squared = 0.0;
    fit.p_value = 1.0;
    fit.rmse = 0.0;
    return fit;
  }
  fit.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  if (n < 3) {
    fit.p_value = 1.0;
    return fit;
  }
  const double dof = nd - 2.0;
  const double se = std::sqrt(ss_res / dof / sxx);
  const double t = se > 0.0 ? fit.slope / se : (fit.slope == 0.0 ? 0.0 : HUGE_VAL);
  fit.p_value = t_test_p_value(t, dof);
  return fit;
}

RegressionFit log_fit(std::span<const double> x, std::span<const double> y) {
  std::vector<double> lx(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0)) fail(Errc::NonpositiveX, "log_fit: x must be positive");
    lx[i] = std::log(x[i]);
  }
  RegressionFit fit = linear_fit(lx, y);
  fit.model = FitModel::logarithmic;
  return fit;
}

std::vector<double> mid_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j + 1);  // mean of 1-based i+1 .. j
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

double spearman_rho(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), Errc::DimensionMismatch, "spearman_rho: x and y differ in length");
  require(x.size() >= 3, Errc::InvalidArgument, "spearman_rho: need at least 3 points");
  const auto rx = mid_ranks(x);
  const auto ry = mid_ranks(y);
  const double m = 0.5 * static_cast<double>(x.size() + 1);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - m) * (ry[i] - m);
    sxx += (rx[i] - m) * (rx[i] - m);
    syy += (ry[i] - m) * (ry[i] - m);
  }
  if (sxx == 0.0 || syy == 0.0) fail(Errc::DegenerateInput, "spearman_rho: constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace kappa::stats
