#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace kappa::stats {

enum class FitModel { linear, logarithmic };

std::string_view fit_model_name(FitModel model) noexcept;

struct RegressionFit {
  FitModel model = FitModel::linear;
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
  double p_value = 1.0;  // two-sided t-test on the slope, n - 2 dof
  double rmse = 0.0;     // sqrt(SS_res / n)
  std::size_t n = 0;
};

/// OLS of y = a + b x. Throws DegenerateX when x is constant or n < 2.
/// Constant y gives R^2 = 0 and p = 1. With n = 2 the p-value is 1.
RegressionFit linear_fit(std::span<const double> x, std::span<const double> y);

/// OLS of y = a + b ln(x). Throws NonpositiveX for any x <= 0.
RegressionFit log_fit(std::span<const double> x, std::span<const double> y);

/// Two-sided p-value of a t statistic with `dof` degrees of freedom.
double t_test_p_value(double t, double dof);

/// Pearson correlation of mid-ranks. Throws DegenerateInput when either
/// series is constant, InvalidArgument when n < 3 or the lengths differ.
double spearman_rho(std::span<const double> x, std::span<const double> y);

/// Average ranks (1-based), ties sharing the mean of their positions.
std::vector<double> mid_ranks(std::span<const double> values);

}  // namespace kappa::stats
