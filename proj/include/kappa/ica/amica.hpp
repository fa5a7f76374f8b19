#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kappa/dataset.hpp"
#include "kappa/types.hpp"

namespace kappa::ica {

struct SpheringTransform {
  Matrix matrix;  // S = C^(-1/2)
  Vector mean;    // channel means removed before applying S
};

struct SphereResult {
  SpheringTransform transform;
  Matrix sphered;
};

/// Symmetric whitening of the mean-removed channels. The covariance uses the
/// 1/n_frames normalisation. Throws RankDeficient when the smallest
/// eigenvalue is below 1e-12 of the largest.
SphereResult sphere(const Matrix& samples);
SphereResult sphere(const EegDataset& dataset);

/// Adaptive mixture of generalized Gaussians for one source:
/// q(y) = sum_j alpha_j rho_j beta_j / (2 Gamma(1/rho_j)) exp(-|beta_j (y - mu_j)|^rho_j).
struct SourceDensity {
  std::vector<double> alpha, mu, beta, rho;

  std::size_t n_mix() const noexcept { return alpha.size(); }
};

struct AmicaConfig {
  std::size_t max_iter = 3000;
  std::size_t n_mix = 3;
  double tol = 1e-7;
  double lrate0 = 0.1;        // natural-gradient step during warm-up and fallback
  std::uint64_t seed = 0;
  std::size_t min_iter = 50;
  std::size_t newton_start = 20;  // iterations of natural gradient before Newton steps
  std::size_t max_halvings = 8;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

inline constexpr double kRhoMin = 0.5;
inline constexpr double kRhoMax = 4.0;

struct IcaResult {
  SpheringTransform sphering;
  Matrix unmixing;        // B, applied to sphered data
  Matrix total_unmixing;  // W = B S
  Matrix mixing;          // A = W^-1
  std::vector<SourceDensity> densities;
  std::vector<double> ll_trace;  // mean log-likelihood of the sphered data, nats/frame; [0] is the start
  bool converged = false;
  std::size_t iterations_used = 0;
  std::size_t rejected_steps = 0;
  AmicaConfig config;
  std::string isa;  // kernel variant the result was computed with
};

/// log of the generalized-Gaussian density at y.
double gg_logpdf(double y, double mu, double beta, double rho);

/// Mean over frames of log|det B| + sum_i log q_i(b_i^T x).
/// Throws DimensionMismatch and NumericalFailure.
double loglikelihood(const Matrix& samples, const Matrix& unmixing, const std::vector<SourceDensity>& densities);

/// Fits y = B x on already-sphered samples. The returned result carries an
/// identity sphering transform. Throws InsufficientData below 2n frames and
/// NumericalFailure if the likelihood cannot be kept finite.
IcaResult amica_fit(const Matrix& sphered, const AmicaConfig& config);

/// sphere + amica_fit, with W and A expressed in channel space.
IcaResult decompose(const EegDataset& dataset, const AmicaConfig& config);

}  // namespace kappa::ica
