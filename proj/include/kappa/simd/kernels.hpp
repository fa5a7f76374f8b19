#pragma once

// Data-parallel inner loops. Each kernel has a scalar reference version and
// an AVX2/FMA version; the active one is picked once at runtime from CPUID,
// overridable with KAPPA_ICA_SIMD=scalar|avx2.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace kappa::simd {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa) noexcept;
bool isa_supported(Isa isa) noexcept;
std::vector<Isa> supported_isas();

Isa active_isa() noexcept;
/// Throws InvalidArgument if the CPU (or the build) lacks the ISA.
void set_active_isa(Isa isa);

/// Sum of a[i] * b[i].
double dot(std::span<const double> a, std::span<const double> b);

/// y += alpha * x.
void axpy(double alpha, std::span<const double> x, std::span<double> y);

inline constexpr std::size_t kMaxMixtures = 8;

/// One source's generalized-Gaussian mixture, with log_coef[j] =
/// log(alpha_j * rho_j * beta_j / (2 Gamma(1/rho_j))) precomputed.
struct MixtureParams {
  std::size_t n_mix = 1;
  double log_coef[kMaxMixtures] = {};
  double mu[kMaxMixtures] = {};
  double beta[kMaxMixtures] = {};
  double rho[kMaxMixtures] = {};
};

/// Sufficient statistics of a pass over one source row. With
/// u = beta_j (y - mu_j), a = max(|u|, kTinyResidual), pw = a^rho_j and
/// responsibilities z_j:
struct MixtureStats {
  double sum_log_q = 0.0;                   // sum_t log q(y_t)
  double z[kMaxMixtures] = {};              // sum z
  double z_fp[kMaxMixtures] = {};           // sum z * sign(u) * pw / a
  double z_w[kMaxMixtures] = {};            // sum z * pw / a^2
  double z_pw[kMaxMixtures] = {};           // sum z * pw
  double z_pw_log[kMaxMixtures] = {};       // sum z * pw * log a
  double z_pw_log2[kMaxMixtures] = {};      // sum z * pw * (log a)^2
  double score_sq = 0.0;                    // sum g^2
  double score_sq_y_sq = 0.0;               // sum g^2 y^2
};

inline constexpr double kTinyResidual = 1e-8;

/// Evaluates the mixture density on every sample of `y`, writes the score
/// g(y) = -d/dy log q(y) into `score`, and fills `stats` (overwritten).
void gg_mixture_pass(std::span<const double> y, const MixtureParams& params,
                     std::span<double> score, MixtureStats& stats);

/// sum_t log q(y_t) alone; equals MixtureStats::sum_log_q of a full pass.
double gg_mixture_loglik(std::span<const double> y, const MixtureParams& params);

/// Legendre sums for the concentric-sphere dipole potential. For each cosine
/// c (angle between source direction and sensor direction):
///   along_source = sum_n coef[n-1] * (n P_n(c) - c P_n'(c))
///   along_sensor = sum_n coef[n-1] * P_n'(c)
/// for n = 1 .. coef.size().
void legendre_series(std::span<const double> cosines, std::span<const double> coef,
                     std::span<double> along_source, std::span<double> along_sensor);

/// Vectorised exp/log exposed for equivalence testing.
void exp_array(std::span<const double> x, std::span<double> out);
void log_array(std::span<const double> x, std::span<double> out);

}  // namespace kappa::simd
