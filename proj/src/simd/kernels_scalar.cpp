// Scalar reference kernels. These define the semantics every vector variant
// is tested against.

#include <cmath>

#include "kernels_impl.hpp"

namespace kappa::simd::scalar {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gg_mixture_pass(const double* y, std::size_t n, const MixtureParams& params, double* score,
                     MixtureStats& stats) {
  stats = MixtureStats{};
  for (std::size_t t = 0; t < n; ++t) score[t] = gg_mixture_sample(y[t], params, stats);
}

double gg_mixture_loglik(const double* y, std::size_t n, const MixtureParams& params) {
  double sum = 0.0;
  for (std::size_t t = 0; t < n; ++t) sum += gg_mixture_sample_loglik(y[t], params);
  return sum;
}

void legendre_series(const double* cosines, std::size_t n_sensors, const double* coef, std::size_t n_terms,
                     double* along_source, double* along_sensor) {
  for (std::size_t e = 0; e < n_sensors; ++e) {
    const double c = cosines[e];
    double p_prev = 1.0, p = c;      // P_0, P_1
    double dp_prev = 0.0, dp = 1.0;  // P_0', P_1'
    double s_src = 0.0, s_sen = 0.0;
    for (std::size_t k = 0; k < n_terms; ++k) {
      const double nn = static_cast<double>(k + 1);
      s_src += coef[k] * (nn * p - c * dp);
      s_sen += coef[k] * dp;
      const double p_next = ((2.0 * nn + 1.0) * c * p - nn * p_prev) / (nn + 1.0);
      const double dp_next = dp_prev + (2.0 * nn + 1.0) * p;
      p_prev = p;
      p = p_next;
      dp_prev = dp;
      dp = dp_next;
    }
    along_source[e] = s_src;
    along_sensor[e] = s_sen;
  }
}

void exp_array(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i]);
}

void log_array(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::log(x[i]);
}

}  // namespace

double gg_mixture_sample(double y, const MixtureParams& params, MixtureStats& stats) {
  const std::size_t m = params.n_mix;
  double u[kMaxMixtures], a[kMaxMixtures], la[kMaxMixtures], pw[kMaxMixtures], lp[kMaxMixtures];
  double lp_max = -HUGE_VAL;
  for (std::size_t j = 0; j < m; ++j) {
    u[j] = params.beta[j] * (y - params.mu[j]);
    a[j] = std::fabs(u[j]);
    if (a[j] < kTinyResidual) a[j] = kTinyResidual;
    la[j] = std::log(a[j]);
    pw[j] = std::exp(params.rho[j] * la[j]);
    lp[j] = params.log_coef[j] - pw[j];
    if (lp[j] > lp_max) lp_max = lp[j];
  }
  double s = 0.0;
  for (std::size_t j = 0; j < m; ++j) s += (lp[j] = std::exp(lp[j] - lp_max));
  const double log_q = lp_max + std::log(s);
  const double inv_s = 1.0 / s;

  double g = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double z = lp[j] * inv_s;
    const double inv_a = 1.0 / a[j];
    const double r = pw[j] * inv_a;
    const double signed_r = std::copysign(r, u[j]);
    const double zpw = z * pw[j];
    stats.z[j] += z;
    stats.z_fp[j] += z * signed_r;
    stats.z_w[j] += z * r * inv_a;
    stats.z_pw[j] += zpw;
    stats.z_pw_log[j] += zpw * la[j];
    stats.z_pw_log2[j] += zpw * la[j] * la[j];
    g += z * params.beta[j] * params.rho[j] * signed_r;
  }
  stats.sum_log_q += log_q;
  stats.score_sq += g * g;
  stats.score_sq_y_sq += g * g * y * y;
  return g;
}

double gg_mixture_sample_loglik(double y, const MixtureParams& params) {
  const std::size_t m = params.n_mix;
  double lp[kMaxMixtures];
  double lp_max = -HUGE_VAL;
  for (std::size_t j = 0; j < m; ++j) {
    double a = std::fabs(params.beta[j] * (y - params.mu[j]));
    if (a < kTinyResidual) a = kTinyResidual;
    lp[j] = params.log_coef[j] - std::exp(params.rho[j] * std::log(a));
    if (lp[j] > lp_max) lp_max = lp[j];
  }
  double s = 0.0;
  for (std::size_t j = 0; j < m; ++j) s += std::exp(lp[j] - lp_max);
  return lp_max + std::log(s);
}

const KernelTable kTable = {dot, axpy, gg_mixture_pass, gg_mixture_loglik, legendre_series, exp_array, log_array};

}  // namespace kappa::simd::scalar
