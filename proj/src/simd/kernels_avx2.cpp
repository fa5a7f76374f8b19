// AVX2/FMA kernel variants. exp uses Cephes-style range reduction with a
// rational approximation; log uses an atanh series on the reduced mantissa.

#include <immintrin.h>

#include "kernels_impl.hpp"

namespace kappa::simd::avx2 {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const double l0 = _mm_cvtsd_f64(lo), l1 = _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
  const double h0 = _mm_cvtsd_f64(hi), h1 = _mm_cvtsd_f64(_mm_unpackhi_pd(hi, hi));
  return (l0 + l1) + (h0 + h1);
}

inline __m256d polevl(__m256d x, const double* c, int degree) {
  __m256d r = _mm256_set1_pd(c[0]);
  for (int i = 1; i <= degree; ++i) r = _mm256_fmadd_pd(r, x, _mm256_set1_pd(c[i]));
  return r;
}

constexpr double kExpP[] = {1.26177193074810590878E-4, 3.02994407707441961300E-2, 9.99999999999999999910E-1};
constexpr double kExpQ[] = {3.00198505138664455042E-6, 2.52448340349684104192E-3, 2.27265548208155028766E-1,
                            2.00000000000000000009E0};

inline __m256d exp_pd(__m256d x) {
  x = _mm256_min_pd(_mm256_max_pd(x, _mm256_set1_pd(-708.0)), _mm256_set1_pd(709.0));
  const __m256d fx = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634073599)),
                                     _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(fx, _mm256_set1_pd(6.93145751953125E-1), x);
  r = _mm256_fnmadd_pd(fx, _mm256_set1_pd(1.42860682030941723212E-6), r);
  const __m256d rr = _mm256_mul_pd(r, r);
  const __m256d px = _mm256_mul_pd(r, polevl(rr, kExpP, 2));
  const __m256d qx = polevl(rr, kExpQ, 3);
  __m256d e = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  e = _mm256_fmadd_pd(_mm256_set1_pd(2.0), e, _mm256_set1_pd(1.0));
  // 2^fx assembled directly in the exponent field.
  const __m256d biased = _mm256_add_pd(_mm256_add_pd(fx, _mm256_set1_pd(1023.0)), _mm256_set1_pd(0x1.0p52));
  const __m256i bits = _mm256_slli_epi64(_mm256_castpd_si256(biased), 52);
  return _mm256_mul_pd(e, _mm256_castsi256_pd(bits));
}

// Positive normal inputs only. log(m 2^e) with m in [sqrt(1/2), sqrt(2)) and
// log(m) = 2 atanh(s), s = (m - 1)/(m + 1), |s| < 0.1716.
inline __m256d log_pd(__m256d x) {
  const __m256i bits = _mm256_castpd_si256(x);
  const __m256i magic = _mm256_set1_epi64x(0x4330000000000000LL);
  __m256d e = _mm256_sub_pd(_mm256_castsi256_pd(_mm256_or_si256(_mm256_srli_epi64(bits, 52), magic)),
                            _mm256_set1_pd(0x1.0p52));
  e = _mm256_sub_pd(e, _mm256_set1_pd(1022.0));
  const __m256i mant_bits = _mm256_or_si256(_mm256_and_si256(bits, _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL)),
                                            _mm256_set1_epi64x(0x3FE0000000000000LL));
  __m256d m = _mm256_castsi256_pd(mant_bits);  // [0.5, 1)
  const __m256d small = _mm256_cmp_pd(m, _mm256_set1_pd(0.70710678118654752440), _CMP_LT_OQ);
  e = _mm256_sub_pd(e, _mm256_and_pd(small, _mm256_set1_pd(1.0)));
  m = _mm256_add_pd(m, _mm256_and_pd(small, m));
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d s = _mm256_div_pd(_mm256_sub_pd(m, one), _mm256_add_pd(m, one));
  const __m256d s2 = _mm256_mul_pd(s, s);
  __m256d poly = _mm256_set1_pd(1.0 / 23.0);
  for (int k = 10; k >= 1; --k) poly = _mm256_fmadd_pd(poly, s2, _mm256_set1_pd(1.0 / (2.0 * k + 1.0)));
  // poly now holds sum_{k>=1} s^(2k-2)/(2k+1); log m = 2s + 2 s^3 poly.
  const __m256d two_s = _mm256_add_pd(s, s);
  const __m256d tail = _mm256_fmadd_pd(_mm256_mul_pd(two_s, s2), poly, _mm256_mul_pd(e, _mm256_set1_pd(-2.121944400546905827679E-4)));
  return _mm256_fmadd_pd(e, _mm256_set1_pd(0.693359375), _mm256_add_pd(two_s, tail));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd(), acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4) acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gg_mixture_pass(const double* y, std::size_t n, const MixtureParams& params, double* score,
                     MixtureStats& stats) {
  stats = MixtureStats{};
  const std::size_t m = params.n_mix;
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  const __m256d tiny = _mm256_set1_pd(kTinyResidual);

  __m256d acc_z[kMaxMixtures], acc_fp[kMaxMixtures], acc_w[kMaxMixtures];
  __m256d acc_pw[kMaxMixtures], acc_pwl[kMaxMixtures], acc_pwl2[kMaxMixtures];
  for (std::size_t j = 0; j < m; ++j) {
    acc_z[j] = acc_fp[j] = acc_w[j] = _mm256_setzero_pd();
    acc_pw[j] = acc_pwl[j] = acc_pwl2[j] = _mm256_setzero_pd();
  }
  __m256d acc_logq = _mm256_setzero_pd(), acc_g2 = _mm256_setzero_pd(), acc_g2y2 = _mm256_setzero_pd();

  std::size_t t = 0;
  for (; t + 4 <= n; t += 4) {
    const __m256d yv = _mm256_loadu_pd(y + t);
    __m256d u[kMaxMixtures], a[kMaxMixtures], la[kMaxMixtures], pw[kMaxMixtures], lp[kMaxMixtures];
    __m256d lp_max = _mm256_set1_pd(-__builtin_huge_val());
    for (std::size_t j = 0; j < m; ++j) {
      u[j] = _mm256_mul_pd(_mm256_set1_pd(params.beta[j]), _mm256_sub_pd(yv, _mm256_set1_pd(params.mu[j])));
      a[j] = _mm256_max_pd(_mm256_andnot_pd(sign_mask, u[j]), tiny);
      la[j] = log_pd(a[j]);
      pw[j] = exp_pd(_mm256_mul_pd(_mm256_set1_pd(params.rho[j]), la[j]));
      lp[j] = _mm256_sub_pd(_mm256_set1_pd(params.log_coef[j]), pw[j]);
      lp_max = _mm256_max_pd(lp_max, lp[j]);
    }
    __m256d s = _mm256_setzero_pd();
    for (std::size_t j = 0; j < m; ++j) {
      lp[j] = exp_pd(_mm256_sub_pd(lp[j], lp_max));
      s = _mm256_add_pd(s, lp[j]);
    }
    const __m256d log_q = _mm256_add_pd(lp_max, log_pd(s));
    const __m256d inv_s = _mm256_div_pd(_mm256_set1_pd(1.0), s);

    __m256d g = _mm256_setzero_pd();
    for (std::size_t j = 0; j < m; ++j) {
      const __m256d z = _mm256_mul_pd(lp[j], inv_s);
      const __m256d inv_a = _mm256_div_pd(_mm256_set1_pd(1.0), a[j]);
      const __m256d r = _mm256_mul_pd(pw[j], inv_a);
      const __m256d signed_r = _mm256_or_pd(_mm256_and_pd(sign_mask, u[j]), r);
      const __m256d zpw = _mm256_mul_pd(z, pw[j]);
      acc_z[j] = _mm256_add_pd(acc_z[j], z);
      acc_fp[j] = _mm256_fmadd_pd(z, signed_r, acc_fp[j]);
      acc_w[j] = _mm256_fmadd_pd(z, _mm256_mul_pd(r, inv_a), acc_w[j]);
      acc_pw[j] = _mm256_add_pd(acc_pw[j], zpw);
      const __m256d zpwl = _mm256_mul_pd(zpw, la[j]);
      acc_pwl[j] = _mm256_add_pd(acc_pwl[j], zpwl);
      acc_pwl2[j] = _mm256_fmadd_pd(zpwl, la[j], acc_pwl2[j]);
      const __m256d zb = _mm256_mul_pd(_mm256_mul_pd(z, _mm256_set1_pd(params.beta[j])), _mm256_set1_pd(params.rho[j]));
      g = _mm256_fmadd_pd(zb, signed_r, g);
    }
    _mm256_storeu_pd(score + t, g);
    acc_logq = _mm256_add_pd(acc_logq, log_q);
    const __m256d g2 = _mm256_mul_pd(g, g);
    acc_g2 = _mm256_add_pd(acc_g2, g2);
    acc_g2y2 = _mm256_fmadd_pd(g2, _mm256_mul_pd(yv, yv), acc_g2y2);
  }

  for (std::size_t j = 0; j < m; ++j) {
    stats.z[j] = hsum(acc_z[j]);
    stats.z_fp[j] = hsum(acc_fp[j]);
    stats.z_w[j] = hsum(acc_w[j]);
    stats.z_pw[j] = hsum(acc_pw[j]);
    stats.z_pw_log[j] = hsum(acc_pwl[j]);
    stats.z_pw_log2[j] = hsum(acc_pwl2[j]);
  }
  stats.sum_log_q = hsum(acc_logq);
  stats.score_sq = hsum(acc_g2);
  stats.score_sq_y_sq = hsum(acc_g2y2);
  for (; t < n; ++t) score[t] = scalar::gg_mixture_sample(y[t], params, stats);
}

double gg_mixture_loglik(const double* y, std::size_t n, const MixtureParams& params) {
  const std::size_t m = params.n_mix;
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  const __m256d tiny = _mm256_set1_pd(kTinyResidual);
  __m256d acc = _mm256_setzero_pd();
  std::size_t t = 0;
  for (; t + 4 <= n; t += 4) {
    const __m256d yv = _mm256_loadu_pd(y + t);
    __m256d lp[kMaxMixtures];
    __m256d lp_max = _mm256_set1_pd(-__builtin_huge_val());
    for (std::size_t j = 0; j < m; ++j) {
      const __m256d u = _mm256_mul_pd(_mm256_set1_pd(params.beta[j]), _mm256_sub_pd(yv, _mm256_set1_pd(params.mu[j])));
      const __m256d a = _mm256_max_pd(_mm256_andnot_pd(sign_mask, u), tiny);
      const __m256d pw = exp_pd(_mm256_mul_pd(_mm256_set1_pd(params.rho[j]), log_pd(a)));
      lp[j] = _mm256_sub_pd(_mm256_set1_pd(params.log_coef[j]), pw);
      lp_max = _mm256_max_pd(lp_max, lp[j]);
    }
    __m256d s = _mm256_setzero_pd();
    for (std::size_t j = 0; j < m; ++j) s = _mm256_add_pd(s, exp_pd(_mm256_sub_pd(lp[j], lp_max)));
    acc = _mm256_add_pd(acc, _mm256_add_pd(lp_max, log_pd(s)));
  }
  double sum = hsum(acc);
  for (; t < n; ++t) sum += scalar::gg_mixture_sample_loglik(y[t], params);
  return sum;
}

void legendre_series(const double* cosines, std::size_t n_sensors, const double* coef, std::size_t n_terms,
                     double* along_source, double* along_sensor) {
  std::size_t e = 0;
  for (; e + 4 <= n_sensors; e += 4) {
    const __m256d c = _mm256_loadu_pd(cosines + e);
    __m256d p_prev = _mm256_set1_pd(1.0), p = c;
    __m256d dp_prev = _mm256_setzero_pd(), dp = _mm256_set1_pd(1.0);
    __m256d s_src = _mm256_setzero_pd(), s_sen = _mm256_setzero_pd();
    for (std::size_t k = 0; k < n_terms; ++k) {
      const double nn = static_cast<double>(k + 1);
      const __m256d ck = _mm256_set1_pd(coef[k]);
      const __m256d term = _mm256_fmsub_pd(_mm256_set1_pd(nn), p, _mm256_mul_pd(c, dp));
      s_src = _mm256_fmadd_pd(ck, term, s_src);
      s_sen = _mm256_fmadd_pd(ck, dp, s_sen);
      const __m256d two_n1_p = _mm256_mul_pd(_mm256_set1_pd(2.0 * nn + 1.0), p);
      const __m256d p_next = _mm256_div_pd(_mm256_fmsub_pd(two_n1_p, c, _mm256_mul_pd(_mm256_set1_pd(nn), p_prev)),
                                           _mm256_set1_pd(nn + 1.0));
      const __m256d dp_next = _mm256_add_pd(dp_prev, two_n1_p);
      p_prev = p;
      p = p_next;
      dp_prev = dp;
      dp = dp_next;
    }
    _mm256_storeu_pd(along_source + e, s_src);
    _mm256_storeu_pd(along_sensor + e, s_sen);
  }
  if (e < n_sensors) {
    scalar::kTable.legendre_series(cosines + e, n_sensors - e, coef, n_terms, along_source + e, along_sensor + e);
  }
}

void exp_array(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, exp_pd(_mm256_loadu_pd(x + i)));
  if (i < n) scalar::kTable.exp_array(x + i, out + i, n - i);
}

void log_array(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, log_pd(_mm256_loadu_pd(x + i)));
  if (i < n) scalar::kTable.log_array(x + i, out + i, n - i);
}

}  // namespace

const KernelTable kTable = {dot, axpy, gg_mixture_pass, gg_mixture_loglik, legendre_series, exp_array, log_array};

}  // namespace kappa::simd::avx2
