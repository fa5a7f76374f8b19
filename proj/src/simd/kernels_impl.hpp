#pragma once

// Raw-pointer kernel entry points shared by the per-ISA translation units.
// The AVX2 unit is compiled with -mavx2 -mfma and must not instantiate any
// inline library code that could be merged into scalar callers, hence the
// plain pointer interface.

#include <cstddef>

#include "kappa/simd/kernels.hpp"

namespace kappa::simd {

struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*gg_mixture_pass)(const double* y, std::size_t n, const MixtureParams& params,
                          double* score, MixtureStats& stats);
  double (*gg_mixture_loglik)(const double* y, std::size_t n, const MixtureParams& params);
  void (*legendre_series)(const double* cosines, std::size_t n_sensors, const double* coef,
                          std::size_t n_terms, double* along_source, double* along_sensor);
  void (*exp_array)(const double* x, double* out, std::size_t n);
  void (*log_array)(const double* x, double* out, std::size_t n);
};

namespace scalar {
extern const KernelTable kTable;

// Single-sample mixture step, shared with the AVX2 tail loop.
double gg_mixture_sample(double y, const MixtureParams& params, MixtureStats& stats);
double gg_mixture_sample_loglik(double y, const MixtureParams& params);
}  // namespace scalar

#if defined(KAPPA_HAVE_AVX2)
namespace avx2 {
extern const KernelTable kTable;
}  // namespace avx2
#endif

}  // namespace kappa::simd
