#include <atomic>
#include <cstdlib>
#include <string>

#include "kappa/error.hpp"
#include "kernels_impl.hpp"

namespace kappa::simd {
namespace {

const KernelTable& table_for(Isa isa) {
#if defined(KAPPA_HAVE_AVX2)
  if (isa == Isa::avx2) return avx2::kTable;
#endif
  (void)isa;
  return scalar::kTable;
}

Isa detect() noexcept {
  Isa best = isa_supported(Isa::avx2) ? Isa::avx2 : Isa::scalar;
  if (const char* env = std::getenv("KAPPA_ICA_SIMD")) {
    const std::string want(env);
    if (want == "scalar") return Isa::scalar;
    if (want == "avx2" && isa_supported(Isa::avx2)) return Isa::avx2;
  }
  return best;
}

struct State {
  std::atomic<Isa> isa{detect()};
  std::atomic<const KernelTable*> table{&table_for(isa.load())};
};

State& state() {
  static State s;
  return s;
}

inline const KernelTable& active() { return *state().table.load(std::memory_order_acquire); }

void check_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) fail(Errc::DimensionMismatch, what);
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
  }
  return "unknown";
}

bool isa_supported(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2:
#if defined(KAPPA_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

std::vector<Isa> supported_isas() {
  std::vector<Isa> out{Isa::scalar};
  if (isa_supported(Isa::avx2)) out.push_back(Isa::avx2);
  return out;
}

Isa active_isa() noexcept { return state().isa.load(); }

void set_active_isa(Isa isa) {
  if (!isa_supported(isa)) fail(Errc::InvalidArgument, "ISA not supported on this CPU/build: " + std::string(isa_name(isa)));
  state().isa.store(isa);
  state().table.store(&table_for(isa), std::memory_order_release);
}

double dot(std::span<const double> a, std::span<const double> b) {
  check_same_size(a.size(), b.size(), "dot: length mismatch");
  return active().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  check_same_size(x.size(), y.size(), "axpy: length mismatch");
  active().axpy(alpha, x.data(), y.data(), x.size());
}

void gg_mixture_pass(std::span<const double> y, const MixtureParams& params, std::span<double> score,
                     MixtureStats& stats) {
  check_same_size(y.size(), score.size(), "gg_mixture_pass: score length mismatch");
  if (params.n_mix < 1 || params.n_mix > kMaxMixtures) fail(Errc::InvalidArgument, "gg_mixture_pass: bad n_mix");
  active().gg_mixture_pass(y.data(), y.size(), params, score.data(), stats);
}

double gg_mixture_loglik(std::span<const double> y, const MixtureParams& params) {
  if (params.n_mix < 1 || params.n_mix > kMaxMixtures) fail(Errc::InvalidArgument, "gg_mixture_loglik: bad n_mix");
  return active().gg_mixture_loglik(y.data(), y.size(), params);
}

void legendre_series(std::span<const double> cosines, std::span<const double> coef,
                     std::span<double> along_source, std::span<double> along_sensor) {
  check_same_size(cosines.size(), along_source.size(), "legendre_series: output length mismatch");
  check_same_size(cosines.size(), along_sensor.size(), "legendre_series: output length mismatch");
  active().legendre_series(cosines.data(), cosines.size(), coef.data(), coef.size(), along_source.data(),
                           along_sensor.data());
}

void exp_array(std::span<const double> x, std::span<double> out) {
  check_same_size(x.size(), out.size(), "exp_array: length mismatch");
  active().exp_array(x.data(), out.data(), x.size());
}

void log_array(std::span<const double> x, std::span<double> out) {
  check_same_size(x.size(), out.size(), "log_array: length mismatch");
  active().log_array(x.data(), out.data(), x.size());
}

}  // namespace kappa::simd
