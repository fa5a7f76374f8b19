#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace kappa {

/// Name of the bit generator, recorded in every output that depends on it.
inline constexpr std::string_view kGeneratorName = "mt19937_64";

/// Seeded random stream with platform-independent variate transforms.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The std:: distributions are implementation-defined, so every
/// transform used by the toolkit is spelled out here instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform on (0, 1).
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return u;
  }

  /// Unbiased integer in [0, bound) (Lemire's multiply-and-reject).
  std::uint64_t below(std::uint64_t bound);

  /// Standard normal (Marsaglia polar method, one variate per call).
  double normal();

  /// Gamma(shape, 1) via Marsaglia-Tsang; shape > 0.
  double gamma(double shape);

  /// Generalized Gaussian with density proportional to exp(-|beta (y - mu)|^rho).
  double generalized_gaussian(double mu, double beta, double rho);

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Incremental FNV-1a (64-bit) over byte strings, finished with mix64.
class SeedHasher {
 public:
  SeedHasher& add(std::string_view bytes) noexcept;
  SeedHasher& add(std::uint64_t value) noexcept;
  std::uint64_t finish() const noexcept { return mix64(state_); }

 private:
  std::uint64_t state_ = 0xCBF29CE484222325ull;
};

}  // namespace kappa
