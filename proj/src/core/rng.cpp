#include "kappa/rng.hpp"

#include <cmath>

namespace kappa {

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound <= 1) return 0;
  unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(engine_()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double Rng::normal() {
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  // The second variate (v * factor) is discarded so that every call consumes
  // a self-contained slice of the stream.
  return u * std::sqrt(-2.0 * std::log(s) / s);
}

double Rng::gamma(double shape) {
  if (shape < 1.0) {
    // Boost to shape + 1 and rescale by U^(1/shape).
    const double g = gamma(shape + 1.0);
    return g * std::pow(uniform_open(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_open();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double Rng::generalized_gaussian(double mu, double beta, double rho) {
  // |beta (y - mu)|^rho ~ Gamma(1/rho, 1) with a symmetric sign.
  const double g = gamma(1.0 / rho);
  const double magnitude = std::pow(g, 1.0 / rho) / beta;
  return (uniform() < 0.5) ? mu - magnitude : mu + magnitude;
}

SeedHasher& SeedHasher::add(std::string_view bytes) noexcept {
  for (unsigned char c : bytes) {
    state_ ^= c;
    state_ *= 0x100000001B3ull;
  }
  // Length terminator keeps ("ab","c") distinct from ("a","bc").
  return add(static_cast<std::uint64_t>(bytes.size()));
}

SeedHasher& SeedHasher::add(std::uint64_t value) noexcept {
  for (int i = 0; i < 8; ++i) {
    state_ ^= static_cast<unsigned char>(value >> (8 * i));
    state_ *= 0x100000001B3ull;
  }
  return *this;
}

}  // namespace kappa
