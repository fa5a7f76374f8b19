#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <utility>
#include <vector>

#include "kappa/dataset.hpp"
#include "kappa/dipfit/forward.hpp"

namespace kappa::synth {

/// Quasi-uniform electrode cap: Fibonacci-sphere points on the zenith cap
/// theta <= max_theta, at the given radius (mm).
std::vector<ElectrodePosition> fibonacci_montage(std::size_t n, double radius_mm = 85.0,
                                                 double max_theta = 2.0943951023931957);

/// Labels "E1".."En".
std::vector<std::string> default_labels(std::size_t n);

/// Montage JSON: {"electrodes": [{"label", "theta_rad", "phi_rad", "radius_mm"}, ...]}.
struct Montage {
  std::vector<std::string> labels;
  std::vector<ElectrodePosition> electrodes;
};
Montage load_montage(const std::filesystem::path& path);
void save_montage(const Montage& montage, const std::filesystem::path& path);

struct SynthSpec {
  std::size_t n_sources = 8;
  std::size_t n_frames = 10000;
  double srate = 250.0;
  std::vector<double> source_shapes{1.0};  // one rho per source, or a single value for all
  double ecc_min = 0.2;
  double ecc_max = 0.8;
  double noise_db = -20.0;  // -inf disables sensor noise
  std::uint64_t seed = 0;

  static constexpr double kNoNoise = -std::numeric_limits<double>::infinity();

  double shape(std::size_t source) const;
  void validate(std::size_t n_electrodes) const;
};

struct GroundTruth {
  Matrix mixing;  // n_electrodes x n_sources, column k = unreferenced potential of dipole k
  std::vector<dipfit::Dipole> dipoles;
  Matrix sources;  // n_sources x n_frames, unit variance
};

/// Draws dipoles (uniform direction, eccentricity uniform in range, random
/// moment direction scaled to unit column RMS) and iid generalized-Gaussian
/// unit-variance sources, and emits x = A s + noise. Samples are rounded to
/// f32 so the dataset survives a KEEG round trip bit-exactly.
std::pair<EegDataset, GroundTruth> generate(const SynthSpec& spec, const dipfit::HeadModel& head,
                                            const std::vector<ElectrodePosition>& electrodes,
                                            const std::vector<std::string>& labels = {});

/// Normalised Amari performance index of a square matrix; 0 iff P is a
/// scaled permutation. Throws DegenerateMatrix for zero rows/columns.
double amari_index(const Matrix& p);

}  // namespace kappa::synth
