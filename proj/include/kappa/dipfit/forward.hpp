#pragma once

#include <span>
#include <vector>

#include "kappa/dataset.hpp"
#include "kappa/types.hpp"

namespace kappa::dipfit {

/// Concentric spherical shells, innermost first. Conductivities are relative;
/// only their ratios shape the scalp potential.
struct HeadModel {
  std::vector<double> shell_radii{71.0, 72.0, 79.0, 85.0};        // mm, brain/CSF/skull/scalp
  std::vector<double> shell_conductivities{0.33, 1.0, 0.0042, 0.33};
  std::size_t series_terms = 100;
  double series_tol = 1e-10;

  double inner_radius() const { return shell_radii.front(); }
  double outer_radius() const { return shell_radii.back(); }

  /// Throws ConfigError unless radii ascend, everything is positive and the
  /// two lists have equal length.
  void validate() const;
};

struct Dipole {
  Vec3 position = Vec3::Zero();  // mm from the head centre
  Vec3 moment = Vec3::Zero();
};

/// Potentials are either average-referenced (the default, what measured
/// topographies are compared against) or left referenced to infinity.
enum class Reference { average, none };

/// Per-degree surface gains g_n, n = 1..n_terms: for a unit current source at
/// radius r inside the inner shell, the scalp potential's degree-n term is
/// g_n (r/R)^n P_n(cos) / (4 pi sigma_1 R). For a homogeneous sphere
/// g_n = (2n + 1)/n.
std::vector<double> series_gains(const HeadModel& head, std::size_t n_terms);

/// Scalp potential evaluator with the shell gains precomputed.
class ForwardModel {
 public:
  explicit ForwardModel(HeadModel head);

  const HeadModel& head() const noexcept { return head_; }

  /// n_electrodes x 3 lead field: column j is the potential of a unit dipole
  /// along axis j at `position`. Electrodes are used through their direction
  /// only (projected onto the outer shell).
  Matrix leadfield(const Vec3& position, std::span<const Vec3> directions,
                   Reference reference = Reference::average) const;

  Vector potential(const Dipole& dipole, std::span<const Vec3> directions,
                   Reference reference = Reference::average) const;

 private:
  HeadModel head_;
  std::vector<double> gains_;
  double scale_;  // 1 / (4 pi sigma_1 R^2)
};

/// Unit direction vectors of a montage.
std::vector<Vec3> electrode_directions(std::span<const ElectrodePosition> electrodes);

/// Single-call convenience wrapper around ForwardModel.
Vector forward_potential(const HeadModel& head, const Dipole& dipole,
                         std::span<const ElectrodePosition> electrodes,
                         Reference reference = Reference::average);

/// Subtracts the mean.
Vector average_reference(const Vector& topo);

}  // namespace kappa::dipfit
