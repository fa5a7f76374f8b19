#pragma once

#include <span>
#include <vector>

#include "kappa/dipfit/forward.hpp"

namespace kappa::dipfit {

struct DipoleFitResult {
  Dipole dipole;
  double rv = 1.0;     // residual variance fraction
  Vector model_topo;   // average-referenced fitted topography
};

struct FitOptions {
  double grid_mm = 10.0;
  double grid_max_ecc = 0.95;
  double max_ecc = 0.98;
  std::size_t n_seeds = 3;
  double simplex_step_mm = 5.0;
  double simplex_tol_mm = 1e-5;
  std::size_t max_simplex_iter = 3000;
};

/// ||measured - g model||^2 / ||measured||^2 for the optimal scalar gain g.
/// Throws ZeroTopography when `measured` is all zero.
double residual_variance(const Vector& measured, const Vector& model);

/// Single equivalent dipole fitter for one montage. The coarse search grid
/// and its lead fields are built once, so fitting many topographies against
/// the same montage is cheap. Thread-safe for concurrent fit() calls.
class DipoleFitter {
 public:
  DipoleFitter(const HeadModel& head, std::span<const ElectrodePosition> electrodes, FitOptions options = {});

  /// Measured topography is average-referenced before fitting. Never fails
  /// on valid input: worst case is the best grid point.
  DipoleFitResult fit(const Vector& topo) const;

  std::size_t grid_size() const noexcept { return grid_.size(); }

 private:
  struct GridPoint {
    Vec3 position;
    Matrix basis;  // orthonormal basis of the lead field's column space
  };

  double objective(const Vec3& position, const Vector& topo, double topo_sq) const;

  ForwardModel forward_;
  std::vector<Vec3> directions_;
  FitOptions options_;
  std::vector<GridPoint> grid_;
};

DipoleFitResult fit_dipole(const Vector& topo, const HeadModel& head,
                           std::span<const ElectrodePosition> electrodes, const FitOptions& options = {});

/// 100 * |{rv * 100 < threshold_pct}| / n. Throws EmptyInput, InvalidArgument.
double near_dipolarity(std::span<const double> rvs, double threshold_pct);
double near_dipolarity(std::span<const DipoleFitResult> fits, double threshold_pct);

}  // namespace kappa::dipfit
