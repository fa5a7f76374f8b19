#include "kappa/dipfit/forward.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "kappa/error.hpp"
#include "kappa/simd/kernels.hpp"

namespace kappa::dipfit {

void HeadModel::validate() const {
  if (shell_radii.empty() || shell_radii.size() != shell_conductivities.size()) {
    fail(Errc::ConfigError, "head model: radii and conductivities must be non-empty and of equal length");
  }
  for (std::size_t k = 0; k < shell_radii.size(); ++k) {
    if (!(shell_radii[k] > 0.0) || !std::isfinite(shell_radii[k])) fail(Errc::ConfigError, "head model: radii must be positive");
    if (k > 0 && !(shell_radii[k] > shell_radii[k - 1])) fail(Errc::ConfigError, "head model: radii must be strictly increasing");
    if (!(shell_conductivities[k] > 0.0) || !std::isfinite(shell_conductivities[k])) {
      fail(Errc::ConfigError, "head model: conductivities must be positive");
    }
  }
  if (series_terms < 1 || series_terms > 1000) fail(Errc::ConfigError, "head model: series_terms must be in [1, 1000]");
  if (!(series_tol > 0.0)) fail(Errc::ConfigError, "head model: series_tol must be positive");
}

std::vector<double> series_gains(const HeadModel& head, std::size_t n_terms) {
  head.validate();
  const std::size_t k_shells = head.shell_radii.size();
  const double outer = head.outer_radius();
  std::vector<double> gains(n_terms);
  for (std::size_t i = 0; i < n_terms; ++i) {
    const double n = static_cast<double>(i + 1);
    // Radial coefficients (A, B) of (r/R)^n and (R/r)^(n+1) in the outer
    // shell, fixed up to scale by the zero-flux condition at the surface,
    // then carried inwards across each interface. Rescaled every step.
    double a = n + 1.0, b = n, log_scale = 0.0;
    for (std::size_t k = k_shells - 1; k-- > 0;) {
      const double s = head.shell_conductivities[k + 1] / head.shell_conductivities[k];
      const double log_rho = std::log(head.shell_radii[k] / outer);
      const double up = std::exp(-(2.0 * n + 1.0) * log_rho);  // rho^-(2n+1)
      const double down = std::exp((2.0 * n + 1.0) * log_rho);
      const double a_in = ((n + 1.0 + s * n) * a + (n + 1.0) * (1.0 - s) * b * up) / (2.0 * n + 1.0);
      const double b_in = (n * (1.0 - s) * a * down + (n + s * (n + 1.0)) * b) / (2.0 * n + 1.0);
      const double m = std::max(std::fabs(a_in), std::fabs(b_in));
      a = a_in / m;
      b = b_in / m;
      log_scale += std::log(m);
    }
    // The inner-shell B coefficient is set by the source; the surface value
    // of the outer-shell solution is A + B = 2n + 1 in the unscaled frame.
    gains[i] = (2.0 * n + 1.0) / b * std::exp(-log_scale);
  }
  return gains;
}

ForwardModel::ForwardModel(HeadModel head) : head_(std::move(head)) {
  gains_ = series_gains(head_, head_.series_terms);
  const double r = head_.outer_radius();
  scale_ = 1.0 / (4.0 * std::numbers::pi * head_.shell_conductivities.front() * r * r);
}

Matrix ForwardModel::leadfield(const Vec3& position, std::span<const Vec3> directions, Reference reference) const {
  const double dist = position.norm();
  if (!std::isfinite(dist) || !(dist < head_.inner_radius())) {
    fail(Errc::DipoleOutsideBrain, "dipole at " + std::to_string(dist) + " mm is not inside the inner shell");
  }
  const double ecc = dist / head_.inner_radius();
  const double rho0 = dist / head_.outer_radius();
  const Vec3 src_dir = dist > 0.0 ? Vec3(position / dist) : Vec3::UnitZ();

  std::vector<double> coef;
  coef.reserve(gains_.size());
  double envelope_sum = 0.0, power = 1.0;
  bool converged = false;
  for (std::size_t i = 0; i < gains_.size(); ++i) {
    const double n = static_cast<double>(i + 1);
    const double c = gains_[i] * power;
    coef.push_back(c);
    const double env = std::fabs(c) * n * (n + 1.0);
    envelope_sum += env;
    if (env <= head_.series_tol * envelope_sum) {
      converged = true;
      break;
    }
    power *= rho0;
  }
  if (!converged && ecc > 0.995) {
    fail(Errc::SeriesNotConverged, "Legendre series did not reach tolerance at eccentricity " + std::to_string(ecc));
  }

  const std::size_t n_el = directions.size();
  std::vector<double> cosines(n_el), along_src(n_el), along_sen(n_el);
  for (std::size_t e = 0; e < n_el; ++e) cosines[e] = std::clamp(src_dir.dot(directions[e]), -1.0, 1.0);
  simd::legendre_series(cosines, coef, along_src, along_sen);

  Matrix lf(static_cast<Eigen::Index>(n_el), 3);
  for (std::size_t e = 0; e < n_el; ++e) {
    const Vec3 row = scale_ * (along_src[e] * src_dir + along_sen[e] * directions[e]);
    lf.row(static_cast<Eigen::Index>(e)) = row.transpose();
  }
  if (reference == Reference::average && n_el > 0) lf.rowwise() -= lf.colwise().mean();
  return lf;
}

Vector ForwardModel::potential(const Dipole& dipole, std::span<const Vec3> directions, Reference reference) const {
  return leadfield(dipole.position, directions, reference) * dipole.moment;
}

std::vector<Vec3> electrode_directions(std::span<const ElectrodePosition> electrodes) {
  std::vector<Vec3> dirs;
  dirs.reserve(electrodes.size());
  for (const auto& e : electrodes) dirs.push_back(e.direction());
  return dirs;
}

Vector forward_potential(const HeadModel& head, const Dipole& dipole, std::span<const ElectrodePosition> electrodes,
                         Reference reference) {
  const ForwardModel model(head);
  const auto dirs = electrode_directions(electrodes);
  return model.potential(dipole, dirs, reference);
}

Vector average_reference(const Vector& topo) {
  if (topo.size() == 0) return topo;
  return topo.array() - topo.mean();
}

}  // namespace kappa::dipfit
