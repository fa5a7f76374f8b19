#include "kappa/dipfit/fit.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>

#include "../core/gsl_quiet.hpp"
#include "kappa/error.hpp"

namespace kappa::dipfit {
namespace {

// Orthonormal basis of the numerically significant column space.
Matrix column_basis(const Matrix& lf) {
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(lf, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > 1e-10 * sv(0)) ++rank;
  return svd.matrixU().leftCols(rank);
}

struct SimplexContext {
  std::function<double(const Vec3&)> f;
};

double simplex_trampoline(const gsl_vector* v, void* params) {
  const auto* ctx = static_cast<const SimplexContext*>(params);
  return ctx->f(Vec3(gsl_vector_get(v, 0), gsl_vector_get(v, 1), gsl_vector_get(v, 2)));
}

struct MinimizerDeleter {
  void operator()(gsl_multimin_fminimizer* m) const { gsl_multimin_fminimizer_free(m); }
};
struct VectorDeleter {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};

}  // namespace

double residual_variance(const Vector& measured, const Vector& model) {
  require(measured.size() == model.size(), Errc::DimensionMismatch, "residual_variance: length mismatch");
  const double mm = measured.squaredNorm();
  if (!(mm > 0.0)) fail(Errc::ZeroTopography, "residual_variance: measured topography is all zero");
  const double dd = model.squaredNorm();
  const double gain = dd > 0.0 ? measured.dot(model) / dd : 0.0;
  const double rv = (measured - gain * model).squaredNorm() / mm;
  return std::clamp(rv, 0.0, 1.0);
}

DipoleFitter::DipoleFitter(const HeadModel& head, std::span<const ElectrodePosition> electrodes, FitOptions options)
    : forward_(head), directions_(electrode_directions(electrodes)), options_(options) {
  if (directions_.size() < 8) {
    spdlog::warn("dipole fitting with {} electrodes; at least 8 are recommended", directions_.size());
  }
  require(options_.grid_mm > 0.0, Errc::ConfigError, "dipole fit: grid spacing must be positive");
  require(options_.max_ecc > 0.0 && options_.max_ecc < 1.0, Errc::ConfigError, "dipole fit: max_ecc must be in (0,1)");
  const double r1 = head.inner_radius();
  const double limit = options_.grid_max_ecc * r1;
  const int steps = static_cast<int>(std::floor(limit / options_.grid_mm));
  for (int ix = -steps; ix <= steps; ++ix) {
    for (int iy = -steps; iy <= steps; ++iy) {
      for (int iz = -steps; iz <= steps; ++iz) {
        const Vec3 p = options_.grid_mm * Vec3(ix, iy, iz);
        if (p.norm() > limit) continue;
        grid_.push_back({p, column_basis(forward_.leadfield(p, directions_))});
      }
    }
  }
}

double DipoleFitter::objective(const Vec3& position, const Vector& topo, double topo_sq) const {
  const double limit = options_.max_ecc * forward_.head().inner_radius();
  const double dist = position.norm();
  Vec3 p = position;
  double penalty = 0.0;
  if (dist > limit) {
    p *= limit / dist;
    penalty = (dist - limit) * (dist - limit);
  }
  const Matrix basis = column_basis(forward_.leadfield(p, directions_));
  const double explained = (basis.transpose() * topo).squaredNorm();
  return std::max(0.0, 1.0 - explained / topo_sq) + penalty;
}

DipoleFitResult DipoleFitter::fit(const Vector& topo_in) const {
  require(static_cast<std::size_t>(topo_in.size()) == directions_.size(), Errc::DimensionMismatch,
          "fit_dipole: topography length does not match the montage");
  detail::quiet_gsl();
  const Vector topo = average_reference(topo_in);
  const double topo_sq = topo.squaredNorm();
  if (!(topo_sq > 0.0)) fail(Errc::ZeroTopography, "fit_dipole: topography is zero after average reference");

  std::vector<double> score(grid_.size());
  for (std::size_t g = 0; g < grid_.size(); ++g) {
    score[g] = 1.0 - (grid_[g].basis.transpose() * topo).squaredNorm() / topo_sq;
  }
  std::vector<std::size_t> order(grid_.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t n_seeds = std::min(options_.n_seeds, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_seeds), order.end(),
                    [&](std::size_t a, std::size_t b) { return score[a] < score[b] || (score[a] == score[b] && a < b); });

  Vec3 best = grid_[order[0]].position;
  double best_value = objective(best, topo, topo_sq);

  SimplexContext ctx{[&](const Vec3& p) { return objective(p, topo, topo_sq); }};
  gsl_multimin_function fn{&simplex_trampoline, 3, &ctx};
  std::unique_ptr<gsl_multimin_fminimizer, MinimizerDeleter> minimizer(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 3));
  std::unique_ptr<gsl_vector, VectorDeleter> x0(gsl_vector_alloc(3)), step(gsl_vector_alloc(3));
  gsl_vector_set_all(step.get(), options_.simplex_step_mm);

  for (std::size_t s = 0; s < n_seeds; ++s) {
    const Vec3& seed = grid_[order[s]].position;
    for (int d = 0; d < 3; ++d) gsl_vector_set(x0.get(), d, seed(d));
    gsl_multimin_fminimizer_set(minimizer.get(), &fn, x0.get(), step.get());
    for (std::size_t it = 0; it < options_.max_simplex_iter; ++it) {
      if (gsl_multimin_fminimizer_iterate(minimizer.get()) != GSL_SUCCESS) break;
      if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(minimizer.get()), options_.simplex_tol_mm) == GSL_SUCCESS) {
        break;
      }
    }
    const gsl_vector* xm = gsl_multimin_fminimizer_x(minimizer.get());
    const Vec3 candidate(gsl_vector_get(xm, 0), gsl_vector_get(xm, 1), gsl_vector_get(xm, 2));
    const double value = minimizer->fval;
    if (std::isfinite(value) && value < best_value) {
      best_value = value;
      best = candidate;
    }
  }

  const double limit = options_.max_ecc * forward_.head().inner_radius();
  if (best.norm() > limit) best *= limit / best.norm();

  const Matrix lf = forward_.leadfield(best, directions_);
  DipoleFitResult result;
  result.dipole.position = best;
  result.dipole.moment = lf.colPivHouseholderQr().solve(topo);
  result.model_topo = lf * result.dipole.moment;
  result.rv = residual_variance(topo, result.model_topo);
  return result;
}

DipoleFitResult fit_dipole(const Vector& topo, const HeadModel& head, std::span<const ElectrodePosition> electrodes,
                           const FitOptions& options) {
  return DipoleFitter(head, electrodes, options).fit(topo);
}

double near_dipolarity(std::span<const double> rvs, double threshold_pct) {
  if (rvs.empty()) fail(Errc::EmptyInput, "near_dipolarity: no components");
  require(threshold_pct > 0.0 && threshold_pct < 100.0, Errc::InvalidArgument,
          "near_dipolarity: threshold must be in (0, 100)");
  std::size_t below = 0;
  for (double rv : rvs) below += (rv * 100.0 < threshold_pct) ? 1 : 0;
  return 100.0 * static_cast<double>(below) / static_cast<double>(rvs.size());
}

double near_dipolarity(std::span<const DipoleFitResult> fits, double threshold_pct) {
  std::vector<double> rvs;
  rvs.reserve(fits.size());
  for (const auto& f : fits) rvs.push_back(f.rv);
  return near_dipolarity(rvs, threshold_pct);
}

}  // namespace kappa::dipfit
