#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

#include "kappa/dipfit/fit.hpp"
#include "kappa/dipfit/forward.hpp"
#include "kappa/error.hpp"
#include "kappa/rng.hpp"
#include "kappa/synth/synth.hpp"
#include "oracles.hpp"

using namespace kappa;
using namespace kappa::dipfit;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no kappa::Error thrown";
  return Errc::InvalidArgument;
}

Vec3 random_unit(Rng& rng) {
  Vec3 v(rng.normal(), rng.normal(), rng.normal());
  return v.normalized();
}

// Degree-n scalp gain from the boundary-value problem, solved directly as a
// 7x7 linear system in radii normalised by the outer radius. Shell 1 carries
// the source term x^-(n+1) plus A1 x^n; shells 2..4 carry A x^n + B x^-(n+1);
// potential and normal current are continuous at each interface and the
// normal current vanishes at the scalp.
double gain_by_linear_solve(const HeadModel& head, int n) {
  const double R = head.outer_radius();
  const auto& s = head.shell_conductivities;
  const double nn = n;
  auto f = [nn](double x) { return std::pow(x, nn); };
  auto df = [nn](double x) { return nn * std::pow(x, nn - 1); };
  auto g = [nn](double x) { return std::pow(x, -nn - 1); };
  auto dg = [nn](double x) { return -(nn + 1) * std::pow(x, -nn - 2); };
  // Unknowns: A1, A2, B2, A3, B3, A4, B4.
  Eigen::Matrix<double, 7, 7> m = Eigen::Matrix<double, 7, 7>::Zero();
  Eigen::Matrix<double, 7, 1> rhs = Eigen::Matrix<double, 7, 1>::Zero();
  int row = 0;
  for (int k = 0; k < 3; ++k) {
    const double x = head.shell_radii[static_cast<std::size_t>(k)] / R;
    const int inner_a = k == 0 ? 0 : 2 * k - 1;
    const int outer_a = 2 * k + 1;
    // continuity of potential
    m(row, inner_a) = f(x);
    if (k > 0) m(row, inner_a + 1) = g(x);
    else rhs(row) -= g(x);
    m(row, outer_a) -= f(x);
    m(row, outer_a + 1) -= g(x);
    ++row;
    // continuity of current
    const double si = s[static_cast<std::size_t>(k)], so = s[static_cast<std::size_t>(k) + 1];
    m(row, inner_a) = si * df(x);
    if (k > 0) m(row, inner_a + 1) = si * dg(x);
    else rhs(row) -= si * dg(x);
    m(row, outer_a) -= so * df(x);
    m(row, outer_a + 1) -= so * dg(x);
    ++row;
  }
  m(row, 5) = df(1.0);
  m(row, 6) = dg(1.0);
  const Eigen::Matrix<double, 7, 1> sol = m.fullPivLu().solve(rhs);
  return sol(5) + sol(6);
}

// Potential of a current dipole in a homogeneous sphere of radius R,
// conductivity sigma, at surface point r = R u (referenced to infinity).
double homogeneous_sphere(const Vec3& p, const Vec3& q, const Vec3& u, double R, double sigma) {
  const Vec3 r = R * u;
  const Vec3 dv = r - p;
  const double d = dv.norm();
  const Vec3 term = 2.0 * dv / (d * d * d) + (u * d + dv) / (R * d * (R - p.dot(u) + d));
  return q.dot(term) / (4.0 * std::numbers::pi * sigma);
}

Eigen::Matrix3d random_rotation(Rng& rng) {
  return kappa::testing::random_orthogonal(3, rng) * 1.0;
}

const std::vector<ElectrodePosition>& montage71() {
  static const auto m = synth::fibonacci_montage(71);
  return m;
}

}  // namespace

TEST(HeadModel, Validation) {
  HeadModel h;
  EXPECT_NO_THROW(h.validate());
  h.shell_radii = {71, 70, 79, 85};
  EXPECT_EQ(code_of([&] { h.validate(); }), Errc::ConfigError);
  h = HeadModel{};
  h.shell_conductivities[2] = 0.0;
  EXPECT_EQ(code_of([&] { h.validate(); }), Errc::ConfigError);
}

TEST(SeriesGains, HomogeneousClosedForm) {
  HeadModel h;
  h.shell_conductivities = {0.33, 0.33, 0.33, 0.33};
  const auto g = series_gains(h, 50);
  for (std::size_t n = 1; n <= 50; ++n) EXPECT_NEAR(g[n - 1], (2.0 * n + 1) / n, 1e-12 * (2.0 * n + 1) / n);
}

TEST(SeriesGains, MatchDirectBoundaryValueSolve) {
  for (const auto& cond : {std::vector<double>{0.33, 1.0, 0.0042, 0.33}, std::vector<double>{1.0, 0.2, 3.0, 0.5}}) {
    HeadModel h;
    h.shell_conductivities = cond;
    const auto g = series_gains(h, 60);
    for (int n = 1; n <= 60; ++n) {
      const double want = gain_by_linear_solve(h, n);
      EXPECT_NEAR(g[static_cast<std::size_t>(n) - 1], want, 1e-8 * std::fabs(want)) << "n=" << n;
    }
  }
}

TEST(Forward, ZeroMomentGivesZero) {
  const auto v = forward_potential(HeadModel{}, {Vec3(10, 0, 20), Vec3::Zero()}, montage71());
  EXPECT_EQ(v.size(), 71);
  EXPECT_EQ(v.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Forward, LinearInMoment) {
  Rng rng(1);
  const ForwardModel fm{HeadModel{}};
  const auto dirs = electrode_directions(montage71());
  for (int k = 0; k < 10; ++k) {
    const Vec3 p = random_unit(rng) * 60.0 * rng.uniform();
    const Vec3 q1 = random_unit(rng), q2 = random_unit(rng);
    const Vector v1 = fm.potential({p, q1}, dirs), v2 = fm.potential({p, q2}, dirs);
    const Vector v12 = fm.potential({p, 2.0 * q1 - 0.5 * q2}, dirs);
    const Vector want = 2.0 * v1 - 0.5 * v2;
    EXPECT_LT((v12 - want).cwiseAbs().maxCoeff(), 1e-12 * want.cwiseAbs().maxCoeff());
    const Vector dbl = fm.potential({p, 2.0 * q1}, dirs);
    EXPECT_LT((dbl - 2.0 * v1).cwiseAbs().maxCoeff(), 1e-12 * dbl.cwiseAbs().maxCoeff());
  }
}

TEST(Forward, AverageReferenced) {
  const auto v = forward_potential(HeadModel{}, {Vec3(0, 30, 40), Vec3(1, 0.5, -0.2)}, montage71());
  EXPECT_NEAR(v.mean(), 0.0, 1e-9 * v.cwiseAbs().maxCoeff());
}

TEST(Forward, RotationEquivariance) {
  Rng rng(2);
  const ForwardModel fm{HeadModel{}};
  const auto dirs = electrode_directions(montage71());
  for (int k = 0; k < 10; ++k) {
    const Eigen::Matrix3d rot = random_rotation(rng);
    const Dipole d{random_unit(rng) * 65.0 * rng.uniform(), random_unit(rng)};
    std::vector<Vec3> rdirs;
    for (const auto& u : dirs) rdirs.push_back(rot * u);
    const Vector a = fm.potential(d, dirs, Reference::none);
    const Vector b = fm.potential({rot * d.position, rot * d.moment}, rdirs, Reference::none);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-10 * a.cwiseAbs().maxCoeff());
  }
}

TEST(Forward, EqualConductivitiesMatchHomogeneousSphere) {
  HeadModel h;
  h.shell_conductivities = {0.33, 0.33, 0.33, 0.33};
  h.series_terms = 1000;
  h.series_tol = 1e-14;
  const ForwardModel fm{h};
  const auto dirs = electrode_directions(montage71());
  Rng rng(3);
  auto check = [&](const Dipole& d) {
    const Vector v = fm.potential(d, dirs, Reference::none);
    for (std::size_t e = 0; e < dirs.size(); ++e) {
      const double want = homogeneous_sphere(d.position, d.moment, dirs[e], 85.0, 0.33);
      EXPECT_NEAR(v(static_cast<Eigen::Index>(e)), want, 1e-8 * std::fabs(want)) << "electrode " << e;
    }
  };
  // Radial unit dipole at eccentricity 0.5.
  check({Vec3(0, 0, 35.5), Vec3(0, 0, 1)});
  for (int k = 0; k < 20; ++k) check({random_unit(rng) * 71.0 * 0.8 * rng.uniform(), random_unit(rng)});
}

TEST(Forward, Errors) {
  const auto& el = montage71();
  EXPECT_EQ(code_of([&] { forward_potential(HeadModel{}, {Vec3(0, 0, 71.5), Vec3(1, 0, 0)}, el); }),
            Errc::DipoleOutsideBrain);
  HeadModel h;
  h.series_terms = 5;
  EXPECT_EQ(code_of([&] { forward_potential(h, {Vec3(0, 0, 70.9), Vec3(1, 0, 0)}, el); }),
            Errc::SeriesNotConverged);
}

TEST(ResidualVariance, Examples) {
  Vector a(4), b(4);
  a << 1, -2, 3, 0.5;
  b << 2, 1, 0, 0;
  EXPECT_NEAR(residual_variance(a, a), 0.0, 1e-15);
  EXPECT_NEAR(residual_variance(2.0 * a, a), 0.0, 1e-15);
  EXPECT_NEAR(residual_variance(a, b), 1.0, 1e-15);
  EXPECT_EQ(code_of([&] { residual_variance(Vector::Zero(4), a); }), Errc::ZeroTopography);
}

TEST(ResidualVariance, ScaleInvariantAndBounded) {
  Rng rng(4);
  for (int k = 0; k < 50; ++k) {
    Vector a(9), b(9);
    for (Eigen::Index i = 0; i < 9; ++i) {
      a(i) = rng.normal();
      b(i) = rng.normal();
    }
    const double rv = residual_variance(a, b);
    EXPECT_GE(rv, 0.0);
    EXPECT_LE(rv, 1.0);
    EXPECT_NEAR(residual_variance(-3.0 * a, 0.01 * b), rv, 1e-12);
  }
}

TEST(Fit, RoundTripKnownDipole) {
  const Dipole truth{Vec3(0, 30, 40), Vec3(1, 0.5, -0.2)};
  const auto topo = forward_potential(HeadModel{}, truth, montage71());
  const auto r = fit_dipole(topo, HeadModel{}, montage71());
  EXPECT_LT((r.dipole.position - truth.position).norm(), 1.0);
  EXPECT_LT(r.rv, 1e-6);
  EXPECT_LT((r.dipole.moment - truth.moment).norm(), 1e-2);
  EXPECT_NEAR(r.model_topo.mean(), 0.0, 1e-9 * r.model_topo.cwiseAbs().maxCoeff());
}

TEST(Fit, RoundTripRandomDipoles) {
  const DipoleFitter fitter(HeadModel{}, montage71());
  const ForwardModel fm{HeadModel{}};
  const auto dirs = electrode_directions(montage71());
  Rng rng(5);
  int good = 0;
  const int n = 20;
  for (int k = 0; k < n; ++k) {
    const Dipole d{random_unit(rng) * 71.0 * 0.8 * std::cbrt(rng.uniform()), random_unit(rng)};
    const auto r = fitter.fit(fm.potential(d, dirs));
    if ((r.dipole.position - d.position).norm() < 1.0 && r.rv < 1e-6) ++good;
  }
  EXPECT_GE(good, n - 1);
}

TEST(Fit, SignFlip) {
  const DipoleFitter fitter(HeadModel{}, montage71());
  const auto topo = forward_potential(HeadModel{}, {Vec3(-20, 10, 35), Vec3(0.3, -1, 0.4)}, montage71());
  const auto a = fitter.fit(topo);
  const auto b = fitter.fit(-topo);
  EXPECT_NEAR(a.rv, b.rv, 1e-12);
  EXPECT_LT((a.dipole.position - b.dipole.position).norm(), 1e-9);
  EXPECT_LT((a.dipole.moment + b.dipole.moment).norm(), 1e-9 * a.dipole.moment.norm());
}

TEST(Fit, NoiseTopographiesAreNotDipolar) {
  const DipoleFitter fitter(HeadModel{}, montage71());
  Rng rng(6);
  std::vector<double> rvs;
  for (int k = 0; k < 100; ++k) {
    Vector t(71);
    for (Eigen::Index i = 0; i < 71; ++i) t(i) = rng.normal();
    const auto r = fitter.fit(t);
    EXPECT_GE(r.rv, 0.0);
    EXPECT_LE(r.rv, 1.0);
    EXPECT_LE(r.dipole.position.norm(), 0.98 * 71.0 + 1e-9);
    rvs.push_back(r.rv);
  }
  std::nth_element(rvs.begin(), rvs.begin() + 50, rvs.end());
  EXPECT_GT(rvs[50], 0.1);
}

TEST(Fit, Deterministic) {
  const auto topo = forward_potential(HeadModel{}, {Vec3(15, -25, 30), Vec3(0, 0, 1)}, montage71());
  Vector noisy = topo;
  Rng rng(7);
  for (Eigen::Index i = 0; i < noisy.size(); ++i) noisy(i) += 0.1 * topo.norm() / 8.4 * rng.normal();
  const auto a = fit_dipole(noisy, HeadModel{}, montage71());
  const auto b = fit_dipole(noisy, HeadModel{}, montage71());
  EXPECT_EQ(a.rv, b.rv);
  EXPECT_EQ(a.dipole.position, b.dipole.position);
}

TEST(Fit, Errors) {
  EXPECT_EQ(code_of([] { fit_dipole(Vector::Ones(71), HeadModel{}, montage71()); }), Errc::ZeroTopography);
  EXPECT_EQ(code_of([] { fit_dipole(Vector::Ones(5), HeadModel{}, montage71()); }), Errc::DimensionMismatch);
}

TEST(NearDipolarity, Examples) {
  EXPECT_DOUBLE_EQ(near_dipolarity(std::vector<double>{0, 0, 0}, 5), 100.0);
  EXPECT_DOUBLE_EQ(near_dipolarity(std::vector<double>{0.01, 0.2, 0.04, 0.5}, 5), 50.0);
  EXPECT_DOUBLE_EQ(near_dipolarity(std::vector<double>{0.06}, 5), 0.0);
  EXPECT_EQ(code_of([] { near_dipolarity(std::vector<double>{}, 5); }), Errc::EmptyInput);
  EXPECT_EQ(code_of([] { near_dipolarity(std::vector<double>{0.1}, 100); }), Errc::InvalidArgument);
}

TEST(NearDipolarity, MonotoneInThreshold) {
  Rng rng(8);
  std::vector<double> rv(40);
  for (auto& x : rv) x = rng.uniform() * 0.3;
  double prev = 0.0;
  for (double t = 0.5; t < 100; t += 0.5) {
    const double v = near_dipolarity(rv, t);
    EXPECT_GE(v, prev);
    prev = v;
  }
}
