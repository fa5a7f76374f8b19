#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>

#include "kappa/error.hpp"
#include "kappa/mir/entropy.hpp"
#include "kappa/mir/mir.hpp"
#include "kappa/rng.hpp"
#include "oracles.hpp"

using namespace kappa;
using namespace kappa::mir;
using kappa::testing::wrap_samples;

namespace {

std::vector<double> draw(std::size_t n, std::uint64_t seed, int kind) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) {
    switch (kind) {
      case 0: x = rng.normal(); break;
      case 1: x = rng.uniform(); break;
      default: x = rng.generalized_gaussian(0.0, 1.0, 1.0); break;
    }
  }
  return v;
}

Matrix laplacian_sources(std::size_t n, std::size_t frames, std::uint64_t seed) {
  Rng rng(seed);
  Matrix s(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(frames));
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = rng.generalized_gaussian(0.0, 1.0, 1.0);
  return s;
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no kappa::Error thrown";
  return Errc::InvalidArgument;
}

}  // namespace

TEST(Entropy, StandardNormal) {
  const auto e = marginal_entropy(draw(1000000, 1, 0));
  EXPECT_NEAR(e.value, 0.5 * std::log2(2 * std::numbers::pi * std::numbers::e), 0.02);
  EXPECT_EQ(e.param, 1000u);
  EXPECT_EQ(e.n_samples, 1000000u);
  EXPECT_EQ(estimator_name(e.estimator), "m-spacing");
}

TEST(Entropy, Uniform) { EXPECT_NEAR(marginal_entropy(draw(1000000, 2, 1)).value, 0.0, 0.02); }

TEST(Entropy, LaplacianAgainstAnalyticAndHistogramOracle) {
  const auto x = draw(100000, 3, 2);
  const double analytic = std::log2(2 * std::numbers::e);
  const double v = marginal_entropy(x).value;
  EXPECT_NEAR(v, analytic, 0.03);
  EXPECT_NEAR(kappa::testing::entropy_fine_histogram(x, 2000), analytic, 0.03);
  EXPECT_NEAR(v, kappa::testing::entropy_fine_histogram(x, 2000), 0.03);
}

TEST(Entropy, HistogramEstimatorCrossCheck) {
  EntropyConfig cfg;
  cfg.estimator = Estimator::histogram;
  const auto e = marginal_entropy(draw(1000000, 4, 0), cfg);
  EXPECT_EQ(e.param, 512u);
  EXPECT_NEAR(e.value, 2.04710, 0.02);
}

TEST(Entropy, ScaleShiftLawIsExactForMSpacing) {
  const auto x = draw(5000, 5, 2);
  const double h = marginal_entropy(x).value;
  for (double c : {0.001, -3.0, 7.5}) {
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = c * x[i] + 11.0;
    EXPECT_NEAR(marginal_entropy(y).value, h + std::log2(std::fabs(c)), 1e-10);
  }
}

TEST(Entropy, Errors) {
  EXPECT_EQ(code_of([] { marginal_entropy(std::vector<double>(9, 1.0)); }), Errc::InvalidArgument);
  EXPECT_EQ(code_of([] { marginal_entropy(std::vector<double>(100, 3.0)); }), Errc::DegenerateSignal);
  EXPECT_EQ(code_of([] { parse_estimator("kde"); }), Errc::ConfigError);
  EXPECT_EQ(parse_estimator("hist"), Estimator::histogram);
  EXPECT_EQ(parse_estimator("mspacing"), Estimator::mspacing);
}

TEST(Entropy, TiedValuesStayFinite) {
  std::vector<double> x(1000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i % 4);
  EXPECT_TRUE(std::isfinite(marginal_entropy(x).value));
}

TEST(MirRate, Examples) {
  EXPECT_DOUBLE_EQ(mir_rate(1.0, 250), 0.25);
  EXPECT_DOUBLE_EQ(mir_rate(0.0, 250), 0.0);
  EXPECT_DOUBLE_EQ(mir_rate(0.4, 500), 0.2);
}

TEST(Mir, IdentityIsExactlyZero) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto d = wrap_samples(laplacian_sources(4, 2000, seed));
    const auto r = mir::mir(d, Matrix::Identity(4, 4));
    EXPECT_EQ(r.mir_bits_per_sample, 0.0);
    EXPECT_EQ(r.logdet_bits, 0.0);
    EXPECT_EQ(r.h_x, r.h_y);
  }
}

TEST(Mir, PermutationIsZero) {
  const auto d = wrap_samples(laplacian_sources(5, 3000, 9));
  Matrix p = Matrix::Zero(5, 5);
  const int perm[5] = {3, 0, 4, 1, 2};
  for (int i = 0; i < 5; ++i) p(i, perm[i]) = 1.0;
  EXPECT_LT(std::fabs(mir::mir(d, p).mir_bits_per_sample), 1e-9);
}

TEST(Mir, ReportConsistency) {
  const auto d = wrap_samples(laplacian_sources(3, 4000, 10), 512.0);
  Rng rng(1);
  Matrix w(3, 3);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.normal();
  const auto r = mir::mir(d, w);
  double s = r.logdet_bits;
  for (double h : r.h_x) s += h;
  for (double h : r.h_y) s -= h;
  EXPECT_NEAR(r.mir_bits_per_sample, s, 1e-12);
  EXPECT_NEAR(r.mir_kbits_per_sec, r.mir_bits_per_sample * 512.0 / 1000.0, 1e-12);
  EXPECT_NEAR(r.logdet_bits, std::log2(std::fabs(w.determinant())), 1e-12);

  const auto cached = mir::mir(d, w, r.h_x);
  EXPECT_EQ(cached.mir_bits_per_sample, r.mir_bits_per_sample);
}

TEST(Mir, RowScalingInvariance) {
  Matrix a(3, 3);
  a << 1, 0.4, 0.2, 0.3, 1, -0.5, 0.1, 0.2, 1;
  const auto d = wrap_samples(a * laplacian_sources(3, 5000, 12));
  const Matrix w = a.inverse();
  const double base = mir::mir(d, w).mir_bits_per_sample;
  Matrix scaled = w;
  scaled.row(0) *= 13.0;
  scaled.row(1) *= -0.02;
  scaled.row(2) *= 2.0;
  EXPECT_NEAR(mir::mir(d, scaled).mir_bits_per_sample, base, 1e-9);
}

TEST(Mir, PermutingComponentsAfterWIsNeutral) {
  Matrix a(3, 3);
  a << 1, 0.5, 0, 0.2, 1, 0.3, -0.4, 0, 1;
  const auto d = wrap_samples(a * laplacian_sources(3, 5000, 13));
  const Matrix w = a.inverse();
  Matrix p = Matrix::Zero(3, 3);
  p(0, 2) = p(1, 0) = p(2, 1) = 1.0;
  EXPECT_NEAR(mir::mir(d, p * w).mir_bits_per_sample, mir::mir(d, w).mir_bits_per_sample, 1e-9);
}

TEST(Mir, TrueUnmixingBeatsRandomRotations) {
  const std::size_t n = 4;
  Rng rng(14);
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  // Whiten the mixture so rotations are the natural competitors of W_true.
  const Matrix s = laplacian_sources(n, 100000, 15);
  const Matrix x = a * s;
  const Matrix cov = x * x.transpose() / static_cast<double>(x.cols());
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  const Matrix white = es.eigenvectors() * es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
                       es.eigenvectors().transpose();
  const auto d = wrap_samples(x);
  const auto hx = row_entropies(x);
  const double best = mir::mir(d, a.inverse(), hx).mir_bits_per_sample;
  for (int k = 0; k < 20; ++k) {
    const Matrix w = kappa::testing::random_orthogonal(n, rng) * white;
    EXPECT_GE(best, mir::mir(d, w, hx).mir_bits_per_sample - 0.005) << "rotation " << k;
  }
}

TEST(Mir, MatchesTwoDimensionalHistogramOracle) {
  const std::size_t n = 1000000;
  Matrix a(2, 2);
  a << 1, 0.5, 0.5, 1;
  const Matrix x = a * laplacian_sources(2, n, 16);
  std::vector<double> x0(x.row(0).begin(), x.row(0).end());
  std::vector<double> x1(x.row(1).begin(), x.row(1).end());
  const double oracle = kappa::testing::mi_2d_histogram(x0, x1, 128);
  const double got = mir::mir(wrap_samples(x), a.inverse()).mir_bits_per_sample;
  EXPECT_LT(std::fabs(got - oracle), 0.01) << "mir " << got << " oracle " << oracle;
}

TEST(Mir, Errors) {
  const auto d = wrap_samples(laplacian_sources(2, 100, 17));
  EXPECT_EQ(code_of([&] { mir::mir(d, Matrix::Zero(2, 2)); }), Errc::SingularUnmixing);
  EXPECT_EQ(code_of([&] { mir::mir(d, Matrix::Identity(3, 3)); }), Errc::DimensionMismatch);
  Matrix c(2, 100);
  c.row(0).setConstant(1.0);
  c.row(1) = laplacian_sources(1, 100, 18);
  EXPECT_EQ(code_of([&] { mir::mir(wrap_samples(c), Matrix::Identity(2, 2)); }), Errc::DegenerateSignal);
}
