#include "kappa/ica/amica.hpp"

#include <gsl/gsl_sf_psi.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <span>

#include "../core/gsl_quiet.hpp"
#include "kappa/error.hpp"
#include "kappa/rng.hpp"
#include "kappa/simd/kernels.hpp"

namespace kappa::ica {
namespace {

constexpr double kAlphaFloor = 1e-8;
constexpr double kLog2 = 0.69314718055994530942;

double log_abs_det(const Matrix& b) {
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(b);
  const Eigen::MatrixXd& packed = lu.matrixLU();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < packed.rows(); ++i) acc += std::log(std::fabs(packed(i, i)));
  return acc;
}

simd::MixtureParams to_params(const SourceDensity& d) {
  simd::MixtureParams p;
  p.n_mix = d.n_mix();
  for (std::size_t j = 0; j < p.n_mix; ++j) {
    p.mu[j] = d.mu[j];
    p.beta[j] = d.beta[j];
    p.rho[j] = d.rho[j];
    p.log_coef[j] = std::log(d.alpha[j]) + std::log(d.rho[j] * d.beta[j]) - kLog2 - std::lgamma(1.0 / d.rho[j]);
  }
  return p;
}

void check_densities(const std::vector<SourceDensity>& densities, std::size_t n) {
  require(densities.size() == n, Errc::DimensionMismatch, "density count does not match source count");
  for (const auto& d : densities) {
    const std::size_t m = d.n_mix();
    require(m >= 1 && m <= simd::kMaxMixtures, Errc::InvalidArgument, "mixture count out of range");
    require(d.mu.size() == m && d.beta.size() == m && d.rho.size() == m, Errc::DimensionMismatch,
            "inconsistent mixture parameter lengths");
  }
}

// Everything derived from one (B, densities) state.
struct Evaluation {
  Matrix y;       // B x
  Matrix score;   // g(y), row per source
  std::vector<simd::MixtureStats> stats;
  double ll = 0.0;
};

void evaluate(const Matrix& x, const Matrix& b, const std::vector<SourceDensity>& densities, Evaluation& ev) {
  const Eigen::Index n = x.rows();
  const auto t = static_cast<std::size_t>(x.cols());
  ev.y.noalias() = b * x;
  ev.score.resize(n, x.cols());
  ev.stats.resize(static_cast<std::size_t>(n));
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    simd::gg_mixture_pass(std::span<const double>(ev.y.row(i).data(), t), to_params(densities[idx]),
                          std::span<double>(ev.score.row(i).data(), t), ev.stats[idx]);
    sum += ev.stats[idx].sum_log_q;
  }
  ev.ll = log_abs_det(b) + sum / static_cast<double>(t);
}

// Likelihood only, for line-search candidates; `y` is scratch space.
double candidate_ll(const Matrix& x, const Matrix& b, const std::vector<SourceDensity>& densities, Matrix& y) {
  const auto t = static_cast<std::size_t>(x.cols());
  y.noalias() = b * x;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    sum += simd::gg_mixture_loglik(std::span<const double>(y.row(i).data(), t),
                                   to_params(densities[static_cast<std::size_t>(i)]));
  }
  return log_abs_det(b) + sum / static_cast<double>(t);
}

// Cap on a component's inverse scale in sphered units. Without it a mixture
// component can collapse onto a handful of samples and the likelihood grows
// without bound on short recordings.
constexpr double kBetaMax = 100.0;

// Generalized EM update of one source's mixture from the pass statistics.
SourceDensity m_step(const SourceDensity& d, const simd::MixtureStats& st, double n_frames) {
  SourceDensity out = d;
  const std::size_t m = d.n_mix();
  double alpha_total = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    out.alpha[j] = std::max(st.z[j] / n_frames, kAlphaFloor);
    alpha_total += out.alpha[j];
  }
  for (std::size_t j = 0; j < m; ++j) {
    out.alpha[j] /= alpha_total;
    const double z = st.z[j];
    if (!(z > 1e-6 * n_frames)) continue;  // starved component: keep its shape
    const double rho = d.rho[j], beta = d.beta[j];

    if (st.z_w[j] > 0.0 && std::isfinite(st.z_w[j])) {
      const double factor = rho <= 2.0 ? 1.0 : rho - 1.0;
      const double step = st.z_fp[j] / (factor * beta * st.z_w[j]);
      if (std::isfinite(step)) out.mu[j] = d.mu[j] + step;
    }
    if (st.z_pw[j] > 0.0) {
      const double nb = beta * std::pow(z / (rho * st.z_pw[j]), 1.0 / rho);
      if (std::isfinite(nb) && nb > 0.0) out.beta[j] = std::min(nb, kBetaMax);
    }

    // Newton step on the shape, from sum z [log rho - lgamma(1/rho) - |u|^rho].
    detail::quiet_gsl();
    const double inv = 1.0 / rho;
    const double psi = gsl_sf_psi(inv), psi1 = gsl_sf_psi_1(inv);
    const double grad = z * (inv + psi * inv * inv) - st.z_pw_log[j];
    const double hess = z * (-inv * inv - 2.0 * psi * inv * inv * inv - psi1 * inv * inv * inv * inv) - st.z_pw_log2[j];
    double delta = hess < 0.0 ? -grad / hess : (grad > 0.0 ? 0.1 : -0.1);
    if (!std::isfinite(delta)) delta = 0.0;
    delta = std::clamp(delta, -0.5, 0.5);
    out.rho[j] = std::clamp(rho + delta, kRhoMin, kRhoMax);
  }
  return out;
}

// Relative update direction D (B <- B + eta D B). Newton when the
// block-diagonal Hessian approximation is positive definite, natural gradient
// otherwise. Returns true for a Newton direction.
bool direction(const Evaluation& ev, bool try_newton, Matrix& d) {
  const Eigen::Index n = ev.y.rows();
  const double t = static_cast<double>(ev.y.cols());
  Matrix g = Matrix::Identity(n, n);
  g.noalias() -= (ev.score * ev.y.transpose()) / t;
  // Per-source scale is owned by the density update (beta) and rows are
  // renormalised after every step, so the diagonal is left out of the
  // B step; keeping it double-counts the scale change and forces halving.
  g.diagonal().setZero();
  d = g;
  if (!try_newton) return false;

  std::vector<double> kappa(static_cast<std::size_t>(n)), var(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    kappa[idx] = ev.stats[idx].score_sq / t;
    var[idx] = ev.y.row(i).squaredNorm() / t;
  }
  Matrix newton(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lambda = ev.stats[static_cast<std::size_t>(i)].score_sq_y_sq / t - 1.0;
    if (!(lambda > 1e-8)) return false;
    newton(i, i) = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (k == i) continue;
      const double c_ik = kappa[static_cast<std::size_t>(i)] * var[static_cast<std::size_t>(k)];
      const double c_ki = kappa[static_cast<std::size_t>(k)] * var[static_cast<std::size_t>(i)];
      const double det = c_ik * c_ki - 1.0;
      if (!(c_ik > 0.0) || !(det > 1e-8)) return false;
      newton(i, k) = (c_ki * g(i, k) - g(k, i)) / det;
    }
  }
  if (!newton.allFinite()) return false;
  d = newton;
  return true;
}

// Unit-norm rows; the densities absorb the scale so the likelihood is unchanged.
void normalize_rows(Matrix& b, std::vector<SourceDensity>& densities) {
  for (Eigen::Index i = 0; i < b.rows(); ++i) {
    const double c = b.row(i).norm();
    if (!(c > 0.0) || !std::isfinite(c)) continue;
    b.row(i) /= c;
    auto& d = densities[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < d.n_mix(); ++j) {
      d.mu[j] /= c;
      d.beta[j] *= c;
    }
  }
}

std::vector<SourceDensity> blend(const std::vector<SourceDensity>& from, const std::vector<SourceDensity>& to,
                                 double lambda) {
  std::vector<SourceDensity> out = from;
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t j = 0; j < out[i].n_mix(); ++j) {
      out[i].alpha[j] += lambda * (to[i].alpha[j] - from[i].alpha[j]);
      out[i].mu[j] += lambda * (to[i].mu[j] - from[i].mu[j]);
      out[i].beta[j] += lambda * (to[i].beta[j] - from[i].beta[j]);
      out[i].rho[j] += lambda * (to[i].rho[j] - from[i].rho[j]);
    }
  }
  return out;
}

Matrix checked_inverse(const Matrix& w) {
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(w);
  if (!lu.isInvertible()) fail(Errc::SingularUnmixing, "unmixing matrix is singular");
  return lu.inverse();
}

}  // namespace

void AmicaConfig::validate() const {
  if (max_iter < 1) fail(Errc::ConfigError, "max_iter must be at least 1");
  if (n_mix < 1 || n_mix > simd::kMaxMixtures) {
    fail(Errc::ConfigError, "n_mix must be between 1 and " + std::to_string(simd::kMaxMixtures));
  }
  if (!(tol > 0.0)) fail(Errc::ConfigError, "tol must be positive");
  if (!(lrate0 > 0.0 && lrate0 <= 1.0)) fail(Errc::ConfigError, "lrate0 must be in (0, 1]");
}

SphereResult sphere(const Matrix& samples) {
  const Eigen::Index n = samples.rows(), t = samples.cols();
  require(n >= 1 && t >= 2, Errc::InsufficientData, "sphere: need at least 2 frames");
  SphereResult out;
  out.transform.mean = samples.rowwise().mean();
  Matrix centered = samples.colwise() - out.transform.mean;
  const Eigen::MatrixXd cov = (centered * centered.transpose()) / static_cast<double>(t);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) fail(Errc::NumericalFailure, "sphere: eigendecomposition failed");
  const Vector& lambda = eig.eigenvalues();  // ascending
  if (!(lambda(0) > 1e-12 * lambda(n - 1))) {
    fail(Errc::RankDeficient, "channel covariance is rank deficient (duplicated or flat channels)");
  }
  const Eigen::MatrixXd& v = eig.eigenvectors();
  out.transform.matrix = v * lambda.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
  out.sphered.noalias() = out.transform.matrix * centered;
  return out;
}

SphereResult sphere(const EegDataset& dataset) { return sphere(dataset.samples()); }

double gg_logpdf(double y, double mu, double beta, double rho) {
  return std::log(rho * beta) - kLog2 - std::lgamma(1.0 / rho) - std::pow(std::fabs(beta * (y - mu)), rho);
}

double loglikelihood(const Matrix& samples, const Matrix& unmixing, const std::vector<SourceDensity>& densities) {
  require(unmixing.rows() == unmixing.cols() && unmixing.cols() == samples.rows(), Errc::DimensionMismatch,
          "loglikelihood: unmixing matrix does not match the data");
  require(samples.cols() >= 1, Errc::InsufficientData, "loglikelihood: no frames");
  check_densities(densities, static_cast<std::size_t>(samples.rows()));
  Evaluation ev;
  evaluate(samples, unmixing, densities, ev);
  if (!std::isfinite(ev.ll)) fail(Errc::NumericalFailure, "loglikelihood is not finite");
  return ev.ll;
}

IcaResult amica_fit(const Matrix& x, const AmicaConfig& config) {
  config.validate();
  const Eigen::Index n = x.rows();
  const auto un = static_cast<std::size_t>(n);
  const double t = static_cast<double>(x.cols());
  if (x.cols() < 2 * n) {
    fail(Errc::InsufficientData, "ICA needs at least 2 x n_channels frames (" + std::to_string(2 * n) + "), got " +
                                     std::to_string(x.cols()));
  }
  if (x.cols() < n * n) spdlog::warn("ICA on {} frames for {} channels: kappa below 1", x.cols(), n);
  if (!x.allFinite()) fail(Errc::InvalidArgument, "ICA input contains non-finite values");

  Rng rng(config.seed);
  Matrix b(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < n; ++k) b(i, k) = (i == k ? 1.0 : 0.0) + 0.01 * rng.normal();
  }
  b.rowwise().normalize();

  const Matrix y0 = b * x;
  std::vector<SourceDensity> dens(un);
  for (std::size_t i = 0; i < un; ++i) {
    const auto row = y0.row(static_cast<Eigen::Index>(i));
    const double mean = row.mean();
    const double sd = std::max(std::sqrt((row.array() - mean).square().mean()), 1e-12);
    auto& d = dens[i];
    const std::size_t m = config.n_mix;
    d.alpha.assign(m, 1.0 / static_cast<double>(m));
    d.mu.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      const double frac = m == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(j) / static_cast<double>(m - 1);
      d.mu[j] = mean + frac * sd;
    }
    d.beta.assign(m, 1.0 / sd);
    d.rho.assign(m, 1.5);
  }

  Evaluation cur, cand;
  evaluate(x, b, dens, cur);
  if (!std::isfinite(cur.ll)) fail(Errc::NumericalFailure, "initial log-likelihood is not finite");

  IcaResult result;
  result.config = config;
  result.isa = std::string(simd::isa_name(simd::active_isa()));
  result.ll_trace.push_back(cur.ll);

  std::size_t small_steps = 0;
  // Joint steps start a couple of halvings above the last accepted size, so a
  // stalled unmixing update costs a few evaluations rather than the full ladder.
  std::size_t joint_first = 0;
  Matrix d, y_scratch;
  for (std::size_t iter = 1; iter <= config.max_iter; ++iter) {
    std::vector<SourceDensity> target(un);
    for (std::size_t i = 0; i < un; ++i) target[i] = m_step(dens[i], cur.stats[i], t);
    const bool newton = direction(cur, iter > config.newton_start, d);
    const double eta = newton ? 1.0 : config.lrate0;
    const Matrix db = d * b;

    // Joint step first; if no halving of it improves the likelihood, try the
    // density and unmixing updates on their own before giving up.
    bool accepted = false, any_finite = false;
    Matrix b_next;
    std::vector<SourceDensity> dens_next;
    for (int mode = 0; mode < 3 && !accepted; ++mode) {
      const bool move_b = mode != 1, move_dens = mode != 2;
      const std::size_t first = mode == 0 ? joint_first : 0;
      double lambda = std::ldexp(1.0, -static_cast<int>(first));
      for (std::size_t h = first; h <= config.max_halvings; ++h, lambda *= 0.5) {
        b_next = move_b ? Matrix(b + (lambda * eta) * db) : b;
        dens_next = move_dens ? blend(dens, target, lambda) : dens;
        normalize_rows(b_next, dens_next);
        const double ll = candidate_ll(x, b_next, dens_next, y_scratch);
        if (!std::isfinite(ll)) continue;
        any_finite = true;
        if (ll >= cur.ll) {
          accepted = true;
          if (mode == 0) joint_first = h > 2 ? h - 2 : 0;
          break;
        }
      }
      if (mode == 0 && !accepted) joint_first = config.max_halvings > 2 ? config.max_halvings - 2 : 0;
    }
    if (!any_finite) fail(Errc::NumericalFailure, "log-likelihood became non-finite at iteration " + std::to_string(iter));

    const double prev = cur.ll;
    if (accepted) {
      b = std::move(b_next);
      dens = std::move(dens_next);
      evaluate(x, b, dens, cand);
      std::swap(cur, cand);
    } else {
      ++result.rejected_steps;
    }
    result.ll_trace.push_back(cur.ll);
    result.iterations_used = iter;

    const double rel = (cur.ll - prev) / std::max(1.0, std::fabs(prev));
    small_steps = rel < config.tol ? small_steps + 1 : 0;
    if (iter >= config.min_iter && small_steps >= 5) {
      result.converged = true;
      break;
    }
    // Nothing improved: the state is unchanged, so further iterations would
    // repeat this one exactly. The likelihood is at a numerical stationary point.
    if (!accepted) {
      result.converged = true;
      break;
    }
  }

  result.sphering.matrix = Matrix::Identity(n, n);
  result.sphering.mean = Vector::Zero(n);
  result.unmixing = b;
  result.total_unmixing = b;
  result.mixing = checked_inverse(b);
  result.densities = std::move(dens);
  spdlog::debug("amica: {} iterations, converged={}, ll={:.8f}, rejected={}", result.iterations_used,
                result.converged, cur.ll, result.rejected_steps);
  return result;
}

IcaResult decompose(const EegDataset& dataset, const AmicaConfig& config) {
  SphereResult sph = sphere(dataset);
  IcaResult result = amica_fit(sph.sphered, config);
  result.sphering = std::move(sph.transform);
  result.total_unmixing = result.unmixing * result.sphering.matrix;
  result.mixing = checked_inverse(result.total_unmixing);
  return result;
}

}  // namespace kappa::ica
