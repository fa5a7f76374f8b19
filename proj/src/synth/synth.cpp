#include "kappa/synth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numbers>

#include "kappa/error.hpp"
#include "kappa/rng.hpp"

namespace kappa::synth {
namespace {

Vec3 random_unit(Rng& rng) {
  Vec3 v;
  do {
    v = Vec3(rng.normal(), rng.normal(), rng.normal());
  } while (v.norm() < 1e-12);
  return v.normalized();
}

}  // namespace

std::vector<ElectrodePosition> fibonacci_montage(std::size_t n, double radius_mm, double max_theta) {
  require(n >= 1, Errc::InvalidArgument, "montage needs at least one electrode");
  require(max_theta > 0.0 && max_theta <= std::numbers::pi, Errc::InvalidArgument, "montage cap angle out of range");
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  const double z_span = 1.0 - std::cos(max_theta);
  std::vector<ElectrodePosition> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 1.0 - z_span * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    double phi = std::remainder(golden * static_cast<double>(i), 2.0 * std::numbers::pi);
    if (phi <= -std::numbers::pi) phi += 2.0 * std::numbers::pi;
    out[i].theta = std::acos(std::clamp(z, -1.0, 1.0));
    out[i].phi = phi;
    out[i].radius = radius_mm;
  }
  return out;
}

std::vector<std::string> default_labels(std::size_t n) {
  std::vector<std::string> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = "E" + std::to_string(i + 1);
  return labels;
}

Montage load_montage(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoError, "cannot open montage " + path.string());
  Montage m;
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& e : j.at("electrodes")) {
      m.labels.push_back(e.at("label").get<std::string>());
      ElectrodePosition p{e.at("theta_rad").get<double>(), e.at("phi_rad").get<double>(), e.at("radius_mm").get<double>()};
      p.validate();
      m.electrodes.push_back(p);
    }
  } catch (const nlohmann::json::exception& ex) {
    fail(Errc::FormatError, "montage " + path.string() + ": " + ex.what());
  }
  if (m.electrodes.empty()) fail(Errc::FormatError, "montage " + path.string() + " has no electrodes");
  return m;
}

void save_montage(const Montage& montage, const std::filesystem::path& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t i = 0; i < montage.electrodes.size(); ++i) {
    const auto& e = montage.electrodes[i];
    arr.push_back({{"label", montage.labels.at(i)}, {"theta_rad", e.theta}, {"phi_rad", e.phi}, {"radius_mm", e.radius}});
  }
  std::ofstream out(path);
  if (!out) fail(Errc::IoError, "cannot write montage " + path.string());
  out << nlohmann::json{{"electrodes", arr}}.dump(2) << '\n';
}

double SynthSpec::shape(std::size_t source) const {
  return source_shapes.size() == 1 ? source_shapes.front() : source_shapes.at(source);
}

void SynthSpec::validate(std::size_t n_electrodes) const {
  if (n_sources < 1 || n_sources > n_electrodes) fail(Errc::ConfigError, "n_sources must be in [1, n_electrodes]");
  if (n_frames < 10 * n_sources) fail(Errc::ConfigError, "n_frames must be at least 10 x n_sources");
  if (!(srate > 0.0)) fail(Errc::ConfigError, "srate must be positive");
  if (source_shapes.size() != 1 && source_shapes.size() != n_sources) {
    fail(Errc::ConfigError, "source_shapes needs one value or one per source");
  }
  for (double r : source_shapes) {
    if (!(r > 0.0) || !std::isfinite(r)) fail(Errc::ConfigError, "source shapes must be positive");
  }
  if (!(ecc_min >= 0.0 && ecc_min <= ecc_max && ecc_max < 1.0)) fail(Errc::ConfigError, "bad eccentricity range");
  if (std::isnan(noise_db) || noise_db == HUGE_VAL) fail(Errc::ConfigError, "noise_db must be finite or -inf");
}

std::pair<EegDataset, GroundTruth> generate(const SynthSpec& spec, const dipfit::HeadModel& head,
                                            const std::vector<ElectrodePosition>& electrodes,
                                            const std::vector<std::string>& labels) {
  const std::size_t n_el = electrodes.size();
  spec.validate(n_el);
  head.validate();
  Rng rng(spec.seed);

  const dipfit::ForwardModel forward(head);
  const auto dirs = dipfit::electrode_directions(electrodes);
  GroundTruth truth;
  truth.mixing.resize(static_cast<Eigen::Index>(n_el), static_cast<Eigen::Index>(spec.n_sources));
  for (std::size_t k = 0; k < spec.n_sources; ++k) {
    const Vec3 where = random_unit(rng);
    const double ecc = spec.ecc_min + (spec.ecc_max - spec.ecc_min) * rng.uniform();
    dipfit::Dipole dip;
    dip.position = ecc * head.inner_radius() * where;
    dip.moment = random_unit(rng);
    const Vector unit = forward.potential(dip, dirs, dipfit::Reference::none);
    const double rms = std::sqrt(unit.squaredNorm() / static_cast<double>(n_el));
    dip.moment /= rms;
    truth.mixing.col(static_cast<Eigen::Index>(k)) = forward.potential(dip, dirs, dipfit::Reference::none);
    truth.dipoles.push_back(dip);
  }

  const auto t = static_cast<Eigen::Index>(spec.n_frames);
  truth.sources.resize(static_cast<Eigen::Index>(spec.n_sources), t);
  for (std::size_t k = 0; k < spec.n_sources; ++k) {
    const double rho = spec.shape(k);
    const double beta = std::sqrt(std::tgamma(3.0 / rho) / std::tgamma(1.0 / rho));
    for (Eigen::Index f = 0; f < t; ++f) {
      truth.sources(static_cast<Eigen::Index>(k), f) = rng.generalized_gaussian(0.0, beta, rho);
    }
  }

  Matrix x = truth.mixing * truth.sources;
  if (spec.noise_db != SynthSpec::kNoNoise) {
    const double power = x.squaredNorm() / static_cast<double>(x.size());
    const double sd = std::sqrt(power * std::pow(10.0, spec.noise_db / 10.0));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index f = 0; f < t; ++f) x(i, f) += sd * rng.normal();
    }
  }
  x = x.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });

  EegDataset data(std::move(x), spec.srate, labels.empty() ? default_labels(n_el) : labels, electrodes);
  return {std::move(data), std::move(truth)};
}

double amari_index(const Matrix& p) {
  require(p.rows() == p.cols() && p.rows() >= 1, Errc::DimensionMismatch, "amari_index: matrix must be square");
  const Eigen::Index n = p.rows();
  if (n == 1) return 0.0;
  const Matrix a = p.cwiseAbs();
  double rows = 0.0, cols = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mr = a.row(i).maxCoeff();
    const double mc = a.col(i).maxCoeff();
    if (!(mr > 0.0) || !(mc > 0.0)) fail(Errc::DegenerateMatrix, "amari_index: zero row or column");
    rows += a.row(i).sum() / mr - 1.0;
    cols += a.col(i).sum() / mc - 1.0;
  }
  const double nd = static_cast<double>(n);
  return (rows + cols) / (2.0 * nd * (nd - 1.0));
}

}  // namespace kappa::synth
