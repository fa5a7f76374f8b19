#include "kappa/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "kappa/error.hpp"
#include "kappa/rng.hpp"

namespace kappa {

Vec3 ElectrodePosition::direction() const {
  return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

void ElectrodePosition::validate() const {
  constexpr double pi = std::numbers::pi;
  if (!(theta >= 0.0 && theta <= pi)) fail(Errc::InvalidArgument, "electrode theta outside [0, pi]");
  if (!(phi > -pi && phi <= pi)) fail(Errc::InvalidArgument, "electrode phi outside (-pi, pi]");
  if (!(radius > 0.0) || !std::isfinite(radius)) fail(Errc::InvalidArgument, "electrode radius must be positive");
}

ElectrodePosition ElectrodePosition::from_cartesian(const Vec3& p) {
  ElectrodePosition e;
  e.radius = p.norm();
  e.theta = std::acos(std::clamp(p.z() / e.radius, -1.0, 1.0));
  e.phi = std::atan2(p.y(), p.x());
  if (e.phi <= -std::numbers::pi) e.phi = std::numbers::pi;
  return e;
}

EegDataset::EegDataset(Matrix samples, double srate, std::vector<std::string> labels,
                       std::vector<ElectrodePosition> electrodes)
    : samples_(std::move(samples)),
      srate_(srate),
      labels_(std::move(labels)),
      electrodes_(std::move(electrodes)) {
  if (samples_.rows() < 2) fail(Errc::InvalidArgument, "dataset needs at least 2 channels");
  if (samples_.cols() < 1) fail(Errc::InvalidArgument, "dataset needs at least 1 frame");
  if (!(srate_ > 0.0) || !std::isfinite(srate_)) fail(Errc::InvalidArgument, "sampling rate must be positive");
  if (labels_.size() != n_channels()) fail(Errc::InvalidArgument, "channel label count differs from channel count");
  if (electrodes_.size() != n_channels()) fail(Errc::InvalidArgument, "electrode count differs from channel count");
  if (!samples_.allFinite()) fail(Errc::InvalidArgument, "samples contain non-finite values");
  for (const auto& e : electrodes_) e.validate();
}

EegDataset EegDataset::with_samples(Matrix samples) const {
  return EegDataset(std::move(samples), srate_, labels_, electrodes_);
}

std::size_t required_frames(std::size_t n_channels, double kappa) {
  require(n_channels >= 2, Errc::InvalidArgument, "required_frames: n_channels must be >= 2");
  require(kappa > 0.0 && std::isfinite(kappa), Errc::InvalidArgument, "required_frames: kappa must be positive");
  const double n2 = static_cast<double>(n_channels) * static_cast<double>(n_channels);
  // Settle on the smallest count whose realized ratio, evaluated exactly as
  // realized_kappa does, reaches the target.
  auto frames = static_cast<std::size_t>(std::ceil(kappa * n2));
  frames = std::max<std::size_t>(frames, 1);
  while (frames > 1 && static_cast<double>(frames - 1) / n2 >= kappa) --frames;
  while (static_cast<double>(frames) / n2 < kappa) ++frames;
  return frames;
}

double realized_kappa(const EegDataset& dataset) {
  const double n = static_cast<double>(dataset.n_channels());
  return static_cast<double>(dataset.n_frames()) / (n * n);
}

std::vector<std::size_t> subsample_indices(std::size_t n_frames, std::size_t count,
                                           std::uint64_t seed) {
  if (count > n_frames) {
    fail(Errc::InsufficientData, "requested " + std::to_string(count) + " frames but recording has " +
                                     std::to_string(n_frames));
  }
  std::vector<std::size_t> perm(n_frames);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  // Partial Fisher-Yates: the first `count` slots are a uniform random draw.
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n_frames - i));
    std::swap(perm[i], perm[j]);
  }
  perm.resize(count);
  std::sort(perm.begin(), perm.end());
  return perm;
}

EegDataset subsample_frames(const EegDataset& dataset, const KappaSpec& spec) {
  const std::size_t count = required_frames(dataset.n_channels(), spec.kappa);
  if (count > dataset.n_frames()) {
    fail(Errc::InsufficientData, "kappa " + std::to_string(spec.kappa) + " needs " + std::to_string(count) +
                                     " frames; recording has " + std::to_string(dataset.n_frames()));
  }
  const auto idx = subsample_indices(dataset.n_frames(), count, spec.seed);
  const Matrix& src = dataset.samples();
  Matrix out(src.rows(), static_cast<Eigen::Index>(count));
  for (Eigen::Index c = 0; c < src.rows(); ++c) {
    const double* in = src.row(c).data();
    double* dst = out.row(c).data();
    for (std::size_t k = 0; k < count; ++k) dst[k] = in[idx[k]];
  }
  return dataset.with_samples(std::move(out));
}

EegDataset remove_channel_means(const EegDataset& dataset) {
  Matrix centred = dataset.samples();
  for (Eigen::Index c = 0; c < centred.rows(); ++c) {
    centred.row(c).array() -= centred.row(c).mean();
  }
  return dataset.with_samples(std::move(centred));
}

}  // namespace kappa
