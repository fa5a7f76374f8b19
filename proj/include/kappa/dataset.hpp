#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "kappa/types.hpp"

namespace kappa {

/// Electrode location in head-centred spherical coordinates.
struct ElectrodePosition {
  double theta = 0.0;   // inclination from +z, radians, [0, pi]
  double phi = 0.0;     // azimuth, radians, (-pi, pi]
  double radius = 1.0;  // mm

  /// Unit vector pointing from the head centre towards the electrode.
  Vec3 direction() const;

  /// Throws InvalidArgument when the angles or radius are out of range.
  void validate() const;

  static ElectrodePosition from_cartesian(const Vec3& p);
};

/// Multichannel recording: channels x frames samples plus montage metadata.
/// Immutable after construction; every constructor path validates.
class EegDataset {
 public:
  EegDataset(Matrix samples, double srate, std::vector<std::string> labels,
             std::vector<ElectrodePosition> electrodes);

  const Matrix& samples() const noexcept { return samples_; }
  double srate() const noexcept { return srate_; }
  const std::vector<std::string>& channel_labels() const noexcept { return labels_; }
  const std::vector<ElectrodePosition>& electrodes() const noexcept { return electrodes_; }

  std::size_t n_channels() const noexcept { return static_cast<std::size_t>(samples_.rows()); }
  std::size_t n_frames() const noexcept { return static_cast<std::size_t>(samples_.cols()); }

  /// Same metadata, new samples (validated).
  EegDataset with_samples(Matrix samples) const;

 private:
  Matrix samples_;
  double srate_;
  std::vector<std::string> labels_;
  std::vector<ElectrodePosition> electrodes_;
};

struct KappaSpec {
  double kappa = 0.0;
  std::uint64_t seed = 0;
};

/// ceil(kappa * n_channels^2): smallest frame count reaching the target ratio.
std::size_t required_frames(std::size_t n_channels, double kappa);

/// n_frames / n_channels^2.
double realized_kappa(const EegDataset& dataset);

/// Frame indices chosen by subsample_frames, ascending.
std::vector<std::size_t> subsample_indices(std::size_t n_frames, std::size_t count,
                                           std::uint64_t seed);

/// Random subset of frames (without replacement) sized for spec.kappa, kept in
/// temporal order. Throws InsufficientData when the recording is too short.
EegDataset subsample_frames(const EegDataset& dataset, const KappaSpec& spec);

/// Copy with each channel's mean subtracted.
EegDataset remove_channel_means(const EegDataset& dataset);

/// KEEG file pair: `<stem>.json` header and raw little-endian f32 payload.
EegDataset load_dataset(const std::filesystem::path& header_path);

/// Writes `<stem>.json` and `<stem>.f32`. Returns false if any sample was not
/// exactly representable as f32 (the file still gets written, rounded).
bool save_dataset(const EegDataset& dataset, const std::filesystem::path& header_path);

}  // namespace kappa
