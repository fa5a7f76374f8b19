#include "kappa/mir/mir.hpp"

#include <cmath>
#include <numbers>
#include <span>

#include "kappa/error.hpp"

namespace kappa::mir {

double mir_rate(double mir_bits_per_sample, double srate) {
  require(srate > 0.0, Errc::InvalidArgument, "mir_rate: srate must be positive");
  return mir_bits_per_sample * srate / 1000.0;
}

double log2_abs_det(const Matrix& w) {
  require(w.rows() == w.cols() && w.rows() > 0, Errc::DimensionMismatch, "log2_abs_det: matrix must be square");
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(w);
  const Eigen::MatrixXd& packed = lu.matrixLU();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < packed.rows(); ++i) acc += std::log(std::fabs(packed(i, i)));
  const double bits = acc / std::numbers::ln2;
  if (!std::isfinite(bits)) fail(Errc::SingularUnmixing, "unmixing matrix is singular");
  return bits;
}

std::vector<double> row_entropies(const Matrix& samples, const EntropyConfig& config) {
  std::vector<double> h(static_cast<std::size_t>(samples.rows()));
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    const std::span<const double> row(samples.row(i).data(), static_cast<std::size_t>(samples.cols()));
    h[static_cast<std::size_t>(i)] = marginal_entropy(row, config).value;
  }
  return h;
}

MirReport mir(const EegDataset& dataset, const Matrix& total_unmixing, const EntropyConfig& config) {
  return mir(dataset, total_unmixing, row_entropies(dataset.samples(), config), config);
}

MirReport mir(const EegDataset& dataset, const Matrix& total_unmixing, std::vector<double> h_x,
              const EntropyConfig& config) {
  const auto n = static_cast<Eigen::Index>(dataset.n_channels());
  if (total_unmixing.rows() != n || total_unmixing.cols() != n) {
    fail(Errc::DimensionMismatch, "mir: unmixing matrix does not match channel count");
  }
  require(h_x.size() == dataset.n_channels(), Errc::DimensionMismatch, "mir: channel entropy count mismatch");

  MirReport report;
  report.estimator = config.estimator;
  report.srate = dataset.srate();
  report.logdet_bits = log2_abs_det(total_unmixing);
  const Matrix y = total_unmixing * dataset.samples();
  report.h_y = row_entropies(y, config);
  report.h_x = std::move(h_x);

  double sum_x = 0.0, sum_y = 0.0;
  for (double v : report.h_x) sum_x += v;
  for (double v : report.h_y) sum_y += v;
  report.mir_bits_per_sample = report.logdet_bits + sum_x - sum_y;
  report.mir_kbits_per_sec = mir_rate(report.mir_bits_per_sample, report.srate);
  return report;
}

}  // namespace kappa::mir
