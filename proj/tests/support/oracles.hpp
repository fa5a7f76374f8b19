#pragma once

// Independent reference computations shared by unit and acceptance tests.
// Nothing here calls into the library code it is used to check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "kappa/dataset.hpp"
#include "kappa/rng.hpp"

namespace kappa::testing {

/// Wrap a sample matrix as a dataset with dummy labels and positions.
inline EegDataset wrap_samples(Matrix samples, double srate = 250.0) {
  const auto n = static_cast<std::size_t>(samples.rows());
  std::vector<std::string> labels;
  std::vector<ElectrodePosition> el;
  for (std::size_t i = 0; i < n; ++i) {
    labels.push_back("ch" + std::to_string(i));
    el.push_back({0.2 + 0.1 * static_cast<double>(i % 20), 0.0, 85.0});
  }
  return EegDataset(std::move(samples), srate, std::move(labels), std::move(el));
}

/// Rank of every sample, mapped onto `bins` equally populated bins.
inline std::vector<std::size_t> quantile_bins(const std::vector<double>& x, std::size_t bins) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<std::size_t> bin(x.size());
  for (std::size_t r = 0; r < order.size(); ++r) bin[order[r]] = r * bins / order.size();
  return bin;
}

/// Mutual information of two samples, in bits, from a 2-D histogram on
/// equiprobable marginal bins with the Miller-Madow count correction.
inline double mi_2d_histogram(const std::vector<double>& x, const std::vector<double>& y, std::size_t bins) {
  const auto bx = quantile_bins(x, bins);
  const auto by = quantile_bins(y, bins);
  const double n = static_cast<double>(x.size());
  std::vector<double> joint(bins * bins, 0.0), px(bins, 0.0), py(bins, 0.0);
  for (std::size_t t = 0; t < x.size(); ++t) {
    joint[bx[t] * bins + by[t]] += 1.0;
    px[bx[t]] += 1.0;
    py[by[t]] += 1.0;
  }
  auto plugin = [n](const std::vector<double>& counts, std::size_t& occupied) {
    double h = 0.0;
    occupied = 0;
    for (double c : counts) {
      if (c <= 0) continue;
      ++occupied;
      h -= (c / n) * std::log(c / n);
    }
    return h;
  };
  std::size_t kx, ky, kxy;
  const double hx = plugin(px, kx) + (static_cast<double>(kx) - 1) / (2 * n);
  const double hy = plugin(py, ky) + (static_cast<double>(ky) - 1) / (2 * n);
  const double hxy = plugin(joint, kxy) + (static_cast<double>(kxy) - 1) / (2 * n);
  return (hx + hy - hxy) / std::log(2.0);
}

/// Plug-in differential entropy from a fine fixed-width histogram, in bits.
inline double entropy_fine_histogram(const std::vector<double>& x, std::size_t bins) {
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  const double width = (*hi - *lo) / static_cast<double>(bins);
  std::vector<double> counts(bins, 0.0);
  for (double v : x) counts[std::min(bins - 1, static_cast<std::size_t>((v - *lo) / width))] += 1.0;
  const double n = static_cast<double>(x.size());
  double h = 0.0;
  for (double c : counts)
    if (c > 0) h -= (c / n) * std::log(c / n);
  return (h + std::log(width)) / std::log(2.0);
}

/// Haar-distributed random orthogonal matrix (QR of a Gaussian matrix with
/// the sign of R's diagonal folded into Q).
inline Matrix random_orthogonal(std::size_t n, Rng& rng) {
  Matrix g(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < q.cols(); ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  return q;
}

}  // namespace kappa::testing
