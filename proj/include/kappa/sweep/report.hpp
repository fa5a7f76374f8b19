#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kappa/stats/regression.hpp"
#include "kappa/sweep/sweep.hpp"

namespace kappa::sweep {

struct ReportOptions {
  bool converged_only = false;
  /// Reference kappa for zero-centred curves. When unset, 10 is used if every
  /// subject has it and zero-centring is skipped otherwise; when set, a
  /// subject lacking it is a MissingReference error.
  std::optional<double> zero_center_at;
};

struct MeanPoint {
  double kappa = 0.0;
  double mean = 0.0;         // across subjects of the per-subject trial means
  double std = 0.0;          // across subjects (n - 1), 0 for one subject
  std::size_t n_subjects = 0;
  std::optional<double> zero_centered;
};

struct NamedFit {
  std::string name;   // e.g. "mir_kbits_per_sec~log(kappa)"
  std::string basis;  // "cross_subject_mean" or "subject_points"
  std::optional<stats::RegressionFit> fit;
  std::string error;  // set when the fit could not be computed
};

struct Report {
  std::vector<std::string> subjects;
  std::vector<double> kappas;  // union over subjects with data
  std::vector<AggregateRow> subject_curves;
  std::map<std::string, std::vector<MeanPoint>> mean_curves;  // metric -> curve
  std::optional<double> reference_kappa;
  std::vector<NamedFit> fits;

  nlohmann::json to_json() const;
  std::string subject_curves_tsv() const;
  std::string mean_curves_tsv() const;
  std::string fits_tsv() const;
};

/// Builds the figure-ready bundle from a record log: per-subject summaries,
/// cross-subject mean curves over the kappas every subject covers, their
/// zero-centred variants, log fit of mean MIR vs kappa, linear fits of mean
/// dipolarity vs kappa and of mean MIR vs mean dipolarity.
Report build_report(const std::vector<TrialRecord>& records, const ReportOptions& options = {});

}  // namespace kappa::sweep
