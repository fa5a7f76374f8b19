#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kappa/dataset.hpp"
#include "kappa/dipfit/fit.hpp"
#include "kappa/ica/amica.hpp"
#include "kappa/mir/entropy.hpp"
#include "kappa/stats/summary.hpp"

namespace kappa::sweep {

struct SweepConfig {
  std::vector<double> kappas;
  double q_factor = 1000.0;
  std::uint64_t base_seed = 0;
  std::vector<double> rv_thresholds{5.0, 10.0};
  ica::AmicaConfig amica;
  std::optional<std::size_t> max_trials_cap;
  dipfit::HeadModel head;
  dipfit::FitOptions fit;
  mir::EntropyConfig entropy;
  std::size_t jobs = 1;

  /// Throws ConfigError for an empty, non-positive or non-increasing kappa
  /// list and other invalid settings.
  void validate() const;
};

/// floor(q_factor / kappa), at least 1, capped when `cap` is set.
std::size_t trial_count(double kappa, double q_factor, std::optional<std::size_t> cap = std::nullopt);

/// Shortest decimal text that round-trips `kappa` (used for seeds and keys).
std::string kappa_text(double kappa);

/// FNV-1a over (base_seed, subject_id, kappa_text(kappa), trial), finished
/// with the SplitMix64 mixer. Adding subjects or kappas never changes the
/// seeds of existing trials.
std::uint64_t derive_seed(std::uint64_t base_seed, const std::string& subject_id, double kappa, std::size_t trial);

struct TrialRecord {
  std::string subject_id;
  double kappa = 0.0;
  std::size_t trial_index = 0;
  std::uint64_t seed = 0;
  std::size_t n_frames_used = 0;
  double mir_kbits_per_sec = 0.0;
  double mir_bits_per_sample = 0.0;
  std::map<double, double> dipolarity_pct;  // rv threshold (%) -> percentage of components
  std::vector<double> rv;                   // per component
  bool converged = false;
  std::size_t iterations_used = 0;
  bool failed = false;
  std::string error;  // "<ErrorName>: message" for failed rows
};

/// One line of the record log.
nlohmann::json record_to_json(const TrialRecord& record);
TrialRecord record_from_json(const nlohmann::json& j);

/// Reads an NDJSON record log. A trailing partial line (interrupted write)
/// is ignored; any other malformed line is a FormatError.
std::vector<TrialRecord> read_record_log(const std::filesystem::path& path);

struct AggregateRow {
  std::string subject_id;
  double kappa = 0.0;
  std::string metric;
  stats::Summary summary;
};

/// Metric names present in a record: mir_kbits_per_sec, mir_bits_per_sample,
/// dipolarity_<threshold>.
std::string dipolarity_metric(double threshold);

/// Per (subject, kappa, metric) summaries over successful trials, in
/// subject-first-seen / ascending kappa / metric order.
std::vector<AggregateRow> aggregate(const std::vector<TrialRecord>& records, bool converged_only = false);

/// Tab-separated: subject kappa metric median mean std p10 p90 n.
std::string aggregate_tsv(const std::vector<AggregateRow>& rows);

using Series = std::map<double, double>;

/// Subtracts each subject's value at reference_kappa. Throws MissingReference.
std::map<std::string, Series> zero_center(const std::map<std::string, Series>& series, double reference_kappa = 10.0);

struct SkippedCell {
  std::string subject_id;
  double kappa = 0.0;
  std::size_t required = 0;
  std::size_t available = 0;
};

struct SweepTable {
  std::vector<TrialRecord> records;  // canonical order: subject, kappa, trial
  std::vector<AggregateRow> aggregates;
  std::vector<SkippedCell> skipped;
};

struct SubjectData {
  std::string subject_id;
  EegDataset dataset;
};

struct SweepOptions {
  /// Append-only record log. Existing records are reused (resume) and new
  /// ones are appended in canonical order regardless of worker count.
  std::optional<std::filesystem::path> log_path;
  bool converged_only = false;
  std::function<void(const TrialRecord&)> on_record;  // called in canonical order
};

/// Runs one trial: subsample, decompose, MIR on the full recording (with
/// cached channel entropies) and dipole fits of every component.
TrialRecord run_trial(const SubjectData& subject, const std::vector<double>& h_x, const dipfit::DipoleFitter& fitter,
                      double kappa, std::size_t trial, const SweepConfig& config);

SweepTable run_sweep(const std::vector<SubjectData>& subjects, const SweepConfig& config, const SweepOptions& options = {});

}  // namespace kappa::sweep
