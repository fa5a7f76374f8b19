#include "cli.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kappa/dataset.hpp"
#include "kappa/dipfit/fit.hpp"
#include "kappa/error.hpp"
#include "kappa/ica/amica.hpp"
#include "kappa/io/json_io.hpp"
#include "kappa/mir/mir.hpp"
#include "kappa/rng.hpp"
#include "kappa/simd/kernels.hpp"
#include "kappa/sweep/report.hpp"
#include "kappa/sweep/sweep.hpp"
#include "kappa/synth/synth.hpp"

namespace kappa::cli {
namespace fs = std::filesystem;
namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void emit(const io::Json& j, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << j.dump(2) << '\n';
  } else {
    io::write_json_file(j, path);
  }
}

void write_text(const std::string& text, const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(Errc::IoError, "cannot write " + path.string());
  f << text;
  if (!f) fail(Errc::IoError, "write failed for " + path.string());
}

fs::path with_suffix(const fs::path& header, const std::string& suffix) {
  fs::path p = header;
  p.replace_extension();
  p += suffix;
  return p;
}

synth::Montage resolve_montage(const std::string& spec, double radius) {
  const bool numeric = !spec.empty() && std::all_of(spec.begin(), spec.end(), [](char c) { return c >= '0' && c <= '9'; });
  if (numeric) {
    const auto n = static_cast<std::size_t>(std::stoul(spec));
    if (n < 2) throw UsageError("--montage needs at least 2 electrodes");
    return {synth::default_labels(n), synth::fibonacci_montage(n, radius)};
  }
  return synth::load_montage(spec);
}

double parse_noise_db(const std::string& text) {
  if (text == "none" || text == "-inf") return synth::SynthSpec::kNoNoise;
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument("noise");
    return v;
  } catch (const std::exception&) {
    throw UsageError("--noise-db expects a number of dB or 'none'");
  }
}

struct AmicaFlags {
  std::size_t max_iter = ica::AmicaConfig{}.max_iter;
  std::size_t n_mix = ica::AmicaConfig{}.n_mix;
  double tol = ica::AmicaConfig{}.tol;
  std::size_t min_iter = ica::AmicaConfig{}.min_iter;

  void add(CLI::App* app) {
    app->add_option("--max-iter", max_iter, "Maximum ICA iterations")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--n-mix", n_mix, "Generalized-Gaussian mixtures per source")->check(CLI::Range(1, 8))->capture_default_str();
    app->add_option("--tol", tol, "Relative log-likelihood stopping threshold")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--min-iter", min_iter, "Iterations before the stopping rule applies")->capture_default_str();
  }

  ica::AmicaConfig config(std::uint64_t seed) const {
    ica::AmicaConfig c;
    c.max_iter = max_iter;
    c.n_mix = n_mix;
    c.tol = tol;
    c.min_iter = min_iter;
    c.seed = seed;
    return c;
  }
};

struct HeadFlags {
  double grid_mm = dipfit::FitOptions{}.grid_mm;
  std::size_t series_terms = dipfit::HeadModel{}.series_terms;

  void add(CLI::App* app) {
    app->add_option("--grid-mm", grid_mm, "Coarse dipole search grid spacing (mm)")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--series-terms", series_terms, "Legendre series truncation order")->check(CLI::Range(1, 1000))->capture_default_str();
  }
  dipfit::HeadModel head() const {
    dipfit::HeadModel h;
    h.series_terms = series_terms;
    return h;
  }
  dipfit::FitOptions fit() const {
    dipfit::FitOptions f;
    f.grid_mm = grid_mm;
    return f;
  }
};

ica::IcaResult load_ica(const std::string& path, std::size_t n_channels) {
  auto result = io::ica_result_from_json(io::read_json_file(path));
  if (static_cast<std::size_t>(result.total_unmixing.rows()) != n_channels) {
    fail(Errc::DimensionMismatch, "ICA result has " + std::to_string(result.total_unmixing.rows()) +
                                      " components but the dataset has " + std::to_string(n_channels) + " channels");
  }
  return result;
}

std::string subject_id_for(const fs::path& p) { return p.stem().string(); }

}  // namespace

void configure_logging() {
  auto logger = spdlog::get("kappa_ica");
  if (!logger) logger = spdlog::stderr_color_mt("kappa_ica");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("KAPPA_ICA_LOG")) {
    const auto level = spdlog::level::from_str(env);
    if (level == spdlog::level::off && std::string(env) != "off") {
      spdlog::warn("KAPPA_ICA_LOG='{}' not recognised; using info", env);
    } else {
      spdlog::set_level(level);
    }
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Data-sufficiency benchmarking of ICA decompositions for EEG", "kappa_ica"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "kappa_ica 1.0.0");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dipolar dataset with known ground truth");
  std::string synth_out, montage_spec = "16", noise_text = "-20";
  std::size_t n_sources = 0, n_frames = 20000;
  double srate = 250.0, radius = 85.0, ecc_min = 0.2, ecc_max = 0.8;
  std::vector<double> rhos{1.0};
  std::uint64_t synth_seed = 0;
  synth_cmd->add_option("--out", synth_out, "Output dataset header path (<stem>.json)")->required();
  synth_cmd->add_option("--montage", montage_spec, "Electrode count for a generated cap, or a montage JSON file")->capture_default_str();
  synth_cmd->add_option("--sources", n_sources, "Number of sources (default: one per electrode)");
  synth_cmd->add_option("--frames", n_frames, "Number of frames")->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--srate", srate, "Sampling rate (Hz)")->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--rho", rhos, "Source shape(s); one value or one per source")->delimiter(',')->capture_default_str();
  synth_cmd->add_option("--noise-db", noise_text, "Sensor noise relative to mean signal power (dB), or 'none'")->capture_default_str();
  synth_cmd->add_option("--ecc-min", ecc_min, "Minimum dipole eccentricity")->capture_default_str();
  synth_cmd->add_option("--ecc-max", ecc_max, "Maximum dipole eccentricity")->capture_default_str();
  synth_cmd->add_option("--radius", radius, "Electrode radius for generated caps (mm)")->capture_default_str();
  synth_cmd->add_option("--seed", synth_seed, "RNG seed")->capture_default_str();

  // decompose
  auto* dec_cmd = app.add_subcommand("decompose", "Sphere and decompose a dataset (optionally a kappa subsample)");
  std::string dec_data, dec_out;
  std::optional<double> dec_kappa;
  std::uint64_t dec_seed = 0;
  AmicaFlags dec_flags;
  dec_cmd->add_option("dataset", dec_data, "Dataset header (.json)")->required();
  dec_cmd->add_option("--out", dec_out, "Output ICA result JSON (default: stdout)");
  dec_cmd->add_option("--kappa", dec_kappa, "Decompose a random subsample sized for this kappa")->check(CLI::PositiveNumber);
  dec_cmd->add_option("--seed", dec_seed, "Seed for subsampling and initialisation")->capture_default_str();
  dec_flags.add(dec_cmd);

  // mir
  auto* mir_cmd = app.add_subcommand("mir", "Mutual information reduction of an unmixing matrix");
  std::string mir_data, mir_ica, mir_out, mir_est = "mspacing";
  mir_cmd->add_option("dataset", mir_data, "Dataset header (.json)")->required();
  mir_cmd->add_option("--ica", mir_ica, "ICA result JSON")->required();
  mir_cmd->add_option("--estimator", mir_est, "Entropy estimator")->check(CLI::IsMember({"mspacing", "hist"}))->capture_default_str();
  mir_cmd->add_option("--out", mir_out, "Output JSON (default: stdout)");

  // dipfit
  auto* dip_cmd = app.add_subcommand("dipfit", "Fit one equivalent dipole per component topography");
  std::string dip_data, dip_ica, dip_out;
  double dip_threshold = 5.0;
  HeadFlags dip_head;
  dip_cmd->add_option("dataset", dip_data, "Dataset header (.json), for electrode positions")->required();
  dip_cmd->add_option("--ica", dip_ica, "ICA result JSON")->required();
  dip_cmd->add_option("--rv-threshold", dip_threshold, "Residual variance threshold (%) for the dipolarity summary")
      ->check(CLI::Range(0.0, 100.0))->capture_default_str();
  dip_cmd->add_option("--out", dip_out, "Output JSON array (default: stdout)");
  dip_head.add(dip_cmd);

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Run the kappa sweep over one or more datasets");
  std::vector<std::string> sweep_data;
  std::vector<double> kappas, thresholds{5.0, 10.0};
  double q_factor = 1000.0;
  std::uint64_t sweep_seed = 0;
  std::size_t jobs = 1;
  std::optional<std::size_t> max_trials;
  std::string sweep_log = "sweep.ndjson", sweep_agg, sweep_est = "mspacing";
  bool sweep_converged_only = false;
  AmicaFlags sweep_flags;
  HeadFlags sweep_head;
  sweep_cmd->add_option("datasets", sweep_data, "Dataset headers; the file stem is the subject id")->required();
  sweep_cmd->add_option("--kappas", kappas, "Ascending kappa values, comma separated")->delimiter(',')->required();
  sweep_cmd->add_option("--q-factor", q_factor, "Trials per kappa = floor(q / kappa)")->check(CLI::PositiveNumber)->capture_default_str();
  sweep_cmd->add_option("--seed", sweep_seed, "Base seed")->capture_default_str();
  sweep_cmd->add_option("--jobs", jobs, "Concurrent trials")->check(CLI::PositiveNumber)->capture_default_str();
  sweep_cmd->add_option("--max-trials", max_trials, "Cap on trials per kappa")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--rv-threshold", thresholds, "Residual variance thresholds (%)")->delimiter(',')->capture_default_str();
  sweep_cmd->add_option("--estimator", sweep_est, "Entropy estimator")->check(CLI::IsMember({"mspacing", "hist"}))->capture_default_str();
  sweep_cmd->add_option("--log", sweep_log, "Append-only NDJSON record log (resumed if present)")->capture_default_str();
  sweep_cmd->add_option("--aggregate", sweep_agg, "Aggregate table path (default: <log stem>.aggregate.tsv)");
  sweep_cmd->add_flag("--converged-only", sweep_converged_only, "Aggregate converged trials only");
  sweep_flags.add(sweep_cmd);
  sweep_head.add(sweep_cmd);

  // report
  auto* rep_cmd = app.add_subcommand("report", "Summaries, mean curves and regressions from a record log");
  std::string rep_log, rep_out, rep_tables;
  std::optional<double> rep_zero;
  bool rep_converged_only = false;
  rep_cmd->add_option("log", rep_log, "NDJSON record log")->required();
  rep_cmd->add_option("--zero-center-at", rep_zero, "Reference kappa for zero-centred curves");
  rep_cmd->add_flag("--converged-only", rep_converged_only, "Use converged trials only");
  rep_cmd->add_option("--out", rep_out, "Report JSON (default: stdout)");
  rep_cmd->add_option("--tables", rep_tables, "Directory for subject_curves.tsv, mean_curves.tsv, fits.tsv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth_cmd) {
      const auto montage = resolve_montage(montage_spec, radius);
      synth::SynthSpec spec;
      spec.n_sources = n_sources == 0 ? montage.electrodes.size() : n_sources;
      spec.n_frames = n_frames;
      spec.srate = srate;
      spec.source_shapes = rhos;
      spec.noise_db = parse_noise_db(noise_text);
      spec.ecc_min = ecc_min;
      spec.ecc_max = ecc_max;
      spec.seed = synth_seed;
      const dipfit::HeadModel head;
      auto [data, truth] = synth::generate(spec, head, montage.electrodes, montage.labels);
      save_dataset(data, synth_out);
      const fs::path truth_path = with_suffix(synth_out, ".truth.json");
      auto tj = io::ground_truth_to_json(truth, spec);
      tj["head"] = io::to_json(head);
      io::write_json_file(tj, truth_path);
      out << "wrote " << synth_out << " (" << data.n_channels() << " channels, " << data.n_frames()
          << " frames) and " << truth_path.string() << '\n';
    } else if (*dec_cmd) {
      const EegDataset full = load_dataset(dec_data);
      io::Json sub = nullptr;
      const EegDataset data = dec_kappa ? subsample_frames(full, {*dec_kappa, dec_seed}) : full;
      if (dec_kappa) {
        sub = {{"kappa", *dec_kappa}, {"seed", dec_seed}, {"n_frames", data.n_frames()}, {"rng", kGeneratorName}};
      }
      const auto result = ica::decompose(data, dec_flags.config(dec_seed));
      auto j = io::to_json(result);
      j["dataset"] = dec_data;
      j["subsample"] = sub;
      emit(j, dec_out, out);
      spdlog::info("decompose: {} iterations, converged={}", result.iterations_used, result.converged);
    } else if (*mir_cmd) {
      const EegDataset data = load_dataset(mir_data);
      const auto ica = load_ica(mir_ica, data.n_channels());
      mir::EntropyConfig ec;
      ec.estimator = mir::parse_estimator(mir_est);
      emit(io::to_json(mir::mir(data, ica.total_unmixing, ec)), mir_out, out);
    } else if (*dip_cmd) {
      const EegDataset data = load_dataset(dip_data);
      const auto ica = load_ica(dip_ica, data.n_channels());
      const dipfit::DipoleFitter fitter(dip_head.head(), data.electrodes(), dip_head.fit());
      io::Json arr = io::Json::array();
      std::vector<double> rvs;
      for (Eigen::Index c = 0; c < ica.mixing.cols(); ++c) {
        const auto fit = fitter.fit(ica.mixing.col(c));
        rvs.push_back(fit.rv);
        arr.push_back(io::to_json(fit));
      }
      emit(arr, dip_out, out);
      spdlog::info("near dipolarity at {}% rv: {}%", dip_threshold, dipfit::near_dipolarity(rvs, dip_threshold));
    } else if (*sweep_cmd) {
      sweep::SweepConfig cfg;
      cfg.kappas = kappas;
      cfg.q_factor = q_factor;
      cfg.base_seed = sweep_seed;
      cfg.rv_thresholds = thresholds;
      cfg.amica = sweep_flags.config(0);
      cfg.max_trials_cap = max_trials;
      cfg.head = sweep_head.head();
      cfg.fit = sweep_head.fit();
      cfg.entropy.estimator = mir::parse_estimator(sweep_est);
      cfg.jobs = jobs;
      try {
        cfg.validate();
      } catch (const Error& e) {
        if (e.code() == Errc::ConfigError) throw UsageError(e.what());
        throw;
      }
      std::vector<sweep::SubjectData> subjects;
      std::set<std::string> ids;
      for (const auto& path : sweep_data) {
        const auto id = subject_id_for(path);
        if (!ids.insert(id).second) throw UsageError("two datasets share the subject id '" + id + "'");
        subjects.push_back({id, load_dataset(path)});
      }
      sweep::SweepOptions opts;
      opts.log_path = sweep_log;
      opts.converged_only = sweep_converged_only;
      std::size_t n_done = 0;
      opts.on_record = [&](const sweep::TrialRecord& r) {
        ++n_done;
        spdlog::debug("{} kappa {} trial {}: mir {:.4f} kbit/s", r.subject_id, sweep::kappa_text(r.kappa),
                      r.trial_index, r.mir_kbits_per_sec);
      };
      const auto table = sweep::run_sweep(subjects, cfg, opts);
      const fs::path agg = sweep_agg.empty() ? with_suffix(sweep_log, ".aggregate.tsv") : fs::path(sweep_agg);
      write_text(sweep::aggregate_tsv(table.aggregates), agg);
      const auto failed = std::count_if(table.records.begin(), table.records.end(), [](const auto& r) { return r.failed; });
      out << "sweep: " << table.records.size() << " trials (" << failed << " failed, " << table.skipped.size()
          << " subject/kappa cells skipped); log " << sweep_log << ", aggregates " << agg.string() << '\n';
    } else if (*rep_cmd) {
      sweep::ReportOptions ro;
      ro.converged_only = rep_converged_only;
      ro.zero_center_at = rep_zero;
      const auto report = sweep::build_report(sweep::read_record_log(rep_log), ro);
      emit(report.to_json(), rep_out, out);
      if (!rep_tables.empty()) {
        fs::create_directories(rep_tables);
        write_text(report.subject_curves_tsv(), fs::path(rep_tables) / "subject_curves.tsv");
        write_text(report.mean_curves_tsv(), fs::path(rep_tables) / "mean_curves.tsv");
        write_text(report.fits_tsv(), fs::path(rep_tables) / "fits.tsv");
      }
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n\n" << app.help() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.name() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace kappa::cli
