#include "kappa/sweep/sweep.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "kappa/error.hpp"
#include "kappa/mir/mir.hpp"
#include "kappa/rng.hpp"

namespace kappa::sweep {
namespace {

using Key = std::tuple<std::string, std::string, std::size_t>;

Key key_of(const TrialRecord& r) { return {r.subject_id, kappa_text(r.kappa), r.trial_index}; }

std::string threshold_text(double t) { return kappa_text(t); }

// Drops an unterminated final line left behind by an interrupted writer so
// that appends start on a fresh line.
void trim_partial_tail(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return;
  std::ifstream in(path, std::ios::binary);
  const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto last = content.find_last_of('\n');
  const std::size_t keep = last == std::string::npos ? 0 : last + 1;
  if (keep != content.size()) {
    spdlog::warn("record log {}: dropping {} bytes of an incomplete final line", path.string(), content.size() - keep);
    std::filesystem::resize_file(path, keep);
  }
}

}  // namespace

void SweepConfig::validate() const {
  if (kappas.empty()) fail(Errc::ConfigError, "kappa list is empty");
  for (std::size_t i = 0; i < kappas.size(); ++i) {
    if (!(kappas[i] > 0.0) || !std::isfinite(kappas[i])) fail(Errc::ConfigError, "kappa values must be positive");
    if (i > 0 && !(kappas[i] > kappas[i - 1])) fail(Errc::ConfigError, "kappa values must be strictly increasing");
  }
  if (!(q_factor > 0.0) || !std::isfinite(q_factor)) fail(Errc::ConfigError, "q_factor must be positive");
  for (double t : rv_thresholds) {
    if (!(t > 0.0 && t < 100.0)) fail(Errc::ConfigError, "rv thresholds must be in (0, 100)");
  }
  if (jobs < 1) fail(Errc::ConfigError, "jobs must be at least 1");
  if (max_trials_cap && *max_trials_cap < 1) fail(Errc::ConfigError, "max trials cap must be at least 1");
  amica.validate();
  head.validate();
}

std::size_t trial_count(double kappa, double q_factor, std::optional<std::size_t> cap) {
  require(kappa > 0.0, Errc::InvalidArgument, "trial_count: kappa must be positive");
  const double raw = std::floor(q_factor / kappa);
  std::size_t n = raw >= 1.0 ? static_cast<std::size_t>(raw) : 1;
  if (cap) n = std::min(n, std::max<std::size_t>(*cap, 1));
  return n;
}

std::string kappa_text(double kappa) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, kappa);
  return std::string(buf, res.ptr);
}

std::uint64_t derive_seed(std::uint64_t base_seed, const std::string& subject_id, double kappa, std::size_t trial) {
  return SeedHasher().add(base_seed).add(subject_id).add(kappa_text(kappa)).add(static_cast<std::uint64_t>(trial)).finish();
}

std::string dipolarity_metric(double threshold) { return "dipolarity_" + threshold_text(threshold); }

nlohmann::json record_to_json(const TrialRecord& r) {
  nlohmann::json dip = nlohmann::json::object();
  for (const auto& [t, v] : r.dipolarity_pct) dip[threshold_text(t)] = v;
  nlohmann::json j{{"subject", r.subject_id},
                   {"kappa", r.kappa},
                   {"trial", r.trial_index},
                   {"seed", r.seed},
                   {"rng", kGeneratorName},
                   {"n_frames_used", r.n_frames_used},
                   {"failed", r.failed}};
  if (r.failed) {
    j["error"] = r.error;
    return j;
  }
  j["mir_kbits_per_sec"] = r.mir_kbits_per_sec;
  j["mir_bits_per_sample"] = r.mir_bits_per_sample;
  j["dipolarity_pct"] = dip;
  j["rv"] = r.rv;
  j["converged"] = r.converged;
  j["iterations_used"] = r.iterations_used;
  return j;
}

TrialRecord record_from_json(const nlohmann::json& j) {
  TrialRecord r;
  try {
    r.subject_id = j.at("subject").get<std::string>();
    r.kappa = j.at("kappa").get<double>();
    r.trial_index = j.at("trial").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.n_frames_used = j.at("n_frames_used").get<std::size_t>();
    r.failed = j.value("failed", false);
    if (r.failed) {
      r.error = j.value("error", std::string{});
      return r;
    }
    r.mir_kbits_per_sec = j.at("mir_kbits_per_sec").get<double>();
    r.mir_bits_per_sample = j.at("mir_bits_per_sample").get<double>();
    for (const auto& [k, v] : j.at("dipolarity_pct").items()) r.dipolarity_pct[std::stod(k)] = v.get<double>();
    r.rv = j.value("rv", std::vector<double>{});
    r.converged = j.at("converged").get<bool>();
    r.iterations_used = j.at("iterations_used").get<std::size_t>();
  } catch (const nlohmann::json::exception& ex) {
    fail(Errc::FormatError, std::string("trial record: ") + ex.what());
  } catch (const std::invalid_argument&) {
    fail(Errc::FormatError, "trial record: bad dipolarity threshold key");
  }
  return r;
}

std::vector<TrialRecord> read_record_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open record log " + path.string());
  const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<TrialRecord> out;
  std::size_t pos = 0, line_no = 0;
  while (pos < content.size()) {
    const auto nl = content.find('\n', pos);
    const bool terminated = nl != std::string::npos;
    const std::string line = content.substr(pos, terminated ? nl - pos : std::string::npos);
    pos = terminated ? nl + 1 : content.size();
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      if (!terminated) break;  // interrupted final write
      fail(Errc::FormatError, fmt::format("record log {} line {}: invalid JSON", path.string(), line_no));
    }
    out.push_back(record_from_json(j));
  }
  return out;
}

std::vector<AggregateRow> aggregate(const std::vector<TrialRecord>& records, bool converged_only) {
  std::vector<std::string> subjects;
  std::map<std::string, std::map<double, std::map<std::string, std::vector<double>>>> groups;
  std::set<double> thresholds;
  for (const auto& r : records) {
    if (std::find(subjects.begin(), subjects.end(), r.subject_id) == subjects.end()) subjects.push_back(r.subject_id);
    auto& cell = groups[r.subject_id][r.kappa];
    if (r.failed || (converged_only && !r.converged)) continue;
    cell["mir_kbits_per_sec"].push_back(r.mir_kbits_per_sec);
    cell["mir_bits_per_sample"].push_back(r.mir_bits_per_sample);
    for (const auto& [t, v] : r.dipolarity_pct) {
      thresholds.insert(t);
      cell[dipolarity_metric(t)].push_back(v);
    }
  }
  std::vector<std::string> metrics{"mir_kbits_per_sec", "mir_bits_per_sample"};
  for (double t : thresholds) metrics.push_back(dipolarity_metric(t));

  std::vector<AggregateRow> rows;
  for (const auto& s : subjects) {
    for (const auto& [kappa, cell] : groups[s]) {
      for (const auto& m : metrics) {
        const auto it = cell.find(m);
        if (it == cell.end() || it->second.empty()) {
          if (m == metrics.front()) spdlog::warn("subject {} kappa {}: no usable trials", s, kappa_text(kappa));
          continue;
        }
        rows.push_back({s, kappa, m, stats::summarize(it->second)});
      }
    }
  }
  return rows;
}

std::string aggregate_tsv(const std::vector<AggregateRow>& rows) {
  std::string out = "subject\tkappa\tmetric\tmedian\tmean\tstd\tp10\tp90\tn\n";
  for (const auto& r : rows) {
    const auto& s = r.summary;
    out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", r.subject_id, kappa_text(r.kappa), r.metric, s.median,
                       s.mean, s.std, s.p10, s.p90, s.n);
  }
  return out;
}

std::map<std::string, Series> zero_center(const std::map<std::string, Series>& series, double reference_kappa) {
  std::map<std::string, Series> out;
  for (const auto& [subject, s] : series) {
    const auto ref = s.find(reference_kappa);
    if (ref == s.end()) {
      fail(Errc::MissingReference, "subject " + subject + " has no value at kappa " + kappa_text(reference_kappa));
    }
    auto& dst = out[subject];
    for (const auto& [k, v] : s) dst[k] = v - ref->second;
  }
  return out;
}

TrialRecord run_trial(const SubjectData& subject, const std::vector<double>& h_x, const dipfit::DipoleFitter& fitter,
                      double kappa, std::size_t trial, const SweepConfig& config) {
  TrialRecord rec;
  rec.subject_id = subject.subject_id;
  rec.kappa = kappa;
  rec.trial_index = trial;
  rec.seed = derive_seed(config.base_seed, subject.subject_id, kappa, trial);
  rec.n_frames_used = required_frames(subject.dataset.n_channels(), kappa);
  try {
    const EegDataset sub = subsample_frames(subject.dataset, {kappa, rec.seed});
    ica::AmicaConfig amica = config.amica;
    amica.seed = rec.seed;
    const ica::IcaResult ica = ica::decompose(sub, amica);
    const mir::MirReport report = mir::mir(subject.dataset, ica.total_unmixing, h_x, config.entropy);
    rec.mir_bits_per_sample = report.mir_bits_per_sample;
    rec.mir_kbits_per_sec = report.mir_kbits_per_sec;
    rec.converged = ica.converged;
    rec.iterations_used = ica.iterations_used;
    for (Eigen::Index c = 0; c < ica.mixing.cols(); ++c) rec.rv.push_back(fitter.fit(ica.mixing.col(c)).rv);
    for (double t : config.rv_thresholds) rec.dipolarity_pct[t] = dipfit::near_dipolarity(rec.rv, t);
  } catch (const Error& e) {
    rec.failed = true;
    rec.error = std::string(e.name()) + ": " + e.what();
  }
  if (rec.failed) {
    spdlog::warn("trial {} kappa {} #{} failed: {}", rec.subject_id, kappa_text(kappa), trial, rec.error);
    rec.rv.clear();
    rec.dipolarity_pct.clear();
  }
  return rec;
}

SweepTable run_sweep(const std::vector<SubjectData>& subjects, const SweepConfig& config, const SweepOptions& options) {
  config.validate();
  if (subjects.empty()) fail(Errc::ConfigError, "no subjects given");
  {
    std::set<std::string> ids;
    for (const auto& s : subjects) {
      if (!ids.insert(s.subject_id).second) fail(Errc::ConfigError, "duplicate subject id " + s.subject_id);
    }
  }

  std::map<Key, TrialRecord> done;
  if (options.log_path && std::filesystem::exists(*options.log_path)) {
    trim_partial_tail(*options.log_path);
    for (auto& r : read_record_log(*options.log_path)) done.emplace(key_of(r), std::move(r));
    if (!done.empty()) spdlog::info("resuming: {} records already in {}", done.size(), options.log_path->string());
  }

  struct Task {
    std::size_t subject;
    double kappa;
    std::size_t trial;
  };
  SweepTable table;
  std::vector<Task> tasks;
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    const auto& d = subjects[s].dataset;
    for (double kappa : config.kappas) {
      const std::size_t need = required_frames(d.n_channels(), kappa);
      if (need > d.n_frames()) {
        spdlog::info("subject {}: skipping kappa {} (needs {} frames, has {})", subjects[s].subject_id,
                     kappa_text(kappa), need, d.n_frames());
        table.skipped.push_back({subjects[s].subject_id, kappa, need, d.n_frames()});
        continue;
      }
      const std::size_t n = trial_count(kappa, config.q_factor, config.max_trials_cap);
      for (std::size_t t = 0; t < n; ++t) tasks.push_back({s, kappa, t});
    }
  }

  std::vector<std::optional<TrialRecord>> results(tasks.size());
  std::vector<bool> fresh(tasks.size(), false);
  std::size_t pending = 0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto it = done.find({subjects[tasks[i].subject].subject_id, kappa_text(tasks[i].kappa), tasks[i].trial});
    if (it != done.end()) {
      results[i] = it->second;
    } else {
      ++pending;
    }
  }

  // Per-subject state shared read-only by all trials of that subject.
  std::vector<std::vector<double>> h_x(subjects.size());
  std::vector<std::unique_ptr<dipfit::DipoleFitter>> fitters(subjects.size());
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    const bool needed = std::any_of(tasks.begin(), tasks.end(), [&](const Task& t) { return t.subject == s; });
    if (!needed || pending == 0) continue;
    h_x[s] = mir::row_entropies(subjects[s].dataset.samples(), config.entropy);
    fitters[s] = std::make_unique<dipfit::DipoleFitter>(config.head, subjects[s].dataset.electrodes(), config.fit);
  }

  std::ofstream log;
  if (options.log_path && pending > 0) {
    log.open(*options.log_path, std::ios::app | std::ios::binary);
    if (!log) fail(Errc::IoError, "cannot open record log " + options.log_path->string());
  }

  std::mutex mu;
  std::size_t commit = 0;
  std::exception_ptr fatal;
  // Called with `mu` held: emits every finished record at the head of the
  // canonical order, so the log never depends on scheduling.
  auto drain = [&] {
    while (commit < results.size() && results[commit]) {
      if (fresh[commit] && log.is_open()) {
        log << record_to_json(*results[commit]).dump() << '\n';
        log.flush();
      }
      if (options.on_record) options.on_record(*results[commit]);
      ++commit;
    }
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      {
        std::lock_guard lock(mu);
        if (results[i] || fatal) continue;
      }
      try {
        const Task& task = tasks[i];
        TrialRecord rec = run_trial(subjects[task.subject], h_x[task.subject], *fitters[task.subject], task.kappa,
                                    task.trial, config);
        std::lock_guard lock(mu);
        results[i] = std::move(rec);
        fresh[i] = true;
        drain();
      } catch (...) {
        std::lock_guard lock(mu);
        if (!fatal) fatal = std::current_exception();
      }
    }
  };

  {
    std::lock_guard lock(mu);
    drain();
  }
  const std::size_t n_threads = std::min(config.jobs, std::max<std::size_t>(pending, 1));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < n_threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (fatal) std::rethrow_exception(fatal);

  for (auto& r : results) table.records.push_back(std::move(*r));
  table.aggregates = aggregate(table.records, options.converged_only);
  return table;
}

}  // namespace kappa::sweep
