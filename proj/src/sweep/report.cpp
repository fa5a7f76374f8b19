#include "kappa/sweep/report.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "kappa/error.hpp"

namespace kappa::sweep {
namespace {

constexpr const char* kMirMetric = "mir_kbits_per_sec";

NamedFit try_fit(std::string name, std::string basis, bool logarithmic, const std::vector<double>& x,
                 const std::vector<double>& y) {
  NamedFit out{std::move(name), std::move(basis), std::nullopt, {}};
  try {
    out.fit = logarithmic ? stats::log_fit(x, y) : stats::linear_fit(x, y);
  } catch (const Error& e) {
    out.error = std::string(e.name()) + ": " + e.what();
  }
  return out;
}

nlohmann::json fit_json(const NamedFit& f) {
  nlohmann::json j{{"name", f.name}, {"basis", f.basis}};
  if (!f.fit) {
    j["error"] = f.error;
    return j;
  }
  const auto& r = *f.fit;
  j["model"] = stats::fit_model_name(r.model);
  j["intercept"] = r.intercept;
  j["slope"] = r.slope;
  j["r_squared"] = r.r_squared;
  j["p_value"] = r.p_value;
  j["rmse"] = r.rmse;
  j["n"] = r.n;
  return j;
}

}  // namespace

Report build_report(const std::vector<TrialRecord>& records, const ReportOptions& options) {
  if (records.empty()) fail(Errc::EmptyInput, "report: no trial records");
  Report rep;
  rep.subject_curves = aggregate(records, options.converged_only);
  if (rep.subject_curves.empty()) fail(Errc::EmptyInput, "report: no successful trials to summarise");

  // metric -> subject -> kappa -> per-subject mean
  std::map<std::string, std::map<std::string, Series>> means;
  std::vector<std::string> metrics;
  std::set<double> all_kappas;
  for (const auto& row : rep.subject_curves) {
    if (std::find(rep.subjects.begin(), rep.subjects.end(), row.subject_id) == rep.subjects.end()) {
      rep.subjects.push_back(row.subject_id);
    }
    if (std::find(metrics.begin(), metrics.end(), row.metric) == metrics.end()) metrics.push_back(row.metric);
    means[row.metric][row.subject_id][row.kappa] = row.summary.mean;
    all_kappas.insert(row.kappa);
  }
  rep.kappas.assign(all_kappas.begin(), all_kappas.end());

  const auto& mir_by_subject = means[kMirMetric];
  if (options.zero_center_at) {
    rep.reference_kappa = *options.zero_center_at;
  } else {
    const bool all_have = std::all_of(rep.subjects.begin(), rep.subjects.end(), [&](const std::string& s) {
      const auto it = mir_by_subject.find(s);
      return it != mir_by_subject.end() && it->second.count(10.0) > 0;
    });
    if (all_have) {
      rep.reference_kappa = 10.0;
    } else {
      spdlog::info("report: not every subject has kappa 10; zero-centred curves omitted");
    }
  }

  std::map<std::string, std::map<std::string, Series>> centered;
  for (const auto& m : metrics) {
    if (rep.reference_kappa) centered[m] = zero_center(means[m], *rep.reference_kappa);
    auto& curve = rep.mean_curves[m];
    for (double k : rep.kappas) {
      std::vector<double> vals, zc;
      for (const auto& s : rep.subjects) {
        const auto& series = means[m][s];
        const auto it = series.find(k);
        if (it == series.end()) break;
        vals.push_back(it->second);
        if (rep.reference_kappa) zc.push_back(centered[m][s].at(k));
      }
      if (vals.size() != rep.subjects.size()) continue;  // kappa not covered by every subject
      const auto summary = stats::summarize(vals);
      MeanPoint p{k, summary.mean, summary.std, vals.size(), std::nullopt};
      if (rep.reference_kappa) p.zero_centered = stats::summarize(zc).mean;
      curve.push_back(p);
    }
  }

  auto curve_xy = [&](const std::string& metric, std::vector<double>& x, std::vector<double>& y) {
    for (const auto& p : rep.mean_curves[metric]) {
      x.push_back(p.kappa);
      y.push_back(p.mean);
    }
  };
  auto points_xy = [&](const std::string& metric, std::vector<double>& x, std::vector<double>& y) {
    const auto& src = rep.reference_kappa ? centered[metric] : means[metric];
    for (const auto& s : rep.subjects) {
      const auto it = src.find(s);
      if (it == src.end()) continue;
      for (const auto& [k, v] : it->second) {
        x.push_back(k);
        y.push_back(v);
      }
    }
  };
  const std::string points_basis = rep.reference_kappa ? "subject_points_zero_centered" : "subject_points";

  {
    std::vector<double> x, y;
    curve_xy(kMirMetric, x, y);
    rep.fits.push_back(try_fit(std::string(kMirMetric) + "~log(kappa)", "cross_subject_mean", true, x, y));
    x.clear();
    y.clear();
    points_xy(kMirMetric, x, y);
    rep.fits.push_back(try_fit(std::string(kMirMetric) + "~log(kappa)", points_basis, true, x, y));
  }
  for (const auto& m : metrics) {
    if (m.rfind("dipolarity_", 0) != 0) continue;
    std::vector<double> x, y;
    curve_xy(m, x, y);
    rep.fits.push_back(try_fit(m + "~kappa", "cross_subject_mean", false, x, y));
    x.clear();
    y.clear();
    points_xy(m, x, y);
    rep.fits.push_back(try_fit(m + "~kappa", points_basis, false, x, y));

    std::vector<double> dip, mir;
    const auto& dc = rep.mean_curves[m];
    const auto& mc = rep.mean_curves[kMirMetric];
    for (std::size_t i = 0; i < std::min(dc.size(), mc.size()); ++i) {
      dip.push_back(dc[i].mean);
      mir.push_back(mc[i].mean);
    }
    rep.fits.push_back(try_fit(std::string(kMirMetric) + "~" + m, "cross_subject_mean", false, dip, mir));
  }
  return rep;
}

nlohmann::json Report::to_json() const {
  nlohmann::json curves = nlohmann::json::array();
  for (const auto& r : subject_curves) {
    const auto& s = r.summary;
    curves.push_back({{"subject", r.subject_id}, {"kappa", r.kappa}, {"metric", r.metric}, {"median", s.median},
                      {"mean", s.mean}, {"std", s.std}, {"p10", s.p10}, {"p90", s.p90}, {"n", s.n}});
  }
  nlohmann::json mc = nlohmann::json::object();
  for (const auto& [metric, pts] : mean_curves) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : pts) {
      nlohmann::json j{{"kappa", p.kappa}, {"mean", p.mean}, {"std", p.std}, {"n_subjects", p.n_subjects}};
      j["zero_centered"] = p.zero_centered ? nlohmann::json(*p.zero_centered) : nlohmann::json(nullptr);
      arr.push_back(j);
    }
    mc[metric] = arr;
  }
  nlohmann::json fits_j = nlohmann::json::array();
  for (const auto& f : fits) fits_j.push_back(fit_json(f));
  return {{"format", "kappa-sweep-report"},
          {"format_version", 1},
          {"subjects", subjects},
          {"kappas", kappas},
          {"reference_kappa", reference_kappa ? nlohmann::json(*reference_kappa) : nlohmann::json(nullptr)},
          {"subject_curves", curves},
          {"mean_curves", mc},
          {"fits", fits_j},
          {"conventions",
           {{"rmse", "sqrt(SS_res / n)"},
            {"p_value", "two-sided t-test on the slope, n - 2 degrees of freedom"},
            {"percentiles", "linear interpolation between order statistics"},
            {"std", "sample standard deviation (n - 1); 0 when n = 1"}}}};
}

std::string Report::subject_curves_tsv() const { return aggregate_tsv(subject_curves); }

std::string Report::mean_curves_tsv() const {
  std::string out = "kappa\tmetric\tmean\tstd\tn_subjects\tzero_centered\n";
  for (const auto& [metric, pts] : mean_curves) {
    for (const auto& p : pts) {
      out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\n", kappa_text(p.kappa), metric, p.mean, p.std, p.n_subjects,
                         p.zero_centered ? fmt::format("{}", *p.zero_centered) : std::string("NA"));
    }
  }
  return out;
}

std::string Report::fits_tsv() const {
  std::string out = "name\tbasis\tmodel\tintercept\tslope\tr_squared\tp_value\trmse\tn\n";
  for (const auto& f : fits) {
    if (!f.fit) {
      out += fmt::format("{}\t{}\tNA\tNA\tNA\tNA\tNA\tNA\t0\n", f.name, f.basis);
      continue;
    }
    const auto& r = *f.fit;
    out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", f.name, f.basis, stats::fit_model_name(r.model),
                       r.intercept, r.slope, r.r_squared, r.p_value, r.rmse, r.n);
  }
  return out;
}

}  // namespace kappa::sweep
