// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Pass criterion numbers to run a subset.

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "cli.hpp"
#include "kappa/dataset.hpp"
#include "kappa/dipfit/fit.hpp"
#include "kappa/dipfit/forward.hpp"
#include "kappa/ica/amica.hpp"
#include "kappa/mir/entropy.hpp"
#include "kappa/mir/mir.hpp"
#include "kappa/rng.hpp"
#include "kappa/stats/regression.hpp"
#include "kappa/stats/summary.hpp"
#include "kappa/sweep/sweep.hpp"
#include "kappa/synth/synth.hpp"
#include "oracles.hpp"

using namespace kappa;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  double time_limit_s;  // 0 when no runtime bound is stated
  std::function<Outcome()> run;
};

double median_of(std::vector<double> v) { return stats::summarize(v).median; }

Matrix draw_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double rho) {
  Rng rng(seed);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.generalized_gaussian(0.0, 1.0, rho);
  return m;
}

synth::Montage montage(std::size_t n) {
  return synth::load_montage(fs::path(KAPPA_DATA_DIR) / "montages" / fmt::format("montage_{}.json", n));
}

Vec3 random_unit(Rng& rng) { return Vec3(rng.normal(), rng.normal(), rng.normal()).normalized(); }

Outcome identity_law() {
  Rng rng(101);
  int exact = 0;
  for (int k = 0; k < 10; ++k) {
    const std::size_t n = 2 + rng.below(15);
    const std::size_t frames = 1000 + rng.below(9000);
    const auto data = testing::wrap_samples(draw_matrix(n, frames, 200 + k, 0.8 + 2.0 * rng.uniform()));
    const auto r = mir::mir(data, Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
    if (r.mir_bits_per_sample == 0.0) ++exact;
  }
  return {exact == 10, fmt::format("{}/10 datasets exactly 0", exact)};
}

Outcome entropy_oracle() {
  const std::size_t n = 1000000;
  std::vector<double> normal(n), uniform(n), laplace(n);
  Rng rng(7);
  for (auto& v : normal) v = rng.normal();
  for (auto& v : uniform) v = rng.uniform();
  for (auto& v : laplace) v = rng.generalized_gaussian(0.0, 1.0, 1.0);
  const double hn = mir::marginal_entropy(normal).value;
  const double hu = mir::marginal_entropy(uniform).value;
  const double hl = mir::marginal_entropy(laplace).value;
  const bool ok = std::fabs(hn - 2.04710) <= 0.02 && std::fabs(hu) <= 0.02 && std::fabs(hl - 2.4427) <= 0.03;
  return {ok, fmt::format("normal {:.5f}, uniform {:.5f}, laplace {:.5f} bits", hn, hu, hl)};
}

Outcome mir_oracle() {
  const std::size_t n = 1000000;
  Matrix a(2, 2);
  a << 1.0, 0.5, 0.5, 1.0;
  const Matrix x = a * draw_matrix(2, n, 16, 1.0);
  const std::vector<double> x0(x.row(0).begin(), x.row(0).end()), x1(x.row(1).begin(), x.row(1).end());
  const double oracle = testing::mi_2d_histogram(x0, x1, 128);
  const double got = mir::mir(testing::wrap_samples(x), a.inverse()).mir_bits_per_sample;
  return {std::fabs(got - oracle) < 0.01, fmt::format("mir {:.4f}, 2-D histogram oracle {:.4f} bits", got, oracle)};
}

Outcome ica_recovery() {
  const auto m = montage(8);
  auto amari_for = [&](double rho, std::uint64_t seed) {
    synth::SynthSpec spec;
    spec.n_sources = 8;
    spec.n_frames = required_frames(8, 50);
    spec.source_shapes = {rho};
    spec.seed = seed;
    const auto [data, truth] = synth::generate(spec, dipfit::HeadModel{}, m.electrodes, m.labels);
    ica::AmicaConfig cfg;
    cfg.seed = seed;
    const auto r = ica::decompose(data, cfg);
    return synth::amari_index(r.total_unmixing * truth.mixing);
  };
  std::vector<double> lap, gauss;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    lap.push_back(amari_for(1.0, s));
    gauss.push_back(amari_for(2.0, s));
  }
  const double ml = median_of(lap), mg = median_of(gauss);
  return {ml < 0.1 && mg >= 3.0 * ml,
          fmt::format("median Amari laplacian {:.4f}, gaussian {:.4f} (ratio {:.1f})", ml, mg, mg / ml)};
}

Outcome dipole_round_trip() {
  const auto m = montage(71);
  const dipfit::HeadModel head;
  const dipfit::DipoleFitter fitter(head, m.electrodes);
  const dipfit::ForwardModel fm(head);
  const auto dirs = dipfit::electrode_directions(m.electrodes);
  Rng rng(55);
  int good = 0;
  double worst_err = 0.0;
  for (int k = 0; k < 100; ++k) {
    const dipfit::Dipole d{random_unit(rng) * head.inner_radius() * 0.8 * std::cbrt(rng.uniform()), random_unit(rng)};
    const auto r = fitter.fit(fm.potential(d, dirs));
    const double err = (r.dipole.position - d.position).norm();
    worst_err = std::max(worst_err, err);
    if (err < 1.0 && r.rv < 1e-6) ++good;
  }
  return {good >= 99, fmt::format("{}/100 within 1 mm and rv < 1e-6 (worst error {:.2e} mm)", good, worst_err)};
}

// Potential of a current dipole in a homogeneous sphere at surface point R u.
double homogeneous_sphere(const Vec3& p, const Vec3& q, const Vec3& u, double radius, double sigma) {
  const Vec3 dv = radius * u - p;
  const double d = dv.norm();
  const Vec3 term = 2.0 * dv / (d * d * d) + (u * d + dv) / (radius * d * (radius - p.dot(u) + d));
  return q.dot(term) / (4.0 * std::numbers::pi * sigma);
}

Outcome forward_degenerate_oracle() {
  dipfit::HeadModel head;
  head.shell_conductivities = {0.33, 0.33, 0.33, 0.33};
  head.series_terms = 1000;
  head.series_tol = 1e-14;
  const dipfit::ForwardModel fm(head);
  const auto m = montage(71);
  const auto dirs = dipfit::electrode_directions(m.electrodes);
  Rng rng(66);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const dipfit::Dipole d{random_unit(rng) * head.inner_radius() * 0.8 * rng.uniform(), random_unit(rng)};
    const Vector v = fm.potential(d, dirs, dipfit::Reference::none);
    for (std::size_t e = 0; e < dirs.size(); ++e) {
      const double want = homogeneous_sphere(d.position, d.moment, dirs[e], head.outer_radius(), 0.33);
      worst = std::max(worst, std::fabs(v(static_cast<Eigen::Index>(e)) - want) / std::fabs(want));
    }
  }
  return {worst <= 1e-8, fmt::format("worst relative deviation {:.2e}", worst)};
}

Outcome trial_count_law() {
  bool ok = sweep::trial_count(10, 1000) == 100 && sweep::trial_count(50, 1000) == 20 &&
            sweep::trial_count(60, 1000) == 16;
  double worst_margin = 0.0;  // largest deviation as a fraction of its bound
  for (std::size_t n : {8u, 16u, 32u, 71u}) {
    const double ideal = 1000.0 * static_cast<double>(n * n);
    for (double k : {5.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0}) {
      const auto trials = sweep::trial_count(k, 1000);
      const auto frames = required_frames(n, k);
      const double dev = std::fabs(static_cast<double>(trials * frames) - ideal) / ideal;
      const double bound = 1.0 / static_cast<double>(trials) + 1.0 / static_cast<double>(frames);
      worst_margin = std::max(worst_margin, dev / bound);
      ok = ok && dev < bound;
    }
  }
  return {ok, fmt::format("(10,50,60) -> ({},{},{}); frames deviation at most {:.2f} of its bound",
                          sweep::trial_count(10, 1000), sweep::trial_count(50, 1000), sweep::trial_count(60, 1000),
                          worst_margin)};
}

Outcome kappa_accounting() {
  const auto data = testing::wrap_samples(draw_matrix(71, 110000, 88, 2.0));
  const auto sub = subsample_frames(data, {20.0, 1});
  return {sub.n_frames() == 100820 && sub.n_channels() == 71,
          fmt::format("{} channels x {} frames", sub.n_channels(), sub.n_frames())};
}

// Sources with a spread of shapes, from strongly to mildly super-Gaussian.
const std::vector<double> kTrendShapes{1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.2, 1.4, 1.6};

Outcome synthetic_trend() {
  const auto m = montage(16);
  synth::SynthSpec spec;
  spec.n_sources = 12;
  spec.n_frames = 20480;
  spec.source_shapes = kTrendShapes;
  spec.seed = 11;
  auto [data, truth] = synth::generate(spec, dipfit::HeadModel{}, m.electrodes, m.labels);
  sweep::SweepConfig cfg;
  cfg.kappas = {5, 10, 20, 40};
  cfg.q_factor = 200;
  const auto table = sweep::run_sweep({{"synthetic", std::move(data)}}, cfg);

  std::vector<double> kappas, mir_median, mir_mean, dip_median;
  for (const auto& row : table.aggregates) {
    if (row.metric == "mir_kbits_per_sec") {
      kappas.push_back(row.kappa);
      mir_median.push_back(row.summary.median);
      mir_mean.push_back(row.summary.mean);
    } else if (row.metric == sweep::dipolarity_metric(5.0)) {
      dip_median.push_back(row.summary.median);
    }
  }
  if (kappas.size() != 4 || dip_median.size() != 4) return {false, "missing kappa cells"};
  const double rho = stats::spearman_rho(kappas, mir_median);
  const double slope = stats::log_fit(kappas, mir_mean).slope;
  int inversions = 0;
  for (std::size_t i = 1; i < dip_median.size(); ++i) inversions += dip_median[i] < dip_median[i - 1];
  std::size_t failed = 0, non_converged = 0;
  for (const auto& r : table.records) {
    failed += r.failed;
    non_converged += !r.failed && !r.converged;
  }
  std::string dips;
  for (double d : dip_median) dips += fmt::format("{}{:.1f}", dips.empty() ? "" : " ", d);
  return {rho >= 0.8 && slope > 0.0 && inversions <= 1,
          fmt::format("spearman {:.2f}, log slope {:.2e}, median dipolarity_5 [{}] ({} inversions); "
                      "{} trials, {} failed, {} not converged",
                      rho, slope, dips, inversions, table.records.size(), failed, non_converged)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome sweep_determinism() {
  const fs::path dir = fs::temp_directory_path() / fmt::format("kappa_acceptance_{}", ::getpid());
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto cli = [](std::vector<std::string> args) {
    args.insert(args.begin(), "kappa_ica");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    return cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  };
  std::vector<std::string> inputs;
  for (int s = 1; s <= 2; ++s) {
    const auto path = (dir / fmt::format("subject{}.json", s)).string();
    if (cli({"synth", "--out", path, "--montage", "8", "--frames", "3000", "--seed", std::to_string(s)}) != 0) {
      return {false, "synth failed"};
    }
    inputs.push_back(path);
  }
  std::vector<std::string> logs, aggs;
  for (const char* jobs : {"1", "1", "4"}) {
    const auto log = dir / fmt::format("run{}.ndjson", logs.size());
    std::vector<std::string> args{"sweep"};
    args.insert(args.end(), inputs.begin(), inputs.end());
    for (const std::string& a : {"--kappas", "5,10,20", "--q-factor", "20", "--seed", "3", "--jobs", jobs, "--log"}) {
      args.push_back(a);
    }
    args.push_back(log.string());
    if (cli(args) != 0) return {false, "sweep failed"};
    logs.push_back(slurp(log));
    aggs.push_back(slurp(dir / fmt::format("run{}.aggregate.tsv", logs.size() - 1)));
  }
  const auto lines = std::count(logs[0].begin(), logs[0].end(), '\n');
  fs::remove_all(dir);
  const bool same = logs[0] == logs[1] && logs[0] == logs[2] && aggs[0] == aggs[1] && aggs[0] == aggs[2];
  return {same && lines == 14, fmt::format("{} records; logs and aggregates {} across --jobs 1, 1, 4", lines,
                                           same ? "byte-identical" : "DIFFER")};
}

Outcome regression_oracles() {
  const std::vector<double> x{1, 2, 3, 4}, y{1, 2, 1.5, 2.5};
  const auto f = stats::linear_fit(x, y);
  // Independent oracle: hand OLS, and for 2 degrees of freedom the t
  // distribution has the closed-form two-sided tail 1 - |t| / sqrt(t^2 + 2).
  const double sxx = 5.0, sxy = 2.0, slope = sxy / sxx, intercept = 1.75 - slope * 2.5;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < 4; ++i) ss_res += std::pow(y[i] - intercept - slope * x[i], 2);
  const double t = slope / std::sqrt(ss_res / 2.0 / sxx);
  const double p_oracle = 1.0 - std::fabs(t) / std::sqrt(t * t + 2.0);
  const bool lin_ok = std::fabs(f.slope - 0.4) < 1e-12 && std::fabs(f.intercept - 0.75) < 1e-12 &&
                      std::fabs(f.r_squared - 0.64) < 1e-12 && std::fabs(f.p_value - p_oracle) < 1e-3;

  const std::vector<double> lx{10, 20, 30, 40, 50};
  std::vector<double> ly;
  for (double v : lx) ly.push_back(1.0 + 0.5 * std::log(v));
  const auto g = stats::log_fit(lx, ly);
  const bool log_ok = std::fabs(g.intercept - 1.0) < 1e-12 && std::fabs(g.slope - 0.5) < 1e-12 && g.rmse < 1e-12;
  return {lin_ok && log_ok, fmt::format("linear slope {:.6f} intercept {:.6f} R2 {:.6f} p {:.6f} (oracle {:.6f}); "
                                        "log fit ({:.3e}, {:.3e}) off",
                                        f.slope, f.intercept, f.r_squared, f.p_value, p_oracle,
                                        std::fabs(g.intercept - 1.0), std::fabs(g.slope - 0.5))};
}

}  // namespace

int main(int argc, char** argv) {
  cli::configure_logging();
  if (!std::getenv("KAPPA_ICA_LOG")) spdlog::set_level(spdlog::level::warn);
  const std::vector<Criterion> all{
      {1, "MIR identity law", 1, identity_law},
      {2, "entropy oracle", 5, entropy_oracle},
      {3, "MIR vs 2-D histogram oracle", 30, mir_oracle},
      {4, "ICA recovery and gaussian control", 120, ica_recovery},
      {5, "dipole round trip", 60, dipole_round_trip},
      {6, "forward model vs homogeneous sphere", 0, forward_degenerate_oracle},
      {7, "trial-count law", 0, trial_count_law},
      {8, "kappa accounting", 0, kappa_accounting},
      {9, "synthetic kappa trend", 900, synthetic_trend},
      {10, "sweep determinism across jobs", 0, sweep_determinism},
      {11, "regression oracles", 0, regression_oracles},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string timing = fmt::format("{:.1f} s", secs);
    if (c.time_limit_s > 0.0) {
      timing += fmt::format(" of {:.0f} s", c.time_limit_s);
      if (secs > c.time_limit_s) {
        o.pass = false;
        timing += " EXCEEDED";
      }
    }
    failures += !o.pass;
    fmt::print("criterion {:>2}: {}  {}: {} [{}]\n", c.id, o.pass ? "PASS" : "FAIL", c.title, o.detail, timing);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
