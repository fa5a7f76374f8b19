#include "kappa/io/json_io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "kappa/error.hpp"
#include "kappa/rng.hpp"

namespace kappa::io {
namespace {

std::string encode_hex(const double* data, std::size_t n) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16 * n, '0');
  for (std::size_t i = 0; i < n; ++i) {
    auto bits = std::bit_cast<std::uint64_t>(data[i]);
    for (int d = 15; d >= 0; --d) {
      out[16 * i + static_cast<std::size_t>(d)] = kDigits[bits & 0xF];
      bits >>= 4;
    }
  }
  return out;
}

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  fail(Errc::FormatError, "invalid hex digit in matrix payload");
}

void decode_hex(const std::string& text, double* out, std::size_t n) {
  if (text.size() != 16 * n) fail(Errc::FormatError, "matrix payload length does not match its shape");
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits = 0;
    for (std::size_t d = 0; d < 16; ++d) bits = (bits << 4) | static_cast<std::uint64_t>(hex_digit(text[16 * i + d]));
    out[i] = std::bit_cast<double>(bits);
  }
}

Json densities_to_json(const std::vector<ica::SourceDensity>& densities) {
  Json arr = Json::array();
  for (const auto& d : densities) arr.push_back({{"alpha", d.alpha}, {"mu", d.mu}, {"beta", d.beta}, {"rho", d.rho}});
  return arr;
}

// JSON numbers lose nothing for finite doubles (17 significant digits), but
// ll_trace may legitimately be compared bit-for-bit, so it is stored as hex too.
Json doubles_to_json(const std::vector<double>& v) {
  return Json{{"n", v.size()}, {"f64_hex", encode_hex(v.data(), v.size())}};
}

std::vector<double> doubles_from_json(const Json& j) {
  const auto n = j.at("n").get<std::size_t>();
  std::vector<double> v(n);
  decode_hex(j.at("f64_hex").get<std::string>(), v.data(), n);
  return v;
}

}  // namespace

Json matrix_to_json(const Matrix& m) {
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"f64_hex", encode_hex(m.data(), static_cast<std::size_t>(m.size()))}};
}

Matrix matrix_from_json(const Json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  if (rows < 0 || cols < 0) fail(Errc::FormatError, "negative matrix shape");
  Matrix m(rows, cols);
  decode_hex(j.at("f64_hex").get<std::string>(), m.data(), static_cast<std::size_t>(m.size()));
  return m;
}

Json vector_to_json(const Vector& v) {
  return Json{{"n", v.size()}, {"f64_hex", encode_hex(v.data(), static_cast<std::size_t>(v.size()))}};
}

Vector vector_from_json(const Json& j) {
  const auto n = j.at("n").get<Eigen::Index>();
  Vector v(n);
  decode_hex(j.at("f64_hex").get<std::string>(), v.data(), static_cast<std::size_t>(n));
  return v;
}

Json to_json(const ica::AmicaConfig& c) {
  return Json{{"max_iter", c.max_iter}, {"n_mix", c.n_mix},       {"tol", c.tol},
              {"lrate0", c.lrate0},     {"seed", c.seed},          {"min_iter", c.min_iter},
              {"newton_start", c.newton_start}, {"max_halvings", c.max_halvings}};
}

ica::AmicaConfig amica_config_from_json(const Json& j) {
  ica::AmicaConfig c;
  c.max_iter = j.at("max_iter").get<std::size_t>();
  c.n_mix = j.at("n_mix").get<std::size_t>();
  c.tol = j.at("tol").get<double>();
  c.lrate0 = j.at("lrate0").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.min_iter = j.at("min_iter").get<std::size_t>();
  c.newton_start = j.value("newton_start", c.newton_start);
  c.max_halvings = j.value("max_halvings", c.max_halvings);
  return c;
}

Json to_json(const ica::IcaResult& r) {
  return Json{{"format", "kappa-ica-result"},
              {"format_version", 1},
              {"n", r.unmixing.rows()},
              {"sphering", {{"matrix", matrix_to_json(r.sphering.matrix)}, {"mean", vector_to_json(r.sphering.mean)}}},
              {"unmixing", matrix_to_json(r.unmixing)},
              {"total_unmixing", matrix_to_json(r.total_unmixing)},
              {"mixing", matrix_to_json(r.mixing)},
              {"densities", densities_to_json(r.densities)},
              {"ll_trace", r.ll_trace},
              {"ll_trace_exact", doubles_to_json(r.ll_trace)},
              {"converged", r.converged},
              {"iterations_used", r.iterations_used},
              {"rejected_steps", r.rejected_steps},
              {"config", to_json(r.config)},
              {"seed", r.config.seed},
              {"rng", kGeneratorName},
              {"isa", r.isa}};
}

ica::IcaResult ica_result_from_json(const Json& j) {
  ica::IcaResult r;
  try {
    r.sphering.matrix = matrix_from_json(j.at("sphering").at("matrix"));
    r.sphering.mean = vector_from_json(j.at("sphering").at("mean"));
    r.unmixing = matrix_from_json(j.at("unmixing"));
    r.total_unmixing = matrix_from_json(j.at("total_unmixing"));
    r.mixing = matrix_from_json(j.at("mixing"));
    for (const auto& d : j.at("densities")) {
      r.densities.push_back({d.at("alpha").get<std::vector<double>>(), d.at("mu").get<std::vector<double>>(),
                             d.at("beta").get<std::vector<double>>(), d.at("rho").get<std::vector<double>>()});
    }
    r.ll_trace = j.contains("ll_trace_exact") ? doubles_from_json(j.at("ll_trace_exact"))
                                              : j.at("ll_trace").get<std::vector<double>>();
    r.converged = j.at("converged").get<bool>();
    r.iterations_used = j.at("iterations_used").get<std::size_t>();
    r.rejected_steps = j.value("rejected_steps", std::size_t{0});
    r.config = amica_config_from_json(j.at("config"));
    r.isa = j.value("isa", std::string{});
  } catch (const nlohmann::json::exception& ex) {
    fail(Errc::FormatError, std::string("ICA result: ") + ex.what());
  }
  const auto n = r.unmixing.rows();
  if (r.unmixing.cols() != n || r.total_unmixing.rows() != n || r.total_unmixing.cols() != n ||
      r.mixing.rows() != n || r.mixing.cols() != n || r.sphering.matrix.rows() != n || r.sphering.mean.size() != n) {
    fail(Errc::DimensionMismatch, "ICA result: inconsistent matrix shapes");
  }
  return r;
}

Json to_json(const mir::MirReport& m) {
  return Json{{"mir_bits_per_sample", m.mir_bits_per_sample},
              {"mir_kbits_per_sec", m.mir_kbits_per_sec},
              {"logdet_bits", m.logdet_bits},
              {"h_x", m.h_x},
              {"h_y", m.h_y},
              {"srate", m.srate},
              {"estimator", mir::estimator_name(m.estimator)}};
}

Json to_json(const dipfit::DipoleFitResult& f) {
  const auto& p = f.dipole.position;
  const auto& q = f.dipole.moment;
  return Json{{"position_mm", {p.x(), p.y(), p.z()}},
              {"moment", {q.x(), q.y(), q.z()}},
              {"rv", f.rv},
              {"model_topo", std::vector<double>(f.model_topo.data(), f.model_topo.data() + f.model_topo.size())}};
}

Json to_json(const dipfit::HeadModel& h) {
  return Json{{"shell_radii_mm", h.shell_radii},
              {"shell_conductivities", h.shell_conductivities},
              {"series_terms", h.series_terms},
              {"series_tol", h.series_tol}};
}

Json ground_truth_to_json(const synth::GroundTruth& truth, const synth::SynthSpec& spec) {
  Json dipoles = Json::array();
  for (const auto& d : truth.dipoles) {
    dipoles.push_back({{"position_mm", {d.position.x(), d.position.y(), d.position.z()}},
                       {"moment", {d.moment.x(), d.moment.y(), d.moment.z()}}});
  }
  return Json{{"format", "kappa-synth-truth"},
              {"format_version", 1},
              {"mixing", matrix_to_json(truth.mixing)},
              {"dipoles", dipoles},
              {"spec",
               {{"n_sources", spec.n_sources},
                {"n_frames", spec.n_frames},
                {"srate", spec.srate},
                {"source_shapes", spec.source_shapes},
                {"ecc_range", {spec.ecc_min, spec.ecc_max}},
                {"noise_db", std::isinf(spec.noise_db) ? Json("none") : Json(spec.noise_db)},
                {"seed", spec.seed}}},
              {"rng", kGeneratorName}};
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoError, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    fail(Errc::FormatError, path.string() + ": " + ex.what());
  }
}

void write_json_file(const Json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(Errc::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) fail(Errc::IoError, "write failed for " + path.string());
}

}  // namespace kappa::io
