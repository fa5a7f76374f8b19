// KEEG dataset files: JSON header plus a raw channel-major f32le payload.

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "kappa/dataset.hpp"
#include "kappa/error.hpp"

namespace kappa {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kFormatVersion = 1;

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(v);
  return v;
}

template <typename T>
T header_field(const json& h, const char* key) {
  if (!h.contains(key)) fail(Errc::FormatError, std::string("KEEG header missing field '") + key + "'");
  try {
    return h.at(key).get<T>();
  } catch (const json::exception&) {
    fail(Errc::FormatError, std::string("KEEG header field '") + key + "' has the wrong type");
  }
}

json read_header(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(Errc::FormatError, "malformed KEEG header " + path.string() + ": " + e.what());
  }
}

}  // namespace

EegDataset load_dataset(const fs::path& header_path) {
  const json h = read_header(header_path);
  if (!h.is_object()) fail(Errc::FormatError, "KEEG header is not a JSON object");
  if (header_field<int>(h, "format_version") != kFormatVersion) {
    fail(Errc::FormatError, "unsupported KEEG format_version");
  }
  if (header_field<std::string>(h, "sample_dtype") != "f32le") fail(Errc::FormatError, "sample_dtype must be f32le");
  if (header_field<std::string>(h, "sample_order") != "channel-major") {
    fail(Errc::FormatError, "sample_order must be channel-major");
  }
  const auto n_channels = header_field<std::int64_t>(h, "n_channels");
  const auto n_frames = header_field<std::int64_t>(h, "n_frames");
  const auto srate = header_field<double>(h, "srate_hz");
  auto labels = header_field<std::vector<std::string>>(h, "channel_labels");
  const auto sample_file = header_field<std::string>(h, "sample_file");
  if (n_channels < 2 || n_frames < 1) fail(Errc::FormatError, "KEEG header has invalid dimensions");

  std::vector<ElectrodePosition> electrodes;
  const json& ej = h.contains("electrodes") ? h["electrodes"] : json();
  if (!ej.is_array()) fail(Errc::FormatError, "KEEG header missing electrodes array");
  for (const auto& e : ej) {
    electrodes.push_back({header_field<double>(e, "theta_rad"), header_field<double>(e, "phi_rad"),
                          header_field<double>(e, "radius_mm")});
  }
  if (static_cast<std::int64_t>(labels.size()) != n_channels ||
      static_cast<std::int64_t>(electrodes.size()) != n_channels) {
    fail(Errc::DimensionMismatch, "KEEG header label/electrode count differs from n_channels");
  }

  const fs::path payload = header_path.parent_path() / sample_file;
  std::error_code ec;
  const auto bytes = fs::file_size(payload, ec);
  if (ec) fail(Errc::IoError, "cannot stat payload " + payload.string());
  if (bytes % 4 != 0) fail(Errc::FormatError, "payload size is not a whole number of f32 values");
  const auto expected = static_cast<std::uintmax_t>(n_channels) * static_cast<std::uintmax_t>(n_frames) * 4u;
  if (bytes != expected) {
    fail(Errc::DimensionMismatch, "payload holds " + std::to_string(bytes / 4) + " values, header declares " +
                                      std::to_string(expected / 4));
  }

  std::ifstream in(payload, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open " + payload.string());
  std::vector<std::uint32_t> raw(static_cast<std::size_t>(expected / 4));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(expected));
  if (!in) fail(Errc::IoError, "short read on " + payload.string());

  Matrix samples(n_channels, n_frames);
  double* dst = samples.data();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const float f = std::bit_cast<float>(to_le(raw[i]));
    dst[i] = static_cast<double>(f);
  }
  try {
    return EegDataset(std::move(samples), srate, std::move(labels), std::move(electrodes));
  } catch (const Error& e) {
    fail(Errc::FormatError, std::string("invalid KEEG content: ") + e.what());
  }
}

bool save_dataset(const EegDataset& dataset, const fs::path& header_path) {
  fs::path payload = header_path;
  payload.replace_extension(".f32");

  json h;
  h["format_version"] = kFormatVersion;
  h["n_channels"] = dataset.n_channels();
  h["n_frames"] = dataset.n_frames();
  h["srate_hz"] = dataset.srate();
  h["channel_labels"] = dataset.channel_labels();
  json electrodes = json::array();
  for (const auto& e : dataset.electrodes()) {
    electrodes.push_back({{"theta_rad", e.theta}, {"phi_rad", e.phi}, {"radius_mm", e.radius}});
  }
  h["electrodes"] = std::move(electrodes);
  h["sample_file"] = payload.filename().string();
  h["sample_dtype"] = "f32le";
  h["sample_order"] = "channel-major";

  bool exact = true;
  const Matrix& s = dataset.samples();
  std::vector<std::uint32_t> raw(static_cast<std::size_t>(s.size()));
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = s.data()[i];
    const auto f = static_cast<float>(v);
    if (static_cast<double>(f) != v) exact = false;
    raw[i] = to_le(std::bit_cast<std::uint32_t>(f));
  }

  {
    std::ofstream out(payload, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::IoError, "cannot write " + payload.string());
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
    if (!out) fail(Errc::IoError, "write failed for " + payload.string());
  }
  std::ofstream out(header_path, std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot write " + header_path.string());
  out << h.dump(2) << '\n';
  if (!out) fail(Errc::IoError, "write failed for " + header_path.string());
  return exact;
}

}  // namespace kappa
