#pragma once

// JSON encodings of results. Matrices are embedded as row-major IEEE-754
// binary64 bit patterns, 16 hex digits per value, so they round-trip exactly.

#include <filesystem>
#include <json.hpp>

#include "kappa/dipfit/fit.hpp"
#include "kappa/ica/amica.hpp"
#include "kappa/mir/mir.hpp"
#include "kappa/synth/synth.hpp"
#include "kappa/types.hpp"

namespace kappa::io {

using Json = nlohmann::json;

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);

Json to_json(const ica::AmicaConfig& config);
ica::AmicaConfig amica_config_from_json(const Json& j);

Json to_json(const ica::IcaResult& result);
ica::IcaResult ica_result_from_json(const Json& j);

Json to_json(const mir::MirReport& report);
Json to_json(const dipfit::DipoleFitResult& fit);
Json to_json(const dipfit::HeadModel& head);
Json ground_truth_to_json(const synth::GroundTruth& truth, const synth::SynthSpec& spec);

/// Whole-file helpers; FormatError / IoError on failure.
Json read_json_file(const std::filesystem::path& path);
void write_json_file(const Json& j, const std::filesystem::path& path);

}  // namespace kappa::io
