// SPDX-License-Identifier: Apache-2.0
//
// cmfbeam: broadband covariance-matrix-fitting beamforming
// ------------------------------------------------------------------------
//
// JSON configuration readers and result writers.
//
// Every key carries its unit: position_m, frequencies_hz,
// speed_of_sound_m_s, q_pa2_per_hz, level_db, theta_rad, phi_rad.
// Readers reject unknown keys and report errors with the JSON pointer of
// the offending field. CSV output uses 17 significant digits.

#pragma once

#include "cmfbeam/baseline.hpp"
#include "cmfbeam/energy.hpp"
#include "cmfbeam/optimize.hpp"
#include "cmfbeam/postprocess.hpp"
#include "cmfbeam/scene.hpp"

#include "json.hpp"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmfbeam::io {

using Json = nlohmann::ordered_json;

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// "%.17g", with inf, -inf and nan spelled out.
std::string format_double(double v);

/// JSON number, or the strings "inf" / "-inf" / "nan" for non-finite values.
Json number(double v);
Json vector_json(const VecX& v);
Json vec3_json(const Vec3& v);

/// Parses a file; syntax errors name the line and column.
Json load_json_file(const std::filesystem::path& path);
void save_json_file(const Json& j, const std::filesystem::path& path);

// ------------------------------------------------------------ field access

/// Throws ConfigError if `j` has keys outside `allowed`.
void check_keys(const Json& j, const std::string& path, const std::vector<std::string>& allowed);
const Json& require(const Json& j, const std::string& path, const std::string& key);
double read_number(const Json& j, const std::string& path);
Index read_count(const Json& j, const std::string& path, Index minimum);
std::string read_string(const Json& j, const std::string& path);
bool read_bool(const Json& j, const std::string& path);
Vec3 read_vec3(const Json& j, const std::string& path);
std::vector<double> read_numbers(const Json& j, const std::string& path);

// ----------------------------------------------------------- domain readers

MicArray read_array(const Json& j, const std::string& path);
FrequencyGrid read_frequency_grid(const Json& j, const std::string& path, double speed_of_sound);

/// A builtin id string, {"builtin": id, "wide_grid": bool}, or an inline scene.
Scene read_scene(const Json& j, const std::string& path);

/// Source objects with per-pole spectra of length `frequency_count`.
std::vector<SourceObject> read_sources(const Json& j, const std::string& path, Index frequency_count);

/// "line_array_default" or {"min_m": [...], "max_m": [...], "step_m": [...]}.
FocusGrid read_focus_grid(const Json& j, const std::string& path);
std::vector<Roi> read_rois(const Json& j, const std::string& path);
BoundsSpec read_bounds(const Json& j, const std::string& path);
CleanScConfig read_clean_sc(const Json& j, const std::string& path);
/// Overrides fields of `base` that appear in `j`.
OptimizerConfig read_optimizer(const Json& j, const std::string& path, OptimizerConfig base = {});
SliceAxis read_slice_axis(const Json& j, const std::string& path);

// ----------------------------------------------------------------- writers

Json to_json(const Scene& scene);
Json to_json(const std::vector<SourceObject>& sources);
Json to_json(const OptimizerConfig& config);
Json to_json(const FitResult& fit);
Json to_json(const SpectraReport& report);

/// Columns x1_m, x2_m, x3_m, frequency_hz, q_pa2_per_hz, level_db.
void write_parts_csv(const SourcePartSet& parts, std::ostream& out);
SourcePartSet read_parts_csv(std::istream& in);

/// frequency_hz, then one dB column per label; truth adds mean/std columns.
void write_spectra_csv(const SpectraReport& report, std::ostream& out);

/// Header lines "# axis1 <name>" / "# axis2 <name>", then a table whose
/// first row holds the axis2 values and first column the axis1 values.
void write_slice_csv(const EnergyLandscapeSlice& slice, std::ostream& out);

/// Long format: frequency_hz, x1_m, x2_m, x3_m, value.
void write_map_csv(const FocusGrid& grid, const VecX& frequencies, const std::vector<VecX>& maps, std::ostream& out);

}  // namespace cmfbeam::io
