// SPDX-License-Identifier: Apache-2.0
//
// cmfbeam: broadband covariance-matrix-fitting beamforming
// ------------------------------------------------------------------------

#include "cmfbeam/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace cmfbeam::io {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string join(const std::string& path, const std::string& key) { return path + "/" + key; }
std::string join(const std::string& path, std::size_t index) { return path + "/" + std::to_string(index); }

const char* type_name(const Json& j) { return j.type_name(); }

}  // namespace

ConfigError::ConfigError(std::string path, const std::string& message)
    : std::runtime_error((path.empty() ? std::string("/") : path) + ": " + message), path_(std::move(path)) {}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Json number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

Json vector_json(const VecX& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(number(v[i]));
  return a;
}

Json vec3_json(const Vec3& v) { return Json::array({number(v[0]), number(v[1]), number(v[2])}); }

Json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("", path.string() + ": " + e.what());
  }
}

void save_json_file(const Json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

// ------------------------------------------------------------ field access

void check_keys(const Json& j, const std::string& path, const std::vector<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(path, std::string("expected an object, got ") + type_name(j));
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      throw ConfigError(join(path, key), "unknown key (allowed: " + list + ")");
    }
  }
}

const Json& require(const Json& j, const std::string& path, const std::string& key) {
  if (!j.is_object()) throw ConfigError(path, std::string("expected an object, got ") + type_name(j));
  if (!j.contains(key)) throw ConfigError(join(path, key), "missing required key");
  return j.at(key);
}

double read_number(const Json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  throw ConfigError(path, std::string("expected a number, got ") + type_name(j));
}

Index read_count(const Json& j, const std::string& path, Index minimum) {
  if (!j.is_number_integer()) throw ConfigError(path, std::string("expected an integer, got ") + type_name(j));
  const auto v = j.get<long long>();
  if (v < minimum) throw ConfigError(path, "must be >= " + std::to_string(minimum));
  return static_cast<Index>(v);
}

std::string read_string(const Json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, std::string("expected a string, got ") + type_name(j));
  return j.get<std::string>();
}

bool read_bool(const Json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path, std::string("expected true or false, got ") + type_name(j));
  return j.get<bool>();
}

Vec3 read_vec3(const Json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(path, "expected an array of 3 numbers");
  Vec3 v;
  for (std::size_t a = 0; a < 3; ++a) {
    v[static_cast<Index>(a)] = read_number(j[a], join(path, a));
    if (!std::isfinite(v[static_cast<Index>(a)])) throw ConfigError(join(path, a), "must be finite");
  }
  return v;
}

std::vector<double> read_numbers(const Json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, std::string("expected an array, got ") + type_name(j));
  std::vector<double> v;
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(read_number(j[i], join(path, i)));
  return v;
}

// ----------------------------------------------------------- domain readers

namespace {

/// Runs `fn`, turning std::invalid_argument into a ConfigError at `path`.
template <typename Fn> auto at_path(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  } catch (const std::out_of_range& e) {
    throw ConfigError(path, e.what());
  }
}

/// Scalar or per-frequency array of q or level values.
VecX read_spectrum(const Json& pole, const std::string& path, Index frequency_count) {
  const bool has_q = pole.contains("q_pa2_per_hz");
  const bool has_db = pole.contains("level_db");
  if (has_q == has_db) throw ConfigError(path, "give exactly one of q_pa2_per_hz or level_db");
  const std::string key = has_q ? "q_pa2_per_hz" : "level_db";
  const std::string p = join(path, key);
  const Json& v = pole.at(key);
  VecX values(frequency_count);
  if (v.is_array()) {
    if (static_cast<Index>(v.size()) != frequency_count) {
      throw ConfigError(p, "expected " + std::to_string(frequency_count) + " values (one per frequency), got " +
                               std::to_string(v.size()));
    }
    for (Index i = 0; i < frequency_count; ++i) values[i] = read_number(v[static_cast<std::size_t>(i)], join(p, static_cast<std::size_t>(i)));
  } else {
    values.setConstant(read_number(v, p));
  }
  if (has_db) {
    for (Index i = 0; i < values.size(); ++i) {
      if (std::isnan(values[i]) || values[i] == kInf) throw ConfigError(p, "levels must be finite or -inf");
    }
    return power_from_db(values);
  }
  for (Index i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.0) || !std::isfinite(values[i])) throw ConfigError(p, "powers must be finite and >= 0");
  }
  return values;
}

}  // namespace

MicArray read_array(const Json& j, const std::string& path) {
  if (j.contains("line_x1")) {
    check_keys(j, path, {"line_x1"});
    const std::string p = join(path, "line_x1");
    const Json& line = j.at("line_x1");
    check_keys(line, p, {"count", "min_m", "max_m"});
    const Index count = read_count(require(line, p, "count"), join(p, "count"), 2);
    const double lo = read_number(require(line, p, "min_m"), join(p, "min_m"));
    const double hi = read_number(require(line, p, "max_m"), join(p, "max_m"));
    return at_path(p, [&] { return MicArray::line_x1(count, lo, hi); });
  }
  check_keys(j, path, {"positions_m"});
  const std::string p = join(path, "positions_m");
  const Json& list = require(j, path, "positions_m");
  if (!list.is_array()) throw ConfigError(p, "expected an array of [x1, x2, x3] positions");
  Mat3X pos(3, static_cast<Index>(list.size()));
  for (std::size_t m = 0; m < list.size(); ++m) pos.col(static_cast<Index>(m)) = read_vec3(list[m], join(p, m));
  return at_path(p, [&] { return MicArray(pos); });
}

FrequencyGrid read_frequency_grid(const Json& j, const std::string& path, double speed_of_sound) {
  if (j.is_array()) {
    const auto f = read_numbers(j, path);
    return at_path(path, [&] { return FrequencyGrid(f, speed_of_sound); });
  }
  check_keys(j, path, {"first_hz", "last_hz", "step_hz"});
  const double first = read_number(require(j, path, "first_hz"), join(path, "first_hz"));
  const double last = read_number(require(j, path, "last_hz"), join(path, "last_hz"));
  const double step = read_number(require(j, path, "step_hz"), join(path, "step_hz"));
  return at_path(path, [&] { return FrequencyGrid::uniform(first, last, step, speed_of_sound); });
}

std::vector<SourceObject> read_sources(const Json& j, const std::string& path, Index frequency_count) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of sources");
  std::vector<SourceObject> out;
  for (std::size_t n = 0; n < j.size(); ++n) {
    const std::string p = join(path, n);
    const Json& s = j[n];
    check_keys(s, p, {"position_m", "monopole", "dipole"});
    SourceObject obj;
    obj.position = read_vec3(require(s, p, "position_m"), join(p, "position_m"));
    if (s.contains("monopole")) {
      const std::string pp = join(p, "monopole");
      check_keys(s.at("monopole"), pp, {"q_pa2_per_hz", "level_db"});
      obj.spectra[0] = read_spectrum(s.at("monopole"), pp, frequency_count);
    }
    if (s.contains("dipole")) {
      const std::string pp = join(p, "dipole");
      const Json& d = s.at("dipole");
      check_keys(d, pp, {"q_pa2_per_hz", "level_db", "theta_rad", "phi_rad"});
      obj.spectra[1] = read_spectrum(d, pp, frequency_count);
      obj.axis.theta = read_number(require(d, pp, "theta_rad"), join(pp, "theta_rad"));
      obj.axis.phi = read_number(require(d, pp, "phi_rad"), join(pp, "phi_rad"));
      if (!std::isfinite(obj.axis.theta) || !std::isfinite(obj.axis.phi)) throw ConfigError(pp, "angles must be finite");
    }
    if (!obj.has(Pole::monopole) && !obj.has(Pole::dipole)) throw ConfigError(p, "a source needs a monopole or dipole");
    out.push_back(std::move(obj));
  }
  return out;
}

Scene read_scene(const Json& j, const std::string& path) {
  if (j.is_string()) {
    const auto id = j.get<std::string>();
    return at_path(path, [&] { return builtin_case(id); });
  }
  if (j.is_object() && j.contains("builtin")) {
    check_keys(j, path, {"builtin", "wide_grid"});
    const auto id = read_string(j.at("builtin"), join(path, "builtin"));
    BuiltinOptions opt;
    if (j.contains("wide_grid")) opt.wide_grid = read_bool(j.at("wide_grid"), join(path, "wide_grid"));
    return at_path(path, [&] { return builtin_case(id, opt); });
  }
  check_keys(j, path, {"array", "frequencies_hz", "speed_of_sound_m_s", "sources"});
  double c = 343.0;
  if (j.contains("speed_of_sound_m_s")) c = read_number(j.at("speed_of_sound_m_s"), join(path, "speed_of_sound_m_s"));
  MicArray array = read_array(require(j, path, "array"), join(path, "array"));
  FrequencyGrid grid = read_frequency_grid(require(j, path, "frequencies_hz"), join(path, "frequencies_hz"), c);
  auto sources = read_sources(require(j, path, "sources"), join(path, "sources"), grid.size());
  return at_path(path, [&] { return Scene(array, grid, sources); });
}

FocusGrid read_focus_grid(const Json& j, const std::string& path) {
  if (j.is_string()) {
    if (j.get<std::string>() == "line_array_default") return FocusGrid::line_array_default();
    throw ConfigError(path, "unknown focus grid '" + j.get<std::string>() + "' (known: line_array_default)");
  }
  check_keys(j, path, {"min_m", "max_m", "step_m"});
  const Vec3 lo = read_vec3(require(j, path, "min_m"), join(path, "min_m"));
  const Vec3 hi = read_vec3(require(j, path, "max_m"), join(path, "max_m"));
  const Vec3 step = read_vec3(require(j, path, "step_m"), join(path, "step_m"));
  return at_path(path, [&] { return FocusGrid(lo, hi, step); });
}

std::vector<Roi> read_rois(const Json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of ROIs");
  std::vector<Roi> rois;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = join(path, i);
    check_keys(j[i], p, {"label", "center_m", "radius_m", "radii_m"});
    Roi r;
    r.label = read_string(require(j[i], p, "label"), join(p, "label"));
    r.center = read_vec3(require(j[i], p, "center_m"), join(p, "center_m"));
    const bool iso = j[i].contains("radius_m");
    if (iso == j[i].contains("radii_m")) throw ConfigError(p, "give exactly one of radius_m or radii_m");
    r.radii = iso ? Vec3::Constant(read_number(j[i].at("radius_m"), join(p, "radius_m")))
                  : read_vec3(j[i].at("radii_m"), join(p, "radii_m"));
    at_path(p, [&] {
      r.validate();
      return 0;
    });
    for (const auto& other : rois) {
      if (other.label == r.label) throw ConfigError(join(p, "label"), "duplicate ROI label '" + r.label + "'");
    }
    rois.push_back(std::move(r));
  }
  return rois;
}

BoundsSpec read_bounds(const Json& j, const std::string& path) {
  check_keys(j, path, {"position_min_m", "position_max_m", "level_min_db", "level_max_db", "theta_min_rad",
                       "theta_max_rad", "phi_min_rad", "phi_max_rad"});
  BoundsSpec b;
  if (j.contains("position_min_m")) b.position_lower = read_vec3(j.at("position_min_m"), join(path, "position_min_m"));
  if (j.contains("position_max_m")) b.position_upper = read_vec3(j.at("position_max_m"), join(path, "position_max_m"));
  auto num = [&](const char* key, double& dst) {
    if (j.contains(key)) dst = read_number(j.at(key), join(path, key));
  };
  num("level_min_db", b.level_min_db);
  num("level_max_db", b.level_max_db);
  num("theta_min_rad", b.theta_min);
  num("theta_max_rad", b.theta_max);
  num("phi_min_rad", b.phi_min);
  num("phi_max_rad", b.phi_max);
  for (Index a = 0; a < 3; ++a) {
    if (b.position_lower[a] > b.position_upper[a]) throw ConfigError(path, "position_min_m exceeds position_max_m");
  }
  if (b.level_min_db > b.level_max_db) throw ConfigError(join(path, "level_min_db"), "exceeds level_max_db");
  if (b.theta_min > b.theta_max) throw ConfigError(join(path, "theta_min_rad"), "exceeds theta_max_rad");
  if (b.phi_min > b.phi_max) throw ConfigError(join(path, "phi_min_rad"), "exceeds phi_max_rad");
  return b;
}

CleanScConfig read_clean_sc(const Json& j, const std::string& path) {
  check_keys(j, path, {"loop_gain", "max_iterations", "stop_threshold", "coherence_iterations"});
  CleanScConfig c;
  if (j.contains("loop_gain")) c.loop_gain = read_number(j.at("loop_gain"), join(path, "loop_gain"));
  if (j.contains("max_iterations")) c.max_iterations = read_count(j.at("max_iterations"), join(path, "max_iterations"), 1);
  if (j.contains("stop_threshold")) c.stop_threshold = read_number(j.at("stop_threshold"), join(path, "stop_threshold"));
  if (j.contains("coherence_iterations")) {
    c.coherence_iterations = read_count(j.at("coherence_iterations"), join(path, "coherence_iterations"), 0);
  }
  at_path(path, [&] {
    c.validate();
    return 0;
  });
  return c;
}

OptimizerConfig read_optimizer(const Json& j, const std::string& path, OptimizerConfig c) {
  check_keys(j, path, {"max_evaluations", "initial_temperature", "visiting", "acceptance",
                       "restart_temperature_ratio", "max_iterations", "local_search", "lbfgs_memory",
                       "lbfgs_max_iterations", "gradient_tol", "energy_tol", "step_tol", "position_step",
                       "angle_step", "power_step", "position_unit_m", "angle_unit_rad", "power_unit_decades"});
  auto num = [&](const char* key, double& dst) {
    if (j.contains(key)) dst = read_number(j.at(key), join(path, key));
  };
  if (j.contains("max_evaluations")) c.max_evaluations = read_count(j.at("max_evaluations"), join(path, "max_evaluations"), 1);
  num("initial_temperature", c.annealing.initial_temperature);
  num("visiting", c.annealing.visiting);
  num("acceptance", c.annealing.acceptance);
  num("restart_temperature_ratio", c.annealing.restart_temperature_ratio);
  if (j.contains("max_iterations")) {
    c.annealing.max_iterations = read_count(j.at("max_iterations"), join(path, "max_iterations"), 1);
  }
  if (j.contains("local_search")) c.annealing.local_search = read_bool(j.at("local_search"), join(path, "local_search"));
  if (j.contains("lbfgs_memory")) c.local.memory = read_count(j.at("lbfgs_memory"), join(path, "lbfgs_memory"), 1);
  if (j.contains("lbfgs_max_iterations")) {
    c.local.max_iterations = read_count(j.at("lbfgs_max_iterations"), join(path, "lbfgs_max_iterations"), 1);
  }
  num("gradient_tol", c.local.gradient_tol);
  num("energy_tol", c.local.energy_tol);
  num("step_tol", c.local.step_tol);
  num("position_step", c.position_step);
  num("angle_step", c.angle_step);
  num("power_step", c.power_step);
  num("position_unit_m", c.position_unit);
  num("angle_unit_rad", c.angle_unit);
  num("power_unit_decades", c.power_unit);
  at_path(path, [&] {
    c.validate();
    return 0;
  });
  return c;
}

SliceAxis read_slice_axis(const Json& j, const std::string& path) {
  check_keys(j, path, {"parameter", "values", "linspace", "logspace"});
  SliceAxis axis;
  axis.parameter = read_string(require(j, path, "parameter"), join(path, "parameter"));
  const int given = static_cast<int>(j.contains("values")) + static_cast<int>(j.contains("linspace")) +
                    static_cast<int>(j.contains("logspace"));
  if (given != 1) throw ConfigError(path, "give exactly one of values, linspace or logspace");
  if (j.contains("values")) {
    axis.values = read_numbers(j.at("values"), join(path, "values"));
  } else {
    const std::string key = j.contains("linspace") ? "linspace" : "logspace";
    const std::string p = join(path, key);
    const Json& spec = j.at(key);
    if (!spec.is_array() || spec.size() != 3) throw ConfigError(p, "expected [first, last, count]");
    const double first = read_number(spec[0], join(p, 0));
    const double last = read_number(spec[1], join(p, 1));
    const Index count = read_count(spec[2], join(p, 2), 1);
    axis.values = at_path(p, [&] {
      return key == "linspace" ? SliceAxis::linspace(first, last, count) : SliceAxis::logspace(first, last, count);
    });
  }
  if (axis.values.empty()) throw ConfigError(path, "axis has no values");
  return axis;
}

// ----------------------------------------------------------------- writers

Json to_json(const std::vector<SourceObject>& sources) {
  Json list = Json::array();
  for (const auto& s : sources) {
    Json o;
    o["position_m"] = vec3_json(s.position);
    if (s.has(Pole::monopole)) o["monopole"] = {{"q_pa2_per_hz", vector_json(s.spectrum(Pole::monopole))}};
    if (s.has(Pole::dipole)) {
      o["dipole"] = {{"q_pa2_per_hz", vector_json(s.spectrum(Pole::dipole))},
                     {"theta_rad", number(s.axis.theta)},
                     {"phi_rad", number(s.axis.phi)}};
    }
    list.push_back(std::move(o));
  }
  return list;
}

Json to_json(const Scene& scene) {
  Json j;
  Json pos = Json::array();
  for (Index m = 0; m < scene.array().size(); ++m) pos.push_back(vec3_json(scene.array().position(m)));
  j["array"] = {{"positions_m", pos}};
  Json f = Json::array();
  for (double v : scene.grid().frequencies()) f.push_back(number(v));
  j["frequencies_hz"] = f;
  j["speed_of_sound_m_s"] = number(scene.grid().speed_of_sound());
  j["sources"] = to_json(scene.sources());
  return j;
}

Json to_json(const OptimizerConfig& c) {
  return {{"mode", fit_mode_name(c.mode)},
          {"energy", energy_kind_name(c.energy)},
          {"seed", c.seed},
          {"max_evaluations", c.max_evaluations},
          {"initial_temperature", number(c.annealing.initial_temperature)},
          {"visiting", number(c.annealing.visiting)},
          {"acceptance", number(c.annealing.acceptance)},
          {"restart_temperature_ratio", number(c.annealing.restart_temperature_ratio)},
          {"max_iterations", c.annealing.max_iterations},
          {"local_search", c.annealing.local_search},
          {"lbfgs_memory", c.local.memory},
          {"lbfgs_max_iterations", c.local.max_iterations},
          {"gradient_tol", number(c.local.gradient_tol)},
          {"energy_tol", number(c.local.energy_tol)},
          {"step_tol", number(c.local.step_tol)},
          {"position_step", number(c.position_step)},
          {"angle_step", number(c.angle_step)},
          {"power_step", number(c.power_step)},
          {"position_unit_m", number(c.position_unit)},
          {"angle_unit_rad", number(c.angle_unit)},
          {"power_unit_decades", number(c.power_unit)}};
}

Json to_json(const FitResult& fit) {
  Json j;
  j["energy"] = number(fit.energy);
  j["evaluations"] = fit.evaluations;
  j["seed"] = fit.seed;
  j["termination"] = fit.termination;
  j["config"] = to_json(fit.config);
  const ParameterLayout& layout = fit.best.layout();
  Json tmpl = Json::array();
  for (const auto& s : layout.sources()) tmpl.push_back({{"monopole", s.monopole}, {"dipole", s.dipole}});
  j["layout"] = {{"sources", tmpl}, {"frequency_count", layout.frequency_count()}};
  Json params = Json::array();
  for (Index i = 0; i < layout.size(); ++i) {
    params.push_back({{"name", layout.name(i)},
                      {"value", number(fit.best.values()[i])},
                      {"lower", number(fit.best.lower()[i])},
                      {"upper", number(fit.best.upper()[i])}});
  }
  j["parameters"] = params;
  Json trace = Json::array();
  for (double e : fit.trace) trace.push_back(number(e));
  j["trace"] = trace;
  j["sources"] = to_json(fit.sources);
  return j;
}

Json to_json(const SpectraReport& report) {
  Json j;
  j["frequencies_hz"] = vector_json(report.frequencies);
  Json spectra = Json::array();
  for (const auto& s : report.spectra) {
    spectra.push_back({{"label", s.label},
                       {"position_m", vec3_json(s.position)},
                       {"q_pa2_per_hz", vector_json(s.power)},
                       {"level_db", vector_json(db_from_power(s.power))}});
  }
  j["spectra"] = spectra;
  Json truth = Json::array();
  for (const auto& t : report.truth) {
    truth.push_back({{"label", t.label},
                     {"position_m", vec3_json(t.position)},
                     {"mean_q_pa2_per_hz", vector_json(t.mean)},
                     {"std_q_pa2_per_hz", vector_json(t.std)},
                     {"mean_level_db", vector_json(db_from_power(t.mean))}});
  }
  j["truth"] = truth;
  return j;
}

void write_parts_csv(const SourcePartSet& parts, std::ostream& out) {
  out << "x1_m,x2_m,x3_m,frequency_hz,q_pa2_per_hz,level_db\n";
  for (const auto& p : parts) {
    out << format_double(p.position[0]) << ',' << format_double(p.position[1]) << ',' << format_double(p.position[2])
        << ',' << format_double(p.frequency) << ',' << format_double(p.power) << ','
        << format_double(db_from_power(p.power)) << '\n';
  }
}

SourcePartSet read_parts_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("x1_m,x2_m,x3_m,frequency_hz,q_pa2_per_hz", 0) != 0) {
    throw std::runtime_error("source-part CSV: unexpected header");
  }
  SourcePartSet parts;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw std::runtime_error("source-part CSV line " + std::to_string(row) + ": bad number '" + cell + "'");
      }
    }
    if (v.size() < 5) throw std::runtime_error("source-part CSV line " + std::to_string(row) + ": too few columns");
    parts.push_back({Vec3(v[0], v[1], v[2]), v[3], v[4]});
  }
  return parts;
}

void write_spectra_csv(const SpectraReport& report, std::ostream& out) {
  out << "frequency_hz";
  for (const auto& s : report.spectra) out << ',' << s.label << "_db";
  for (const auto& t : report.truth) out << ',' << t.label << "_truth_mean_db," << t.label << "_truth_std_db";
  out << '\n';
  std::vector<VecX> levels;
  for (const auto& s : report.spectra) levels.push_back(db_from_power(s.power));
  for (Index j = 0; j < report.frequencies.size(); ++j) {
    out << format_double(report.frequencies[j]);
    for (const auto& l : levels) out << ',' << format_double(l[j]);
    for (const auto& t : report.truth) {
      // 1-sigma band half-width in dB around the mean.
      const double mean_db = db_from_power(t.mean[j]);
      const double upper = db_from_power(t.mean[j] + t.std[j]);
      out << ',' << format_double(mean_db) << ',' << format_double(upper - mean_db);
    }
    out << '\n';
  }
}

void write_slice_csv(const EnergyLandscapeSlice& slice, std::ostream& out) {
  out << "# axis1 " << slice.axis1.parameter << '\n';
  out << "# axis2 " << slice.axis2.parameter << '\n';
  out << "# mode " << (slice.mode == EnergyMode::broadband ? "broadband" : "single_frequency") << '\n';
  if (slice.mode == EnergyMode::single_frequency) out << "# frequency_hz " << format_double(slice.frequency) << '\n';
  out << "axis1\\axis2";
  for (double v : slice.axis2.values) out << ',' << format_double(v);
  out << '\n';
  for (std::size_t a = 0; a < slice.axis1.values.size(); ++a) {
    out << format_double(slice.axis1.values[a]);
    for (std::size_t b = 0; b < slice.axis2.values.size(); ++b) {
      out << ',' << format_double(slice.energy(static_cast<Index>(a), static_cast<Index>(b)));
    }
    out << '\n';
  }
}

void write_map_csv(const FocusGrid& grid, const VecX& frequencies, const std::vector<VecX>& maps, std::ostream& out) {
  if (static_cast<Index>(maps.size()) != frequencies.size()) throw std::invalid_argument("write_map_csv: one map per frequency");
  out << "frequency_hz,x1_m,x2_m,x3_m,value\n";
  for (std::size_t j = 0; j < maps.size(); ++j) {
    for (Index p = 0; p < grid.size(); ++p) {
      const Vec3 x = grid.point(p);
      out << format_double(frequencies[static_cast<Index>(j)]) << ',' << format_double(x[0]) << ','
          << format_double(x[1]) << ',' << format_double(x[2]) << ',' << format_double(maps[j][p]) << '\n';
    }
  }
}

}  // namespace cmfbeam::io
