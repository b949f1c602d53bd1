// SPDX-License-Identifier: Apache-2.0
//
// cmfbeam: broadband covariance-matrix-fitting beamforming
// ------------------------------------------------------------------------
//
// Command-line runner: one subcommand per method, configured by a JSON
// file. Every run writes its artifacts plus manifest.json into --out.

#include "cmfbeam/baseline.hpp"
#include "cmfbeam/csm.hpp"
#include "cmfbeam/energy.hpp"
#include "cmfbeam/io.hpp"
#include "cmfbeam/optimize.hpp"
#include "cmfbeam/parallel.hpp"
#include "cmfbeam/postprocess.hpp"
#include "cmfbeam/scene.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace cmfbeam;
using io::ConfigError;
using io::Json;

namespace {

constexpr const char* kVersion = "0.1.0";

const std::vector<std::string> kMethods = {"synthesize", "snapshot",  "energy-slice", "psf",          "cb",
                                           "clean-sc",   "go-standard", "go-broadband", "lo-broadband", "spectra"};

/// Failure inside a named pipeline stage.
struct StageError : std::runtime_error {
  StageError(const std::string& stage, const std::string& what) : std::runtime_error(stage + ": " + what) {}
};

template <typename Fn> auto stage(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

struct Run {
  std::string method;
  Json config;
  std::uint64_t seed = 1;
  fs::path out;
  unsigned threads = 0;
  std::vector<std::string> outputs;
  Json timings = Json::object();
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  std::ofstream open(const std::string& name) {
    std::ofstream f(out / name);
    if (!f) throw StageError("write output", "cannot open '" + (out / name).string() + "'");
    outputs.push_back(name);
    return f;
  }
  void json(const std::string& name, const Json& j) {
    io::save_json_file(j, out / name);
    outputs.push_back(name);
  }
  void lap(const std::string& name) {
    const auto now = std::chrono::steady_clock::now();
    timings[name] = std::chrono::duration<double>(now - start).count();
    start = now;
  }
};

const Json& block(const Run& run) {
  static const Json empty = Json::object();
  return run.config.contains(run.method) ? run.config.at(run.method) : empty;
}
std::string block_path(const Run& run) { return "/" + run.method; }

std::string sub(const std::string& path, const std::string& key) { return path + "/" + key; }

// --------------------------------------------------------------- pipeline

Scene load_scene(const Run& run) {
  return stage("load scene", [&] { return io::read_scene(io::require(run.config, "", "scene"), "/scene"); });
}

/// Measured CSM: synthesized (default), a snapshot estimate, or a file.
CsmSet measured_csm(const Run& run, const Scene& scene) {
  if (!run.config.contains("measurement")) return stage("synthesize CSM", [&] { return synthesize_csm(scene); });
  const Json& m = run.config.at("measurement");
  io::check_keys(m, "/measurement", {"csm_file", "snapshots"});
  if (m.contains("csm_file") == m.contains("snapshots")) {
    throw ConfigError("/measurement", "give exactly one of csm_file or snapshots");
  }
  if (m.contains("csm_file")) {
    const fs::path file = io::read_string(m.at("csm_file"), "/measurement/csm_file");
    if (!fs::exists(file)) throw ConfigError("/measurement/csm_file", "file not found: " + file.string());
    CsmSet csm = stage("load CSM", [&] { return load_csm(file); });
    if (csm.mic_count() != scene.array().size()) {
      throw ConfigError("/measurement/csm_file", "CSM has " + std::to_string(csm.mic_count()) +
                                                     " microphones, the scene array has " +
                                                     std::to_string(scene.array().size()));
    }
    if (!(csm.grid() == scene.grid())) throw ConfigError("/measurement/csm_file", "CSM frequencies differ from the scene grid");
    return csm;
  }
  const Index s = io::read_count(m.at("snapshots"), "/measurement/snapshots", 1);
  return stage("snapshot CSM", [&] { return snapshot_csm(scene, s, run.seed); });
}

std::vector<TruthSpectrum> truth_spectra(const Scene& scene, const CsmSet& csm) {
  std::vector<TruthSpectrum> out;
  for (std::size_t n = 0; n < scene.sources().size(); ++n) {
    const auto& s = scene.sources()[n];
    const auto gt = ground_truth_psd(csm, s.position, scene.array());
    out.push_back({"S" + std::to_string(n + 1), s.position, gt.mean, gt.std});
  }
  return out;
}

void write_report(Run& run, SpectraReport report, const Scene& scene, const CsmSet& csm) {
  report.truth = truth_spectra(scene, csm);
  auto f = run.open("spectra.csv");
  io::write_spectra_csv(report, f);
  run.json("spectra.json", io::to_json(report));
}

std::vector<SourceTemplate> read_templates(const Json& j, const std::string& path) {
  io::check_keys(j, path, {"sources", "monopole", "dipole"});
  const Index n = io::read_count(io::require(j, path, "sources"), sub(path, "sources"), 1);
  SourceTemplate t;
  if (j.contains("monopole")) t.monopole = io::read_bool(j.at("monopole"), sub(path, "monopole"));
  if (j.contains("dipole")) t.dipole = io::read_bool(j.at("dipole"), sub(path, "dipole"));
  if (!t.monopole && !t.dipole) throw ConfigError(path, "an estimated source needs a monopole or dipole");
  return std::vector<SourceTemplate>(static_cast<std::size_t>(n), t);
}

Index frequency_index(const FrequencyGrid& grid, const Json& j, const std::string& path) {
  const double f = io::read_number(j, path);
  try {
    return grid.index_of(f);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

/// All grid indices, or the single one named by `key` when present.
std::vector<Index> frequency_selection(const Json& b, const std::string& path, const FrequencyGrid& grid,
                                       const std::string& key = "frequency_hz") {
  std::vector<Index> idx;
  if (b.contains(key)) {
    idx.push_back(frequency_index(grid, b.at(key), sub(path, key)));
  } else {
    for (Index j = 0; j < grid.size(); ++j) idx.push_back(j);
  }
  return idx;
}

// ------------------------------------------------------------ subcommands

void cmd_synthesize(Run& run) {
  const Json& b = block(run);
  io::check_keys(b, block_path(run), {"format"});
  std::string format = "binary";
  if (b.contains("format")) format = io::read_string(b.at("format"), block_path(run) + "/format");
  if (format != "binary" && format != "text") throw ConfigError(block_path(run) + "/format", "expected binary or text");
  const Scene scene = load_scene(run);
  const CsmSet csm = measured_csm(run, scene);
  run.lap("compute");
  const std::string name = format == "binary" ? "csm.csmb" : "csm.txt";
  stage("write CSM", [&] {
    save_csm(csm, run.out / name);
    return 0;
  });
  run.outputs.push_back(name);
}

void cmd_snapshot(Run& run) {
  const Json& b = block(run);
  const std::string p = block_path(run);
  io::check_keys(b, p, {"snapshots", "seeds", "write_csm"});
  std::vector<Index> counts;
  const Json& s = io::require(b, p, "snapshots");
  if (s.is_array()) {
    for (std::size_t i = 0; i < s.size(); ++i) counts.push_back(io::read_count(s[i], p + "/snapshots/" + std::to_string(i), 1));
  } else {
    counts.push_back(io::read_count(s, p + "/snapshots", 1));
  }
  Index seeds = 1;
  if (b.contains("seeds")) seeds = io::read_count(b.at("seeds"), p + "/seeds", 1);
  const bool write = b.contains("write_csm") && io::read_bool(b.at("write_csm"), p + "/write_csm");
  const Scene scene = load_scene(run);
  const CsmSet exact = stage("synthesize CSM", [&] { return synthesize_csm(scene); });
  auto f = run.open("convergence.csv");
  f << "snapshots,seed,frobenius_distance\n";
  for (Index c : counts) {
    for (Index k = 0; k < seeds; ++k) {
      const std::uint64_t seed = start_seed(run.seed, k);
      const CsmSet est = stage("snapshot CSM", [&] { return snapshot_csm(scene, c, seed); });
      f << c << ',' << seed << ',' << io::format_double(frobenius_distance(est, exact)) << '\n';
      if (write) {
        const std::string name = "csm_s" + std::to_string(c) + "_seed" + std::to_string(seed) + ".csmb";
        save_csm(est, run.out / name);
        run.outputs.push_back(name);
      }
    }
  }
  run.lap("compute");
}

void cmd_energy_slice(Run& run) {
  const Json& b = block(run);
  const std::string p = block_path(run);
  io::check_keys(b, p, {"axis1", "axis2", "mode", "frequency_hz", "estimate"});
  const SliceAxis a1 = io::read_slice_axis(io::require(b, p, "axis1"), p + "/axis1");
  const SliceAxis a2 = io::read_slice_axis(io::require(b, p, "axis2"), p + "/axis2");
  std::string mode = "broadband";
  if (b.contains("mode")) mode = io::read_string(b.at("mode"), p + "/mode");
  if (mode != "broadband" && mode != "single_frequency") {
    throw ConfigError(p + "/mode", "expected broadband or single_frequency");
  }
  const Scene scene = load_scene(run);
  const CsmSet csm = measured_csm(run, scene);
  Index fj = 0;
  if (mode == "single_frequency") fj = frequency_index(scene.grid(), io::require(b, p, "frequency_hz"), p + "/frequency_hz");
  const std::vector<SourceObject> estimate =
      b.contains("estimate") ? io::read_sources(b.at("estimate"), p + "/estimate", scene.grid().size()) : scene.sources();
  if (estimate.empty()) throw ConfigError(p + "/estimate", "need at least one estimated source");
  const ParameterVector fixed = ParameterVector::from_sources(estimate, scene.grid().size());
  const EnergyModel model(scene.array(), csm, fixed.layout());
  const auto slice = stage("energy slice", [&] {
    return slice_landscape(model, a1, a2, fixed.values(),
                           mode == "broadband" ? EnergyMode::broadband : EnergyMode::single_frequency, fj);
  });
  run.lap("compute");
  auto f = run.open("slice.csv");
  io::write_slice_csv(slice, f);
  Json ext;
  auto points = [&](const std::vector<std::pair<Index, Index>>& cells) {
    Json list = Json::array();
    for (auto [i, k] : cells) {
      list.push_back({{a1.parameter, io::number(a1.values[static_cast<std::size_t>(i)])},
                      {a2.parameter, io::number(a2.values[static_cast<std::size_t>(k)])},
                      {"energy", io::number(slice.energy(i, k))}});
    }
    return list;
  };
  ext["local_minima"] = points(local_minima(slice.energy));
  ext["local_maxima"] = points(local_maxima(slice.energy));
  Index ri = 0;
  Index ci = 0;
  slice.energy.minCoeff(&ri, &ci);
  ext["global_minimum"] = points({{ri, ci}})[0];
  run.json("extrema.json", ext);
}

void cmd_psf(Run& run) {
  const Json& b = block(run);
  const std::string p = block_path(run);
  io::check_keys(b, p, {"source_m", "grid", "frequency_hz", "averaged", "remove_diagonal"});
  const Scene scene = load_scene(run);
  Vec3 source;
  if (b.contains("source_m")) {
    source = io::read_vec3(b.at("source_m"), p + "/source_m");
  } else if (!scene.sources().empty()) {
    source = scene.sources().front().position;
  } else {
    throw ConfigError(p + "/source_m", "missing and the scene has no sources");
  }
  const FocusGrid grid = b.contains("grid") ? io::read_focus_grid(b.at("grid"), p + "/grid") : FocusGrid::line_array_default();
  const bool averaged = b.contains("averaged") && io::read_bool(b.at("averaged"), p + "/averaged");
  const bool dr = !b.contains("remove_diagonal") || io::read_bool(b.at("remove_diagonal"), p + "/remove_diagonal");
  const auto idx = frequency_selection(b, p, scene.grid());
  std::vector<double> k;
  VecX freqs(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    k.push_back(scene.grid().wavenumber(idx[i]));
    freqs[static_cast<Index>(i)] = scene.grid().frequency(idx[i]);
  }
  const auto maps = stage("psf", [&] { return psf(scene.array(), source, grid, k, averaged, dr); });
  run.lap("compute");
  auto f = run.open("psf.csv");
  // An averaged PSF is reported at frequency 0.
  io::write_map_csv(grid, averaged ? VecX::Zero(1) : freqs, maps, f);
}

void cmd_cb(Run& run) {
  const Json& b = block(run);
  const std::string p = block_path(run);
  io::check_keys(b, p, {"grid", "frequency_hz"});
  const Scene scene = load_scene(run);
  const CsmSet csm = measured_csm(run, scene);
  const FocusGrid grid = b.contains("grid") ? io::read_focus_grid(b.at("grid"), p + "/grid") : FocusGrid::line_array_default();
  const auto idx = frequency_selection(b, p, scene.grid());
  std::vector<VecX> maps(idx.size());
  VecX freqs(static_cast<Index>(idx.size()));
  stage("conventional beamforming", [&] {
    parallel_for(idx.size(), [&](std::size_t i) { maps[i] = conventional_map(csm, scene.array(), grid, idx[i]); });
    return 0;
  });
  for (std::size_t i = 0; i < idx.size(); ++i) freqs[static_cast<Index>(i)] = scene.grid().frequency(idx[i]);
  run.lap("compute");
  auto f = run.open("map.csv");
  io::write_map_csv(grid, freqs, maps, f);
}

void cmd_clean_sc(Run& run) {
  const Json& b = block(run);
  const std::string p = block_path(run);
  io::check_keys(b, p, {"grid", "clean_sc", "rois"});
  const FocusGrid grid = b.contains("grid") ? io::read_focus_grid(b.at("grid"), p + "/grid") : FocusGrid::line_array_default();
  const CleanScConfig cfg = b.contains("clean_sc") ? io::read_clean_sc(b.at("clean_sc"), p + "/clean_sc") : CleanScConfig{};
  const std::vector<Roi> rois = b.contains("rois") ? io::read_rois(b.at("rois"), p + "/rois") : std::vector<Roi>{};
  const Scene scene = load_scene(run);
  const CsmSet csm = measured_csm(run, scene);
  CleanScTrace trace;
  const SourcePartSet parts = stage("clean-sc", [&] { return clean_sc(csm, scene.array(), grid, cfg, &trace); });
  run.lap("compute");
  auto f = run.open("parts.csv");
  io::write_parts_csv(parts, f);
  Json t = Json::array();
  for (const auto& norms : trace.degraded_norm) {
    Json row = Json::array();
    for (double v : norms) row.push_back(io::number(v));
    t.push_back(row);
  }
  run.json("trace.json", {{"degraded_offdiagonal_norm", t}});
  if (!rois.empty()) write_report(run, roi_integrate(parts, rois, scene.grid()), scene, csm);
}

struct GoSetup {
  std::vector<SourceTemplate> templates;
  BoundsSpec bounds;
  OptimizerConfig optimizer;
};

GoSetup read_go_setup(const Json& b, const std::string& p, std::uint64_t seed) {
  GoSetup g;
  g.templates = read_templates(io::require(b, p, "estimate"), p + "/estimate");
  if (b.contains("bounds")) g.bounds = io::read_bounds(b.at("bounds"), p + "/bounds");
  g.optimizer = b.contains("optimizer") ? io::read_optimizer(b.at("optimizer"), p + "/optimizer") : OptimizerConfig{};
  g.optimizer.seed = seed;
  return g;
}

void cmd_go_standard(Run& run) {
  const Json& b = block(run);
  const std::string p = block_path(run);
  io::check_keys(b, p, {"estimate", "bounds", "optimizer", "rois"});
  GoSetup g = read_go_setup(b, p, run.seed);
  const std::vector<Roi> rois = b.contains("rois") ? io::read_rois(b.at("rois"), p + "/rois") : std::vector<Roi>{};
  const Scene scene = load_scene(run);
  const CsmSet csm = measured_csm(run, scene);
  const ParameterLayout layout(g.templates, 1);
  const auto [lo, hi] = make_bounds(layout, g.bounds);
  const StandardFitResult r =
      stage("standard GO", [&] { return standard_fit(scene.array(), csm, layout, lo, hi, g.optimizer); });
  run.lap("optimize");
  auto f = run.open("parts.csv");
  io::write_parts_csv(r.parts, f);
  Json fits = Json::array();
  for (std::size_t j = 0; j < r.per_frequency.size(); ++j) {
    Json fj = io::to_json(r.per_frequency[j]);
    fj["frequency_hz"] = io::number(scene.grid().frequency(static_cast<Index>(j)));
    fits.push_back(std::move(fj));
  }
  run.json("fits.json", fits);
  if (!rois.empty()) write_report(run, roi_integrate(r.parts, rois, scene.grid()), scene, csm);
}

GroupingOptions read_grouping(const Json& b, const std::string& p) {
  GroupingOptions opt;
  if (!b.contains("grouping")) return opt;
  const Json& g = b.at("grouping");
  io::check_keys(g, p + "/grouping", {"min_distance_m", "min_relative_power_db"});
  if (g.contains("min_distance_m")) {
    opt.min_distance = io::read_number(g.at("min_distance_m"), p + "/grouping/min_distance_m");
    if (!(opt.min_distance > 0.0)) throw ConfigError(p + "/grouping/min_distance_m", "must be > 0");
  }
  if (g.contains("min_relative_power_db")) {
    opt.min_relative_power_db = io::read_number(g.at("min_relative_power_db"), p + "/grouping/min_relative_power_db");
  }
  return opt;
}

void cmd_go_broadband(Run& run) {
  const Json& b = block(run);
  const std::string p = block_path(run);
  io::check_keys(b, p, {"estimate", "bounds", "optimizer", "starts", "grouping"});
  GoSetup g = read_go_setup(b, p, run.seed);
  Index starts = 1;
  if (b.contains("starts")) starts = io::read_count(b.at("starts"), p + "/starts", 1);
  const GroupingOptions grouping = read_grouping(b, p);
  const Scene scene = load_scene(run);
  const CsmSet csm = measured_csm(run, scene);
  const ParameterLayout layout(g.templates, scene.grid().size());
  const auto [lo, hi] = make_bounds(layout, g.bounds);
  const MultiStartResult r =
      stage("broadband GO", [&] { return multi_start(scene.array(), csm, layout, lo, hi, g.optimizer, starts); });
  run.lap("optimize");
  run.json("fit.json", io::to_json(r.best));
  Json ms = Json::array();
  for (std::size_t k = 0; k < r.energies.size(); ++k) ms.push_back({{"seed", r.seeds[k]}, {"energy", io::number(r.energies[k])}});
  run.json("starts.json", ms);
  write_report(run, group_source_objects(r.best.sources, scene.grid(), grouping), scene, csm);
}

Json truth_comparison(const FitResult& fit, const Scene& scene) {
  const Index F = scene.grid().size();
  Json list = Json::array();
  for (std::size_t n = 0; n < scene.sources().size() && n < fit.sources.size(); ++n) {
    const SourceObject& t = scene.sources()[n];
    const SourceObject& e = fit.sources[n];
    Json o;
    o["source"] = "S" + std::to_string(n + 1);
    o["position_error_m"] = io::number((e.position - t.position).norm());
    if (t.has(Pole::dipole) && e.has(Pole::dipole)) {
      o["phi_error_rad"] = io::number(phi_error(e.axis, t.axis));
      o["estimated_axis_rad"] = {io::number(e.axis.theta), io::number(e.axis.phi)};
    }
    for (Pole pole : {Pole::monopole, Pole::dipole}) {
      if (!t.has(pole) || !e.has(pole)) continue;
      const VecX te = db_from_power(t.spectrum(pole));
      const VecX ee = db_from_power(e.spectrum(pole));
      const bool silent = !te.allFinite();
      Json po;
      po["silent_truth"] = silent;
      po["max_level_error_db"] = silent ? io::number(std::numeric_limits<double>::quiet_NaN())
                                        : io::number((ee - te).cwiseAbs().maxCoeff());
      po["mean_estimated_level_db"] = io::number(ee.sum() / static_cast<double>(F));
      o[pole_name(pole)] = po;
    }
    list.push_back(o);
  }
  return list;
}

void cmd_lo_broadband(Run& run) {
  const Json& b = block(run);
  const std::string p = block_path(run);
  io::check_keys(b, p, {"initial", "optimizer", "grouping"});
  LocalStartSpec spec;
  if (b.contains("initial")) {
    const Json& i = b.at("initial");
    const std::string ip = p + "/initial";
    io::check_keys(i, ip, {"sigma_m", "bound_sigmas", "level_db", "level_floor_db", "fixed_x3_m", "fixed_theta_rad",
                         "phi"});
    if (i.contains("sigma_m")) spec.sigma = io::read_number(i.at("sigma_m"), ip + "/sigma_m");
    if (i.contains("bound_sigmas")) spec.bound_sigmas = io::read_number(i.at("bound_sigmas"), ip + "/bound_sigmas");
    if (i.contains("level_db")) spec.level_db = io::read_number(i.at("level_db"), ip + "/level_db");
    if (i.contains("level_floor_db")) {
      spec.level_floor_db = i.at("level_floor_db").is_null()
                                ? std::nullopt
                                : std::optional<double>(io::read_number(i.at("level_floor_db"), ip + "/level_floor_db"));
    }
    if (i.contains("fixed_x3_m")) {
      spec.fixed_x3 = i.at("fixed_x3_m").is_null() ? std::nullopt
                                                   : std::optional<double>(io::read_number(i.at("fixed_x3_m"), ip + "/fixed_x3_m"));
    }
    if (i.contains("fixed_theta_rad")) {
      spec.fixed_theta = i.at("fixed_theta_rad").is_null()
                             ? std::nullopt
                             : std::optional<double>(io::read_number(i.at("fixed_theta_rad"), ip + "/fixed_theta_rad"));
    }
    if (i.contains("phi")) {
      const std::string mode = io::read_string(i.at("phi"), ip + "/phi");
      if (mode != "random" && mode != "perturbed") throw ConfigError(ip + "/phi", "expected random or perturbed");
      spec.random_phi = mode == "random";
    }
    if (!(spec.sigma >= 0.0)) throw ConfigError(ip + "/sigma_m", "must be >= 0");
    if (!(spec.bound_sigmas > 0.0)) throw ConfigError(ip + "/bound_sigmas", "must be > 0");
    if (spec.level_floor_db && !(*spec.level_floor_db <= spec.level_db)) {
      throw ConfigError(ip + "/level_floor_db", "must not exceed level_db");
    }
  }
  OptimizerConfig cfg = b.contains("optimizer") ? io::read_optimizer(b.at("optimizer"), p + "/optimizer") : OptimizerConfig{};
  cfg.mode = FitMode::local;
  cfg.seed = run.seed;
  const GroupingOptions grouping = read_grouping(b, p);
  const Scene scene = load_scene(run);
  if (scene.sources().empty()) throw ConfigError("/scene", "local fits start from the scene's sources; none given");
  const CsmSet csm = measured_csm(run, scene);
  const ParameterVector start =
      stage("initial values", [&] { return perturbed_start(scene.sources(), scene.grid().size(), spec, run.seed); });
  const FitResult r = stage("broadband LO", [&] { return local_fit(scene.array(), csm, start, cfg); });
  run.lap("optimize");
  Json fit = io::to_json(r);
  fit["initial"] = io::vector_json(start.values());
  run.json("fit.json", fit);
  run.json("report.json", {{"energy", io::number(r.energy)},
                           {"evaluations", r.evaluations},
                           {"sources", truth_comparison(r, scene)}});
  write_report(run, group_source_objects(r.sources, scene.grid(), grouping), scene, csm);
}

void cmd_spectra(Run& run) {
  const Json& b = block(run);
  const std::string p = block_path(run);
  io::check_keys(b, p, {"parts_file", "rois", "fit_file", "grouping"});
  const Scene scene = load_scene(run);
  const CsmSet csm = measured_csm(run, scene);
  if (b.contains("parts_file") == b.contains("fit_file")) throw ConfigError(p, "give exactly one of parts_file or fit_file");
  if (b.contains("parts_file")) {
    const fs::path file = io::read_string(b.at("parts_file"), p + "/parts_file");
    std::ifstream in(file);
    if (!in) throw ConfigError(p + "/parts_file", "file not found: " + file.string());
    const std::vector<Roi> rois = io::read_rois(io::require(b, p, "rois"), p + "/rois");
    const SourcePartSet parts = stage("read source-parts", [&] { return io::read_parts_csv(in); });
    write_report(run, stage("roi integration", [&] { return roi_integrate(parts, rois, scene.grid()); }), scene, csm);
  } else {
    const fs::path file = io::read_string(b.at("fit_file"), p + "/fit_file");
    if (!fs::exists(file)) throw ConfigError(p + "/fit_file", "file not found: " + file.string());
    const Json fit = io::load_json_file(file);
    const auto sources = io::read_sources(io::require(fit, "", "sources"), file.string() + "#/sources", scene.grid().size());
    write_report(run, group_source_objects(sources, scene.grid(), read_grouping(b, p)), scene, csm);
  }
  run.lap("compute");
}

void dispatch(Run& run) {
  if (run.method == "synthesize") return cmd_synthesize(run);
  if (run.method == "snapshot") return cmd_snapshot(run);
  if (run.method == "energy-slice") return cmd_energy_slice(run);
  if (run.method == "psf") return cmd_psf(run);
  if (run.method == "cb") return cmd_cb(run);
  if (run.method == "clean-sc") return cmd_clean_sc(run);
  if (run.method == "go-standard") return cmd_go_standard(run);
  if (run.method == "go-broadband") return cmd_go_broadband(run);
  if (run.method == "lo-broadband") return cmd_lo_broadband(run);
  if (run.method == "spectra") return cmd_spectra(run);
  throw std::logic_error("unhandled method " + run.method);
}

int execute(Run& run, const std::string& config_path, std::optional<std::uint64_t> seed_flag) {
  run.config = io::load_json_file(config_path);
  if (!run.config.is_object()) throw ConfigError("", "config must be a JSON object");
  std::vector<std::string> allowed = {"scene", "measurement", "seed", run.method};
  io::check_keys(run.config, "", allowed);
  run.seed = 1;
  if (run.config.contains("seed")) {
    const Json& s = run.config.at("seed");
    if (!s.is_number_unsigned()) throw ConfigError("/seed", "expected a non-negative integer");
    run.seed = s.get<std::uint64_t>();
  }
  if (seed_flag) run.seed = *seed_flag;
  set_thread_count(run.threads);
  fs::create_directories(run.out);
  const auto t0 = std::chrono::steady_clock::now();
  run.start = t0;
  dispatch(run);

  Json manifest;
  manifest["tool"] = "cmfbeam";
  manifest["version"] = kVersion;
  manifest["method"] = run.method;
  manifest["seed"] = run.seed;
  manifest["threads"] = thread_count();
  manifest["config_file"] = fs::absolute(config_path).string();
  manifest["config"] = run.config;
  manifest["outputs"] = run.outputs;
  manifest["timings_s"] = run.timings;
  manifest["total_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest["versions"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                        std::to_string(EIGEN_MINOR_VERSION)},
                          {"compiler", __VERSION__},
                          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                std::to_string(NLOHMANN_JSON_VERSION_MINOR)}};
  io::save_json_file(manifest, run.out / "manifest.json");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Broadband covariance-matrix-fitting beamforming"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Run run;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  unsigned threads = 0;

  for (const auto& m : kMethods) {
    CLI::App* s = app.add_subcommand(m, "Run the " + m + " method");
    s->add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    s->add_option("--seed", seed, "Random seed (overrides the config)");
    s->add_option("--out", out, "Output directory")->capture_default_str();
    s->add_option("--threads", threads, "Worker thread cap, 0 = all cores")->capture_default_str();
    s->callback([&run, m] { run.method = m; });
  }
  CLI11_PARSE(app, argc, argv);

  run.out = out;
  run.threads = threads;
  try {
    return execute(run, config_path, seed);
  } catch (const ConfigError& e) {
    std::cerr << "cmfbeam " << run.method << ": config error at " << e.what() << '\n';
    return 2;
  } catch (const StageError& e) {
    std::cerr << "cmfbeam " << run.method << ": failed in " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "cmfbeam " << run.method << ": " << e.what() << '\n';
    return 1;
  }
}
