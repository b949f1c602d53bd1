// SPDX-License-Identifier: Apache-2.0
//
// cmfbeam: broadband covariance-matrix-fitting beamforming
// ------------------------------------------------------------------------
//
// Source fitting: global (dual annealing) and local (projected L-BFGS)
// minimization of the CSM-fitting energies over ParameterVectors.
//
// Entries with lower == upper are held fixed; optimizers only see the free
// subspace. Angles may be left unbounded; they are wrapped into
// theta in [0, pi], phi in [0, 2 pi) after the fit and the energy is
// re-evaluated at the wrapped vector.

#pragma once

#include "cmfbeam/baseline.hpp"
#include "cmfbeam/energy.hpp"
#include "cmfbeam/minimize.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cmfbeam {

enum class FitMode { global, local };
enum class EnergyKind { broadband, standard };

const char* fit_mode_name(FitMode mode);
const char* energy_kind_name(EnergyKind kind);

struct OptimizerConfig {
  FitMode mode = FitMode::global;
  /// standard requires a single-frequency CSM set.
  EnergyKind energy = EnergyKind::broadband;
  std::uint64_t seed = 1;
  Index max_evaluations = 200000;
  AnnealingOptions annealing;  ///< its seed is replaced by `seed`
  LbfgsOptions local;          ///< relative_step and step_unit are built from the fields below
  /// Relative finite-difference steps per parameter class.
  double position_step = 1e-6;
  double angle_step = 1e-6;
  double power_step = 1e-4;
  /// Largest quasi-Newton diagonal step where curvature is negligible:
  /// meters, radians and decades of power.
  double position_unit = 1e-3;
  double angle_unit = 0.1;
  double power_unit = 1.0;

  void validate() const;
};

struct FitResult {
  explicit FitResult(ParameterVector b) : best(std::move(b)) {}

  ParameterVector best;
  double energy = 0.0;
  Index evaluations = 0;
  std::vector<double> trace;  ///< best-so-far energy per optimizer iteration
  std::vector<SourceObject> sources;
  std::uint64_t seed = 0;
  OptimizerConfig config;
  std::string termination;
};

/// Objective for a layout: broadband or standard energy of the model.
double fit_energy(const EnergyModel& model, const VecX& params, EnergyKind kind);

/// Dual annealing over the free entries of [lower, upper], which must be
/// finite. Deterministic for a fixed config.
FitResult global_fit(const MicArray& array, const CsmSet& measured, const ParameterLayout& layout, const VecX& lower,
                     const VecX& upper, const OptimizerConfig& config);

/// Bounded quasi-Newton descent from `initial` inside its own bounds.
FitResult local_fit(const MicArray& array, const CsmSet& measured, const ParameterVector& initial,
                    const OptimizerConfig& config);

struct MultiStartResult {
  explicit MultiStartResult(FitResult b) : best(std::move(b)) {}

  FitResult best;
  std::vector<double> energies;  ///< final energy of every start, in start order
  std::vector<std::uint64_t> seeds;
};

/// Seed of start k: start 0 uses `seed` itself.
std::uint64_t start_seed(std::uint64_t seed, Index k);

/// `starts` independent global fits; the lowest energy wins (earliest on ties).
MultiStartResult multi_start(const MicArray& array, const CsmSet& measured, const ParameterLayout& layout,
                             const VecX& lower, const VecX& upper, const OptimizerConfig& config, Index starts);

struct StandardFitResult {
  std::vector<FitResult> per_frequency;
  SourcePartSet parts;  ///< one part per estimated source and frequency with q > 0
};

/// One independent single-frequency global fit per grid frequency. `layout`
/// and the bounds describe a single frequency (frequency_count == 1).
StandardFitResult standard_fit(const MicArray& array, const CsmSet& measured, const ParameterLayout& layout,
                               const VecX& lower, const VecX& upper, const OptimizerConfig& config);

/// Start vector for local fits around known sources: positions perturbed by
/// N(0, sigma^2) per free coordinate and bounded to +-bound_sigmas * sigma
/// around the perturbed start; every pole at level_db with no upper level
/// bound; angles unbounded unless held fixed.
struct LocalStartSpec {
  double sigma = 0.025;  ///< m
  double bound_sigmas = 4.0;
  double level_db = 50.0;
  /// Lower level bound in dB. Without it a log-power pushed down early,
  /// while positions are still off, can decay past recovery.
  std::optional<double> level_floor_db = 0.0;
  std::optional<double> fixed_x3 = 0.0;  ///< unset perturbs x3 as well
  std::optional<double> fixed_theta;     ///< unset perturbs theta by sigma (rad)
  bool random_phi = true;                ///< uniform in [0, 2 pi); otherwise truth + N(0, sigma^2)
};

ParameterVector perturbed_start(const std::vector<SourceObject>& truth, Index frequency_count,
                                const LocalStartSpec& spec, std::uint64_t seed);

}  // namespace cmfbeam
