// SPDX-License-Identifier: Apache-2.0
//
// cmfbeam: broadband covariance-matrix-fitting beamforming
// ------------------------------------------------------------------------
//
// Parameter packing and the CSM-fitting energies.
//
// A ParameterVector packs, per estimated source n in order,
//   [x1, x2, x3, (theta, phi if the source has a dipole pole)]
// followed by, per source and per present pole (monopole first),
//   F entries L = log10(q / (Pa^2/Hz)).
// Only off-diagonal CSM entries (i > j) enter the energies.

#pragma once

#include "cmfbeam/baseline.hpp"
#include "cmfbeam/csm.hpp"
#include "cmfbeam/scene.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace cmfbeam {

/// Which poles an estimated source carries.
struct SourceTemplate {
  bool monopole = true;
  bool dipole = false;

  bool has(Pole p) const { return p == Pole::monopole ? monopole : dipole; }
  bool operator==(const SourceTemplate&) const = default;
};

class ParameterLayout {
 public:
  ParameterLayout(std::vector<SourceTemplate> sources, Index frequency_count);

  /// N identical templates.
  static ParameterLayout uniform(Index source_count, SourceTemplate tmpl, Index frequency_count);

  Index size() const { return size_; }
  Index source_count() const { return static_cast<Index>(sources_.size()); }
  Index frequency_count() const { return frequency_count_; }
  const std::vector<SourceTemplate>& sources() const { return sources_; }

  /// Offset of [x1, x2, x3] for source n.
  Index position_offset(Index n) const { return geometry_offset_[static_cast<std::size_t>(n)]; }
  /// Offset of [theta, phi]; throws when source n has no dipole pole.
  Index angle_offset(Index n) const;
  /// Offset of the F log-power entries of one pole of source n.
  Index power_offset(Index n, Pole pole) const;

  /// Human-readable name of entry i, e.g. "s0.x1", "s1.phi", "s0.L_monopole[4]".
  std::string name(Index i) const;

  bool operator==(const ParameterLayout&) const = default;

 private:
  std::vector<SourceTemplate> sources_;
  Index frequency_count_ = 0;
  Index size_ = 0;
  std::vector<Index> geometry_offset_;
  std::vector<std::array<Index, 2>> power_offset_;
};

/// Structured view of one source's parameters. Powers stay in log10 form so
/// packing and unpacking are exact inverses.
struct EstimatedSource {
  Vec3 position = Vec3::Zero();
  DipoleAxis axis{};
  std::array<std::optional<VecX>, 2> log_power{};
};

class ParameterVector {
 public:
  /// Unbounded (+-inf) vector.
  ParameterVector(ParameterLayout layout, VecX values);
  ParameterVector(ParameterLayout layout, VecX values, VecX lower, VecX upper);

  /// Encodes scene-style sources (linear powers) using the layout implied by
  /// their poles. Silent powers (q == 0) become L = -inf.
  static ParameterVector from_sources(const std::vector<SourceObject>& sources, Index frequency_count);

  static VecX pack(const ParameterLayout& layout, const std::vector<EstimatedSource>& sources);
  std::vector<EstimatedSource> unpack() const;

  /// Decoded sources with linear power spectra.
  std::vector<SourceObject> sources() const;

  const ParameterLayout& layout() const { return layout_; }
  const VecX& values() const { return values_; }
  VecX& values() { return values_; }
  const VecX& lower() const { return lower_; }
  const VecX& upper() const { return upper_; }
  void set_bounds(VecX lower, VecX upper);

  bool within_bounds() const;
  /// Entries whose lower and upper bound coincide are held fixed by optimizers.
  std::vector<Index> free_indices() const;

 private:
  ParameterLayout layout_;
  VecX values_;
  VecX lower_;
  VecX upper_;
};

/// Box bounds helper. Position bounds apply to every source; entries with
/// lower == upper freeze a coordinate (e.g. x3 for a line array).
struct BoundsSpec {
  Vec3 position_lower = Vec3::Constant(-1.0);
  Vec3 position_upper = Vec3::Constant(1.0);
  double level_min_db = 0.0;
  double level_max_db = 140.0;
  double theta_min = 0.0;
  double theta_max = kPi;
  double phi_min = 0.0;
  double phi_max = kTwoPi;
};

/// Fills lower/upper vectors for the layout from a BoundsSpec.
std::pair<VecX, VecX> make_bounds(const ParameterLayout& layout, const BoundsSpec& spec);

/// Evaluates both energies for one measured CSM set and one layout.
///
/// Construction precomputes the measured off-diagonal entries and the
/// per-frequency normalizer mean_i |c_meas,i|^2. Evaluation is reentrant.
class EnergyModel {
 public:
  EnergyModel(MicArray array, CsmSet measured, ParameterLayout layout);

  const MicArray& array() const { return array_; }
  const CsmSet& measured() const { return measured_; }
  const ParameterLayout& layout() const { return layout_; }
  const UpperTriIndex& pairs() const { return pairs_; }

  /// mean over (i, j) of |c_mod - c_meas|^2 / mean_i |c_meas|^2.
  /// Throws std::domain_error if any frequency has all-zero off-diagonals.
  double broadband(const VecX& params) const;

  /// sum_i |c_mod,i(f_j) - c_meas,i(f_j)|^2 using the log-powers of frequency j.
  double standard(const VecX& params, Index j) const;

  /// mean_i |c_meas,i(f_j)|^2.
  double normalizer(Index j) const { return normalizer_[static_cast<std::size_t>(j)]; }

  /// Off-diagonal model entries at frequency j.
  CVecX model_entries(const VecX& params, Index j) const;

 private:
  double squared_error(const VecX& params, Index j) const;

  MicArray array_;
  CsmSet measured_;
  ParameterLayout layout_;
  UpperTriIndex pairs_;
  std::vector<CVecX> measured_entries_;
  std::vector<double> normalizer_;
};

double standard_energy(const ParameterVector& params, const CsmSet& measured, const MicArray& array, Index f_index);
double broadband_energy(const ParameterVector& params, const CsmSet& measured, const MicArray& array);

// -------------------------------------------------------------- landscapes

/// One swept axis. `parameter` is "s<n>.<field>" with field in
/// x1, x2, x3, theta, phi, q_monopole, q_dipole. Power axes take linear
/// q values in Pa^2/Hz and set every frequency of that pole.
struct SliceAxis {
  std::string parameter;
  std::vector<double> values;

  static std::vector<double> linspace(double first, double last, Index count);
  static std::vector<double> logspace(double first, double last, Index count);
};

enum class EnergyMode { single_frequency, broadband };

struct EnergyLandscapeSlice {
  SliceAxis axis1;
  SliceAxis axis2;
  EnergyMode mode = EnergyMode::broadband;
  double frequency = 0.0;  ///< Hz, single-frequency mode only
  VecX fixed;
  MatX energy;  ///< energy(a, b) at (axis1.values[a], axis2.values[b])
};

/// Sweeps two parameters over their grids with everything else at `fixed`.
/// single_frequency evaluates standard() at f_index.
EnergyLandscapeSlice slice_landscape(const EnergyModel& model, const SliceAxis& axis1, const SliceAxis& axis2,
                                     const VecX& fixed, EnergyMode mode, Index f_index = 0);

/// Cells strictly below every existing 8-neighbour.
std::vector<std::pair<Index, Index>> local_minima(const MatX& grid);
/// Cells strictly above every existing 8-neighbour.
std::vector<std::pair<Index, Index>> local_maxima(const MatX& grid);

// --------------------------------------------------------------------- PSF

/// Conventional-beamformer response to a unit monopole at `source`,
/// normalized to 1 at the source. Uses the same diagonal handling as
/// conventional_map.
VecX psf(const MicArray& array, const Vec3& source, const FocusGrid& grid, double k, bool remove_diagonal = true);

/// psf() for every wavenumber, or their mean when `averaged`.
std::vector<VecX> psf(const MicArray& array, const Vec3& source, const FocusGrid& grid,
                      const std::vector<double>& wavenumbers, bool averaged, bool remove_diagonal = true);

}  // namespace cmfbeam
