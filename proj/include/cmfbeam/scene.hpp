// SPDX-License-Identifier: Apache-2.0
//
// cmfbeam: broadband covariance-matrix-fitting beamforming
// ------------------------------------------------------------------------

#pragma once

#include "cmfbeam/types.hpp"

#include <array>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cmfbeam {

/// Reference power of the decibel scale, Pa^2/Hz.
inline constexpr double kReferencePower = 4e-10;

/// Level reported for an exactly silent pole (q == 0).
inline constexpr double kSilentDb = -std::numeric_limits<double>::infinity();

/// Q = 10 log10(q / 4e-10). q == 0 maps to kSilentDb; negative or NaN throws.
double db_from_power(double q);

/// Inverse of db_from_power; kSilentDb maps to 0.
double power_from_db(double level_db);

VecX db_from_power(const VecX& q);
VecX power_from_db(const VecX& level_db);

/// Ordered microphone positions in meters. Column m is microphone m and is
/// also row/column m of every CSM built on this array.
class MicArray {
 public:
  explicit MicArray(Mat3X positions);

  /// Equidistant line along x1 in [x_min, x_max] at x2 = x3 = 0.
  static MicArray line_x1(Index count, double x_min, double x_max);

  Index size() const { return positions_.cols(); }
  const Mat3X& positions() const { return positions_; }
  Vec3 position(Index m) const { return positions_.col(m); }

 private:
  Mat3X positions_;
};

/// Ascending analysis frequencies in Hz plus the speed of sound in m/s.
class FrequencyGrid {
 public:
  explicit FrequencyGrid(std::vector<double> frequencies, double speed_of_sound = 343.0);

  /// first, first + step, ... up to and including last (within step/2).
  static FrequencyGrid uniform(double first, double last, double step, double speed_of_sound = 343.0);

  Index size() const { return static_cast<Index>(frequencies_.size()); }
  const std::vector<double>& frequencies() const { return frequencies_; }
  double frequency(Index j) const { return frequencies_[static_cast<std::size_t>(j)]; }
  double speed_of_sound() const { return speed_of_sound_; }
  double wavenumber(Index j) const { return kTwoPi * frequency(j) / speed_of_sound_; }

  /// Index of the entry equal to f within 1e-9 relative; throws if absent.
  Index index_of(double f) const;

  /// Grid restricted to a single entry.
  FrequencyGrid subset(Index j) const;

  bool operator==(const FrequencyGrid& other) const = default;

 private:
  std::vector<double> frequencies_;
  double speed_of_sound_;
};

/// Dipole orientation: e = [sin(theta)cos(phi), sin(theta)sin(phi), cos(theta)].
struct DipoleAxis {
  double theta = 0.0;
  double phi = 0.0;
};

/// Maps any (theta, phi) to theta in [0, pi], phi in [0, 2 pi) with the same
/// direction vector.
DipoleAxis wrap_axis(DipoleAxis axis);

/// Representative of the field-equivalence class {(theta, phi), (pi - theta, phi + pi)}:
/// theta in [0, pi/2]; on the equator phi is taken in [0, pi).
DipoleAxis canonical_axis(DipoleAxis axis);

/// Smallest angle between the two canonical phi values, modulo the
/// dipole sign symmetry. Meaningful for axes sharing theta.
double phi_error(DipoleAxis estimate, DipoleAxis truth);

/// A compact incoherent source: one position, an optional dipole axis, and a
/// power spectrum per present pole (Pa^2/Hz, one entry per grid frequency).
struct SourceObject {
  Vec3 position = Vec3::Zero();
  DipoleAxis axis{};
  std::array<std::optional<VecX>, 2> spectra{};

  bool has(Pole p) const { return spectra[static_cast<std::size_t>(p)].has_value(); }
  const VecX& spectrum(Pole p) const;
  VecX& spectrum(Pole p);

  /// Sum of all present poles' spectra.
  VecX total_spectrum(Index frequency_count) const;

  static SourceObject monopole(const Vec3& position, VecX q);
  static SourceObject dipole(const Vec3& position, DipoleAxis axis, VecX q);
};

class Scene {
 public:
  Scene(MicArray array, FrequencyGrid grid, std::vector<SourceObject> sources);

  const MicArray& array() const { return array_; }
  const FrequencyGrid& grid() const { return grid_; }
  const std::vector<SourceObject>& sources() const { return sources_; }

  Scene with_sources(std::vector<SourceObject> sources) const;

 private:
  MicArray array_;
  FrequencyGrid grid_;
  std::vector<SourceObject> sources_;
};

struct BuiltinOptions {
  /// Use 100 Hz .. 20 kHz with 100 Hz spacing for cases 1 and 2 instead of
  /// 2^10 .. 2^15 Hz with 1024 Hz spacing.
  bool wide_grid = false;
};

/// Synthetic scenes: "case1" .. "case4", "case6".
Scene builtin_case(std::string_view id, const BuiltinOptions& options = {});

std::vector<std::string> builtin_case_ids();

/// 2^10 .. 2^15 Hz in 1024 Hz steps.
FrequencyGrid octave_band_grid(double speed_of_sound = 343.0);

}  // namespace cmfbeam
