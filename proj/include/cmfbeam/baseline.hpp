// SPDX-License-Identifier: Apache-2.0
//
// cmfbeam: broadband covariance-matrix-fitting beamforming
// ------------------------------------------------------------------------
//
// Grid-based reference methods: conventional beamforming with
// formulation-IV steering and CLEAN-SC.
//
// Maps are computed with the CSM diagonal removed. The result is divided by
// 1 - sum|w|^4 / (sum|w|^2)^2, which restores the full-CSM level at a
// point source for steering vectors proportional to the Green's vector (as
// formulation IV is), and negative values are clipped to zero.

#pragma once

#include "cmfbeam/csm.hpp"
#include "cmfbeam/scene.hpp"

#include <vector>

namespace cmfbeam {

/// Rectilinear focus grid. Axis a holds min + i * step for i in [0, count(a)).
class FocusGrid {
 public:
  FocusGrid(Vec3 min, Vec3 max, Vec3 step);

  /// The 2D grid x1 in [-1, 1], x2 in [0.3, 0.7], x3 = 0, 0.01 m spacing.
  static FocusGrid line_array_default();

  Index count(int axis) const { return counts_[axis]; }
  Index size() const { return counts_[0] * counts_[1] * counts_[2]; }
  const Vec3& min() const { return min_; }
  const Vec3& max() const { return max_; }
  const Vec3& step() const { return step_; }

  /// Flat index runs x1 fastest, then x2, then x3.
  Vec3 point(Index flat) const;
  Index flat_index(Index i1, Index i2, Index i3) const { return i1 + counts_[0] * (i2 + counts_[1] * i3); }
  /// Nearest grid node to p (clamped to the grid).
  Index nearest(const Vec3& p) const;

 private:
  Vec3 min_;
  Vec3 max_;
  Vec3 step_;
  Eigen::Matrix<Index, 3, 1> counts_;
};

/// One (location, frequency, power) atom from a per-frequency method.
struct SourcePart {
  Vec3 position = Vec3::Zero();
  double frequency = 0.0;  ///< Hz
  double power = 0.0;      ///< Pa^2/Hz, > 0
};

using SourcePartSet = std::vector<SourcePart>;

/// Diagonal-removed, level-corrected beamformer output w^H C w at one point.
double beamform_point(const CMatX& csm, const CVecX& w);

/// Beamformer power at every grid point for frequency index j.
VecX conventional_map(const CsmSet& csm, const MicArray& array, const FocusGrid& grid, Index f_index);

struct CleanScConfig {
  double loop_gain = 0.9;
  Index max_iterations = 50;
  /// Stop once the off-diagonal Frobenius norm of the degraded CSM
  /// decreases by less than this fraction in one iteration.
  double stop_threshold = 1e-6;
  /// Iterations of the diagonal-removal source-component refinement.
  Index coherence_iterations = 20;

  void validate() const;
};

struct CleanScTrace {
  /// Off-diagonal Frobenius norm of the degraded CSM after each accepted
  /// iteration, per frequency; entry 0 is the input norm.
  std::vector<std::vector<double>> degraded_norm;
};

/// CLEAN-SC per frequency. Each accepted iteration removes
/// loop_gain * P h h^H from the degraded CSM and credits the peak grid point
/// with the corresponding monopole source strength (beamformer peak divided by
/// the diagonal-removed self-response of the steering vector), so parts are
/// in Pa^2/Hz of source power. Parts at the same point and frequency are merged.
SourcePartSet clean_sc(const CsmSet& csm, const MicArray& array, const FocusGrid& grid,
                       const CleanScConfig& config = {}, CleanScTrace* trace = nullptr);

}  // namespace cmfbeam
