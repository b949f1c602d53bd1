// SPDX-License-Identifier: Apache-2.0
//
// cmfbeam: broadband covariance-matrix-fitting beamforming
// ------------------------------------------------------------------------
//
// From raw results to source spectra: ROI integration of source-parts,
// minimum-distance grouping of fitted source objects, and assignment of
// estimates to known true positions.

#pragma once

#include "cmfbeam/baseline.hpp"
#include "cmfbeam/scene.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cmfbeam {

inline constexpr const char* kNoiseLabel = "noise";

/// Ellipsoidal region: sum_a ((p - center)_a / radii_a)^2 <= 1.
struct Roi {
  Vec3 center = Vec3::Zero();
  Vec3 radii = Vec3::Constant(0.1);
  std::string label;

  static Roi sphere(const Vec3& center, double radius, std::string label);

  void validate() const;
  double normalized_distance(const Vec3& p) const;
  bool contains(const Vec3& p) const { return normalized_distance(p) <= 1.0; }
};

struct LabeledSpectrum {
  std::string label;
  Vec3 position = Vec3::Zero();  ///< ROI center or group centroid; zero for noise
  VecX power;                    ///< Pa^2/Hz per frequency
};

/// Reference spectrum with a 1-sigma band, all in Pa^2/Hz.
struct TruthSpectrum {
  std::string label;
  Vec3 position = Vec3::Zero();
  VecX mean;
  VecX std;
};

struct SpectraReport {
  VecX frequencies;
  /// Labeled spectra; the last entry is always the noise label.
  std::vector<LabeledSpectrum> spectra;
  std::vector<TruthSpectrum> truth;

  const LabeledSpectrum& at(const std::string& label) const;
  bool has(const std::string& label) const;
  /// Sum over all labels including noise.
  VecX total() const;
};

/// Assigns every part inside at least one ROI to the ROI with the smallest
/// normalized center distance (earliest ROI on exact ties); the rest goes
/// to the noise label. Result does not depend on part order.
SpectraReport roi_integrate(const SourcePartSet& parts, const std::vector<Roi>& rois, const FrequencyGrid& grid);

struct GroupingOptions {
  double min_distance = 0.02;  ///< m; objects at most this far apart are linked
  /// Groups whose total power lies more than this many dB below the
  /// strongest group are reported as noise. Unset keeps every group.
  std::optional<double> min_relative_power_db;
};

/// Single-linkage grouping. Groups are labeled "group1", "group2", ... in
/// order of decreasing total power; positions are power-weighted centroids.
SpectraReport group_source_objects(const std::vector<SourceObject>& sources, const FrequencyGrid& grid,
                                   const GroupingOptions& options);

struct Assignment {
  /// truth index per estimate, -1 when the estimate is left unmatched.
  std::vector<int> truth_of_estimate;
  /// estimate index per truth, -1 when no estimate is left for it.
  std::vector<int> estimate_of_truth;
  double total_distance = 0.0;
};

/// Minimum-total-distance one-to-one matching. With more estimates than
/// truths, `powers` (optional, one per estimate) breaks distance ties by
/// leaving the weakest estimates unmatched.
Assignment match_to_truth(const std::vector<Vec3>& estimates, const std::vector<Vec3>& truths,
                          const std::vector<double>& powers = {});

}  // namespace cmfbeam
