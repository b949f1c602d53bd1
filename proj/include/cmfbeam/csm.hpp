// SPDX-License-Identifier: Apache-2.0
//
// cmfbeam: broadband covariance-matrix-fitting beamforming
// ------------------------------------------------------------------------

#pragma once

#include "cmfbeam/scene.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <utility>
#include <vector>

namespace cmfbeam {

/// Per-frequency Hermitian cross-spectral matrices in Pa^2/Hz.
///
/// Matrices are symmetrized as (C + C^H) / 2 on construction, which is a
/// bit-exact no-op for matrices that are already Hermitian.
class CsmSet {
 public:
  CsmSet(FrequencyGrid grid, std::vector<CMatX> matrices);

  static CsmSet zeros(const FrequencyGrid& grid, Index mic_count);

  const FrequencyGrid& grid() const { return grid_; }
  Index mic_count() const { return mic_count_; }
  Index frequency_count() const { return grid_.size(); }
  const CMatX& at(Index j) const { return matrices_[static_cast<std::size_t>(j)]; }
  const std::vector<CMatX>& matrices() const { return matrices_; }

  /// The set restricted to frequency j.
  CsmSet subset(Index j) const;

  CsmSet scaled(double factor) const;

 private:
  FrequencyGrid grid_;
  Index mic_count_ = 0;
  std::vector<CMatX> matrices_;
};

/// Off-diagonal entries (i, j) with i > j, ordered by i then j; M(M-1)/2 pairs.
class UpperTriIndex {
 public:
  explicit UpperTriIndex(Index mic_count);

  Index size() const { return static_cast<Index>(pairs_.size()); }
  const std::vector<std::pair<Index, Index>>& pairs() const { return pairs_; }

  /// Entries of c at the selected pairs.
  CVecX gather(const CMatX& c) const;

 private:
  std::vector<std::pair<Index, Index>> pairs_;
};

/// Noise-free CSMs: C(f) = sum over sources and poles of q h h^H.
CsmSet synthesize_csm(const Scene& scene);

/// Sample CSM from `snapshots` independent circular Gaussian source
/// amplitudes per frequency, E|a|^2 = q. Deterministic for a fixed seed.
CsmSet snapshot_csm(const Scene& scene, Index snapshots, std::uint64_t seed);

/// Element-wise sum; grids and array sizes must match.
CsmSet superpose(const CsmSet& a, const CsmSet& b);

/// sqrt(sum_f ||a(f) - b(f)||_F^2).
double frobenius_distance(const CsmSet& a, const CsmSet& b);

struct GroundTruthSpectrum {
  VecX mean;  ///< Pa^2/Hz
  VecX std;   ///< population standard deviation over the off-diagonal entries
};

/// Divides every off-diagonal CSM entry by the ideal unit monopole's
/// h_i conj(h_j) for position y and averages the magnitudes.
GroundTruthSpectrum ground_truth_psd(const CsmSet& csm, const Vec3& y, const MicArray& array);

// ------------------------------------------------------------------ I/O
//
// Binary layout (all little-endian):
//   char[8]   magic "CMFCSM01"
//   uint32    M
//   uint32    F
//   float64   speed of sound, m/s
//   float64   frequencies[F], Hz
//   float64   entries[F][M][M][2], (re, im) in Pa^2/Hz, row-major
//
// Text layout: '#' comment lines, then "M <int>", "F <int>",
// "speed_of_sound <m/s>", "frequencies <F values Hz>", and per frequency a
// "frequency <Hz>" line followed by M rows of 2M numbers (re im ...).

void write_csm_binary(const CsmSet& csm, std::ostream& out);
CsmSet read_csm_binary(std::istream& in);
void write_csm_text(const CsmSet& csm, std::ostream& out);
CsmSet read_csm_text(std::istream& in);

/// Chooses the format from the extension: ".csmb" binary, anything else text.
void save_csm(const CsmSet& csm, const std::filesystem::path& path);
CsmSet load_csm(const std::filesystem::path& path);

}  // namespace cmfbeam
