// SPDX-License-Identifier: Apache-2.0
//
// cmfbeam: broadband covariance-matrix-fitting beamforming
// ------------------------------------------------------------------------

#pragma once

#include "cmfbeam/propagation.hpp"
#include "cmfbeam/types.hpp"

namespace cmfbeam::detail {

/// Green's vector of one pole at `position` seen by every microphone.
inline void pole_response(const Mat3X& mics, const Vec3& position, const Vec3& axis, double k, Pole pole,
                          CVecX& h) {
  h.resize(mics.cols());
  for (Index m = 0; m < mics.cols(); ++m) {
    h[m] = pole == Pole::monopole ? monopole_green<double>(mics.col(m), position, k)
                                  : dipole_green<double>(mics.col(m), position, k, axis);
  }
}

/// c(i, j) += q h_i conj(h_j) on the lower triangle (i >= j). Shared by CSM
/// synthesis and the energies so both produce identical bits.
inline void add_lower(CMatX& c, const CVecX& h, double q) {
  for (Index j = 0; j < h.size(); ++j) {
    for (Index i = j; i < h.size(); ++i) c(i, j) += q * (h[i] * std::conj(h[j]));
  }
}

inline void mirror_lower(CMatX& c) {
  for (Index j = 0; j < c.cols(); ++j) {
    c(j, j) = Complex(c(j, j).real(), 0.0);
    for (Index i = j + 1; i < c.rows(); ++i) c(j, i) = std::conj(c(i, j));
  }
}

}  // namespace cmfbeam::detail
