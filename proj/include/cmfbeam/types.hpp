// SPDX-License-Identifier: Apache-2.0
//
// cmfbeam: broadband covariance-matrix-fitting beamforming
// ------------------------------------------------------------------------

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <numbers>

namespace cmfbeam {

using Index = Eigen::Index;

template <typename Scalar> using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar> using Matrix3X = Eigen::Matrix<Scalar, 3, Eigen::Dynamic>;
template <typename Scalar> using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar> using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar> using ComplexVectorX = VectorX<std::complex<Scalar>>;
template <typename Scalar> using ComplexMatrixX = MatrixX<std::complex<Scalar>>;

using Vec3 = Vector3<double>;
using Mat3X = Matrix3X<double>;
using VecX = VectorX<double>;
using MatX = MatrixX<double>;
using Complex = std::complex<double>;
using CVecX = ComplexVectorX<double>;
using CMatX = ComplexMatrixX<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Pole order of a compact source. Values are stable; they index spectra.
enum class Pole { monopole = 0, dipole = 1 };

inline constexpr const char* pole_name(Pole p) {
  return p == Pole::monopole ? "monopole" : "dipole";
}

}  // namespace cmfbeam
