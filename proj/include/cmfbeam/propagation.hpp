// SPDX-License-Identifier: Apache-2.0
//
// cmfbeam: broadband covariance-matrix-fitting beamforming
// ------------------------------------------------------------------------
//
// Free-field Green's functions, Green's matrices, the Khatri-Rao propagation
// operator and formulation-IV steering vectors. Everything here is templated
// on the real scalar so reference evaluations can run in extended precision.
//
// CSM vectorization is row-major: entry C(i, j) sits at index i * M + j.

#pragma once

#include "cmfbeam/types.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmfbeam {

namespace detail {

template <typename Scalar>
Scalar checked_distance(const Vector3<Scalar>& x, const Vector3<Scalar>& y, const char* who) {
  const Scalar d = (x - y).norm();
  if (!(d > Scalar(0))) throw std::domain_error(std::string(who) + ": source coincides with receiver");
  return d;
}

template <typename Scalar> Scalar four_pi() {
  using std::atan;
  return Scalar(16) * atan(Scalar(1));
}

}  // namespace detail

/// exp(-j k d) / (4 pi d), d = |x - y|.
template <typename Scalar>
std::complex<Scalar> monopole_green(const Vector3<Scalar>& x, const Vector3<Scalar>& y, Scalar k) {
  using std::cos;
  using std::sin;
  const Scalar d = detail::checked_distance(x, y, "monopole_green");
  const Scalar a = Scalar(1) / (detail::four_pi<Scalar>() * d);
  return {a * cos(k * d), -a * sin(k * d)};
}

template <typename Scalar> Vector3<Scalar> dipole_direction(Scalar theta, Scalar phi) {
  using std::cos;
  using std::sin;
  return {sin(theta) * cos(phi), sin(theta) * sin(phi), cos(theta)};
}

/// (e_dip . e_n) exp(-j k d) / (4 pi) (1/d^2 + j k / d), with e_n the unit
/// vector from the source y toward the receiver x.
template <typename Scalar>
std::complex<Scalar> dipole_green(const Vector3<Scalar>& x, const Vector3<Scalar>& y, Scalar k,
                                  const Vector3<Scalar>& axis) {
  using std::cos;
  using std::sin;
  const Scalar d = detail::checked_distance(x, y, "dipole_green");
  const Scalar cosine = axis.dot(x - y) / d;
  const std::complex<Scalar> phase(cos(k * d), -sin(k * d));
  const std::complex<Scalar> radial(Scalar(1) / (d * d), k / d);
  return cosine / detail::four_pi<Scalar>() * phase * radial;
}

template <typename Scalar>
std::complex<Scalar> dipole_green(const Vector3<Scalar>& x, const Vector3<Scalar>& y, Scalar k, Scalar theta,
                                  Scalar phi) {
  return dipole_green<Scalar>(x, y, k, dipole_direction<Scalar>(theta, phi));
}

/// Green's matrix H(m, n) = h(x_m, y_n) for one pole type. `axes` holds one
/// dipole direction per source column and is ignored for monopoles.
template <typename Scalar>
ComplexMatrixX<Scalar> greens_matrix(const Matrix3X<Scalar>& mics, const Matrix3X<Scalar>& sources, Scalar k,
                                     Pole pole, const Matrix3X<Scalar>& axes = Matrix3X<Scalar>()) {
  if (pole == Pole::dipole && axes.cols() != sources.cols()) {
    throw std::invalid_argument("greens_matrix: need one dipole axis per source");
  }
  ComplexMatrixX<Scalar> h(mics.cols(), sources.cols());
  for (Index n = 0; n < sources.cols(); ++n) {
    for (Index m = 0; m < mics.cols(); ++m) {
      try {
        h(m, n) = pole == Pole::monopole
                      ? monopole_green<Scalar>(mics.col(m), sources.col(n), k)
                      : dipole_green<Scalar>(mics.col(m), sources.col(n), k, Vector3<Scalar>(axes.col(n)));
      } catch (const std::domain_error&) {
        throw std::domain_error("greens_matrix: source " + std::to_string(n) + " coincides with microphone " +
                                std::to_string(m));
      }
    }
  }
  return h;
}

/// Column-wise Kronecker product: column n is a.col(n) (x) b.col(n).
template <typename DerivedA, typename DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic> khatri_rao(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("khatri_rao: column counts differ");
  Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic> out(a.rows() * b.rows(), a.cols());
  for (Index n = 0; n < a.cols(); ++n) {
    for (Index i = 0; i < a.rows(); ++i) {
      out.col(n).segment(i * b.rows(), b.rows()) = a(i, n) * b.col(n);
    }
  }
  return out;
}

/// Propagation operator T with T q = vec(sum_n q_n h_n h_n^H) in row-major
/// order, i.e. column n is h_n (x) conj(h_n).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> propagation_operator(
    const Eigen::MatrixBase<Derived>& h) {
  return khatri_rao(h, h.conjugate());
}

/// Row-major reshape of one M^2 propagation column back to an M x M matrix.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> unvectorize(
    const Eigen::MatrixBase<Derived>& column, Index m) {
  if (column.size() != m * m) throw std::invalid_argument("unvectorize: length is not M^2");
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> c(m, m);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j) c(i, j) = column(i * m + j);
  return c;
}

/// Formulation-IV steering vector for focus point t:
/// w_m = exp(-j k r_m) / (r_m sqrt(M sum_l r_l^-2)).
template <typename Scalar>
ComplexVectorX<Scalar> steering_vector_iv(const Vector3<Scalar>& point, const Matrix3X<Scalar>& mics, Scalar k) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const Index m_count = mics.cols();
  VectorX<Scalar> r(m_count);
  Scalar inv_sq = 0;
  for (Index m = 0; m < m_count; ++m) {
    r[m] = detail::checked_distance<Scalar>(mics.col(m), point, "steering_vector_iv");
    inv_sq += Scalar(1) / (r[m] * r[m]);
  }
  const Scalar norm = sqrt(Scalar(m_count) * inv_sq);
  ComplexVectorX<Scalar> w(m_count);
  for (Index m = 0; m < m_count; ++m) {
    const Scalar a = Scalar(1) / (r[m] * norm);
    w[m] = {a * cos(k * r[m]), -a * sin(k * r[m])};
  }
  return w;
}

}  // namespace cmfbeam
