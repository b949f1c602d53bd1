// SPDX-License-Identifier: Apache-2.0
//
// cmfbeam: broadband covariance-matrix-fitting beamforming
// ------------------------------------------------------------------------

#include "cmfbeam/propagation.hpp"
#include "cmfbeam/scene.hpp"

#include "doctest.h"

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/eigen.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

using namespace cmfbeam;
using doctest::Approx;

namespace {

using Big = boost::multiprecision::cpp_bin_float_50;

const double k6144 = kTwoPi * 6144.0 / 343.0;

Vec3 random_point(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return {u(rng), u(rng), u(rng)};
}

}  // namespace

TEST_CASE("monopole Green's function: static limit and modulus") {
  const Complex h = monopole_green<double>(Vec3(0, 0, 0), Vec3(0, 0, 1), 0.0);
  CHECK(h.real() == Approx(1.0 / (4.0 * kPi)).epsilon(1e-15));
  CHECK(h.real() == Approx(0.0795775).epsilon(1e-6));
  CHECK(h.imag() == 0.0);

  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const Vec3 x = random_point(rng);
    const Vec3 y = random_point(rng);
    const double k = 500.0 * std::abs(x.x());
    const double d = (x - y).norm();
    CHECK(std::abs(monopole_green<double>(x, y, k)) == Approx(1.0 / (4.0 * kPi * d)).epsilon(1e-14));
    CHECK(std::abs(monopole_green<double>(x, y, k)) == std::abs(monopole_green<double>(y, x, k)));
  }
}

TEST_CASE("monopole Green's function against an extended-precision oracle") {
  // Independent scalar evaluation in 50 decimal digits.
  const Big k = Big(2) * boost::math::constants::pi<Big>() * Big(6144) / Big(343);
  const Big d("0.5");
  const Big a = Big(1) / (Big(4) * boost::math::constants::pi<Big>() * d);
  const double re = static_cast<double>(a * cos(k * d));
  const double im = static_cast<double>(-a * sin(k * d));
  // Frozen from the oracle.
  CHECK(re == Approx(0.1531844534546761229).epsilon(1e-15));
  CHECK(im == Approx(0.043183551618372096297).epsilon(1e-15));

  const Complex h = monopole_green<double>(Vec3(0.5, 0, 0), Vec3(0.5, 0.5, 0), k6144);
  CHECK(h.real() == Approx(re).epsilon(1e-13));
  CHECK(h.imag() == Approx(im).epsilon(1e-13));

  // The templated implementation itself in extended precision.
  const std::complex<Big> hb =
      monopole_green<Big>(Vector3<Big>(Big("0.5"), Big(0), Big(0)), Vector3<Big>(Big("0.5"), Big("0.5"), Big(0)), k);
  CHECK(static_cast<double>(abs(hb.real() - a * cos(k * d))) < 1e-40);
  CHECK(static_cast<double>(abs(hb.imag() + a * sin(k * d))) < 1e-40);
}

TEST_CASE("coincident points are rejected") {
  CHECK_THROWS_AS(monopole_green<double>(Vec3(1, 2, 3), Vec3(1, 2, 3), 1.0), std::domain_error);
  CHECK_THROWS_AS(dipole_green<double>(Vec3(1, 2, 3), Vec3(1, 2, 3), 1.0, 0.0, 0.0), std::domain_error);
  Mat3X mics = MicArray::line_x1(3, -1, 1).positions();
  Mat3X src(3, 1);
  src << 1, 0, 0;
  CHECK_THROWS_WITH_AS(greens_matrix<double>(mics, src, 1.0, Pole::monopole),
                       doctest::Contains("source 0 coincides with microphone 2"), std::domain_error);
}

TEST_CASE("dipole direction") {
  CHECK((dipole_direction(0.0, 1.234) - Vec3(0, 0, 1)).norm() < 1e-15);
  CHECK((dipole_direction(kPi / 2, 0.0) - Vec3(1, 0, 0)).norm() < 1e-15);
  CHECK((dipole_direction(kPi / 2, kPi / 2) - Vec3(0, 1, 0)).norm() < 1e-15);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int i = 0; i < 100; ++i) CHECK(dipole_direction(u(rng), u(rng)).norm() == Approx(1.0).epsilon(1e-15));
}

TEST_CASE("dipole Green's function") {
  const Vec3 x(0, 0, 2);
  const Vec3 y(0, 0, 0);
  SUBCASE("null plane") {
    // cos(pi / 2) rounds to 6.1e-17 in double.
    CHECK(std::abs(dipole_green<double>(x, y, 30.0, kPi / 2, 0.3)) < 1e-15);
    CHECK(dipole_green<double>(Vec3(1, 0, 0), y, 30.0, Vec3(0, 1, 0)) == Complex(0.0, 0.0));
  }
  SUBCASE("static limit along the axis") {
    const Complex h = dipole_green<double>(x, y, 0.0, 0.0, 0.0);
    CHECK(h.real() == Approx(1.0 / (4.0 * kPi * 4.0)).epsilon(1e-15));
    CHECK(h.imag() == 0.0);
  }
  SUBCASE("far field at kd = 100 is within 0.01% of k / (4 pi d)") {
    const Complex h = dipole_green<double>(Vec3(1, 0, 0), y, 100.0, Vec3(1, 0, 0));
    const double far = 100.0 / (4.0 * kPi);
    // Oracle: |h| = 7.9581450320058099117, ratio - 1 = 4.9999e-5.
    CHECK(std::abs(h) == Approx(7.9581450320058099117).epsilon(1e-14));
    CHECK(std::abs(std::abs(h) / far - 1.0) < 1e-4);
  }
  SUBCASE("sign flips with the axis; continuous through the null plane") {
    const Vec3 m(0.3, 0.2, 1.0);
    CHECK(std::abs(dipole_green<double>(m, y, 7.0, Vec3(0, 0, 1)) + dipole_green<double>(m, y, 7.0, Vec3(0, 0, -1))) <
          1e-15);
    double previous = 1.0;
    for (double eps : {1e-1, 1e-3, 1e-5, 1e-7}) {
      const Vec3 axis = Vec3(1.0, 0.0, eps).normalized();  // nearly perpendicular to x - y
      const double mag = std::abs(dipole_green<double>(x, y, 7.0, axis));
      CHECK(mag < previous);
      previous = mag;
    }
    CHECK(previous < 1e-7);
  }
}

TEST_CASE("Green's matrix columns") {
  const Mat3X mics = MicArray::line_x1(11, -0.5, 0.5).positions();
  Mat3X src(3, 1);
  src << 0.5, 0.5, 0.0;
  const CMatX h = greens_matrix<double>(mics, src, k6144, Pole::monopole);
  REQUIRE(h.rows() == 11);
  REQUIRE(h.cols() == 1);
  for (Index m = 0; m < 11; ++m) {
    CHECK(h(m, 0) == monopole_green<double>(mics.col(m), src.col(0), k6144));
    const double d = (mics.col(m) - src.col(0)).norm();
    CHECK(std::abs(h(m, 0)) == Approx(1.0 / (4.0 * kPi * d)).epsilon(1e-14));
  }

  Mat3X two(3, 2);
  two << 0.5, -0.2, 0.5, 0.7, 0.0, 0.1;
  Mat3X swapped(3, 2);
  swapped << two.col(1), two.col(0);
  const CMatX a = greens_matrix<double>(mics, two, k6144, Pole::monopole);
  const CMatX b = greens_matrix<double>(mics, swapped, k6144, Pole::monopole);
  CHECK(a.col(0) == b.col(1));
  CHECK(a.col(1) == b.col(0));

  CHECK_THROWS_AS(greens_matrix<double>(mics, two, k6144, Pole::dipole), std::invalid_argument);
}

TEST_CASE("dipole main lobe points along its axis") {
  // Microphones on a sphere around the source; the one on the +x3 axis wins.
  const Vec3 y(0.1, -0.2, 0.3);
  Mat3X mics(3, 6);
  const Vec3 dirs[6] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0.6, 0, 0.8}, {0, -0.8, 0.6}, {-0.6, 0.8, 0}};
  for (Index m = 0; m < 6; ++m) mics.col(m) = y + 0.7 * dirs[m];
  Mat3X src(3, 1);
  src.col(0) = y;
  Mat3X axes(3, 1);
  axes.col(0) = dipole_direction(0.0, 0.0);
  const CMatX h = greens_matrix<double>(mics, src, 25.0, Pole::dipole, axes);
  Index best = 0;
  h.col(0).cwiseAbs().maxCoeff(&best);
  CHECK(best == 2);
}

TEST_CASE("propagation operator: hand-computed 2 x 2 example") {
  CVecX h(2);
  h << Complex(1, 0), Complex(0, 1);
  const CMatX t = propagation_operator(CMatX(h));
  const CMatX c = unvectorize(t.col(0), 2);
  CHECK(c(0, 0) == Complex(1, 0));
  CHECK(c(0, 1) == Complex(0, -1));
  CHECK(c(1, 0) == Complex(0, 1));
  CHECK(c(1, 1) == Complex(1, 0));
  // Row-major: entry (i, j) at i * M + j.
  CHECK(t(1, 0) == Complex(0, -1));
  CHECK(t(2, 0) == Complex(0, 1));
}

TEST_CASE("propagation columns are rank-one Hermitian PSD") {
  std::mt19937_64 rng(21);
  const Mat3X mics = MicArray::line_x1(7, -0.5, 0.5).positions();
  Mat3X src(3, 4);
  for (Index n = 0; n < 4; ++n) src.col(n) = random_point(rng) + Vec3(0, 2, 0);
  const CMatX h = greens_matrix<double>(mics, src, 40.0, Pole::monopole);
  const CMatX t = propagation_operator(h);
  REQUIRE(t.rows() == 49);
  REQUIRE(t.cols() == 4);
  for (Index n = 0; n < 4; ++n) {
    const CMatX c = unvectorize(t.col(n), 7);
    CHECK((c - c.adjoint()).norm() <= 1e-15 * c.norm());
    CHECK(c.trace().real() == Approx(h.col(n).squaredNorm()).epsilon(1e-14));
    Eigen::SelfAdjointEigenSolver<CMatX> eig(c);
    const VecX ev = eig.eigenvalues();
    CHECK(ev[6] == Approx(h.col(n).squaredNorm()).epsilon(1e-12));
    for (Index i = 0; i < 6; ++i) CHECK(std::abs(ev[i]) <= 1e-10 * ev[6]);
  }
  Mat3X same(3, 2);
  same << src.col(0), src.col(0);
  const CMatX ts = propagation_operator(greens_matrix<double>(mics, same, 40.0, Pole::monopole));
  CHECK(ts.col(0) == ts.col(1));
}

TEST_CASE("Khatri-Rao product definition") {
  MatX a(2, 2);
  a << 1, 2, 3, 4;
  MatX b(3, 2);
  b << 5, 6, 7, 8, 9, 10;
  const MatX kr = khatri_rao(a, b);
  REQUIRE(kr.rows() == 6);
  VecX c0(6);
  c0 << 5, 7, 9, 15, 21, 27;
  VecX c1(6);
  c1 << 12, 16, 20, 24, 32, 40;
  CHECK(kr.col(0) == c0);
  CHECK(kr.col(1) == c1);
  CHECK_THROWS_AS(khatri_rao(a, MatX(3, 1)), std::invalid_argument);
  CHECK_THROWS_AS(unvectorize(VecX(5), 2), std::invalid_argument);
}

TEST_CASE("formulation IV steering vectors") {
  SUBCASE("equal distances give equal weights 1/M") {
    // Microphones on a circle around the focus point.
    const Index m_count = 8;
    Mat3X mics(3, m_count);
    const double r = 0.7;
    for (Index m = 0; m < m_count; ++m) {
      const double a = kTwoPi * static_cast<double>(m) / m_count;
      mics.col(m) = Vec3(r * std::cos(a), r * std::sin(a), 0.0);
    }
    const CVecX w = steering_vector_iv<double>(Vec3::Zero(), mics, 30.0);
    for (Index m = 0; m < m_count; ++m) CHECK(std::abs(w[m]) == Approx(1.0 / m_count).epsilon(1e-14));
  }
  SUBCASE("normalization identity") {
    const Mat3X mics = MicArray::line_x1(11, -0.5, 0.5).positions();
    const Vec3 t(0.2, 0.45, 0.1);
    const CVecX w = steering_vector_iv<double>(t, mics, k6144);
    double inv = 0.0;
    VecX r(11);
    for (Index m = 0; m < 11; ++m) {
      r[m] = (mics.col(m) - t).norm();
      inv += 1.0 / (r[m] * r[m]);
    }
    double lhs = 0.0;
    for (Index m = 0; m < 11; ++m) lhs += std::norm(w[m]) * r[m] * r[m] * 11.0 * inv;
    CHECK(lhs == Approx(11.0).epsilon(1e-13));
  }
  SUBCASE("quadratic form at the true source is real and positive") {
    const Mat3X mics = MicArray::line_x1(11, -0.5, 0.5).positions();
    const Vec3 y(0.5, 0.5, 0.0);
    CVecX h(11);
    for (Index m = 0; m < 11; ++m) h[m] = monopole_green<double>(mics.col(m), y, k6144);
    const CVecX w = steering_vector_iv<double>(y, mics, k6144);
    const Complex b = w.dot(4.0 * h * h.adjoint() * w);
    CHECK(b.real() > 0.0);
    CHECK(std::abs(b.imag()) <= 1e-14 * b.real());
  }
  SUBCASE("coincident focus point") {
    const Mat3X mics = MicArray::line_x1(3, -1, 1).positions();
    CHECK_THROWS_AS(steering_vector_iv<double>(Vec3(1, 0, 0), mics, 1.0), std::domain_error);
  }
}

TEST_CASE("long double instantiation agrees with double") {
  using LVec = Vector3<long double>;
  const LVec x(0.1L, 0.2L, 0.0L);
  const LVec y(0.5L, 0.5L, 0.0L);
  const std::complex<long double> hl = dipole_green<long double>(x, y, 123.0L, 1.0L, 2.0L);
  const Complex hd = dipole_green<double>(x.cast<double>(), y.cast<double>(), 123.0, 1.0, 2.0);
  CHECK(static_cast<double>(hl.real()) == Approx(hd.real()).epsilon(1e-13));
  CHECK(static_cast<double>(hl.imag()) == Approx(hd.imag()).epsilon(1e-13));
}
