// SPDX-License-Identifier: Apache-2.0
//
// cmfbeam: broadband covariance-matrix-fitting beamforming
// ------------------------------------------------------------------------

#include "cmfbeam/scene.hpp"

#include "doctest.h"

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <random>

using namespace cmfbeam;
using doctest::Approx;

namespace {

using Big = boost::multiprecision::cpp_bin_float_50;

double big_db(const Big& q) { return static_cast<double>(Big(10) * log10(q / Big("4e-10"))); }

}  // namespace

TEST_CASE("decibel scale reference points") {
  CHECK(std::abs(db_from_power(4e-10)) < 1e-12);
  CHECK(power_from_db(100.0) == Approx(4.0).epsilon(1e-15));

  // 50-digit reference, frozen: 93.97940008672037609572522...
  const double oracle = big_db(Big(1));
  CHECK(oracle == Approx(93.97940008672038).epsilon(1e-15));
  CHECK(db_from_power(1.0) == Approx(oracle).epsilon(1e-14));
}

TEST_CASE("decibel conversion matches an extended-precision oracle over the working range") {
  for (double e = -12.0; e <= 6.0; e += 0.37) {
    const double q = std::pow(10.0, e);
    CHECK(db_from_power(q) == Approx(big_db(Big(q))).epsilon(1e-13));
  }
}

TEST_CASE("decibel round trip is exact to 1e-12 relative") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> exponent(-12.0, 6.0);
  for (int i = 0; i < 2000; ++i) {
    const double q = std::pow(10.0, exponent(rng));
    CHECK(std::abs(power_from_db(db_from_power(q)) - q) <= 1e-12 * q);
  }
}

TEST_CASE("silent poles have a distinguished level") {
  CHECK(db_from_power(0.0) == kSilentDb);
  CHECK(std::isinf(db_from_power(0.0)));
  CHECK_FALSE(std::isnan(db_from_power(0.0)));
  CHECK(power_from_db(kSilentDb) == 0.0);
  CHECK_THROWS_AS(db_from_power(-1e-30), std::invalid_argument);
  CHECK_THROWS_AS(db_from_power(std::nan("")), std::invalid_argument);
}

TEST_CASE("microphone arrays") {
  const MicArray line = MicArray::line_x1(11, -0.5, 0.5);
  CHECK(line.size() == 11);
  CHECK(line.position(0).x() == -0.5);
  CHECK(line.position(10).x() == 0.5);
  CHECK(line.position(5).x() == Approx(0.0));
  CHECK(line.positions().row(1).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(MicArray(Mat3X::Zero(3, 1)), std::invalid_argument);
  Mat3X twin = Mat3X::Zero(3, 3);
  twin(0, 1) = 1.0;
  CHECK_THROWS_AS(MicArray{twin}, std::invalid_argument);
}

TEST_CASE("frequency grids") {
  const FrequencyGrid g = octave_band_grid();
  REQUIRE(g.size() == 32);
  CHECK(g.frequency(0) == 1024.0);
  CHECK(g.frequency(31) == 32768.0);
  CHECK(g.speed_of_sound() == 343.0);
  CHECK(g.wavenumber(5) == Approx(kTwoPi * 6144.0 / 343.0).epsilon(1e-15));
  CHECK(g.index_of(6144.0) == 5);
  CHECK_THROWS_AS(g.index_of(6000.0), std::invalid_argument);
  CHECK(g.subset(5).frequencies() == std::vector<double>{6144.0});

  CHECK_THROWS_AS(FrequencyGrid({}), std::invalid_argument);
  CHECK_THROWS_AS(FrequencyGrid({100.0, 100.0}), std::invalid_argument);
  CHECK_THROWS_AS(FrequencyGrid({200.0, 100.0}), std::invalid_argument);
  CHECK_THROWS_AS(FrequencyGrid({0.0, 100.0}), std::invalid_argument);
  CHECK_THROWS_AS(FrequencyGrid({100.0}, 0.0), std::invalid_argument);
}

TEST_CASE("builtin case 3 is a flat 100 dB monopole") {
  const Scene s = builtin_case("case3");
  CHECK(s.array().size() == 11);
  REQUIRE(s.sources().size() == 1);
  const SourceObject& src = s.sources()[0];
  CHECK(src.position == Vec3(0.5, 0.5, 0.0));
  CHECK_FALSE(src.has(Pole::dipole));
  const VecX q = db_from_power(src.spectrum(Pole::monopole));
  REQUIRE(q.size() == 32);
  for (Index j = 0; j < q.size(); ++j) CHECK(q[j] == Approx(100.0).epsilon(1e-13));
}

TEST_CASE("builtin case 4 ramps S_I from 90 to 110 dB") {
  const Scene s = builtin_case("case4");
  REQUIRE(s.sources().size() == 2);
  const VecX q1 = db_from_power(s.sources()[0].spectrum(Pole::monopole));
  const VecX q2 = db_from_power(s.sources()[1].spectrum(Pole::monopole));
  CHECK(q1[0] == Approx(90.0).epsilon(1e-12));
  CHECK(q1[31] == Approx(110.0).epsilon(1e-12));
  for (Index j = 1; j < 32; ++j) CHECK(q1[j] - q1[j - 1] == Approx(20.0 / 31.0).epsilon(1e-9));
  CHECK(s.sources()[1].position == Vec3(0.5, 0.6, 0.0));
  for (Index j = 0; j < 32; ++j) CHECK(q2[j] == Approx(100.0).epsilon(1e-13));
}

TEST_CASE("builtin case 6 multipoles") {
  const Scene s = builtin_case("case6");
  REQUIRE(s.sources().size() == 2);
  const SourceObject& s1 = s.sources()[0];
  const SourceObject& s2 = s.sources()[1];
  CHECK(db_from_power(s1.spectrum(Pole::monopole)[0]) == Approx(100.0));
  CHECK(db_from_power(s1.spectrum(Pole::dipole)[7]) == Approx(60.0));
  CHECK(s1.axis.theta == Approx(kPi / 2));
  CHECK(s1.axis.phi == 0.0);
  CHECK(db_from_power(s2.spectrum(Pole::dipole)[3]) == Approx(40.0));
  CHECK(s2.axis.theta == Approx(kPi / 2));
  CHECK(s2.axis.phi == Approx(kPi / 2));
  CHECK(s2.has(Pole::monopole));
  CHECK(s2.spectrum(Pole::monopole).isZero(0.0));
  CHECK(db_from_power(s2.spectrum(Pole::monopole)[0]) == kSilentDb);
}

TEST_CASE("builtin cases 1 and 2 follow the body-text frequency grid by default") {
  const Scene c1 = builtin_case("case1");
  CHECK(c1.array().size() == 5);
  CHECK(c1.grid() == octave_band_grid());
  CHECK(c1.sources()[0].spectrum(Pole::monopole).isOnes(0.0));
  const Scene wide = builtin_case("case1", {.wide_grid = true});
  CHECK(wide.grid().size() == 200);
  CHECK(wide.grid().frequency(0) == 100.0);
  CHECK(wide.grid().frequency(199) == Approx(20000.0));
  CHECK(builtin_case("case2").sources().size() == 2);
}

TEST_CASE("builtin cases are deterministic and reject unknown ids") {
  for (const auto& id : builtin_case_ids()) {
    const Scene a = builtin_case(id);
    const Scene b = builtin_case(id);
    CHECK(a.array().positions() == b.array().positions());
    REQUIRE(a.sources().size() == b.sources().size());
    for (std::size_t n = 0; n < a.sources().size(); ++n) {
      CHECK(a.sources()[n].position == b.sources()[n].position);
      CHECK(a.sources()[n].total_spectrum(a.grid().size()) == b.sources()[n].total_spectrum(a.grid().size()));
    }
  }
  CHECK_THROWS_WITH_AS(builtin_case("case5"), doctest::Contains("unknown builtin case"), std::invalid_argument);
}

TEST_CASE("scene validation") {
  const MicArray a = MicArray::line_x1(3, -1.0, 1.0);
  const FrequencyGrid g({1000.0, 2000.0});
  CHECK_THROWS_AS(Scene(a, g, {SourceObject::monopole(Vec3(0, 0, 0), VecX::Ones(2))}), std::invalid_argument);
  CHECK_THROWS_AS(Scene(a, g, {SourceObject::monopole(Vec3(0, 1, 0), VecX::Ones(3))}), std::invalid_argument);
  CHECK_THROWS_AS(Scene(a, g, {SourceObject::monopole(Vec3(0, 1, 0), VecX::Constant(2, -1.0))}),
                  std::invalid_argument);
  CHECK_THROWS_AS(Scene(a, g, {SourceObject{}}), std::invalid_argument);
  CHECK_NOTHROW(Scene(a, g, {}));
}

TEST_CASE("axis wrapping keeps the direction vector") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> any(-20.0, 20.0);
  auto dir = [](DipoleAxis a) {
    return Vec3(std::sin(a.theta) * std::cos(a.phi), std::sin(a.theta) * std::sin(a.phi), std::cos(a.theta));
  };
  for (int i = 0; i < 500; ++i) {
    const DipoleAxis in{any(rng), any(rng)};
    const DipoleAxis w = wrap_axis(in);
    CHECK(w.theta >= 0.0);
    CHECK(w.theta <= kPi);
    CHECK(w.phi >= 0.0);
    CHECK(w.phi < kTwoPi);
    CHECK((dir(w) - dir(in)).norm() < 1e-12);

    const DipoleAxis c = canonical_axis(in);
    CHECK(c.theta <= kPi / 2 + 1e-12);
    // Canonical form is the same field up to the sign of the axis.
    CHECK(std::abs(std::abs(dir(c).dot(dir(in))) - 1.0) < 1e-12);
  }
}

TEST_CASE("phi error is modulo the dipole sign symmetry") {
  CHECK(phi_error({kPi / 2, 0.0}, {kPi / 2, kPi}) == Approx(0.0).scale(1.0));
  CHECK(phi_error({kPi / 2, 0.1}, {kPi / 2, kTwoPi - 0.1}) == Approx(0.2));
  CHECK(phi_error({kPi / 2, kPi / 2 + 1e-6}, {kPi / 2, kPi / 2}) == Approx(1e-6).epsilon(1e-6));
  CHECK(phi_error({kPi / 2, 3 * kPi / 2}, {kPi / 2, kPi / 2}) < 1e-12);
}
