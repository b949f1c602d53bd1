// SPDX-License-Identifier: Apache-2.0
//
// cmfbeam: broadband covariance-matrix-fitting beamforming
// ------------------------------------------------------------------------

#include "cmfbeam/postprocess.hpp"

#include "doctest.h"

#include <algorithm>
#include <numeric>
#include <random>

using namespace cmfbeam;
using doctest::Approx;

namespace {

const FrequencyGrid kGrid({1000.0, 2000.0, 3000.0});

SourceObject mono(const Vec3& p, double q) { return SourceObject::monopole(p, VecX::Constant(3, q)); }

}  // namespace

TEST_CASE("ROI geometry") {
  const Roi r{Vec3(0, 0, 0), Vec3(0.2, 0.1, 0.1), "a"};
  CHECK(r.contains(Vec3(0.2, 0, 0)));
  CHECK_FALSE(r.contains(Vec3(0, 0.11, 0)));
  CHECK(r.normalized_distance(Vec3(0.1, 0.05, 0)) == Approx(std::sqrt(0.5)));
  CHECK_THROWS_AS((Roi{Vec3::Zero(), Vec3(0.1, 0.0, 0.1), "a"}.validate()), std::invalid_argument);
  CHECK_THROWS_AS(Roi::sphere(Vec3::Zero(), 0.1, "noise").validate(), std::invalid_argument);
  CHECK_THROWS_AS(Roi::sphere(Vec3::Zero(), 0.1, "").validate(), std::invalid_argument);
}

TEST_CASE("ROI integration") {
  const std::vector<Roi> rois{Roi::sphere(Vec3(0.5, 0.5, 0), 0.1, "S1"), Roi::sphere(Vec3(0.5, 0.6, 0), 0.05, "S2")};
  const SourcePartSet parts{{Vec3(0.5, 0.5, 0), 1000.0, 2.0},  {Vec3(0.5, 0.58, 0), 1000.0, 1.0},
                            {Vec3(0.5, 0.52, 0), 2000.0, 0.5}, {Vec3(-0.5, 0.5, 0), 2000.0, 0.25},
                            {Vec3(0.5, 0.6, 0), 3000.0, 4.0}};
  const SpectraReport r = roi_integrate(parts, rois, kGrid);
  REQUIRE(r.spectra.size() == 3);
  CHECK(r.spectra.back().label == kNoiseLabel);
  // (0.5, 0.58) is inside both; S2 is nearer in normalized distance (0.4 vs 0.8).
  CHECK(r.at("S1").power == (VecX(3) << 2.0, 0.5, 0.0).finished());
  CHECK(r.at("S2").power == (VecX(3) << 1.0, 0.0, 4.0).finished());
  CHECK(r.at("noise").power == (VecX(3) << 0.0, 0.25, 0.0).finished());
  CHECK(r.total() == (VecX(3) << 3.0, 0.75, 4.0).finished());
  CHECK_THROWS_AS(r.at("S3"), std::out_of_range);
  CHECK_FALSE(r.has("S3"));

  CHECK_THROWS_AS(roi_integrate(parts, {rois[0], rois[0]}, kGrid), std::invalid_argument);
  CHECK_THROWS_AS(roi_integrate({{Vec3::Zero(), 1500.0, 1.0}}, rois, kGrid), std::invalid_argument);
  CHECK_THROWS_AS(roi_integrate({{Vec3::Zero(), 1000.0, -1.0}}, rois, kGrid), std::invalid_argument);
}

TEST_CASE("ROI integration conserves power and ignores part order") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> pos(-1.0, 1.0);
  std::uniform_real_distribution<double> pow(0.0, 10.0);
  std::uniform_int_distribution<int> fi(0, 2);
  SourcePartSet parts;
  for (int i = 0; i < 500; ++i) parts.push_back({Vec3(pos(rng), pos(rng), 0.0), kGrid.frequency(fi(rng)), pow(rng)});
  const std::vector<Roi> rois{Roi::sphere(Vec3(0, 0, 0), 0.4, "a"), Roi::sphere(Vec3(0.3, 0, 0), 0.4, "b")};
  const SpectraReport r = roi_integrate(parts, rois, kGrid);
  VecX direct = VecX::Zero(3);
  for (const auto& p : parts) direct[kGrid.index_of(p.frequency)] += p.power;
  for (Index j = 0; j < 3; ++j) CHECK(r.total()[j] == Approx(direct[j]).epsilon(1e-13));

  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(parts.begin(), parts.end(), rng);
    const SpectraReport s = roi_integrate(parts, rois, kGrid);
    for (std::size_t b = 0; b < 3; ++b) CHECK(s.spectra[b].power == r.spectra[b].power);
  }
}

TEST_CASE("single-linkage grouping") {
  const std::vector<SourceObject> objs{mono(Vec3(0.5, 0.5, 0), 1.0), mono(Vec3(0.5, 0.515, 0), 3.0),
                                       mono(Vec3(0.5, 0.53, 0), 1.0), mono(Vec3(-0.5, 0.5, 0), 0.5)};
  SUBCASE("chains link through intermediate objects") {
    const SpectraReport r = group_source_objects(objs, kGrid, {});
    REQUIRE(r.spectra.size() == 3);
    CHECK(r.spectra[0].label == "group1");
    CHECK(r.spectra[0].power == VecX::Constant(3, 5.0));
    CHECK((r.spectra[0].position - Vec3(0.5, 0.515, 0)).norm() < 1e-12);
    CHECK(r.spectra[1].label == "group2");
    CHECK(r.spectra[1].position == Vec3(-0.5, 0.5, 0));
    CHECK(r.spectra[2].power.isZero(0.0));
  }
  SUBCASE("distance limit is inclusive") {
    GroupingOptions o;
    o.min_distance = 0.0151;
    CHECK(group_source_objects(objs, kGrid, o).spectra.size() == 3);
    o.min_distance = 0.0149;
    CHECK(group_source_objects(objs, kGrid, o).spectra.size() == 5);
  }
  SUBCASE("weak groups go to noise") {
    GroupingOptions o;
    o.min_relative_power_db = 5.0;
    const SpectraReport r = group_source_objects(objs, kGrid, o);
    REQUIRE(r.spectra.size() == 2);
    CHECK(r.at("noise").power == VecX::Constant(3, 0.5));
  }
  SUBCASE("silent groups sit at their plain centroid") {
    const SpectraReport r = group_source_objects({mono(Vec3(0, 0, 0), 0.0), mono(Vec3(0.01, 0, 0), 0.0)}, kGrid, {});
    CHECK((r.spectra[0].position - Vec3(0.005, 0, 0)).norm() < 1e-15);
  }
  CHECK_THROWS_AS(group_source_objects(objs, kGrid, {0.0, std::nullopt}), std::invalid_argument);
  CHECK(group_source_objects({}, kGrid, {}).spectra.size() == 1);
}

TEST_CASE("matching to truth agrees with brute force") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t ne = 1 + trial % 4;
    const std::size_t nt = 1 + (trial / 4) % 4;
    std::vector<Vec3> est(ne);
    std::vector<Vec3> tru(nt);
    for (auto& e : est) e = Vec3(u(rng), u(rng), 0.0);
    for (auto& t : tru) t = Vec3(u(rng), u(rng), 0.0);
    const Assignment a = match_to_truth(est, tru);

    // Every maximal one-to-one pairing.
    double best = std::numeric_limits<double>::infinity();
    const std::size_t big = std::max(ne, nt);
    std::vector<std::size_t> perm(big);
    std::iota(perm.begin(), perm.end(), 0);
    do {
      double d = 0.0;
      for (std::size_t e = 0; e < ne; ++e)
        if (perm[e] < nt) d += (est[e] - tru[perm[e]]).norm();
      best = std::min(best, d);
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(a.total_distance == Approx(best).epsilon(1e-12));

    std::size_t matched = 0;
    for (std::size_t e = 0; e < ne; ++e) {
      if (a.truth_of_estimate[e] < 0) continue;
      ++matched;
      CHECK(a.estimate_of_truth[static_cast<std::size_t>(a.truth_of_estimate[e])] == static_cast<int>(e));
    }
    CHECK(matched == std::min(ne, nt));
  }
}

TEST_CASE("matching ties leave the weakest estimate unmatched") {
  const std::vector<Vec3> est{Vec3(0.5, 0.5, 0), Vec3(0.5, 0.5, 0)};
  const std::vector<Vec3> tru{Vec3(0.5, 0.5, 0)};
  CHECK(match_to_truth(est, tru, {1.0, 5.0}).estimate_of_truth[0] == 1);
  CHECK(match_to_truth(est, tru, {5.0, 1.0}).estimate_of_truth[0] == 0);
  CHECK_THROWS_AS(match_to_truth(est, tru, {1.0}), std::invalid_argument);
  CHECK(match_to_truth({}, tru).estimate_of_truth[0] == -1);
}
