// SPDX-License-Identifier: Apache-2.0
//
// cmfbeam: broadband covariance-matrix-fitting beamforming
// ------------------------------------------------------------------------

#include "cmfbeam/io.hpp"

#include "doctest.h"

#include <sstream>

using namespace cmfbeam;
using namespace cmfbeam::io;
using doctest::Approx;

namespace {

/// Path of the ConfigError thrown by fn, or "<none>".
template <typename Fn> std::string error_path(Fn fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<none>";
}

}  // namespace

TEST_CASE("number formatting") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(100.0) == "100");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(std::nan("")) == "nan");
  CHECK(number(kSilentDb) == "-inf");
  CHECK(number(2.5) == 2.5);
  for (double v : {1.0 / 3.0, 4e-10, 6.02214076e23, -1e-300}) CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("config errors name the offending field") {
  SUBCASE("unknown key") {
    const Json j = Json::parse(R"({"line_x1": {"count": 3, "min_m": -1, "max_m": 1, "spacing": 2}})");
    CHECK(error_path([&] { read_array(j, "/array"); }) == "/array/line_x1/spacing");
  }
  SUBCASE("missing key") {
    const Json j = Json::parse(R"({"line_x1": {"count": 3, "min_m": -1}})");
    CHECK(error_path([&] { read_array(j, "/array"); }) == "/array/line_x1/max_m");
  }
  SUBCASE("wrong type deep in a source list") {
    const Json j = Json::parse(R"([{"position_m": [0, 1, 0], "monopole": {"level_db": 90}},
                                   {"position_m": [0, "x", 0], "monopole": {"level_db": 90}}])");
    CHECK(error_path([&] { read_sources(j, "/scene/sources", 2); }) == "/scene/sources/1/position_m/1");
  }
  SUBCASE("spectrum length") {
    const Json j = Json::parse(R"([{"position_m": [0, 1, 0], "monopole": {"q_pa2_per_hz": [1, 2, 3]}}])");
    CHECK(error_path([&] { read_sources(j, "/s", 2); }) == "/s/0/monopole/q_pa2_per_hz");
  }
  SUBCASE("both q and level") {
    const Json j = Json::parse(R"([{"position_m": [0, 1, 0], "monopole": {"q_pa2_per_hz": 1, "level_db": 3}}])");
    CHECK(error_path([&] { read_sources(j, "/s", 2); }) == "/s/0/monopole");
  }
  SUBCASE("invalid optimizer values") {
    CHECK(error_path([&] { read_optimizer(Json::parse(R"({"visiting": 4})"), "/optimizer"); }) == "/optimizer");
    CHECK(error_path([&] { read_optimizer(Json::parse(R"({"max_evaluations": 0})"), "/optimizer"); }) ==
          "/optimizer/max_evaluations");
    CHECK(error_path([&] { read_optimizer(Json::parse(R"({"seed": 1})"), "/optimizer"); }) == "/optimizer/seed");
  }
  SUBCASE("unknown builtin") {
    CHECK(error_path([&] { read_scene(Json("case9"), "/scene"); }) == "/scene");
  }
  SUBCASE("duplicate ROI labels") {
    const Json j = Json::parse(R"([{"center_m": [0, 0, 0], "radius_m": 0.1, "label": "a"},
                                   {"center_m": [1, 0, 0], "radius_m": 0.1, "label": "a"}])");
    CHECK(error_path([&] { read_rois(j, "/rois"); }) == "/rois/1/label");
  }
  CHECK(std::string(ConfigError("/a/b", "bad").what()) == "/a/b: bad");
}

TEST_CASE("optimizer overrides keep unspecified defaults") {
  const OptimizerConfig c =
      read_optimizer(Json::parse(R"({"max_evaluations": 5000, "gradient_tol": 1e-12, "position_unit_m": 0.002})"), "");
  CHECK(c.max_evaluations == 5000);
  CHECK(c.local.gradient_tol == 1e-12);
  CHECK(c.position_unit == 0.002);
  CHECK(c.annealing.initial_temperature == 5230.0);
  CHECK(c.annealing.visiting == 2.62);
  CHECK(c.local.energy_tol == LbfgsOptions{}.energy_tol);
}

TEST_CASE("scene JSON round trip") {
  for (const auto& id : builtin_case_ids()) {
    const Scene s = builtin_case(id);
    const Scene r = read_scene(Json::parse(to_json(s).dump()), "/scene");
    CHECK(r.array().positions() == s.array().positions());
    CHECK(r.grid() == s.grid());
    REQUIRE(r.sources().size() == s.sources().size());
    for (std::size_t n = 0; n < s.sources().size(); ++n) {
      CHECK(r.sources()[n].position == s.sources()[n].position);
      CHECK(r.sources()[n].total_spectrum(s.grid().size()) == s.sources()[n].total_spectrum(s.grid().size()));
      CHECK(r.sources()[n].has(Pole::dipole) == s.sources()[n].has(Pole::dipole));
    }
  }
  const Scene wide = read_scene(Json::parse(R"({"builtin": "case1", "wide_grid": true})"), "/scene");
  CHECK(wide.grid().size() == 200);
}

TEST_CASE("inline scenes accept levels, silent poles and uniform grids") {
  const Json j = Json::parse(R"({
    "array": {"line_x1": {"count": 5, "min_m": -0.5, "max_m": 0.5}},
    "frequencies_hz": {"first_hz": 1000, "last_hz": 3000, "step_hz": 1000},
    "sources": [{"position_m": [0, 0.5, 0], "monopole": {"level_db": "-inf"},
                 "dipole": {"level_db": [60, 70, 80], "theta_rad": 1.5707963267948966, "phi_rad": 0}}]})");
  const Scene s = read_scene(j, "/scene");
  CHECK(s.grid().frequencies() == std::vector<double>{1000.0, 2000.0, 3000.0});
  CHECK(s.sources()[0].spectrum(Pole::monopole).isZero(0.0));
  CHECK(db_from_power(s.sources()[0].spectrum(Pole::dipole)[2]) == Approx(80.0).epsilon(1e-12));
}

TEST_CASE("source-part CSV round trip is exact") {
  const SourcePartSet parts{{Vec3(0.1, 0.5, 0.0), 1024.0, 4.0 / 3.0}, {Vec3(-0.25, 0.7, 1e-17), 32768.0, 4e-10}};
  std::stringstream buf;
  write_parts_csv(parts, buf);
  CHECK(buf.str().rfind("x1_m,x2_m,x3_m,frequency_hz,q_pa2_per_hz,level_db\n", 0) == 0);
  const SourcePartSet back = read_parts_csv(buf);
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].position == parts[i].position);
    CHECK(back[i].frequency == parts[i].frequency);
    CHECK(back[i].power == parts[i].power);
  }
  std::stringstream bad("a,b\n");
  CHECK_THROWS(read_parts_csv(bad));
  std::stringstream short_row("x1_m,x2_m,x3_m,frequency_hz,q_pa2_per_hz,level_db\n1,2\n");
  CHECK_THROWS(read_parts_csv(short_row));
}

TEST_CASE("slice CSV layout") {
  EnergyLandscapeSlice s;
  s.axis1 = {"s0.x1", {0.0, 0.5}};
  s.axis2 = {"s0.q_monopole", {1.0, 2.0, 3.0}};
  s.energy = MatX::Zero(2, 3);
  s.energy(1, 2) = 0.25;
  std::stringstream out;
  write_slice_csv(s, out);
  std::string line;
  std::getline(out, line);
  CHECK(line == "# axis1 s0.x1");
  std::getline(out, line);
  CHECK(line == "# axis2 s0.q_monopole");
  std::getline(out, line);
  CHECK(line == "# mode broadband");
  std::getline(out, line);
  CHECK(line == "axis1\\axis2,1,2,3");
  std::getline(out, line);
  std::getline(out, line);
  CHECK(line.rfind("0.5,", 0) == 0);
  CHECK(line.substr(line.rfind(',') + 1) == "0.25");
}
