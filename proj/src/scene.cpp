// SPDX-License-Identifier: Apache-2.0
//
// cmfbeam: broadband covariance-matrix-fitting beamforming
// ------------------------------------------------------------------------

#include "cmfbeam/scene.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cmfbeam {

double db_from_power(double q) {
  if (std::isnan(q) || q < 0.0) {
    throw std::invalid_argument("db_from_power: power must be >= 0, got " + std::to_string(q));
  }
  if (q == 0.0) return kSilentDb;
  return 10.0 * std::log10(q / kReferencePower);
}

double power_from_db(double level_db) {
  if (std::isnan(level_db)) throw std::invalid_argument("power_from_db: level is NaN");
  if (level_db == kSilentDb) return 0.0;
  return kReferencePower * std::pow(10.0, level_db / 10.0);
}

VecX db_from_power(const VecX& q) {
  VecX out(q.size());
  for (Index i = 0; i < q.size(); ++i) out[i] = db_from_power(q[i]);
  return out;
}

VecX power_from_db(const VecX& level_db) {
  VecX out(level_db.size());
  for (Index i = 0; i < level_db.size(); ++i) out[i] = power_from_db(level_db[i]);
  return out;
}

// ---------------------------------------------------------------- MicArray

MicArray::MicArray(Mat3X positions) : positions_(std::move(positions)) {
  if (positions_.cols() < 2) throw std::invalid_argument("MicArray: need at least 2 microphones");
  if (!positions_.allFinite()) throw std::invalid_argument("MicArray: non-finite position");
  for (Index a = 0; a < positions_.cols(); ++a) {
    for (Index b = a + 1; b < positions_.cols(); ++b) {
      if ((positions_.col(a) - positions_.col(b)).norm() == 0.0) {
        throw std::invalid_argument("MicArray: microphones " + std::to_string(a) + " and " +
                                    std::to_string(b) + " coincide");
      }
    }
  }
}

MicArray MicArray::line_x1(Index count, double x_min, double x_max) {
  if (count < 2) throw std::invalid_argument("MicArray::line_x1: need at least 2 microphones");
  Mat3X pos = Mat3X::Zero(3, count);
  for (Index m = 0; m < count; ++m) {
    pos(0, m) = x_min + (x_max - x_min) * static_cast<double>(m) / static_cast<double>(count - 1);
  }
  return MicArray(std::move(pos));
}

// ----------------------------------------------------------- FrequencyGrid

FrequencyGrid::FrequencyGrid(std::vector<double> frequencies, double speed_of_sound)
    : frequencies_(std::move(frequencies)), speed_of_sound_(speed_of_sound) {
  if (frequencies_.empty()) throw std::invalid_argument("FrequencyGrid: empty");
  if (!(speed_of_sound_ > 0.0) || !std::isfinite(speed_of_sound_)) {
    throw std::invalid_argument("FrequencyGrid: speed of sound must be > 0");
  }
  for (std::size_t j = 0; j < frequencies_.size(); ++j) {
    if (!(frequencies_[j] > 0.0) || !std::isfinite(frequencies_[j])) {
      throw std::invalid_argument("FrequencyGrid: frequency " + std::to_string(j) + " must be > 0");
    }
    if (j > 0 && !(frequencies_[j] > frequencies_[j - 1])) {
      throw std::invalid_argument("FrequencyGrid: frequencies must be strictly increasing");
    }
  }
}

FrequencyGrid FrequencyGrid::uniform(double first, double last, double step, double speed_of_sound) {
  if (!(step > 0.0)) throw std::invalid_argument("FrequencyGrid::uniform: step must be > 0");
  const auto count = static_cast<std::size_t>(std::floor((last - first) / step + 0.5)) + 1;
  std::vector<double> f(count);
  for (std::size_t j = 0; j < count; ++j) f[j] = first + step * static_cast<double>(j);
  return FrequencyGrid(std::move(f), speed_of_sound);
}

Index FrequencyGrid::index_of(double f) const {
  for (std::size_t j = 0; j < frequencies_.size(); ++j) {
    if (std::abs(frequencies_[j] - f) <= 1e-9 * std::abs(f)) return static_cast<Index>(j);
  }
  throw std::invalid_argument("FrequencyGrid: " + std::to_string(f) + " Hz is not on the grid");
}

FrequencyGrid FrequencyGrid::subset(Index j) const {
  return FrequencyGrid({frequency(j)}, speed_of_sound_);
}

FrequencyGrid octave_band_grid(double speed_of_sound) {
  return FrequencyGrid::uniform(1024.0, 32768.0, 1024.0, speed_of_sound);
}

// ------------------------------------------------------------------ angles

DipoleAxis wrap_axis(DipoleAxis axis) {
  const double st = std::sin(axis.theta);
  const double z = std::cos(axis.theta);
  const double x = st * std::cos(axis.phi);
  const double y = st * std::sin(axis.phi);
  DipoleAxis out;
  out.theta = std::atan2(std::hypot(x, y), z);
  double phi = std::fmod(axis.phi, kTwoPi);
  if (st < 0.0) phi += kPi;  // theta was outside [0, pi]
  phi = std::fmod(phi, kTwoPi);
  if (phi < 0.0) phi += kTwoPi;
  if (phi >= kTwoPi) phi = 0.0;
  out.phi = phi;
  return out;
}

DipoleAxis canonical_axis(DipoleAxis axis) {
  DipoleAxis a = wrap_axis(axis);
  constexpr double equator_tol = 1e-12;
  if (std::abs(a.theta - kPi / 2) <= equator_tol) {
    a.phi = std::fmod(a.phi, kPi);
    return a;
  }
  if (a.theta > kPi / 2) {
    a = wrap_axis({kPi - a.theta, a.phi + kPi});
  }
  return a;
}

double phi_error(DipoleAxis estimate, DipoleAxis truth) {
  const DipoleAxis e = canonical_axis(estimate);
  const DipoleAxis t = canonical_axis(truth);
  const bool equator = std::abs(t.theta - kPi / 2) <= 1e-9 || std::abs(e.theta - kPi / 2) <= 1e-9;
  const double period = equator ? kPi : kTwoPi;
  double d = std::fmod(std::abs(e.phi - t.phi), period);
  return std::min(d, period - d);
}

// ----------------------------------------------------------- SourceObject

const VecX& SourceObject::spectrum(Pole p) const {
  const auto& s = spectra[static_cast<std::size_t>(p)];
  if (!s) throw std::out_of_range(std::string("SourceObject: no ") + pole_name(p) + " pole");
  return *s;
}

VecX& SourceObject::spectrum(Pole p) {
  auto& s = spectra[static_cast<std::size_t>(p)];
  if (!s) throw std::out_of_range(std::string("SourceObject: no ") + pole_name(p) + " pole");
  return *s;
}

VecX SourceObject::total_spectrum(Index frequency_count) const {
  VecX total = VecX::Zero(frequency_count);
  for (const auto& s : spectra) {
    if (s) total += *s;
  }
  return total;
}

SourceObject SourceObject::monopole(const Vec3& position, VecX q) {
  SourceObject s;
  s.position = position;
  s.spectra[0] = std::move(q);
  return s;
}

SourceObject SourceObject::dipole(const Vec3& position, DipoleAxis axis, VecX q) {
  SourceObject s;
  s.position = position;
  s.axis = axis;
  s.spectra[1] = std::move(q);
  return s;
}

// ------------------------------------------------------------------- Scene

Scene::Scene(MicArray array, FrequencyGrid grid, std::vector<SourceObject> sources)
    : array_(std::move(array)), grid_(std::move(grid)), sources_(std::move(sources)) {
  for (std::size_t n = 0; n < sources_.size(); ++n) {
    const auto& s = sources_[n];
    const std::string tag = "Scene: source " + std::to_string(n);
    if (!s.position.allFinite()) throw std::invalid_argument(tag + " has a non-finite position");
    if (!s.has(Pole::monopole) && !s.has(Pole::dipole)) throw std::invalid_argument(tag + " has no pole");
    for (const auto& spec : s.spectra) {
      if (!spec) continue;
      if (spec->size() != grid_.size()) throw std::invalid_argument(tag + " spectrum length != grid size");
      for (Index j = 0; j < spec->size(); ++j) {
        if (!((*spec)[j] >= 0.0) || !std::isfinite((*spec)[j])) {
          throw std::invalid_argument(tag + " spectrum entries must be finite and >= 0");
        }
      }
    }
    for (Index m = 0; m < array_.size(); ++m) {
      if ((array_.position(m) - s.position).norm() == 0.0) {
        throw std::invalid_argument(tag + " coincides with microphone " + std::to_string(m));
      }
    }
  }
}

Scene Scene::with_sources(std::vector<SourceObject> sources) const {
  return Scene(array_, grid_, std::move(sources));
}

// ----------------------------------------------------------------- builtin

namespace {

VecX flat_db(Index n, double level_db) { return VecX::Constant(n, power_from_db(level_db)); }

Scene case1(const BuiltinOptions& opt) {
  FrequencyGrid grid = opt.wide_grid ? FrequencyGrid::uniform(100.0, 20000.0, 100.0) : octave_band_grid();
  const Index f = grid.size();
  return Scene(MicArray::line_x1(5, -0.5, 0.5), grid,
               {SourceObject::monopole(Vec3(0.5, 0.5, 0.0), VecX::Ones(f))});
}

Scene case2(const BuiltinOptions& opt) {
  FrequencyGrid grid = opt.wide_grid ? FrequencyGrid::uniform(100.0, 20000.0, 100.0) : octave_band_grid();
  const Index f = grid.size();
  return Scene(MicArray::line_x1(5, -0.5, 0.5), grid,
               {SourceObject::monopole(Vec3(0.5, 0.5, 0.0), VecX::Ones(f)),
                SourceObject::monopole(Vec3(0.5, 0.6, 0.0), VecX::Constant(f, 0.5))});
}

Scene case3() {
  FrequencyGrid grid = octave_band_grid();
  return Scene(MicArray::line_x1(11, -0.5, 0.5), grid,
               {SourceObject::monopole(Vec3(0.5, 0.5, 0.0), flat_db(grid.size(), 100.0))});
}

Scene case4() {
  FrequencyGrid grid = octave_band_grid();
  const Index f = grid.size();
  // Q_I(f) = a0 f + b0 dB/Hz, 90 dB at 2^10 Hz rising to 110 dB at 2^15 Hz.
  const double a0 = 5.0 / 7936.0;
  const double b0 = 2770.0 / 31.0;
  VecX q1(f);
  for (Index j = 0; j < f; ++j) q1[j] = power_from_db(a0 * grid.frequency(j) + b0);
  return Scene(MicArray::line_x1(11, -0.5, 0.5), grid,
               {SourceObject::monopole(Vec3(0.5, 0.5, 0.0), q1),
                SourceObject::monopole(Vec3(0.5, 0.6, 0.0), flat_db(f, 100.0))});
}

Scene case6() {
  FrequencyGrid grid = octave_band_grid();
  const Index f = grid.size();
  SourceObject s1 = SourceObject::monopole(Vec3(0.5, 0.5, 0.0), flat_db(f, 100.0));
  s1.axis = {kPi / 2, 0.0};
  s1.spectra[1] = flat_db(f, 60.0);
  SourceObject s2 = SourceObject::dipole(Vec3(0.0, 0.5, 0.0), {kPi / 2, kPi / 2}, flat_db(f, 40.0));
  s2.spectra[0] = VecX::Zero(f);  // silent monopole
  return Scene(MicArray::line_x1(11, -0.5, 0.5), grid, {s1, s2});
}

}  // namespace

Scene builtin_case(std::string_view id, const BuiltinOptions& options) {
  if (id == "case1") return case1(options);
  if (id == "case2") return case2(options);
  if (id == "case3") return case3();
  if (id == "case4") return case4();
  if (id == "case6") return case6();
  std::string known;
  for (const auto& k : builtin_case_ids()) known += " " + k;
  throw std::invalid_argument("unknown builtin case '" + std::string(id) + "'; known:" + known);
}

std::vector<std::string> builtin_case_ids() { return {"case1", "case2", "case3", "case4", "case6"}; }

}  // namespace cmfbeam
