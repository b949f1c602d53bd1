// SPDX-License-Identifier: Apache-2.0
//
// cmfbeam: broadband covariance-matrix-fitting beamforming
// ------------------------------------------------------------------------

#include "cmfbeam/energy.hpp"

#include "cmfbeam/detail/forward.hpp"
#include "cmfbeam/parallel.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace cmfbeam {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

// --------------------------------------------------------- ParameterLayout

ParameterLayout::ParameterLayout(std::vector<SourceTemplate> sources, Index frequency_count)
    : sources_(std::move(sources)), frequency_count_(frequency_count) {
  if (frequency_count_ < 1) throw std::invalid_argument("ParameterLayout: frequency count must be >= 1");
  Index offset = 0;
  for (const auto& s : sources_) {
    if (!s.monopole && !s.dipole) throw std::invalid_argument("ParameterLayout: source template without poles");
    geometry_offset_.push_back(offset);
    offset += s.dipole ? 5 : 3;
  }
  for (const auto& s : sources_) {
    std::array<Index, 2> p{-1, -1};
    for (Pole pole : {Pole::monopole, Pole::dipole}) {
      if (s.has(pole)) {
        p[static_cast<std::size_t>(pole)] = offset;
        offset += frequency_count_;
      }
    }
    power_offset_.push_back(p);
  }
  size_ = offset;
}

ParameterLayout ParameterLayout::uniform(Index source_count, SourceTemplate tmpl, Index frequency_count) {
  return ParameterLayout(std::vector<SourceTemplate>(static_cast<std::size_t>(source_count), tmpl), frequency_count);
}

Index ParameterLayout::angle_offset(Index n) const {
  if (!sources_.at(static_cast<std::size_t>(n)).dipole) {
    throw std::out_of_range("ParameterLayout: source " + std::to_string(n) + " has no dipole angles");
  }
  return position_offset(n) + 3;
}

Index ParameterLayout::power_offset(Index n, Pole pole) const {
  const Index off = power_offset_.at(static_cast<std::size_t>(n))[static_cast<std::size_t>(pole)];
  if (off < 0) {
    throw std::out_of_range("ParameterLayout: source " + std::to_string(n) + " has no " + pole_name(pole) + " pole");
  }
  return off;
}

std::string ParameterLayout::name(Index i) const {
  if (i < 0 || i >= size_) throw std::out_of_range("ParameterLayout::name: index out of range");
  static const char* geo[] = {"x1", "x2", "x3", "theta", "phi"};
  for (Index n = 0; n < source_count(); ++n) {
    const Index g = position_offset(n);
    const Index len = sources_[static_cast<std::size_t>(n)].dipole ? 5 : 3;
    if (i >= g && i < g + len) return "s" + std::to_string(n) + "." + geo[i - g];
    for (Pole pole : {Pole::monopole, Pole::dipole}) {
      const Index p = power_offset_[static_cast<std::size_t>(n)][static_cast<std::size_t>(pole)];
      if (p >= 0 && i >= p && i < p + frequency_count_) {
        return "s" + std::to_string(n) + ".L_" + pole_name(pole) + "[" + std::to_string(i - p) + "]";
      }
    }
  }
  return {};
}

// --------------------------------------------------------- ParameterVector

ParameterVector::ParameterVector(ParameterLayout layout, VecX values)
    : ParameterVector(layout, values, VecX::Constant(values.size(), -kInf), VecX::Constant(values.size(), kInf)) {}

ParameterVector::ParameterVector(ParameterLayout layout, VecX values, VecX lower, VecX upper)
    : layout_(std::move(layout)), values_(std::move(values)) {
  if (values_.size() != layout_.size()) {
    throw std::invalid_argument("ParameterVector: length " + std::to_string(values_.size()) + " != layout size " +
                                std::to_string(layout_.size()));
  }
  set_bounds(std::move(lower), std::move(upper));
}

void ParameterVector::set_bounds(VecX lower, VecX upper) {
  if (lower.size() != layout_.size() || upper.size() != layout_.size()) {
    throw std::invalid_argument("ParameterVector: bounds length mismatch");
  }
  for (Index i = 0; i < lower.size(); ++i) {
    if (std::isnan(lower[i]) || std::isnan(upper[i]) || lower[i] > upper[i]) {
      throw std::invalid_argument("ParameterVector: infeasible bounds for " + layout_.name(i));
    }
  }
  lower_ = std::move(lower);
  upper_ = std::move(upper);
}

bool ParameterVector::within_bounds() const {
  return ((values_.array() >= lower_.array()) && (values_.array() <= upper_.array())).all();
}

std::vector<Index> ParameterVector::free_indices() const {
  std::vector<Index> idx;
  for (Index i = 0; i < values_.size(); ++i) {
    if (lower_[i] != upper_[i]) idx.push_back(i);
  }
  return idx;
}

VecX ParameterVector::pack(const ParameterLayout& layout, const std::vector<EstimatedSource>& sources) {
  if (static_cast<Index>(sources.size()) != layout.source_count()) {
    throw std::invalid_argument("ParameterVector::pack: source count mismatch");
  }
  VecX v(layout.size());
  for (Index n = 0; n < layout.source_count(); ++n) {
    const auto& s = sources[static_cast<std::size_t>(n)];
    const auto& t = layout.sources()[static_cast<std::size_t>(n)];
    v.segment<3>(layout.position_offset(n)) = s.position;
    if (t.dipole) {
      v[layout.angle_offset(n)] = s.axis.theta;
      v[layout.angle_offset(n) + 1] = s.axis.phi;
    }
    for (Pole pole : {Pole::monopole, Pole::dipole}) {
      if (!t.has(pole)) continue;
      const auto& lp = s.log_power[static_cast<std::size_t>(pole)];
      if (!lp || lp->size() != layout.frequency_count()) {
        throw std::invalid_argument("ParameterVector::pack: source " + std::to_string(n) + " lacks a " +
                                    pole_name(pole) + " spectrum of the right length");
      }
      v.segment(layout.power_offset(n, pole), layout.frequency_count()) = *lp;
    }
  }
  return v;
}

std::vector<EstimatedSource> ParameterVector::unpack() const {
  std::vector<EstimatedSource> out(static_cast<std::size_t>(layout_.source_count()));
  for (Index n = 0; n < layout_.source_count(); ++n) {
    auto& s = out[static_cast<std::size_t>(n)];
    const auto& t = layout_.sources()[static_cast<std::size_t>(n)];
    s.position = values_.segment<3>(layout_.position_offset(n));
    if (t.dipole) s.axis = {values_[layout_.angle_offset(n)], values_[layout_.angle_offset(n) + 1]};
    for (Pole pole : {Pole::monopole, Pole::dipole}) {
      if (t.has(pole)) {
        s.log_power[static_cast<std::size_t>(pole)] =
            values_.segment(layout_.power_offset(n, pole), layout_.frequency_count());
      }
    }
  }
  return out;
}

std::vector<SourceObject> ParameterVector::sources() const {
  std::vector<SourceObject> out;
  for (const auto& e : unpack()) {
    SourceObject s;
    s.position = e.position;
    s.axis = e.axis;
    for (std::size_t p = 0; p < 2; ++p) {
      if (e.log_power[p]) s.spectra[p] = e.log_power[p]->unaryExpr([](double l) { return std::pow(10.0, l); });
    }
    out.push_back(std::move(s));
  }
  return out;
}

ParameterVector ParameterVector::from_sources(const std::vector<SourceObject>& sources, Index frequency_count) {
  std::vector<SourceTemplate> templates;
  std::vector<EstimatedSource> est;
  for (const auto& s : sources) {
    templates.push_back({s.has(Pole::monopole), s.has(Pole::dipole)});
    EstimatedSource e;
    e.position = s.position;
    e.axis = s.axis;
    for (std::size_t p = 0; p < 2; ++p) {
      if (s.spectra[p]) e.log_power[p] = s.spectra[p]->unaryExpr([](double q) { return std::log10(q); });
    }
    est.push_back(std::move(e));
  }
  ParameterLayout layout(std::move(templates), frequency_count);
  VecX v = pack(layout, est);
  return ParameterVector(std::move(layout), std::move(v));
}

std::pair<VecX, VecX> make_bounds(const ParameterLayout& layout, const BoundsSpec& spec) {
  VecX lo(layout.size());
  VecX hi(layout.size());
  const double l_min = spec.level_min_db == kSilentDb ? -kInf : std::log10(power_from_db(spec.level_min_db));
  const double l_max = spec.level_max_db == kInf ? kInf : std::log10(power_from_db(spec.level_max_db));
  for (Index n = 0; n < layout.source_count(); ++n) {
    lo.segment<3>(layout.position_offset(n)) = spec.position_lower;
    hi.segment<3>(layout.position_offset(n)) = spec.position_upper;
    const auto& t = layout.sources()[static_cast<std::size_t>(n)];
    if (t.dipole) {
      const Index a = layout.angle_offset(n);
      lo[a] = spec.theta_min;
      hi[a] = spec.theta_max;
      lo[a + 1] = spec.phi_min;
      hi[a + 1] = spec.phi_max;
    }
    for (Pole pole : {Pole::monopole, Pole::dipole}) {
      if (!t.has(pole)) continue;
      lo.segment(layout.power_offset(n, pole), layout.frequency_count()).setConstant(l_min);
      hi.segment(layout.power_offset(n, pole), layout.frequency_count()).setConstant(l_max);
    }
  }
  return {lo, hi};
}

// ------------------------------------------------------------- EnergyModel

EnergyModel::EnergyModel(MicArray array, CsmSet measured, ParameterLayout layout)
    : array_(std::move(array)),
      measured_(std::move(measured)),
      layout_(std::move(layout)),
      pairs_(array_.size()) {
  if (measured_.mic_count() != array_.size()) throw std::invalid_argument("EnergyModel: array/CSM size mismatch");
  if (layout_.frequency_count() != measured_.frequency_count()) {
    throw std::invalid_argument("EnergyModel: layout frequency count != CSM frequency count");
  }
  for (Index j = 0; j < measured_.frequency_count(); ++j) {
    measured_entries_.push_back(pairs_.gather(measured_.at(j)));
    normalizer_.push_back(measured_entries_.back().squaredNorm() / static_cast<double>(pairs_.size()));
  }
}

CVecX EnergyModel::model_entries(const VecX& params, Index j) const {
  if (params.size() != layout_.size()) throw std::invalid_argument("EnergyModel: parameter length mismatch");
  const double k = measured_.grid().wavenumber(j);
  const Mat3X& mics = array_.positions();
  CVecX model = CVecX::Zero(pairs_.size());
  CVecX h;
  for (Index n = 0; n < layout_.source_count(); ++n) {
    const auto& t = layout_.sources()[static_cast<std::size_t>(n)];
    const Vec3 pos = params.segment<3>(layout_.position_offset(n));
    Vec3 axis = Vec3::Zero();
    if (t.dipole) {
      const Index a = layout_.angle_offset(n);
      axis = dipole_direction<double>(params[a], params[a + 1]);
    }
    for (Pole pole : {Pole::monopole, Pole::dipole}) {
      if (!t.has(pole)) continue;
      const double q = std::pow(10.0, params[layout_.power_offset(n, pole) + j]);
      detail::pole_response(mics, pos, axis, k, pole, h);
      Index p = 0;
      for (const auto& [i, l] : pairs_.pairs()) {
        model[p++] += q * (h[i] * std::conj(h[l]));
      }
    }
  }
  return model;
}

double EnergyModel::squared_error(const VecX& params, Index j) const {
  const CVecX model = model_entries(params, j);
  const CVecX& meas = measured_entries_[static_cast<std::size_t>(j)];
  double sum = 0.0;
  for (Index p = 0; p < model.size(); ++p) sum += std::norm(model[p] - meas[p]);
  return sum;
}

double EnergyModel::standard(const VecX& params, Index j) const {
  if (j < 0 || j >= measured_.frequency_count()) throw std::out_of_range("EnergyModel::standard: bad frequency index");
  return squared_error(params, j);
}

double EnergyModel::broadband(const VecX& params) const {
  const double count = static_cast<double>(pairs_.size());
  double sum = 0.0;
  for (Index j = 0; j < measured_.frequency_count(); ++j) {
    const double norm = normalizer_[static_cast<std::size_t>(j)];
    if (!(norm > 0.0)) {
      throw std::domain_error("broadband energy: measured off-diagonals vanish at " +
                              std::to_string(measured_.grid().frequency(j)) + " Hz");
    }
    sum += squared_error(params, j) / (count * norm);
  }
  return sum / static_cast<double>(measured_.frequency_count());
}

double standard_energy(const ParameterVector& params, const CsmSet& measured, const MicArray& array, Index f_index) {
  return EnergyModel(array, measured, params.layout()).standard(params.values(), f_index);
}

double broadband_energy(const ParameterVector& params, const CsmSet& measured, const MicArray& array) {
  return EnergyModel(array, measured, params.layout()).broadband(params.values());
}

// -------------------------------------------------------------- landscapes

std::vector<double> SliceAxis::linspace(double first, double last, Index count) {
  if (count < 1) throw std::invalid_argument("linspace: count must be >= 1");
  std::vector<double> v(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) {
    v[static_cast<std::size_t>(i)] =
        count == 1 ? first : first + (last - first) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return v;
}

std::vector<double> SliceAxis::logspace(double first, double last, Index count) {
  if (!(first > 0.0) || !(last > 0.0)) throw std::invalid_argument("logspace: bounds must be > 0");
  auto e = linspace(std::log10(first), std::log10(last), count);
  for (auto& x : e) x = std::pow(10.0, x);
  return e;
}

namespace {

struct AxisTarget {
  std::vector<Index> indices;  // entries written
  bool log_power = false;
};

AxisTarget resolve_axis(const ParameterLayout& layout, const std::string& name) {
  const auto dot = name.find('.');
  if (name.size() < 3 || name[0] != 's' || dot == std::string::npos) {
    throw std::invalid_argument("slice axis '" + name + "': expected s<n>.<field>");
  }
  Index n = 0;
  try {
    n = std::stol(name.substr(1, dot - 1));
  } catch (const std::exception&) {
    throw std::invalid_argument("slice axis '" + name + "': bad source index");
  }
  if (n < 0 || n >= layout.source_count()) throw std::invalid_argument("slice axis '" + name + "': no such source");
  const std::string field = name.substr(dot + 1);
  AxisTarget t;
  if (field == "x1" || field == "x2" || field == "x3") {
    t.indices.push_back(layout.position_offset(n) + (field[1] - '1'));
  } else if (field == "theta") {
    t.indices.push_back(layout.angle_offset(n));
  } else if (field == "phi") {
    t.indices.push_back(layout.angle_offset(n) + 1);
  } else if (field == "q_monopole" || field == "q_dipole") {
    const Pole pole = field == "q_monopole" ? Pole::monopole : Pole::dipole;
    const Index off = layout.power_offset(n, pole);
    for (Index j = 0; j < layout.frequency_count(); ++j) t.indices.push_back(off + j);
    t.log_power = true;
  } else {
    throw std::invalid_argument("slice axis '" + name + "': unknown field '" + field + "'");
  }
  return t;
}

void assign(VecX& v, const AxisTarget& t, double value) {
  const double x = t.log_power ? std::log10(value) : value;
  for (Index i : t.indices) v[i] = x;
}

template <typename Better> std::vector<std::pair<Index, Index>> strict_extrema(const MatX& g, Better better) {
  std::vector<std::pair<Index, Index>> out;
  for (Index a = 0; a < g.rows(); ++a) {
    for (Index b = 0; b < g.cols(); ++b) {
      bool extreme = true;
      for (Index da = -1; da <= 1 && extreme; ++da) {
        for (Index db = -1; db <= 1 && extreme; ++db) {
          if (da == 0 && db == 0) continue;
          const Index na = a + da;
          const Index nb = b + db;
          if (na < 0 || nb < 0 || na >= g.rows() || nb >= g.cols()) continue;
          if (!better(g(a, b), g(na, nb))) extreme = false;
        }
      }
      if (extreme) out.emplace_back(a, b);
    }
  }
  return out;
}

}  // namespace

EnergyLandscapeSlice slice_landscape(const EnergyModel& model, const SliceAxis& axis1, const SliceAxis& axis2,
                                     const VecX& fixed, EnergyMode mode, Index f_index) {
  if (axis1.parameter == axis2.parameter) throw std::invalid_argument("slice_landscape: axes must differ");
  if (axis1.values.empty() || axis2.values.empty()) throw std::invalid_argument("slice_landscape: empty axis grid");
  if (fixed.size() != model.layout().size()) throw std::invalid_argument("slice_landscape: fixed vector length");
  const AxisTarget t1 = resolve_axis(model.layout(), axis1.parameter);
  const AxisTarget t2 = resolve_axis(model.layout(), axis2.parameter);

  EnergyLandscapeSlice out;
  out.axis1 = axis1;
  out.axis2 = axis2;
  out.mode = mode;
  out.frequency = mode == EnergyMode::single_frequency ? model.measured().grid().frequency(f_index) : 0.0;
  out.fixed = fixed;
  out.energy.resize(static_cast<Index>(axis1.values.size()), static_cast<Index>(axis2.values.size()));
  parallel_for(axis1.values.size(), [&](std::size_t a) {
    VecX v = fixed;
    assign(v, t1, axis1.values[a]);
    for (std::size_t b = 0; b < axis2.values.size(); ++b) {
      assign(v, t2, axis2.values[b]);
      out.energy(static_cast<Index>(a), static_cast<Index>(b)) =
          mode == EnergyMode::broadband ? model.broadband(v) : model.standard(v, f_index);
    }
  });
  return out;
}

std::vector<std::pair<Index, Index>> local_minima(const MatX& grid) {
  return strict_extrema(grid, [](double c, double n) { return c < n; });
}

std::vector<std::pair<Index, Index>> local_maxima(const MatX& grid) {
  return strict_extrema(grid, [](double c, double n) { return c > n; });
}

// --------------------------------------------------------------------- PSF

VecX psf(const MicArray& array, const Vec3& source, const FocusGrid& grid, double k, bool remove_diagonal) {
  CVecX h;
  detail::pole_response(array.positions(), source, Vec3::Zero(), k, Pole::monopole, h);
  const CMatX c = h * h.adjoint();
  auto response = [&](const Vec3& t) {
    const CVecX w = steering_vector_iv<double>(t, array.positions(), k);
    if (remove_diagonal) return beamform_point(c, w);
    return std::norm(w.dot(h));
  };
  const double peak = response(source);
  if (!(peak > 0.0)) throw std::domain_error("psf: zero response at the source position");
  VecX map(grid.size());
  for (Index p = 0; p < grid.size(); ++p) map[p] = response(grid.point(p)) / peak;
  return map;
}

std::vector<VecX> psf(const MicArray& array, const Vec3& source, const FocusGrid& grid,
                      const std::vector<double>& wavenumbers, bool averaged, bool remove_diagonal) {
  std::vector<VecX> maps(wavenumbers.size());
  parallel_for(wavenumbers.size(),
               [&](std::size_t i) { maps[i] = psf(array, source, grid, wavenumbers[i], remove_diagonal); });
  if (!averaged) return maps;
  VecX mean = VecX::Zero(grid.size());
  for (const auto& m : maps) mean += m;
  mean /= static_cast<double>(maps.size());
  return {mean};
}

}  // namespace cmfbeam
