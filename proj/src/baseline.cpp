// SPDX-License-Identifier: Apache-2.0
//
// cmfbeam: broadband covariance-matrix-fitting beamforming
// ------------------------------------------------------------------------

#include "cmfbeam/baseline.hpp"

#include "cmfbeam/detail/forward.hpp"
#include "cmfbeam/parallel.hpp"
#include "cmfbeam/propagation.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace cmfbeam {

// --------------------------------------------------------------- FocusGrid

FocusGrid::FocusGrid(Vec3 min, Vec3 max, Vec3 step) : min_(min), max_(max), step_(step) {
  for (int a = 0; a < 3; ++a) {
    if (!(step_[a] > 0.0)) throw std::invalid_argument("FocusGrid: step must be > 0 on axis " + std::to_string(a + 1));
    if (!(max_[a] >= min_[a])) throw std::invalid_argument("FocusGrid: max < min on axis " + std::to_string(a + 1));
    counts_[a] = static_cast<Index>(std::floor((max_[a] - min_[a]) / step_[a] + 0.5)) + 1;
  }
}

FocusGrid FocusGrid::line_array_default() {
  return FocusGrid(Vec3(-1.0, 0.3, 0.0), Vec3(1.0, 0.7, 0.0), Vec3(0.01, 0.01, 0.01));
}

Vec3 FocusGrid::point(Index flat) const {
  const Index i1 = flat % counts_[0];
  const Index i2 = (flat / counts_[0]) % counts_[1];
  const Index i3 = flat / (counts_[0] * counts_[1]);
  return {min_[0] + step_[0] * static_cast<double>(i1), min_[1] + step_[1] * static_cast<double>(i2),
          min_[2] + step_[2] * static_cast<double>(i3)};
}

Index FocusGrid::nearest(const Vec3& p) const {
  Index idx[3];
  for (int a = 0; a < 3; ++a) {
    const double r = std::round((p[a] - min_[a]) / step_[a]);
    idx[a] = std::clamp(static_cast<Index>(r), Index{0}, counts_[a] - 1);
  }
  return flat_index(idx[0], idx[1], idx[2]);
}

// ------------------------------------------------------- conventional map

namespace {

double diagonal_removal_correction(const CVecX& w) {
  const double s2 = w.squaredNorm();
  const double s4 = w.cwiseAbs2().squaredNorm();
  return 1.0 - s4 / (s2 * s2);
}

/// All steering vectors of the grid as columns.
CMatX steering_matrix(const MicArray& array, const FocusGrid& grid, double k) {
  CMatX w(array.size(), grid.size());
  for (Index p = 0; p < grid.size(); ++p) w.col(p) = steering_vector_iv<double>(grid.point(p), array.positions(), k);
  return w;
}

/// Re(w_p^H D' w_p) for every column, D' = D without its diagonal.
VecX quadratic_forms(const CMatX& d, const CMatX& w) {
  CMatX off = d;
  off.diagonal().setZero();
  const CMatX dw = off * w;
  return w.conjugate().cwiseProduct(dw).colwise().sum().real().transpose();
}

double offdiag_norm(const CMatX& d) {
  CMatX off = d;
  off.diagonal().setZero();
  return off.norm();
}

}  // namespace

double beamform_point(const CMatX& csm, const CVecX& w) {
  double p = std::real(w.dot(csm * w));
  for (Index m = 0; m < w.size(); ++m) p -= std::real(csm(m, m)) * std::norm(w[m]);
  return std::max(0.0, p / diagonal_removal_correction(w));
}

VecX conventional_map(const CsmSet& csm, const MicArray& array, const FocusGrid& grid, Index f_index) {
  if (array.size() != csm.mic_count()) throw std::invalid_argument("conventional_map: array/CSM size mismatch");
  const CMatX w = steering_matrix(array, grid, csm.grid().wavenumber(f_index));
  VecX map = quadratic_forms(csm.at(f_index), w);
  for (Index p = 0; p < map.size(); ++p) {
    map[p] = std::max(0.0, map[p] / diagonal_removal_correction(w.col(p)));
  }
  return map;
}

// ---------------------------------------------------------------- CLEAN-SC

void CleanScConfig::validate() const {
  if (!(loop_gain > 0.0) || loop_gain > 1.0) throw std::invalid_argument("clean_sc: loop gain must be in (0, 1]");
  if (max_iterations < 1) throw std::invalid_argument("clean_sc: max_iterations must be >= 1");
  if (!(stop_threshold >= 0.0)) throw std::invalid_argument("clean_sc: stop threshold must be >= 0");
  if (coherence_iterations < 0) throw std::invalid_argument("clean_sc: coherence_iterations must be >= 0");
}

SourcePartSet clean_sc(const CsmSet& csm, const MicArray& array, const FocusGrid& grid, const CleanScConfig& config,
                       CleanScTrace* trace) {
  config.validate();
  if (array.size() != csm.mic_count()) throw std::invalid_argument("clean_sc: array/CSM size mismatch");
  const auto f_count = static_cast<std::size_t>(csm.frequency_count());
  std::vector<std::map<Index, double>> found(f_count);
  std::vector<std::vector<double>> norms(f_count);

  parallel_for(f_count, [&](std::size_t jj) {
    const auto j = static_cast<Index>(jj);
    const double k = csm.grid().wavenumber(j);
    const CMatX w = steering_matrix(array, grid, k);
    VecX correction(grid.size());
    for (Index p = 0; p < grid.size(); ++p) correction[p] = diagonal_removal_correction(w.col(p));

    CMatX degraded = csm.at(j);
    double norm = offdiag_norm(degraded);
    norms[jj].push_back(norm);
    CVecX g;
    for (Index it = 0; it < config.max_iterations && norm > 0.0; ++it) {
      const VecX forms = quadratic_forms(degraded, w);
      Index peak = -1;
      double best = 0.0;
      for (Index p = 0; p < forms.size(); ++p) {
        const double b = forms[p] / correction[p];
        if (b > best) {
          best = b;
          peak = p;
        }
      }
      if (peak < 0) break;
      const double p_max = forms[peak];
      const CVecX wp = w.col(peak);

      CMatX off = degraded;
      off.diagonal().setZero();
      const CVecX base = off * wp / p_max;
      CVecX h = base;
      for (Index c = 0; c < config.coherence_iterations; ++c) {
        const VecX hd = h.cwiseAbs2();
        const CVecX hw = hd.cast<Complex>().cwiseProduct(wp);
        const double whw = std::real(wp.dot(hw));
        h = (base + hw) / std::sqrt(1.0 + whw);
      }

      CMatX next = degraded - (config.loop_gain * p_max) * (h * h.adjoint());
      next = (next + next.adjoint()).eval() * 0.5;
      const double next_norm = offdiag_norm(next);
      if (!(next_norm < norm)) break;

      detail::pole_response(array.positions(), grid.point(peak), Vec3::Zero(), k, Pole::monopole, g);
      const double self = std::norm(wp.dot(g)) - (wp.cwiseAbs2().cwiseProduct(g.cwiseAbs2())).sum();
      found[jj][peak] += config.loop_gain * p_max / self;

      const double decrease = (norm - next_norm) / norm;
      degraded = std::move(next);
      norm = next_norm;
      norms[jj].push_back(norm);
      if (decrease < config.stop_threshold) break;
    }
  });

  SourcePartSet parts;
  for (std::size_t jj = 0; jj < f_count; ++jj) {
    for (const auto& [p, q] : found[jj]) {
      if (q > 0.0) parts.push_back({grid.point(p), csm.grid().frequency(static_cast<Index>(jj)), q});
    }
  }
  if (trace) trace->degraded_norm = std::move(norms);
  return parts;
}

}  // namespace cmfbeam
