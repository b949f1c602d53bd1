// SPDX-License-Identifier: Apache-2.0
//
// cmfbeam: broadband covariance-matrix-fitting beamforming
// ------------------------------------------------------------------------

#include "cmfbeam/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

namespace cmfbeam {

// --------------------------------------------------------------------- ROI

Roi Roi::sphere(const Vec3& center, double radius, std::string label) {
  return Roi{center, Vec3::Constant(radius), std::move(label)};
}

void Roi::validate() const {
  if (!(radii.array() > 0.0).all() || !radii.allFinite()) {
    throw std::invalid_argument("ROI '" + label + "': radii must be finite and > 0");
  }
  if (!center.allFinite()) throw std::invalid_argument("ROI '" + label + "': center must be finite");
  if (label.empty()) throw std::invalid_argument("ROI: empty label");
  if (label == kNoiseLabel) throw std::invalid_argument("ROI: label 'noise' is reserved");
}

double Roi::normalized_distance(const Vec3& p) const { return (p - center).cwiseQuotient(radii).norm(); }

// ----------------------------------------------------------- SpectraReport

const LabeledSpectrum& SpectraReport::at(const std::string& label) const {
  for (const auto& s : spectra) {
    if (s.label == label) return s;
  }
  throw std::out_of_range("SpectraReport: no label '" + label + "'");
}

bool SpectraReport::has(const std::string& label) const {
  return std::any_of(spectra.begin(), spectra.end(), [&](const auto& s) { return s.label == label; });
}

VecX SpectraReport::total() const {
  VecX t = VecX::Zero(frequencies.size());
  for (const auto& s : spectra) t += s.power;
  return t;
}

namespace {

/// Order-independent sum: the addends are sorted first.
double sorted_sum(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

VecX grid_frequencies(const FrequencyGrid& grid) {
  VecX f(grid.size());
  for (Index j = 0; j < grid.size(); ++j) f[j] = grid.frequency(j);
  return f;
}

}  // namespace

SpectraReport roi_integrate(const SourcePartSet& parts, const std::vector<Roi>& rois, const FrequencyGrid& grid) {
  std::set<std::string> labels;
  for (const auto& r : rois) {
    r.validate();
    if (!labels.insert(r.label).second) throw std::invalid_argument("roi_integrate: duplicate ROI label '" + r.label + "'");
  }
  const std::size_t bins = rois.size() + 1;  // last bin is noise
  const auto f_count = static_cast<std::size_t>(grid.size());
  std::vector<std::vector<std::vector<double>>> addends(bins, std::vector<std::vector<double>>(f_count));

  for (const auto& part : parts) {
    if (!(part.power >= 0.0) || !std::isfinite(part.power)) {
      throw std::invalid_argument("roi_integrate: source-part power must be finite and >= 0");
    }
    const auto j = static_cast<std::size_t>(grid.index_of(part.frequency));
    std::size_t bin = rois.size();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < rois.size(); ++r) {
      const double d = rois[r].normalized_distance(part.position);
      if (d <= 1.0 && d < best) {
        best = d;
        bin = r;
      }
    }
    addends[bin][j].push_back(part.power);
  }

  SpectraReport report;
  report.frequencies = grid_frequencies(grid);
  for (std::size_t b = 0; b < bins; ++b) {
    LabeledSpectrum s;
    s.label = b < rois.size() ? rois[b].label : kNoiseLabel;
    s.position = b < rois.size() ? rois[b].center : Vec3::Zero();
    s.power = VecX::Zero(grid.size());
    for (std::size_t j = 0; j < f_count; ++j) s.power[static_cast<Index>(j)] = sorted_sum(addends[b][j]);
    report.spectra.push_back(std::move(s));
  }
  return report;
}

// ---------------------------------------------------------------- grouping

SpectraReport group_source_objects(const std::vector<SourceObject>& sources, const FrequencyGrid& grid,
                                   const GroupingOptions& options) {
  if (!(options.min_distance > 0.0)) throw std::invalid_argument("group_source_objects: min_distance must be > 0");
  const std::size_t n = sources.size();
  const Index f_count = grid.size();

  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if ((sources[a].position - sources[b].position).norm() <= options.min_distance) {
        const std::size_t ra = find(a);
        const std::size_t rb = find(b);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
      }
    }
  }

  struct Group {
    std::vector<std::size_t> members;
    VecX power;
    double total = 0.0;
    Vec3 centroid = Vec3::Zero();
  };
  std::vector<Group> groups;
  std::vector<long> slot(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = find(i);
    if (slot[r] < 0) {
      slot[r] = static_cast<long>(groups.size());
      groups.push_back({});
    }
    groups[static_cast<std::size_t>(slot[r])].members.push_back(i);
  }
  for (auto& g : groups) {
    g.power = VecX::Zero(f_count);
    double weight = 0.0;
    Vec3 weighted = Vec3::Zero();
    Vec3 plain = Vec3::Zero();
    for (std::size_t i : g.members) {
      const VecX p = sources[i].total_spectrum(f_count);
      g.power += p;
      weighted += p.sum() * sources[i].position;
      weight += p.sum();
      plain += sources[i].position;
    }
    g.total = g.power.sum();
    g.centroid = weight > 0.0 ? Vec3(weighted / weight) : Vec3(plain / static_cast<double>(g.members.size()));
  }
  std::stable_sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) { return a.total > b.total; });

  SpectraReport report;
  report.frequencies = grid_frequencies(grid);
  LabeledSpectrum noise{kNoiseLabel, Vec3::Zero(), VecX::Zero(f_count)};
  const double strongest = groups.empty() ? 0.0 : groups.front().total;
  int label = 0;
  for (const auto& g : groups) {
    const bool weak = options.min_relative_power_db &&
                      (strongest <= 0.0 || g.total < strongest * std::pow(10.0, -*options.min_relative_power_db / 10.0));
    if (weak) {
      noise.power += g.power;
      continue;
    }
    report.spectra.push_back({"group" + std::to_string(++label), g.centroid, g.power});
  }
  report.spectra.push_back(std::move(noise));
  return report;
}

// ---------------------------------------------------------------- matching

namespace {

/// Hungarian algorithm on a square cost matrix; returns column per row.
std::vector<int> hungarian(const MatX& cost) {
  const Index n = cost.rows();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<double> v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<Index> p(static_cast<std::size_t>(n + 1), 0);
  std::vector<Index> way(static_cast<std::size_t>(n + 1), 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const Index i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        if (used[sj]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[sj];
        if (cur < minv[sj]) {
          minv[sj] = cur;
          way[sj] = j0;
        }
        if (minv[sj] < delta) {
          delta = minv[sj];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        if (used[sj]) {
          u[static_cast<std::size_t>(p[sj])] += delta;
          v[sj] -= delta;
        } else {
          minv[sj] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const Index j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> col_of_row(static_cast<std::size_t>(n), -1);
  for (Index j = 1; j <= n; ++j) {
    const Index i = p[static_cast<std::size_t>(j)];
    if (i > 0) col_of_row[static_cast<std::size_t>(i - 1)] = static_cast<int>(j - 1);
  }
  return col_of_row;
}

}  // namespace

Assignment match_to_truth(const std::vector<Vec3>& estimates, const std::vector<Vec3>& truths,
                          const std::vector<double>& powers) {
  if (!powers.empty() && powers.size() != estimates.size()) {
    throw std::invalid_argument("match_to_truth: one power per estimate required");
  }
  const std::size_t ne = estimates.size();
  const std::size_t nt = truths.size();
  Assignment out;
  out.truth_of_estimate.assign(ne, -1);
  out.estimate_of_truth.assign(nt, -1);
  if (ne == 0 || nt == 0) return out;

  // Rows: estimates (plus dummies), columns: truths (plus dummies). Leaving
  // an estimate unmatched costs a tiny multiple of its relative power.
  const auto k = static_cast<Index>(std::max(ne, nt));
  double scale = 0.0;
  for (const auto& e : estimates) {
    for (const auto& t : truths) scale = std::max(scale, (e - t).norm());
  }
  const double max_power = powers.empty() ? 0.0 : *std::max_element(powers.begin(), powers.end());
  const double tie = 1e-9 * std::max(scale, 1e-300);
  MatX cost = MatX::Zero(k, k);
  for (std::size_t e = 0; e < ne; ++e) {
    for (Index t = 0; t < k; ++t) {
      if (static_cast<std::size_t>(t) < nt) {
        cost(static_cast<Index>(e), t) = (estimates[e] - truths[static_cast<std::size_t>(t)]).norm();
      } else if (max_power > 0.0) {
        cost(static_cast<Index>(e), t) = tie * powers[e] / max_power;
      }
    }
  }
  const std::vector<int> col = hungarian(cost);
  for (std::size_t e = 0; e < ne; ++e) {
    const int t = col[e];
    if (t >= 0 && static_cast<std::size_t>(t) < nt) {
      out.truth_of_estimate[e] = t;
      out.estimate_of_truth[static_cast<std::size_t>(t)] = static_cast<int>(e);
      out.total_distance += (estimates[e] - truths[static_cast<std::size_t>(t)]).norm();
    }
  }
  return out;
}

}  // namespace cmfbeam
