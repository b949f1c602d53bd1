// SPDX-License-Identifier: Apache-2.0
//
// cmfbeam: broadband covariance-matrix-fitting beamforming
// ------------------------------------------------------------------------

#include "cmfbeam/optimize.hpp"

#include "cmfbeam/parallel.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace cmfbeam {

const char* fit_mode_name(FitMode mode) { return mode == FitMode::global ? "global" : "local"; }
const char* energy_kind_name(EnergyKind kind) { return kind == EnergyKind::broadband ? "broadband" : "standard"; }

void OptimizerConfig::validate() const {
  if (max_evaluations < 1) throw std::invalid_argument("optimizer: max_evaluations must be >= 1");
  if (!(position_step > 0.0) || !(angle_step > 0.0) || !(power_step > 0.0)) {
    throw std::invalid_argument("optimizer: finite-difference steps must be > 0");
  }
  if (!(position_unit > 0.0) || !(angle_unit > 0.0) || !(power_unit > 0.0)) {
    throw std::invalid_argument("optimizer: step units must be > 0");
  }
  if (!(local.gradient_tol > 0.0) || !(local.energy_tol > 0.0) || !(local.step_tol > 0.0)) {
    throw std::invalid_argument("optimizer: tolerances must be > 0");
  }
  if (local.memory < 1) throw std::invalid_argument("optimizer: L-BFGS memory must be >= 1");
  if (local.max_iterations < 1) throw std::invalid_argument("optimizer: local max_iterations must be >= 1");
  if (!(annealing.initial_temperature > 0.0)) throw std::invalid_argument("optimizer: initial temperature must be > 0");
  if (!(annealing.visiting > 1.0 && annealing.visiting < 3.0)) {
    throw std::invalid_argument("optimizer: visiting parameter must be in (1, 3)");
  }
  if (!(annealing.acceptance < 1.0)) throw std::invalid_argument("optimizer: acceptance parameter must be < 1");
  if (!(annealing.restart_temperature_ratio > 0.0 && annealing.restart_temperature_ratio < 1.0)) {
    throw std::invalid_argument("optimizer: restart temperature ratio must be in (0, 1)");
  }
  if (annealing.max_iterations < 1) throw std::invalid_argument("optimizer: annealing max_iterations must be >= 1");
}

double fit_energy(const EnergyModel& model, const VecX& params, EnergyKind kind) {
  if (kind == EnergyKind::broadband) return model.broadband(params);
  if (model.measured().frequency_count() != 1) {
    throw std::invalid_argument("standard energy fit needs a single-frequency CSM set");
  }
  return model.standard(params, 0);
}

namespace {

/// Maps between the full parameter vector and its free entries.
struct Subspace {
  VecX base;
  std::vector<Index> free;

  VecX expand(const VecX& z) const {
    VecX x = base;
    for (std::size_t i = 0; i < free.size(); ++i) x[free[i]] = z[static_cast<Index>(i)];
    return x;
  }
  VecX reduce(const VecX& x) const {
    VecX z(static_cast<Index>(free.size()));
    for (std::size_t i = 0; i < free.size(); ++i) z[static_cast<Index>(i)] = x[free[i]];
    return z;
  }
};

VecX per_class(const ParameterLayout& layout, double position, double angle, double power) {
  VecX v = VecX::Constant(layout.size(), power);
  for (Index n = 0; n < layout.source_count(); ++n) {
    v.segment(layout.position_offset(n), 3).setConstant(position);
    if (layout.sources()[static_cast<std::size_t>(n)].dipole) v.segment(layout.angle_offset(n), 2).setConstant(angle);
  }
  return v;
}

LbfgsOptions local_options(const ParameterLayout& layout, const Subspace& sub, const OptimizerConfig& config) {
  LbfgsOptions local = config.local;
  local.relative_step = sub.reduce(per_class(layout, config.position_step, config.angle_step, config.power_step));
  local.step_unit = sub.reduce(per_class(layout, config.position_unit, config.angle_unit, config.power_unit));
  return local;
}


/// Wraps dipole angles that optimized without bounds; fixed or bounded
/// angles stay untouched so bounds hold exactly.
void wrap_angles(const ParameterLayout& layout, VecX& x, const VecX& lower, const VecX& upper) {
  for (Index n = 0; n < layout.source_count(); ++n) {
    if (!layout.sources()[static_cast<std::size_t>(n)].dipole) continue;
    const Index a = layout.angle_offset(n);
    const bool theta_open = std::isinf(lower[a]) && std::isinf(upper[a]);
    const bool phi_open = std::isinf(lower[a + 1]) && std::isinf(upper[a + 1]);
    if (theta_open && phi_open) {
      const DipoleAxis w = wrap_axis({x[a], x[a + 1]});
      x[a] = w.theta;
      x[a + 1] = w.phi;
    } else if (phi_open) {
      double phi = std::fmod(x[a + 1], kTwoPi);
      if (phi < 0.0) phi += kTwoPi;
      if (phi >= kTwoPi) phi = 0.0;
      x[a + 1] = phi;
    }
  }
}

FitResult finish(const EnergyModel& model, const ParameterLayout& layout, const Subspace& sub, const VecX& lower,
                 const VecX& upper, const MinimizeResult& r, Index evaluations, const OptimizerConfig& config) {
  VecX x = sub.expand(r.x);
  wrap_angles(layout, x, lower, upper);
  ParameterVector best(layout, x, lower, upper);
  FitResult out(best);
  out.energy = fit_energy(model, x, config.energy);
  out.evaluations = evaluations;
  out.trace = r.trace;
  // Keep the envelope consistent with the re-evaluated energy.
  if (out.trace.empty() || out.energy < out.trace.back()) out.trace.push_back(out.energy);
  out.sources = best.sources();
  out.seed = config.seed;
  out.config = config;
  out.termination = r.reason;
  return out;
}

}  // namespace

FitResult global_fit(const MicArray& array, const CsmSet& measured, const ParameterLayout& layout, const VecX& lower,
                     const VecX& upper, const OptimizerConfig& config) {
  config.validate();
  if (lower.size() != layout.size() || upper.size() != layout.size()) {
    throw std::invalid_argument("global_fit: bounds length mismatch");
  }
  for (Index i = 0; i < layout.size(); ++i) {
    if (std::isnan(lower[i]) || std::isnan(upper[i]) || lower[i] > upper[i]) {
      throw std::invalid_argument("global_fit: infeasible bounds for " + layout.name(i));
    }
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i])) {
      throw std::invalid_argument("global_fit: bounds must be finite for " + layout.name(i));
    }
  }
  const EnergyModel model(array, measured, layout);
  Subspace sub{lower, {}};
  for (Index i = 0; i < layout.size(); ++i) {
    if (lower[i] != upper[i]) sub.free.push_back(i);
  }
  if (sub.free.empty()) throw std::invalid_argument("global_fit: every parameter is fixed");

  const EnergyKind kind = config.energy;
  CountedObjective objective([&](const VecX& z) { return fit_energy(model, sub.expand(z), kind); }, sub.reduce(lower),
                             sub.reduce(upper), config.max_evaluations);
  AnnealingOptions anneal = config.annealing;
  anneal.seed = config.seed;
  const LbfgsOptions local = local_options(layout, sub, config);
  const MinimizeResult r = dual_annealing(objective, anneal, local);
  return finish(model, layout, sub, lower, upper, r, objective.evaluations(), config);
}

FitResult local_fit(const MicArray& array, const CsmSet& measured, const ParameterVector& initial,
                    const OptimizerConfig& config) {
  config.validate();
  const ParameterLayout& layout = initial.layout();
  for (Index i = 0; i < layout.size(); ++i) {
    if (!(initial.values()[i] >= initial.lower()[i] && initial.values()[i] <= initial.upper()[i])) {
      throw std::invalid_argument("local_fit: initial value out of bounds for " + layout.name(i));
    }
  }
  const EnergyModel model(array, measured, layout);
  Subspace sub{initial.values(), initial.free_indices()};
  const VecX& lower = initial.lower();
  const VecX& upper = initial.upper();
  if (sub.free.empty()) throw std::invalid_argument("local_fit: every parameter is fixed");

  const EnergyKind kind = config.energy;
  CountedObjective objective([&](const VecX& z) { return fit_energy(model, sub.expand(z), kind); }, sub.reduce(lower),
                             sub.reduce(upper), config.max_evaluations);
  const LbfgsOptions local = local_options(layout, sub, config);
  const MinimizeResult r = minimize_lbfgsb(objective, sub.reduce(initial.values()), local);
  return finish(model, layout, sub, lower, upper, r, objective.evaluations(), config);
}

std::uint64_t start_seed(std::uint64_t seed, Index k) {
  if (k == 0) return seed;
  // splitmix64 step
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(k);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

MultiStartResult multi_start(const MicArray& array, const CsmSet& measured, const ParameterLayout& layout,
                             const VecX& lower, const VecX& upper, const OptimizerConfig& config, Index starts) {
  if (starts < 1) throw std::invalid_argument("multi_start: starts must be >= 1");
  std::vector<std::optional<FitResult>> runs(static_cast<std::size_t>(starts));
  parallel_for(runs.size(), [&](std::size_t k) {
    OptimizerConfig c = config;
    c.seed = start_seed(config.seed, static_cast<Index>(k));
    runs[k] = global_fit(array, measured, layout, lower, upper, c);
  });
  std::size_t best = 0;
  MultiStartResult out(*runs[0]);
  for (std::size_t k = 0; k < runs.size(); ++k) {
    out.energies.push_back(runs[k]->energy);
    out.seeds.push_back(runs[k]->seed);
    if (runs[k]->energy < runs[best]->energy) best = k;
  }
  out.best = *runs[best];
  return out;
}

StandardFitResult standard_fit(const MicArray& array, const CsmSet& measured, const ParameterLayout& layout,
                               const VecX& lower, const VecX& upper, const OptimizerConfig& config) {
  if (layout.frequency_count() != 1) throw std::invalid_argument("standard_fit: layout must cover one frequency");
  const auto f_count = static_cast<std::size_t>(measured.frequency_count());
  std::vector<std::optional<FitResult>> fits(f_count);
  parallel_for(f_count, [&](std::size_t j) {
    OptimizerConfig c = config;
    c.energy = EnergyKind::standard;
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed & 0xFFFFFFFFu), static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(j)};
    std::array<std::uint32_t, 2> words{};
    seq.generate(words.begin(), words.end());
    c.seed = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
    fits[j] = global_fit(array, measured.subset(static_cast<Index>(j)), layout, lower, upper, c);
  });
  StandardFitResult out;
  for (std::size_t j = 0; j < f_count; ++j) {
    const double f = measured.grid().frequency(static_cast<Index>(j));
    for (const auto& s : fits[j]->sources) {
      const double q = s.total_spectrum(1)[0];
      if (q > 0.0) out.parts.push_back({s.position, f, q});
    }
    out.per_frequency.push_back(std::move(*fits[j]));
  }
  return out;
}

ParameterVector perturbed_start(const std::vector<SourceObject>& truth, Index frequency_count,
                                const LocalStartSpec& spec, std::uint64_t seed) {
  if (!(spec.sigma >= 0.0) || !(spec.bound_sigmas > 0.0)) {
    throw std::invalid_argument("perturbed_start: sigma must be >= 0 and bound_sigmas > 0");
  }
  if (truth.empty()) throw std::invalid_argument("perturbed_start: no sources");
  if (spec.level_floor_db && !(*spec.level_floor_db <= spec.level_db)) {
    throw std::invalid_argument("perturbed_start: level floor above the start level");
  }
  std::vector<SourceTemplate> templates;
  for (const auto& s : truth) templates.push_back({s.has(Pole::monopole), s.has(Pole::dipole)});
  const ParameterLayout layout(templates, frequency_count);
  constexpr double inf = std::numeric_limits<double>::infinity();
  VecX x(layout.size());
  VecX lo = VecX::Constant(layout.size(), -inf);
  VecX hi = VecX::Constant(layout.size(), inf);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, kTwoPi);
  const double half_width = spec.bound_sigmas * spec.sigma;
  const double log_level = std::log10(power_from_db(spec.level_db));
  for (Index n = 0; n < layout.source_count(); ++n) {
    const SourceObject& s = truth[static_cast<std::size_t>(n)];
    const Index p = layout.position_offset(n);
    for (Index a = 0; a < 3; ++a) {
      if (a == 2 && spec.fixed_x3) {
        x[p + a] = lo[p + a] = hi[p + a] = *spec.fixed_x3;
        continue;
      }
      x[p + a] = s.position[a] + spec.sigma * normal(rng);
      lo[p + a] = x[p + a] - half_width;
      hi[p + a] = x[p + a] + half_width;
    }
    if (s.has(Pole::dipole)) {
      const Index a = layout.angle_offset(n);
      if (spec.fixed_theta) {
        x[a] = lo[a] = hi[a] = *spec.fixed_theta;
      } else {
        x[a] = s.axis.theta + spec.sigma * normal(rng);
      }
      x[a + 1] = spec.random_phi ? uniform(rng) : s.axis.phi + spec.sigma * normal(rng);
    }
    for (Pole pole : {Pole::monopole, Pole::dipole}) {
      if (!s.has(pole)) continue;
      const Index o = layout.power_offset(n, pole);
      x.segment(o, frequency_count).setConstant(log_level);
      if (spec.level_floor_db) lo.segment(o, frequency_count).setConstant(std::log10(power_from_db(*spec.level_floor_db)));
    }
  }
  return ParameterVector(layout, x, lo, hi);
}

}  // namespace cmfbeam
