// SPDX-License-Identifier: Apache-2.0
//
// cmfbeam: broadband covariance-matrix-fitting beamforming
// ------------------------------------------------------------------------
//
// Generalized simulated annealing after Tsallis & Stariolo and Xiang et al.:
// a distorted Cauchy-Lorentz visiting distribution with shape q_v, a
// generalized Metropolis acceptance with shape q_a, temperature schedule
// T(t) = T0 (2^(q_v-1) - 1) / ((1+t)^(q_v-1) - 1), and local refinement of
// every improved best point.

#include "cmfbeam/minimize.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace cmfbeam {

namespace {

constexpr double kTailLimit = 1e8;
constexpr double kMinVisitBound = 1e-10;

class VisitingDistribution {
 public:
  VisitingDistribution(const VecX& lower, const VecX& upper, double visiting, std::mt19937_64& rng)
      : lower_(lower), range_(upper - lower), qv_(visiting), rng_(rng) {
    factor2_ = std::exp((4.0 - qv_) * std::log(qv_ - 1.0));
    factor3_ = std::exp((2.0 - qv_) * std::log(2.0) / (qv_ - 1.0));
    factor4_p_ = std::sqrt(kPi) * factor2_ / (factor3_ * (3.0 - qv_));
    factor5_ = 1.0 / (qv_ - 1.0) - 0.5;
    d1_ = 2.0 - factor5_;
    factor6_ = kPi * (1.0 - factor5_) / std::sin(kPi * (1.0 - factor5_)) / std::exp(std::lgamma(d1_));
  }

  /// Steps 0..n-1 move every coordinate; steps n..2n-1 move coordinate step - n.
  VecX visit(const VecX& x, Index step, double temperature) {
    const Index dim = x.size();
    VecX out = x;
    if (step < dim) {
      VecX v = sample(temperature, dim);
      for (Index i = 0; i < dim; ++i) v[i] = clip_tail(v[i]);
      out = x + v;
      for (Index i = 0; i < dim; ++i) out[i] = wrap(out[i], i);
    } else {
      const Index i = step - dim;
      out[i] = wrap(clip_tail(sample(temperature, 1)[0]) + x[i], i);
    }
    return out;
  }

 private:
  VecX sample(double temperature, Index dim) {
    VecX x(dim);
    VecX y(dim);
    for (Index i = 0; i < dim; ++i) x[i] = normal_(rng_);
    for (Index i = 0; i < dim; ++i) y[i] = normal_(rng_);
    const double factor1 = std::exp(std::log(temperature) / (qv_ - 1.0));
    const double factor4 = factor4_p_ * factor1;
    x *= std::exp(-(qv_ - 1.0) * std::log(factor6_ / factor4) / (3.0 - qv_));
    for (Index i = 0; i < dim; ++i) {
      const double den = std::exp((qv_ - 1.0) * std::log(std::abs(y[i])) / (3.0 - qv_));
      x[i] /= den;
    }
    return x;
  }

  double clip_tail(double v) {
    if (v > kTailLimit) return kTailLimit * uniform_(rng_);
    if (v < -kTailLimit) return -kTailLimit * uniform_(rng_);
    return v;
  }

  double wrap(double v, Index i) const {
    const double a = v - lower_[i];
    const double b = std::fmod(a, range_[i]) + range_[i];
    double out = std::fmod(b, range_[i]) + lower_[i];
    if (std::abs(out - lower_[i]) < kMinVisitBound) out += 1e-10;
    return out;
  }

  VecX lower_;
  VecX range_;
  double qv_;
  std::mt19937_64& rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  double factor2_, factor3_, factor4_p_, factor5_, d1_, factor6_;
};

struct ChainState {
  VecX current;
  double current_f = 0.0;
  VecX best;
  double best_f = std::numeric_limits<double>::infinity();
  VecX xmin;
  double emin = 0.0;
  Index not_improved = 0;
  Index not_improved_max = 1000;
  bool improved = false;
};

}  // namespace

MinimizeResult dual_annealing(CountedObjective& f, const AnnealingOptions& options, const LbfgsOptions& local,
                              const VecX& x0) {
  const VecX& lo = f.lower();
  const VecX& hi = f.upper();
  const Index dim = lo.size();
  if (dim < 1) throw std::invalid_argument("dual_annealing: empty problem");
  if (!lo.allFinite() || !hi.allFinite()) throw std::invalid_argument("dual_annealing: bounds must be finite");
  for (Index i = 0; i < dim; ++i) {
    if (!(hi[i] > lo[i])) throw std::invalid_argument("dual_annealing: empty bound interval at index " + std::to_string(i));
  }
  if (!(options.visiting > 1.0 && options.visiting < 3.0)) throw std::invalid_argument("dual_annealing: visiting must be in (1, 3)");
  if (!(options.acceptance < 1.0)) throw std::invalid_argument("dual_annealing: acceptance must be < 1");
  if (!(options.initial_temperature > 0.0)) throw std::invalid_argument("dual_annealing: initial temperature must be > 0");

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  VisitingDistribution visiting(lo, hi, options.visiting, rng);

  LbfgsOptions ls = local;
  ls.max_iterations = std::clamp<Index>(6 * dim, 100, 1000);

  MinimizeResult result;
  ChainState st;

  auto update_best = [&](double e, const VecX& x) {
    st.best_f = e;
    st.best = x;
  };
  auto reset = [&](bool first, const VecX& start) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      if (first && start.size() == dim) {
        st.current = start.cwiseMax(lo).cwiseMin(hi);
      } else {
        st.current.resize(dim);
        for (Index i = 0; i < dim; ++i) st.current[i] = lo[i] + (hi[i] - lo[i]) * uniform(rng);
      }
      st.current_f = f(st.current);
      if (std::isfinite(st.current_f)) break;
    }
    if (!std::isfinite(st.current_f)) throw std::runtime_error("dual_annealing: no finite starting energy found");
    if (st.best.size() == 0 || st.current_f < st.best_f) update_best(st.current_f, st.current);
  };
  auto local_search = [&](const VecX& x, double e) {
    MinimizeResult r = minimize_lbfgsb(f, x, ls);
    const bool valid = std::isfinite(r.f) && r.x.allFinite() &&
                       ((r.x.array() >= lo.array()) && (r.x.array() <= hi.array())).all();
    if (valid && r.f < e) return std::pair<double, VecX>(r.f, r.x);
    return std::pair<double, VecX>(e, x);
  };

  const double t1 = std::exp((options.visiting - 1.0) * std::log(2.0)) - 1.0;
  const double restart_temperature = options.initial_temperature * options.restart_temperature_ratio;
  Index iteration = 0;

  try {
    reset(true, x0);
    st.xmin = st.current;
    st.emin = st.current_f;
    bool stop = false;
    while (!stop) {
      for (Index i = 0; i < options.max_iterations; ++i) {
        const double s = static_cast<double>(i) + 2.0;
        const double t2 = std::exp((options.visiting - 1.0) * std::log(s)) - 1.0;
        const double temperature = options.initial_temperature * t1 / t2;
        if (iteration >= options.max_iterations) {
          stop = true;
          break;
        }
        if (temperature < restart_temperature) {
          reset(false, VecX());
          break;
        }

        // Markov chain at this temperature.
        const double temperature_step = temperature / static_cast<double>(i + 1);
        ++st.not_improved;
        for (Index j = 0; j < 2 * dim; ++j) {
          if (j == 0) st.improved = (i == 0);
          const VecX x_visit = visiting.visit(st.current, j, temperature);
          const double e = f(x_visit);
          if (e < st.current_f) {
            st.current = x_visit;
            st.current_f = e;
            if (e < st.best_f) {
              update_best(e, x_visit);
              st.improved = true;
              st.not_improved = 0;
            }
          } else {
            const double r = uniform(rng);
            const double pqv_temp =
                1.0 - ((1.0 - options.acceptance) * (e - st.current_f) / temperature_step);
            const double pqv = pqv_temp <= 0.0 ? 0.0 : std::exp(std::log(pqv_temp) / (1.0 - options.acceptance));
            if (r <= pqv) {
              st.current = x_visit;
              st.current_f = e;
            }
            if (st.not_improved >= st.not_improved_max && (j == 0 || st.current_f < st.emin)) {
              st.emin = st.current_f;
              st.xmin = st.current;
            }
          }
        }

        if (options.local_search) {
          if (st.improved) {
            auto [e, x] = local_search(st.best, st.best_f);
            if (e < st.best_f) {
              st.not_improved = 0;
              update_best(e, x);
              st.current = x;
              st.current_f = e;
            }
          }
          if (st.not_improved >= st.not_improved_max) {
            auto [e, x] = local_search(st.xmin, st.emin);
            st.xmin = x;
            st.emin = e;
            st.not_improved = 0;
            st.not_improved_max = dim;
            if (e < st.best_f) {
              update_best(e, x);
              st.current = x;
              st.current_f = e;
            }
          }
        }
        ++iteration;
        result.trace.push_back(st.best_f);
      }
    }
    result.converged = true;
    result.reason = "iteration limit";
  } catch (const CountedObjective::BudgetExhausted&) {
    result.reason = "evaluation budget exhausted";
  }
  result.iterations = iteration;
  if (f.has_best() && (st.best.size() == 0 || f.best_f() < st.best_f)) {
    result.x = f.best_x();
    result.f = f.best_f();
  } else {
    result.x = st.best;
    result.f = st.best_f;
  }
  if (result.trace.empty() || result.trace.back() != result.f) result.trace.push_back(result.f);
  return result;
}

}  // namespace cmfbeam
