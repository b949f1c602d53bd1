// SPDX-License-Identifier: Apache-2.0
//
// cmfbeam: broadband covariance-matrix-fitting beamforming
// ------------------------------------------------------------------------

#include "cmfbeam/minimize.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace cmfbeam {

CountedObjective::CountedObjective(Objective fn, VecX lower, VecX upper, Index budget)
    : fn_(std::move(fn)), lower_(std::move(lower)), upper_(std::move(upper)), budget_(budget) {
  if (lower_.size() != upper_.size()) throw std::invalid_argument("CountedObjective: bounds length mismatch");
  if (budget_ < 1) throw std::invalid_argument("CountedObjective: budget must be >= 1");
  for (Index i = 0; i < lower_.size(); ++i) {
    if (std::isnan(lower_[i]) || std::isnan(upper_[i]) || lower_[i] > upper_[i]) {
      throw std::invalid_argument("CountedObjective: infeasible bounds at index " + std::to_string(i));
    }
  }
}

double CountedObjective::operator()(const VecX& x) {
  if (evaluations_ >= budget_) throw BudgetExhausted{};
  ++evaluations_;
  const double f = fn_(x);
  const bool inside = ((x.array() >= lower_.array()) && (x.array() <= upper_.array())).all();
  if (inside && f < best_f_) {
    best_f_ = f;
    best_x_ = x;
  }
  return f;
}

namespace {

/// Central differences; also returns the diagonal second differences of the
/// same stencil, which cost no extra evaluations.
VecX central_stencil(CountedObjective& f, const VecX& x, double fx, const VecX& relative_step, VecX* curvature) {
  VecX g(x.size());
  if (curvature) curvature->resize(x.size());
  VecX probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    const double rel = relative_step.size() ? relative_step[i] : 1e-6;
    const double h = rel * std::max(1.0, std::abs(x[i]));
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
    if (curvature) (*curvature)[i] = (up - 2.0 * fx + down) / (h * h);
  }
  return g;
}

}  // namespace

VecX central_gradient(CountedObjective& f, const VecX& x, const VecX& relative_step) {
  return central_stencil(f, x, 0.0, relative_step, nullptr);
}

namespace {

VecX project(const VecX& x, const VecX& lo, const VecX& hi) { return x.cwiseMax(lo).cwiseMin(hi); }

}  // namespace

MinimizeResult minimize_lbfgsb(CountedObjective& f, const VecX& x0, const LbfgsOptions& options) {
  const VecX& lo = f.lower();
  const VecX& hi = f.upper();
  if (x0.size() != lo.size()) throw std::invalid_argument("minimize_lbfgsb: x0 length mismatch");
  if (options.memory < 1 || options.max_iterations < 0) throw std::invalid_argument("minimize_lbfgsb: bad options");
  if (options.step_unit.size() != 0 &&
      (options.step_unit.size() != x0.size() || !(options.step_unit.array() > 0.0).all())) {
    throw std::invalid_argument("minimize_lbfgsb: step_unit must be empty or positive per coordinate");
  }
  const VecX unit = options.step_unit.size() ? options.step_unit : VecX::Ones(x0.size());

  MinimizeResult result;
  VecX x = project(x0, lo, hi);
  double fx = std::numeric_limits<double>::infinity();
  VecX g;
  std::deque<VecX> s_hist;
  std::deque<VecX> y_hist;

  try {
    fx = f(x);
    result.x = x;
    result.f = fx;
    VecX curv;
    g = central_stencil(f, x, fx, options.relative_step, &curv);

    for (Index iter = 0; iter < options.max_iterations; ++iter) {
      // Initial inverse Hessian: |diagonal curvature| of the gradient stencil,
      // so flat or concave log-power directions still get Newton-sized steps.
      // The floor caps any single diagonal step at one step unit.
      const VecX h0 = curv.cwiseAbs().cwiseMax(g.cwiseAbs().cwiseQuotient(unit)).cwiseMax(1e-300).cwiseInverse();

      // Both the raw and the curvature-scaled projected gradient must vanish;
      // the raw one alone is tiny on power plateaus far from the optimum.
      const double pg = (project(x - g, lo, hi) - x).lpNorm<Eigen::Infinity>();
      const double pg_scaled = (project(x - h0.cwiseProduct(g), lo, hi) - x).lpNorm<Eigen::Infinity>();
      if (pg <= options.gradient_tol && pg_scaled <= options.gradient_tol) {
        result.converged = true;
        result.reason = "projected gradient below tolerance";
        break;
      }

      // Variables pinned at a bound with the gradient pushing outward stay fixed.
      Eigen::Array<bool, Eigen::Dynamic, 1> free(x.size());
      for (Index i = 0; i < x.size(); ++i) free[i] = !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0));
      auto mask = [&](VecX v) {
        for (Index i = 0; i < v.size(); ++i)
          if (!free[i]) v[i] = 0.0;
        return v;
      };

      // Two-loop recursion restricted to the free variables.
      VecX q = mask(g);
      const std::size_t mem = s_hist.size();
      std::vector<double> alpha(mem);
      std::vector<double> rho(mem);
      for (std::size_t k = mem; k-- > 0;) {
        const VecX sk = mask(s_hist[k]);
        const VecX yk = mask(y_hist[k]);
        const double sy = sk.dot(yk);
        rho[k] = sy > 0.0 ? 1.0 / sy : 0.0;
        alpha[k] = rho[k] * sk.dot(q);
        q -= alpha[k] * yk;
      }
      VecX r = h0.cwiseProduct(q);
      for (std::size_t k = 0; k < mem; ++k) {
        const VecX sk = mask(s_hist[k]);
        const VecX yk = mask(y_hist[k]);
        const double beta = rho[k] * yk.dot(r);
        r += sk * (alpha[k] - beta);
      }
      VecX d = -mask(r);
      if (!(g.dot(d) < 0.0)) {
        d = -mask(h0.cwiseProduct(g));
        s_hist.clear();
        y_hist.clear();
      }

      double t = 1.0;
      const double t_first = t;
      bool accepted = false;
      VecX x_new;
      double f_new = fx;
      for (int ls = 0; ls < 60; ++ls) {
        x_new = project(x + t * d, lo, hi);
        const VecX step = x_new - x;
        if (step.lpNorm<Eigen::Infinity>() == 0.0) break;
        const double slope = g.dot(step);
        if (!(slope < 0.0)) {
          // Projection turned the step uphill; shorter steps bend less.
          t *= 0.5;
          continue;
        }
        f_new = f(x_new);
        if (f_new <= fx + 1e-4 * slope) {
          accepted = true;
          break;
        }
        // Safeguarded quadratic backtracking.
        const double denom = 2.0 * (f_new - fx - slope);
        double shrink = denom > 0.0 ? -slope / denom : 0.5;
        shrink = std::clamp(shrink, 0.1, 0.5);
        t *= shrink;
      }
      // Near-linear or concave along d (flat log-power plateaus): keep doubling.
      if (accepted && t == t_first) {
        for (int ex = 0; ex < 40; ++ex) {
          const double slope = g.dot(x_new - x);
          if (!(slope < 0.0) || !(fx - f_new > 0.75 * -slope)) break;
          const VecX x_try = project(x + 2.0 * t * d, lo, hi);
          if ((x_try - x_new).lpNorm<Eigen::Infinity>() == 0.0) break;
          const double f_try = f(x_try);
          if (!(f_try < f_new)) break;
          t *= 2.0;
          x_new = x_try;
          f_new = f_try;
        }
      }
      if (!accepted) {
        if (!s_hist.empty()) {
          s_hist.clear();
          y_hist.clear();
          continue;
        }
        result.reason = "line search failed";
        result.converged = true;
        break;
      }

      const VecX s = x_new - x;
      VecX curv_new;
      const VecX g_new = central_stencil(f, x_new, f_new, options.relative_step, &curv_new);
      const VecX y = g_new - g;
      if (s.dot(y) > 1e-12 * y.squaredNorm()) {
        s_hist.push_back(s);
        y_hist.push_back(y);
        if (static_cast<Index>(s_hist.size()) > options.memory) {
          s_hist.pop_front();
          y_hist.pop_front();
        }
      }
      const double decrease = fx - f_new;
      const double scale = std::max({std::abs(fx), std::abs(f_new), 1.0});
      x = x_new;
      fx = f_new;
      g = g_new;
      curv = curv_new;
      result.x = x;
      result.f = fx;
      result.iterations = iter + 1;
      result.trace.push_back(fx);
      if (decrease <= options.energy_tol * scale) {
        result.converged = true;
        result.reason = "energy change below tolerance";
        break;
      }
      if (s.lpNorm<Eigen::Infinity>() <= options.step_tol * std::max(1.0, x.lpNorm<Eigen::Infinity>())) {
        result.converged = true;
        result.reason = "step below tolerance";
        break;
      }
      if (result.iterations == options.max_iterations) result.reason = "iteration limit";
    }
  } catch (const CountedObjective::BudgetExhausted&) {
    result.reason = "evaluation budget exhausted";
  }
  if (result.x.size() == 0) {
    result.x = x;
    result.f = fx;
  }
  return result;
}

}  // namespace cmfbeam
