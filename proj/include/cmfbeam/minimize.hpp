// SPDX-License-Identifier: Apache-2.0
//
// cmfbeam: broadband covariance-matrix-fitting beamforming
// ------------------------------------------------------------------------
//
// Box-constrained minimizers over plain vectors: a projected limited-memory
// BFGS with central finite-difference gradients, and generalized simulated
// annealing with periodic local refinement (dual annealing).

#pragma once

#include "cmfbeam/types.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace cmfbeam {

using Objective = std::function<double(const VecX&)>;

/// Wraps an objective with an evaluation budget and remembers the best
/// in-bounds point ever evaluated. Calls past the budget throw
/// BudgetExhausted, which the minimizers catch.
class CountedObjective {
 public:
  struct BudgetExhausted {};

  CountedObjective(Objective fn, VecX lower, VecX upper, Index budget);

  double operator()(const VecX& x);

  Index evaluations() const { return evaluations_; }
  Index budget() const { return budget_; }
  bool exhausted() const { return evaluations_ >= budget_; }
  bool has_best() const { return best_x_.size() > 0; }
  const VecX& best_x() const { return best_x_; }
  double best_f() const { return best_f_; }
  const VecX& lower() const { return lower_; }
  const VecX& upper() const { return upper_; }

 private:
  Objective fn_;
  VecX lower_;
  VecX upper_;
  Index budget_;
  Index evaluations_ = 0;
  VecX best_x_;
  double best_f_ = std::numeric_limits<double>::infinity();
};

/// Central differences with step h_i = relative_step[i] * max(1, |x_i|).
VecX central_gradient(CountedObjective& f, const VecX& x, const VecX& relative_step);

struct LbfgsOptions {
  Index memory = 10;
  Index max_iterations = 15000;
  /// Stop when the infinity norm of the projected gradient falls below this.
  double gradient_tol = 1e-10;
  /// Stop when (f_k - f_{k+1}) <= energy_tol * max(|f_k|, |f_{k+1}|, 1).
  double energy_tol = 1e-12;
  /// Stop when the step's infinity norm <= step_tol * max(1, |x|_inf).
  double step_tol = 1e-15;
  VecX relative_step;  ///< finite-difference steps; empty means 1e-6 everywhere
  /// Largest diagonal step per coordinate where curvature is negligible;
  /// empty means 1 everywhere.
  VecX step_unit;
};

struct MinimizeResult {
  VecX x;
  double f = std::numeric_limits<double>::infinity();
  Index iterations = 0;
  bool converged = false;
  std::string reason;
  std::vector<double> trace;  ///< best-so-far energy per iteration
};

/// Projected L-BFGS on the box [lower, upper] (infinite bounds allowed).
/// Accepted steps never increase f.
MinimizeResult minimize_lbfgsb(CountedObjective& f, const VecX& x0, const LbfgsOptions& options);

struct AnnealingOptions {
  double initial_temperature = 5230.0;
  double visiting = 2.62;
  double acceptance = -5.0;
  double restart_temperature_ratio = 2e-5;
  Index max_iterations = 1000;
  bool local_search = true;
  std::uint64_t seed = 1;
};

/// Generalized simulated annealing (Tsallis-Stariolo visiting distribution,
/// generalized Metropolis acceptance) with L-BFGS refinement of improved
/// points. Requires finite bounds. `x0`, if non-empty, seeds the chain.
MinimizeResult dual_annealing(CountedObjective& f, const AnnealingOptions& options, const LbfgsOptions& local,
                              const VecX& x0 = VecX());

}  // namespace cmfbeam
