// SPDX-License-Identifier: Apache-2.0
//
// cmfbeam: broadband covariance-matrix-fitting beamforming
// ------------------------------------------------------------------------

#include "cmfbeam/minimize.hpp"

#include "doctest.h"

#include <cmath>
#include <vector>

using namespace cmfbeam;
using doctest::Approx;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

double rosenbrock(const VecX& x) {
  double f = 0.0;
  for (Index i = 0; i + 1 < x.size(); ++i) f += 100.0 * std::pow(x[i + 1] - x[i] * x[i], 2) + std::pow(1.0 - x[i], 2);
  return f;
}

double rastrigin(const VecX& x) {
  double f = 10.0 * static_cast<double>(x.size());
  for (Index i = 0; i < x.size(); ++i) f += x[i] * x[i] - 10.0 * std::cos(kTwoPi * x[i]);
  return f;
}

}  // namespace

TEST_CASE("counted objective") {
  CountedObjective f([](const VecX& x) { return x.squaredNorm(); }, VecX::Constant(2, -1.0), VecX::Constant(2, 1.0), 3);
  CHECK(f(VecX::Constant(2, 0.5)) == 0.5);
  CHECK(f(VecX::Constant(2, 2.0)) == 8.0);  // outside: not remembered as best
  CHECK(f.best_f() == 0.5);
  CHECK(f(VecX::Constant(2, 0.1)) == Approx(0.02));
  CHECK(f.exhausted());
  CHECK_THROWS_AS(f(VecX::Zero(2)), CountedObjective::BudgetExhausted);
  CHECK(f.evaluations() == 3);

  CHECK_THROWS_AS(CountedObjective([](const VecX&) { return 0.0; }, VecX::Ones(1), VecX::Zero(1), 10),
                  std::invalid_argument);
  CHECK_THROWS_AS(CountedObjective([](const VecX&) { return 0.0; }, VecX::Zero(1), VecX::Ones(2), 10),
                  std::invalid_argument);
  CHECK_THROWS_AS(CountedObjective([](const VecX&) { return 0.0; }, VecX::Zero(1), VecX::Ones(1), 0),
                  std::invalid_argument);
}

TEST_CASE("central differences are second-order accurate") {
  CountedObjective f([](const VecX& x) { return std::sin(x[0]) * std::exp(x[1]); }, VecX::Constant(2, -inf),
                     VecX::Constant(2, inf), 100);
  const VecX x = (VecX(2) << 0.7, -0.3).finished();
  const VecX g = central_gradient(f, x, VecX());
  CHECK(g[0] == Approx(std::cos(0.7) * std::exp(-0.3)).epsilon(1e-9));
  CHECK(g[1] == Approx(std::sin(0.7) * std::exp(-0.3)).epsilon(1e-9));
  CHECK(f.evaluations() == 4);
}

TEST_CASE("projected L-BFGS") {
  SUBCASE("unconstrained Rosenbrock") {
    CountedObjective f(rosenbrock, VecX::Constant(4, -inf), VecX::Constant(4, inf), 100000);
    const MinimizeResult r = minimize_lbfgsb(f, VecX::Constant(4, -1.2), LbfgsOptions{});
    CHECK(r.converged);
    CHECK((r.x - VecX::Ones(4)).lpNorm<Eigen::Infinity>() < 1e-5);
    CHECK(r.f < 1e-10);
  }
  SUBCASE("minimum on an active bound") {
    // min (x0 - 2)^2 + (x1 + 3)^2 on [-1, 1]^2 is the corner (1, -1).
    CountedObjective f([](const VecX& x) { return std::pow(x[0] - 2.0, 2) + std::pow(x[1] + 3.0, 2); },
                       VecX::Constant(2, -1.0), VecX::Constant(2, 1.0), 10000);
    const MinimizeResult r = minimize_lbfgsb(f, VecX::Zero(2), LbfgsOptions{});
    CHECK(r.x[0] == 1.0);
    CHECK(r.x[1] == -1.0);
    CHECK(r.f == Approx(5.0));
  }
  SUBCASE("iterates stay feasible and the trace never increases") {
    const VecX lo = (VecX(3) << -0.5, 0.2, -inf).finished();
    const VecX hi = (VecX(3) << 0.5, 3.0, 0.9).finished();
    CountedObjective f(rosenbrock, lo, hi, 100000);
    const MinimizeResult r = minimize_lbfgsb(f, VecX::Constant(3, 5.0), LbfgsOptions{});
    CHECK(((r.x.array() >= lo.array()) && (r.x.array() <= hi.array())).all());
    for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] <= r.trace[i - 1]);
  }
  SUBCASE("step units bound the first diagonal step") {
    std::vector<double> seen;
    CountedObjective f(
        [&](const VecX& x) {
          seen.push_back(x[0]);
          return x[0];
        },
        VecX::Constant(1, -inf), VecX::Constant(1, inf), 4);
    LbfgsOptions o;
    o.max_iterations = 1;
    o.step_unit = VecX::Constant(1, 1e-3);
    minimize_lbfgsb(f, VecX::Zero(1), o);
    // Start, two stencil points, then the first line-search trial.
    REQUIRE(seen.size() == 4);
    CHECK(seen[3] == Approx(-1e-3).epsilon(1e-6));
    o.step_unit = VecX::Constant(1, -1.0);
    CHECK_THROWS_AS(minimize_lbfgsb(f, VecX::Zero(1), o), std::invalid_argument);
  }
  SUBCASE("budget exhaustion returns the last accepted point") {
    CountedObjective f(rosenbrock, VecX::Constant(4, -inf), VecX::Constant(4, inf), 50);
    const MinimizeResult r = minimize_lbfgsb(f, VecX::Constant(4, -1.2), LbfgsOptions{});
    CHECK(r.reason == "evaluation budget exhausted");
    CHECK(f.evaluations() == 50);
    CHECK(r.f <= rosenbrock(VecX::Constant(4, -1.2)));
  }
}

TEST_CASE("dual annealing") {
  const VecX lo = VecX::Constant(4, -5.12);
  const VecX hi = VecX::Constant(4, 5.12);
  AnnealingOptions a;
  a.seed = 3;
  SUBCASE("finds the global minimum of Rastrigin") {
    CountedObjective f(rastrigin, lo, hi, 200000);
    const MinimizeResult r = dual_annealing(f, a, LbfgsOptions{});
    CHECK(r.f < 1e-8);
    CHECK(r.x.lpNorm<Eigen::Infinity>() < 1e-4);
    CHECK(f.evaluations() <= 200000);
  }
  SUBCASE("deterministic for a fixed seed, different for another") {
    a.max_iterations = 50;
    CountedObjective f1(rastrigin, lo, hi, 200000);
    CountedObjective f2(rastrigin, lo, hi, 200000);
    const MinimizeResult r1 = dual_annealing(f1, a, LbfgsOptions{});
    const MinimizeResult r2 = dual_annealing(f2, a, LbfgsOptions{});
    CHECK(r1.x == r2.x);
    CHECK(r1.trace == r2.trace);
    CHECK(f1.evaluations() == f2.evaluations());
    a.seed = 4;
    CountedObjective f3(rastrigin, lo, hi, 200000);
    CHECK(dual_annealing(f3, a, LbfgsOptions{}).trace != r1.trace);
  }
  SUBCASE("respects a small budget") {
    CountedObjective f(rastrigin, lo, hi, 500);
    const MinimizeResult r = dual_annealing(f, a, LbfgsOptions{});
    CHECK(f.evaluations() == 500);
    CHECK(r.reason == "evaluation budget exhausted");
    CHECK(std::isfinite(r.f));
  }
  SUBCASE("rejects unusable settings") {
    CountedObjective f(rastrigin, lo, hi, 100);
    a.visiting = 3.5;
    CHECK_THROWS_AS(dual_annealing(f, a, LbfgsOptions{}), std::invalid_argument);
    CountedObjective unbounded(rastrigin, VecX::Constant(4, -inf), hi, 100);
    CHECK_THROWS_AS(dual_annealing(unbounded, AnnealingOptions{}, LbfgsOptions{}), std::invalid_argument);
  }
}
