// Copyright 2026 The Sweep Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sweep/optimizer.hpp"

#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "sweep/dynamics.hpp"
#include "test_problems.hpp"

namespace sweep {
namespace {

using ::sweep::testing::V;

SolveOptions FastOptions() {
  SolveOptions o;
  o.multistart = 3;
  return o;
}

TEST(SolveDiscreteTest, ScalarContactReachesKnownOptimum) {
  const DiscreteProblem dp =
      make_discrete_problem(::sweep::testing::ScalarContactProblem(), 200);
  const DiscreteSolution sol = solve_discrete(dp, FastOptions());
  EXPECT_EQ(sol.status, SolveStatus::kConverged);
  EXPECT_NEAR(sol.cost, 0.25, 5e-3);
  for (int j = 0; j <= 200; ++j) EXPECT_NEAR(sol.z.a(j, 0), -0.5, 1e-2) << j;
  EXPECT_LE(sol.max_violation, 1e-7);
  EXPECT_LE(sol.stationarity, 1e-6);
}

TEST(SolveDiscreteTest, PlanarBoundaryProblemHasUnitCost) {
  const DiscreteProblem dp =
      make_discrete_problem(::sweep::testing::PlanarBoundaryProblem(), 200);
  const DiscreteSolution sol = solve_discrete(dp);
  EXPECT_EQ(sol.status, SolveStatus::kConverged);
  EXPECT_NEAR(sol.cost, 1.0, 1e-2);
  // The terminal state touches the boundary of x - u in the orthant
  // complement.
  const Vec end = sol.z.X(200) - sol.z.U(200);
  EXPECT_NEAR(end.maxCoeff(), 0.0, 1e-6);
  ASSERT_TRUE(sol.kkt_multipliers.count("terminal_boundary"));
}

// Away from contact the problem is an unconstrained least-squares problem:
// x_k = x0 - h sum_j a_j, with cost |x_k - target|^2/2 + h sum |a_j|^2/2,
// whose minimizer is the constant control (x0 - target) / (T + 1).
TEST(SolveDiscreteTest, InteriorProblemMatchesLeastSquaresOracle) {
  SweepingProblem p;
  p.n = p.d = 2;
  p.T = 2.0;
  p.x0 = V({0.5, -0.3});
  p.C = Polyhedron(Mat::Identity(2, 2));
  p.u_path = LinearPath::Constant(V({10.0, 10.0}));
  p.r = p.u_path.value.norm();
  p.f = Perturbation::Identity();
  p.phi.weight = 1.0;
  p.phi.target = V({1.0, -2.0});
  RunningTerm ctl;
  ctl.kind = RunningTerm::Kind::kControlQuadratic;
  p.ell.terms = {ctl};
  const int k = 40;
  const DiscreteProblem dp = make_discrete_problem(p, k);
  const DiscreteSolution sol = solve_discrete(dp, FastOptions());
  const Vec a_star = (p.x0 - p.phi.target) / (p.T + 1.0);
  for (int j = 0; j < k; ++j) {
    EXPECT_LE((sol.z.A(j) - a_star).norm(), 1e-6) << j;
  }
  const double cost_star =
      0.5 * (p.x0 - p.T * a_star - p.phi.target).squaredNorm() +
      0.5 * p.T * a_star.squaredNorm();
  EXPECT_NEAR(sol.cost, cost_star, 1e-9);

  // Without a running cost the terminal target is reached exactly.
  p.ell.terms.clear();
  const DiscreteSolution free_sol =
      solve_discrete(make_discrete_problem(p, k), FastOptions());
  EXPECT_NEAR(free_sol.cost, 0.0, 1e-10);
  EXPECT_LE((free_sol.z.X(k) - p.phi.target).norm(), 1e-5);
}

TEST(SolveDiscreteTest, DeterministicForFixedSeed) {
  const DiscreteProblem dp =
      make_discrete_problem(::sweep::testing::PlanarBoundaryProblem(), 40);
  SolveOptions o;
  o.multistart = 4;
  o.seed = 17;
  const DiscreteSolution s1 = solve_discrete(dp, o);
  const DiscreteSolution s2 = solve_discrete(dp, o);
  o.parallel = false;
  const DiscreteSolution s3 = solve_discrete(dp, o);
  EXPECT_EQ(s1.cost, s2.cost);
  EXPECT_EQ(s1.z.a, s2.z.a);
  EXPECT_EQ(s1.z.x, s2.z.x);
  EXPECT_EQ(s1.start_index, s3.start_index);
  EXPECT_EQ(s1.z.a, s3.z.a);
}

TEST(SolveDiscreteTest, MeritNeverIncreasesWithinAnOuterIteration) {
  const DiscreteProblem dp =
      make_discrete_problem(::sweep::testing::PlanarBoundaryProblem(), 60);
  SolveOptions o;
  o.multistart = 1;
  const DiscreteSolution sol = solve_discrete(dp, o);
  ASSERT_FALSE(sol.merit_history.empty());
  std::vector<int> breaks = sol.outer_breaks;
  breaks.push_back(static_cast<int>(sol.merit_history.size()));
  for (size_t b = 0; b + 1 < breaks.size(); ++b) {
    for (int i = breaks[b] + 1; i < breaks[b + 1]; ++i) {
      EXPECT_LE(sol.merit_history[i], sol.merit_history[i - 1]);
    }
  }
}

TEST(SolveDiscreteTest, CostDoesNotIncreaseUnderMeshDoubling) {
  const SweepingProblem p = ::sweep::testing::ScalarContactProblem();
  double prev = std::numeric_limits<double>::infinity();
  for (int k : {50, 100, 200, 400}) {
    const DiscreteSolution sol =
        solve_discrete(make_discrete_problem(p, k), FastOptions());
    EXPECT_LE(sol.cost, prev + 1e-6) << k;
    prev = sol.cost;
  }
}

TEST(SolveDiscreteTest, SmoothQuadraticTrackingRecoversCandidate) {
  const int k = 100;
  const DiscreteProblem dp =
      make_discrete_problem(::sweep::testing::KinkProblem(1.0, 0.0), k);
  const DiscreteSolution sol = solve_discrete(dp, FastOptions());
  EXPECT_EQ(sol.status, SolveStatus::kConverged);
  EXPECT_LE(sol.cost, 1e-3);
  for (int j = 0; j < k; ++j) {
    EXPECT_NEAR(sol.z.a(j, 0), -2.0 * dp.mesh.t(j), 2e-2) << j;
  }
}

TEST(SolveDiscreteTest, KinkedCostImprovesOnSmoothCandidate) {
  const int k = 100;
  const SweepingProblem p = ::sweep::testing::KinkProblem(2.0, 0.5);
  const DiscreteProblem dp = make_discrete_problem(p, k);
  const DiscreteTrajectory candidate = catching_up(
      p, [](double) { return V({2.0}); },
      [](double t) { return V({-2.0 * t}); }, k);
  const double candidate_cost = assemble_cost(dp, candidate).value;
  EXPECT_NEAR(candidate_cost, 0.5 * 1.25, 2e-2);
  const DiscreteSolution sol = solve_discrete(dp, FastOptions());
  EXPECT_LE(sol.max_violation, 1e-7);
  EXPECT_LT(sol.cost, candidate_cost - 0.1);
}

TEST(SolveDiscreteTest, ControlledNormConstraintIsHonoured) {
  SweepingProblem p = ::sweep::testing::PlanarBoundaryProblem();
  p.u_decision = true;
  p.terminal_on_boundary = false;
  p.phi.weight = 1.0;
  p.phi.target = V({1.0, 1.0});
  p.tau = 0.2;
  const DiscreteProblem dp = make_discrete_problem(p, 40);
  const DiscreteSolution sol = solve_discrete(dp, FastOptions());
  EXPECT_LE(sol.max_violation, 1e-7);
  for (int j = dp.j_lower(); j <= dp.j_upper(); ++j) {
    EXPECT_NEAR(sol.z.U(j).norm(), p.r, 1e-12);
  }
}

TEST(RefineGridTest, WarmStartNeedsFewerIterations) {
  const SweepingProblem p = ::sweep::testing::ScalarContactProblem();
  SolveOptions o;
  o.multistart = 1;
  const DiscreteProblem coarse = make_discrete_problem(p, 100);
  const DiscreteSolution csol = solve_discrete(coarse, o);
  const Refinement ref = refine_grid(coarse, csol, 200);
  const DiscreteSolution warm = solve_discrete(ref.dp, o, ref.warm_start);
  const DiscreteSolution cold = solve_discrete(ref.dp, o);
  EXPECT_LT(warm.iterations, cold.iterations);
  EXPECT_NEAR(warm.cost, cold.cost, 1e-6);
}

TEST(RefineGridTest, ConstantSolutionInterpolatesToItself) {
  const SweepingProblem p = ::sweep::testing::ScalarContactProblem();
  const DiscreteProblem coarse = make_discrete_problem(p, 10);
  DiscreteSolution sol;
  sol.z = catching_up(
      p, [](double) { return V({0.5}); }, [](double) { return V({-0.3}); }, 10);
  const Refinement ref = refine_grid(coarse, sol, 30);
  for (int j = 0; j <= 30; ++j) {
    EXPECT_NEAR(ref.warm_start.a(j, 0), -0.3, 1e-15);
    EXPECT_NEAR(ref.warm_start.u(j, 0), 0.5, 1e-15);
  }
}

TEST(RefineGridTest, FeasibilityIsPreserved) {
  SweepingProblem p = ::sweep::testing::PlanarBoundaryProblem();
  p.u_decision = true;
  p.terminal_on_boundary = false;
  p.tau = 0.25;
  const DiscreteProblem coarse = make_discrete_problem(p, 20);
  const DiscreteSolution sol = solve_discrete(coarse, FastOptions());
  const Refinement ref = refine_grid(coarse, sol, 80);
  const double coarse_res = constraint_residuals(coarse, sol.z).Max();
  EXPECT_LE(constraint_residuals(ref.dp, ref.warm_start).Max(),
            2.0 * coarse_res + 1e-12);
}

TEST(RefineGridTest, RejectsNonMultiples) {
  const DiscreteProblem dp =
      make_discrete_problem(::sweep::testing::ScalarContactProblem(), 10);
  DiscreteSolution sol;
  sol.z = feasible_seed(dp);
  EXPECT_THROW(refine_grid(dp, sol, 15), Error);
  EXPECT_THROW(refine_grid(dp, sol, 10), Error);
}

// The reduced gradient returned by the adjoint sweep agrees with finite
// differences of the merit function away from contact switches. The
// tolerance includes the round-off floor of the difference quotient.
void ExpectReducedGradientMatches(const SweepingProblem& p,
                                  const TranscriptionOptions& topts) {
  const DiscreteProblem dp = make_discrete_problem(p, 12, std::nullopt, topts);
  const DecisionVector seed = feasible_seed(dp);
  internal::ControlParam param(dp);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  Vec th = param.FromControls(seed.u, seed.a);
  for (Eigen::Index i = 0; i < th.size(); ++i) th(i) += 0.3 * nd(rng);
  th = param.Clamp(th);
  internal::ReducedObjective obj(dp, param, seed);
  obj.mu = Vec::Constant(
      internal::EvalAlConstraints(dp, seed, false).values.size(), 0.7);
  obj.rho = 3.0;
  const internal::EvalResult base = obj.Eval(th);
  const double step = 1e-7;
  const double floor = 1e-14 * std::abs(base.merit) / step;
  for (Eigen::Index i = 0; i < th.size(); ++i) {
    Vec tp = th, tm = th;
    tp(i) += step;
    tm(i) -= step;
    const double fd = (obj.Eval(tp).merit - obj.Eval(tm).merit) / (2 * step);
    EXPECT_NEAR(fd, base.grad(i), 1e-5 * (1 + std::abs(fd)) + floor) << i;
  }
}

TEST(ReducedObjectiveTest, GradientMatchesFiniteDifferences) {
  SweepingProblem p = ::sweep::testing::PlanarBoundaryProblem();
  p.u_decision = true;
  p.tau = 0.3;
  p.f = Perturbation::Affine((Mat(2, 2) << 0.2, -0.1, 0.3, 0.1).finished(),
                             Mat::Identity(2, 2), V({0.05, 0.0}));
  TranscriptionOptions loose;
  loose.mu_tilde = 1e3;  // budgets inactive
  ExpectReducedGradientMatches(p, loose);
  ExpectReducedGradientMatches(p, {});  // both budgets active
  // Contact during the horizon: u sits close to x0.
  p.x0 = V({0.95, -0.2});
  p.u_path = LinearPath::Constant(V({1.0, 0.0}));
  p.f = Perturbation::Affine(Mat::Zero(2, 2), Mat::Identity(2, 2),
                             V({-2.0, 0.0}));
  ExpectReducedGradientMatches(p, loose);
}

}  // namespace
}  // namespace sweep
