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

#include "sweep/dynamics.hpp"

#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "test_problems.hpp"

namespace sweep {
namespace {

using ::sweep::testing::V;

PathFn Const(const Vec& v) {
  return [v](double) { return v; };
}

// Two-participant corridor embedded as a sweeping problem.
SweepingProblem Corridor(const Vec& speeds, const Vec& x0, double radius) {
  const int n = static_cast<int>(speeds.size());
  SweepingProblem p;
  p.n = p.d = n;
  p.T = 6.0;
  p.x0 = x0;
  p.C = ChainPolyhedron(n);
  p.f = Perturbation::DiagSpeeds(speeds);
  Vec ubar(n);
  for (int i = 0; i < n; ++i) ubar(i) = 100.0 + 2.0 * radius * i;
  p.u_path = LinearPath::Constant(ubar);
  p.r = ubar.norm();
  return p;
}

TEST(CatchingUpTest, ScalarContactFollowsHalfSlope) {
  const SweepingProblem p = ::sweep::testing::ScalarContactProblem();
  const DiscreteTrajectory tr =
      catching_up(p, Const(V({0.5})), Const(V({-0.5})), 100);
  for (int j = 0; j <= 100; ++j) {
    EXPECT_NEAR(tr.x(j, 0), tr.mesh.t(j) / 2.0, 1e-9);
  }
}

TEST(CatchingUpTest, NoPerturbationKeepsState) {
  SweepingProblem p = ::sweep::testing::ScalarContactProblem();
  p.f = Perturbation::Affine(Mat::Zero(1, 1), Mat::Zero(1, 1), V({0.0}));
  p.x0 = V({-1.0});
  const DiscreteTrajectory tr = catching_up(
      p, [](double t) { return V({0.5 - 0.2 * t}); }, Const(V({3.0})), 50);
  for (int j = 0; j <= 50; ++j) EXPECT_EQ(tr.x(j, 0), -1.0);
}

TEST(CatchingUpTest, InfeasibleStartIsRejected) {
  SweepingProblem p = ::sweep::testing::ScalarContactProblem();
  p.x0 = V({1.0});
  try {
    catching_up(p, Const(V({0.5})), Const(V({0.0})), 10);
    FAIL() << "expected InfeasibleStart";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInfeasibleStart);
  }
}

TEST(CatchingUpTest, CorridorMatchesEventArithmetic) {
  const double a2 = -1.1912, a1 = 2 * a2;
  const SweepingProblem p = Corridor(V({6, 3}), V({-60, -48}), 3.0);
  const int k = 6000;
  const DiscreteTrajectory tr =
      catching_up(p, Const(p.u_path.value), Const(V({a1, a2})), k);
  // Free velocities -s_i a_i until the gap closes to 2R, then the common
  // velocity of the pushed pair.
  const double v1 = -6 * a1, v2 = -3 * a2;
  const double t1 = (12.0 - 6.0) / (v1 - v2);
  const double v = (v1 + v2) / 2.0;
  EXPECT_NEAR(t1, 0.5597, 1e-4);
  const double x1_end = -60 + v1 * t1 + v * (6 - t1);
  EXPECT_NEAR(tr.x(k, 0), x1_end, 5 * 6.0 / k * v1);
  EXPECT_NEAR(tr.x(k, 1), x1_end + 6.0, 5 * 6.0 / k * v1);
  EXPECT_NEAR(tr.x(k, 0), -3.40, 1e-2);
  EXPECT_NEAR(tr.x(k, 1), 2.60, 1e-2);
  for (int j = 0; j <= k; ++j) {
    EXPECT_LE(p.C.MaxViolation(tr.X(j) - tr.U(j)), 1e-8);
  }
}

TEST(EtaTest, InteriorMotionHasZeroMultipliers) {
  SweepingProblem p = ::sweep::testing::ScalarContactProblem();
  const DiscreteTrajectory tr =
      catching_up(p, Const(V({0.5})), Const(V({-0.2})), 40);
  const Mat eta = eta_from_trajectory(tr, p);
  EXPECT_EQ(eta.cwiseAbs().maxCoeff(), 0.0);
}

TEST(EtaTest, CorridorContactMultipliers) {
  const double a2 = -1.1912;
  const SweepingProblem p = Corridor(V({6, 3}), V({-60, -48}), 3.0);
  const int k = 600;
  const DiscreteTrajectory tr =
      catching_up(p, Const(p.u_path.value), Const(V({2 * a2, a2})), k);
  const Mat eta = eta_from_trajectory(tr, p);
  for (int j = 0; j < k; ++j) {
    const double t = tr.mesh.t(j + 1);
    if (t > 0.6) EXPECT_NEAR(eta(j, 0), 5.360, 1e-2) << j;
    if (t < 0.55) EXPECT_EQ(eta(j, 0), 0.0) << j;
  }
}

TEST(EtaTest, ThreeParticipantContactMultipliers) {
  const double y = -1.0101;
  const SweepingProblem p = Corridor(V({6, 3, 2}), V({-60, -48, -42}), 3.0);
  const int k = 600;
  const DiscreteTrajectory tr =
      catching_up(p, Const(p.u_path.value), Const(V({3 * y, 1.5 * y, y})), k);
  const Mat eta = eta_from_trajectory(tr, p);
  for (int j = 0; j < k; ++j) {
    const double t = tr.mesh.t(j + 1);
    if (t > 0.45) {
      EXPECT_NEAR(eta(j, 0), -(59.0 / 6.0) * y, 1e-2);
      EXPECT_NEAR(eta(j, 1), -(37.0 / 6.0) * y, 1e-2);
    } else if (t < 0.4) {
      EXPECT_EQ(eta(j, 0), 0.0);
      EXPECT_NEAR(eta(j, 1), -1.25 * y, 1e-9);
    }
  }
}

TEST(EtaTest, ViolatedDynamicsRaiseNotInCone) {
  SweepingProblem p = ::sweep::testing::ScalarContactProblem();
  DiscreteTrajectory tr = catching_up(p, Const(V({0.5})), Const(V({-0.5})), 10);
  tr.x(10, 0) = 0.5;
  tr.x(9, 0) = 0.3;  // moves faster than the control allows, while active
  try {
    eta_from_trajectory(tr, p);
    FAIL() << "expected NotInCone";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotInCone);
  }
}

TEST(AprioriBoundsTest, ClosedForms) {
  SweepingProblem p = ::sweep::testing::ScalarContactProblem();
  p.x0 = V({-2.0});
  LinearPath u;
  u.value = V({0.0});
  u.slope = V({0.3});
  EXPECT_NEAR(apriori_bounds(p, u, 0.0).l, 2.0 + 0.3, 1e-9);
  const AprioriBounds b =
      apriori_bounds(p, LinearPath::Constant(V({0.0})), 0.5);
  EXPECT_NEAR(b.l, 2.0 + std::exp(1.0) * 1.0 * 3.0, 1e-9);
  EXPECT_NEAR(b.vbound(0.2), 2.0 * (1.0 + b.l) * 0.5, 1e-9);
}

TEST(AprioriBoundsTest, CorridorTrajectoryStaysWithinBound) {
  const double a2 = -1.1912;
  SweepingProblem p = Corridor(V({6, 3}), V({-60, -48}), 3.0);
  p.M = 6.0 * std::abs(2 * a2);  // max speed bound
  const DiscreteTrajectory tr =
      catching_up(p, Const(p.u_path.value), Const(V({2 * a2, a2})), 600);
  const double l = apriori_bounds(p, p.u_path).l;
  for (int j = 0; j <= 600; ++j) EXPECT_LE(tr.X(j).norm(), l);
}

// Random affine problems with bounded controls satisfy the growth condition
// with M = max(|A|, |B| sqrt(d) + |c|).
TEST(AprioriBoundsTest, RandomGrowthCompliantProblems) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 3, d = 1 + trial % 2, m = 1 + trial % 3;
    Mat A(n, n), B(n, d), G(m, n);
    Vec c(n), u0(n), du(n), x0(n);
    for (int i = 0; i < n; ++i) {
      c(i) = 0.3 * nd(rng);
      u0(i) = nd(rng);
      du(i) = 0.5 * nd(rng);
      x0(i) = nd(rng);
      for (int j = 0; j < n; ++j) A(i, j) = 0.3 * nd(rng);
      for (int j = 0; j < d; ++j) B(i, j) = 0.3 * nd(rng);
    }
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) G(i, j) = nd(rng);
    }
    SweepingProblem p;
    p.n = n;
    p.d = d;
    p.T = 1.0;
    p.C = Polyhedron(G);
    p.x0 = project(x0, p.C, u0);
    p.f = Perturbation::Affine(A, B, c);
    p.u_path.value = u0;
    p.u_path.slope = du;
    Eigen::JacobiSVD<Mat> sa(A), sb(B);
    const double M = std::max(sa.singularValues()(0),
                              sb.singularValues()(0) * std::sqrt(d) + c.norm());
    Vec a_const(d);
    for (int j = 0; j < d; ++j) a_const(j) = unit(rng);
    const int k = 200;
    const DiscreteTrajectory tr = catching_up(
        p, [&](double t) { return p.u_path.Eval(t); },
        [&](double t) {
          Vec a = a_const;
          a(0) = std::cos(7 * t + trial);
          return a;
        },
        k);
    const AprioriBounds b = apriori_bounds(p, p.u_path, M);
    for (int j = 0; j <= k; ++j) {
      EXPECT_LE(tr.X(j).norm(), b.l) << "trial " << trial;
      EXPECT_LE(p.C.MaxViolation(tr.X(j) - tr.U(j)), 1e-8);
    }
    for (int j = 0; j < k; ++j) {
      EXPECT_LE(tr.XDot(j).norm(), b.vbound(tr.mesh.t(j)) + 1e-6);
    }
  }
}

TEST(CatchingUpTest, MeshRefinementErrorDecays) {
  // x' = -a with a = -cos(t) while inside: x = sin(t) stays below u = 2.
  SweepingProblem p = ::sweep::testing::ScalarContactProblem();
  p.u_path = LinearPath::Constant(V({2.0}));
  double prev = 1e9;
  for (int k : {50, 100, 200, 400, 800}) {
    const DiscreteTrajectory tr = catching_up(
        p, Const(V({2.0})), [](double t) { return V({-std::cos(t)}); }, k);
    double err = 0;
    for (int j = 0; j <= k; ++j) {
      err = std::max(err, std::abs(tr.x(j, 0) - std::sin(tr.mesh.t(j))));
    }
    EXPECT_LE(err, 0.55 * prev + 1e-15);
    prev = err;
  }
}

TEST(ExplicitResidualTest, SmallAwayFromContactOnset) {
  const SweepingProblem p = ::sweep::testing::ScalarContactProblem();
  const DiscreteTrajectory tr =
      catching_up(p, Const(V({0.5})), Const(V({-0.5})), 100);
  const Vec res = ExplicitInclusionResidual(p, tr);
  EXPECT_LE(res.maxCoeff(), 1e-9);
}

}  // namespace
}  // namespace sweep
