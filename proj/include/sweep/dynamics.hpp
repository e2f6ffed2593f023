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

// Forward simulation by the catching-up scheme
//
//   x_{j+1} = u_{j+1} + proj_C(x_j - h f(x_j, a_j) - u_{j+1}),
//
// a-priori trajectory bounds, and recovery of the contact multipliers eta.

#ifndef SWEEP_DYNAMICS_HPP_
#define SWEEP_DYNAMICS_HPP_

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "sweep/common.hpp"
#include "sweep/geometry.hpp"
#include "sweep/problem.hpp"

namespace sweep {

using PathFn = std::function<Vec(double)>;

struct CatchingUpRecord {
  DiscreteTrajectory traj;
  Mat multipliers;  // k x m projection multipliers (eta_j = multipliers / h)
};

// Runs the scheme for given node sequences u (k+1 x n) and a (k+1 x d).
// `check_start` may be cleared by callers that treat x0 - u_0 in C as a
// separate constraint.
inline CatchingUpRecord CatchingUpSequences(const SweepingProblem& problem,
                                            const Mesh& mesh, const Mat& u,
                                            const Mat& a,
                                            bool check_start = true) {
  const int k = mesh.k();
  const int n = problem.n;
  if (u.rows() != k + 1 || u.cols() != n || a.rows() != k + 1 ||
      a.cols() != problem.d) {
    throw Error(ErrorCode::kDimensionMismatch, "control sequence shape");
  }
  const Vec u0 = u.row(0).transpose();
  if (check_start &&
      !problem.C.Contains(problem.x0 - u0, DefaultTol(problem.x0))) {
    throw Error(ErrorCode::kInfeasibleStart,
                "x0 - u(0) is outside the polyhedron");
  }
  CatchingUpRecord rec;
  rec.traj.mesh = mesh;
  rec.traj.u = u;
  rec.traj.a = a;
  rec.traj.x = Mat::Zero(k + 1, n);
  rec.traj.x.row(0) = problem.x0.transpose();
  rec.multipliers = Mat::Zero(k, problem.C.size());
  const double h = mesh.h();
  for (int j = 0; j < k; ++j) {
    const Vec xj = rec.traj.x.row(j).transpose();
    const Vec aj = a.row(j).transpose();
    const Vec z = xj - h * problem.f.Eval(xj, aj);
    const Projection pr =
        ProjectWithMultipliers(z, problem.C, u.row(j + 1).transpose());
    rec.traj.x.row(j + 1) = pr.point.transpose();
    if (problem.C.size() > 0) rec.multipliers.row(j) = pr.multipliers;
  }
  return rec;
}

// Samples the paths at the left nodes of the uniform mesh and simulates.
inline DiscreteTrajectory catching_up(const SweepingProblem& problem,
                                      const PathFn& u_path,
                                      const PathFn& a_path, int k) {
  const Mesh mesh(k, problem.T);
  Mat u(k + 1, problem.n), a(k + 1, problem.d);
  for (int j = 0; j <= k; ++j) {
    const Vec uj = u_path(mesh.t(j));
    const Vec aj = a_path(mesh.t(j));
    RequireSize(uj, problem.n, "u_path value");
    RequireSize(aj, problem.d, "a_path value");
    u.row(j) = uj.transpose();
    a.row(j) = aj.transpose();
  }
  return CatchingUpSequences(problem, mesh, u, a).traj;
}

struct AprioriBounds {
  double l = 0.0;
  std::function<double(double)> vbound;
};

// l = ||x0|| + e^{2MT} (2MT (1 + ||x0||) + int ||u'||) and
// vbound(t) = 2 (1 + l) M + ||u'(t)||. `u_rate` returns u'(t); its integral
// is evaluated by the composite midpoint rule on 2000 panels.
inline AprioriBounds apriori_bounds(const SweepingProblem& problem,
                                    const PathFn& u_rate,
                                    std::optional<double> growth = {}) {
  const std::optional<double> m_opt = growth ? growth : problem.M;
  if (!m_opt) {
    throw Error(ErrorCode::kConfigError,
                "a-priori bounds need the growth constant M");
  }
  const double m = *m_opt;
  const double T = problem.T;
  const int panels = 2000;
  double u_var = 0.0;
  for (int i = 0; i < panels; ++i) {
    u_var += u_rate((i + 0.5) * T / panels).norm() * (T / panels);
  }
  const double x0n = problem.x0.norm();
  AprioriBounds out;
  out.l = x0n + std::exp(2.0 * m * T) * (2.0 * m * T * (1.0 + x0n) + u_var);
  const double l = out.l;
  out.vbound = [l, m, u_rate](double t) {
    return 2.0 * (1.0 + l) * m + u_rate(t).norm();
  };
  return out;
}

inline AprioriBounds apriori_bounds(const SweepingProblem& problem,
                                    const LinearPath& u,
                                    std::optional<double> growth = {}) {
  const Vec rate = u.Rate();
  return apriori_bounds(problem, [rate](double) { return rate; }, growth);
}

// Normal-cone residual vector of interval j: -(x_{j+1}-x_j)/h - f(x_j, a_j).
inline Vec NormalVelocity(const SweepingProblem& problem,
                          const DiscreteTrajectory& traj, int j) {
  return -traj.XDot(j) - problem.f.Eval(traj.X(j), traj.A(j));
}

// Multipliers eta (k x m) of the discrete inclusion. The normal cone is taken
// at the end node of each interval, x_{j+1} - u_{j+1}, which is where the
// catching-up scheme places it; at the start node the inclusion fails on the
// interval where contact begins.
inline Mat eta_from_trajectory(const DiscreteTrajectory& traj,
                               const SweepingProblem& problem,
                               double tol = -1.0) {
  const int k = traj.k();
  const int m = problem.C.size();
  Mat eta = Mat::Zero(k, m);
  for (int j = 0; j < k; ++j) {
    const Vec pos = traj.X(j + 1) - traj.U(j + 1);
    const Vec v = NormalVelocity(problem, traj, j);
    const double t = tol > 0 ? tol : DefaultTol(pos) * (1.0 + v.norm());
    const ActiveSet act = active_set(pos, problem.C, t);
    RequireIndependent(problem.C, act.indices);
    const ConeDecomposition dec = decompose_normal(v, pos, problem.C, t);
    eta.row(j) = dec.Dense(m).transpose();
  }
  return eta;
}

// Residual of the explicit (start-node) form of the discrete inclusion on
// each interval: distance of the normal velocity from N(x_j - u_j; C). It is
// O(h) away from contact onsets for catching-up trajectories.
inline Vec ExplicitInclusionResidual(const SweepingProblem& problem,
                                     const DiscreteTrajectory& traj) {
  const int k = traj.k();
  Vec res = Vec::Zero(k);
  for (int j = 0; j < k; ++j) {
    const Vec pos = traj.X(j) - traj.U(j);
    const Vec v = NormalVelocity(problem, traj, j);
    const double viol = problem.C.MaxViolation(pos);
    const double tol = DefaultTol(pos);
    if (viol > tol) {
      res(j) = std::max(viol, v.norm());
      continue;
    }
    res(j) = FitNormal(v, pos, problem.C, tol).residual;
  }
  return res;
}

}  // namespace sweep

#endif  // SWEEP_DYNAMICS_HPP_
