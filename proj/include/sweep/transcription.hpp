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

// The discrete-approximation problem on a uniform mesh: cost with optional
// proximity and budget penalties, and a per-family constraint residual
// report.

#ifndef SWEEP_TRANSCRIPTION_HPP_
#define SWEEP_TRANSCRIPTION_HPP_

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sweep/common.hpp"
#include "sweep/dynamics.hpp"
#include "sweep/geometry.hpp"
#include "sweep/problem.hpp"

namespace sweep {

// A decision vector holds full node arrays; the pinned entries (x_0 always,
// u entirely when u is fixed, u_0 and a_0 when a reference is supplied) are
// carried along but never varied. PackDecision / UnpackDecision convert to
// and from the flat vector of free entries.
using DecisionVector = DiscreteTrajectory;

struct TranscriptionOptions {
  std::optional<double> mu_tilde;
  std::optional<double> eps_k;
  double epsilon = 0.5;
  std::optional<bool> proximity_on;
};

struct DiscreteProblem {
  SweepingProblem problem;
  Mesh mesh;
  std::optional<DiscreteTrajectory> reference;
  double epsilon = 0.5;
  double mu_tilde = 10.0;
  double eps_k = 1.0;
  bool proximity_on = false;

  int j_lower() const { return mesh.LowerWindow(problem.tau); }
  int j_upper() const { return mesh.UpperWindow(problem.tau); }
  bool pins_initial_controls() const { return reference.has_value(); }
};

inline DiscreteProblem make_discrete_problem(
    const SweepingProblem& problem, int k,
    std::optional<DiscreteTrajectory> reference = std::nullopt,
    const TranscriptionOptions& opts = {}) {
  problem.Validate();
  DiscreteProblem dp;
  dp.problem = problem;
  dp.mesh = Mesh(k, problem.T);
  if (reference) {
    if (reference->k() != k || reference->x.cols() != problem.n ||
        reference->a.cols() != problem.d) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "reference must be sampled on the same mesh");
    }
  }
  dp.reference = std::move(reference);
  dp.epsilon = opts.epsilon;
  if (dp.reference && !(dp.epsilon > 0.0)) {
    throw Error(ErrorCode::kConfigError, "epsilon must be positive");
  }
  const double seed_rate = problem.u_path.Rate().lpNorm<Eigen::Infinity>();
  dp.mu_tilde = opts.mu_tilde.value_or(10.0 * (1.0 + seed_rate));
  dp.eps_k = opts.eps_k.value_or(1.0 / std::sqrt(static_cast<double>(k)));
  dp.proximity_on = opts.proximity_on.value_or(dp.reference.has_value());
  if (dp.proximity_on && !dp.reference) {
    throw Error(ErrorCode::kConfigError,
                "proximity terms need a reference trajectory");
  }
  return dp;
}

// ---------------------------------------------------------------------------
// Decision packing.

struct FreeMask {
  std::vector<bool> x, u, a;  // per node
};

inline FreeMask DecisionMask(const DiscreteProblem& dp) {
  const int k = dp.mesh.k();
  FreeMask m;
  m.x.assign(k + 1, true);
  m.u.assign(k + 1, dp.problem.u_decision);
  m.a.assign(k + 1, true);
  m.x[0] = false;
  if (dp.pins_initial_controls()) {
    m.u[0] = false;
    m.a[0] = false;
  }
  return m;
}

inline Vec PackDecision(const DiscreteProblem& dp, const DecisionVector& z) {
  const FreeMask m = DecisionMask(dp);
  std::vector<double> out;
  const int k = dp.mesh.k();
  for (int j = 0; j <= k; ++j) {
    if (m.x[j])
      for (int i = 0; i < z.x.cols(); ++i) out.push_back(z.x(j, i));
  }
  for (int j = 0; j <= k; ++j) {
    if (m.u[j])
      for (int i = 0; i < z.u.cols(); ++i) out.push_back(z.u(j, i));
  }
  for (int j = 0; j <= k; ++j) {
    if (m.a[j])
      for (int i = 0; i < z.a.cols(); ++i) out.push_back(z.a(j, i));
  }
  return FromStd(out);
}

// `base` supplies the pinned entries.
inline DecisionVector UnpackDecision(const DiscreteProblem& dp, const Vec& flat,
                                     const DecisionVector& base) {
  const FreeMask m = DecisionMask(dp);
  DecisionVector z = base;
  const int k = dp.mesh.k();
  Eigen::Index p = 0;
  auto take = [&](Mat& arr, const std::vector<bool>& mask) {
    for (int j = 0; j <= k; ++j) {
      if (!mask[j]) continue;
      for (int i = 0; i < arr.cols(); ++i) {
        if (p >= flat.size()) {
          throw Error(ErrorCode::kDimensionMismatch, "decision vector length");
        }
        arr(j, i) = flat(p++);
      }
    }
  };
  take(z.x, m.x);
  take(z.u, m.u);
  take(z.a, m.a);
  if (p != flat.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "decision vector length");
  }
  return z;
}

// ---------------------------------------------------------------------------
// Cost.

struct CostEval {
  double value = 0.0;
  Mat gx, gu, ga;  // gradients with respect to every node entry
};

inline void CheckShape(const DiscreteProblem& dp, const DecisionVector& z) {
  const int k = dp.mesh.k();
  if (z.x.rows() != k + 1 || z.u.rows() != k + 1 || z.a.rows() != k + 1 ||
      z.x.cols() != dp.problem.n || z.u.cols() != dp.problem.n ||
      z.a.cols() != dp.problem.d) {
    throw Error(ErrorCode::kDimensionMismatch,
                "decision arrays do not match the discrete problem");
  }
}

inline RunningPoint PointAt(const DecisionVector& z, int j) {
  RunningPoint p;
  p.t = z.mesh.t(j);
  p.x = z.X(j);
  p.u = z.U(j);
  p.a = z.A(j);
  p.xdot = z.XDot(j);
  p.udot = z.UDot(j);
  p.adot = z.ADot(j);
  return p;
}

// Norm of the first u difference quotient and the summed second-difference
// budget, with gradients.
struct BudgetEval {
  double first = 0.0;
  double second = 0.0;
  Mat g_first, g_second;  // (k+1) x n
};

inline BudgetEval UBudgets(const DiscreteProblem& dp, const Mat& u) {
  const int k = dp.mesh.k();
  const double h = dp.mesh.h();
  BudgetEval b;
  b.g_first = Mat::Zero(k + 1, u.cols());
  b.g_second = Mat::Zero(k + 1, u.cols());
  const Vec d1 = (u.row(1) - u.row(0)).transpose() / h;
  b.first = d1.norm();
  if (b.first > 0) {
    b.g_first.row(1) += d1.transpose() / (b.first * h);
    b.g_first.row(0) -= d1.transpose() / (b.first * h);
  }
  for (int j = 0; j + 2 <= k; ++j) {
    const Vec s =
        (u.row(j + 2) - 2.0 * u.row(j + 1) + u.row(j)).transpose() / h;
    const double nrm = s.norm();
    b.second += nrm;
    if (nrm > 0) {
      const Vec g = s / (nrm * h);
      b.g_second.row(j + 2) += g.transpose();
      b.g_second.row(j + 1) -= 2.0 * g.transpose();
      b.g_second.row(j) += g.transpose();
    }
  }
  return b;
}

inline CostEval assemble_cost(const DiscreteProblem& dp,
                              const DecisionVector& z) {
  CheckShape(dp, z);
  const SweepingProblem& pr = dp.problem;
  const int k = dp.mesh.k();
  const double h = dp.mesh.h();
  CostEval c;
  c.gx = Mat::Zero(k + 1, pr.n);
  c.gu = Mat::Zero(k + 1, pr.n);
  c.ga = Mat::Zero(k + 1, pr.d);
  const Vec xk = z.X(k);
  c.value = pr.phi.Value(xk);
  c.gx.row(k) += pr.phi.Grad(xk).transpose();
  for (int j = 0; j < k; ++j) {
    const RunningEval e = pr.ell.Eval(PointAt(z, j));
    c.value += h * e.value;
    c.gx.row(j) += (h * e.wx - e.vx).transpose();
    c.gx.row(j + 1) += e.vx.transpose();
    c.gu.row(j) += (h * e.wu - e.vu).transpose();
    c.gu.row(j + 1) += e.vu.transpose();
    c.ga.row(j) += (h * e.wa - e.va).transpose();
    c.ga.row(j + 1) += e.va.transpose();
  }
  if (dp.proximity_on) {
    const DiscreteTrajectory& ref = *dp.reference;
    auto prox = [&](const Mat& arr, const Mat& rarr, Mat& g) {
      for (int j = 0; j < k; ++j) {
        const Vec dv =
            (arr.row(j + 1) - arr.row(j) - (rarr.row(j + 1) - rarr.row(j)))
                .transpose() /
            h;
        c.value += h * dv.squaredNorm();
        g.row(j + 1) += 2.0 * dv.transpose();
        g.row(j) -= 2.0 * dv.transpose();
      }
    };
    prox(z.x, ref.x, c.gx);
    prox(z.u, ref.u, c.gu);
    prox(z.a, ref.a, c.ga);
    const BudgetEval b = UBudgets(dp, z.u);
    const double e1 = std::max(0.0, b.first - dp.mu_tilde);
    const double e2 = std::max(0.0, b.second - dp.mu_tilde);
    c.value += e1 * e1 + e2 * e2;
    c.gu += 2.0 * e1 * b.g_first + 2.0 * e2 * b.g_second;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Constraint residuals.

struct ResidualReport {
  double initial = 0.0;            // <g_i, x_0 - u_0> <= 0
  double dynamics = 0.0;           // inclusion residual via cone fit
  double endpoint = 0.0;           // <g_i, x_k - u_k> <= 0
  double norm_band = 0.0;          // ||u_j|| = r / band near the ends
  double trust_sup = 0.0;          // node distance to the reference
  double trust_w12 = 0.0;          // integrated velocity distance
  double budget_first = 0.0;       // first-step u budget
  double budget_second = 0.0;      // summed second-difference u budget
  double terminal_boundary = 0.0;  // x_k - u_k on the boundary (optional)

  double Max() const {
    return std::max({initial, dynamics, endpoint, norm_band, trust_sup,
                     trust_w12, budget_first, budget_second,
                     terminal_boundary});
  }
  std::vector<std::pair<std::string, double>> Entries() const {
    return {{"initial", initial},
            {"dynamics", dynamics},
            {"endpoint", endpoint},
            {"norm_band", norm_band},
            {"trust_sup", trust_sup},
            {"trust_w12", trust_w12},
            {"budget_first", budget_first},
            {"budget_second", budget_second},
            {"terminal_boundary", terminal_boundary}};
  }
};

// Inclusion residual of interval j: constraint violation at the end node if
// it is infeasible, otherwise the cone-fit residual.
inline double IntervalInclusionResidual(const SweepingProblem& pr,
                                        const DecisionVector& z, int j) {
  const Vec pos = z.X(j + 1) - z.U(j + 1);
  const Vec v = -z.XDot(j) - pr.f.Eval(z.X(j), z.A(j));
  const double tol = DefaultTol(pos);
  const double viol = pr.C.size() ? pr.C.MaxViolation(pos) : -1.0;
  if (viol > tol) return viol;
  return FitNormal(v, pos, pr.C, tol).residual;
}

// Signed distance of ||u|| outside [lo, hi].
inline double BandViolation(double s, double lo, double hi) {
  return std::max({0.0, lo - s, s - hi});
}

inline double TerminalBoundaryGap(const SweepingProblem& pr,
                                  const DecisionVector& z) {
  if (pr.C.size() == 0) return 0.0;
  const int k = z.k();
  return std::max(0.0, -pr.C.MaxViolation(z.X(k) - z.U(k)));
}

inline ResidualReport constraint_residuals(const DiscreteProblem& dp,
                                           const DecisionVector& z) {
  CheckShape(dp, z);
  const SweepingProblem& pr = dp.problem;
  const int k = dp.mesh.k();
  const double h = dp.mesh.h();
  ResidualReport rep;
  for (int j = 0; j < k; ++j) {
    rep.dynamics = std::max(rep.dynamics, IntervalInclusionResidual(pr, z, j));
  }
  if (pr.C.size() > 0) {
    rep.initial = std::max(0.0, pr.C.MaxViolation(z.X(0) - z.U(0)));
    rep.endpoint = std::max(0.0, pr.C.MaxViolation(z.X(k) - z.U(k)));
  }
  if (pr.u_decision) {
    const int lo = dp.j_lower(), hi = dp.j_upper();
    for (int j = 0; j <= k; ++j) {
      const double s = z.U(j).norm();
      double v;
      if (j >= lo && j <= hi) {
        v = std::abs(s - pr.r);
      } else {
        v = BandViolation(s, pr.r - pr.tau - dp.eps_k,
                          pr.r + pr.tau + dp.eps_k);
      }
      rep.norm_band = std::max(rep.norm_band, v);
    }
  }
  if (dp.reference && dp.proximity_on) {
    const DiscreteTrajectory& ref = *dp.reference;
    double w12 = 0.0;
    for (int j = 0; j < k; ++j) {
      const double node = std::sqrt((z.X(j) - ref.X(j)).squaredNorm() +
                                    (z.U(j) - ref.U(j)).squaredNorm() +
                                    (z.A(j) - ref.A(j)).squaredNorm());
      rep.trust_sup = std::max(rep.trust_sup, node - dp.epsilon / 2.0);
      w12 += h * ((z.XDot(j) - ref.XDot(j)).squaredNorm() +
                  (z.UDot(j) - ref.UDot(j)).squaredNorm() +
                  (z.ADot(j) - ref.ADot(j)).squaredNorm());
    }
    rep.trust_w12 = std::max(0.0, w12 - dp.epsilon / 2.0);
  }
  const BudgetEval b = UBudgets(dp, z.u);
  rep.budget_first = std::max(0.0, b.first - (dp.mu_tilde + 1.0));
  rep.budget_second = std::max(0.0, b.second - (dp.mu_tilde + 1.0));
  if (pr.terminal_on_boundary)
    rep.terminal_boundary = TerminalBoundaryGap(pr, z);
  return rep;
}

// Initial u direction of norm r (decision mode) or the fixed u path.
inline Mat SeedU(const DiscreteProblem& dp) {
  const SweepingProblem& pr = dp.problem;
  const int k = dp.mesh.k();
  Mat u(k + 1, pr.n);
  if (!pr.u_decision) {
    for (int j = 0; j <= k; ++j) {
      u.row(j) = pr.u_path.Eval(dp.mesh.t(j)).transpose();
    }
    return u;
  }
  Vec dir = pr.u_path.Eval(0.0);
  if (dir.norm() == 0.0) dir = Vec::Unit(pr.n, 0);
  dir *= pr.r / dir.norm();
  for (int j = 0; j <= k; ++j) u.row(j) = dir.transpose();
  return u;
}

inline DecisionVector feasible_seed(const DiscreteProblem& dp) {
  const SweepingProblem& pr = dp.problem;
  const int k = dp.mesh.k();
  if (dp.reference) {
    return CatchingUpSequences(pr, dp.mesh, dp.reference->u, dp.reference->a)
        .traj;
  }
  const Mat u = SeedU(dp);
  const Mat a = Mat::Zero(k + 1, pr.d);
  return CatchingUpSequences(pr, dp.mesh, u, a).traj;
}

}  // namespace sweep

#endif  // SWEEP_TRANSCRIPTION_HPP_
