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

// Problem data for the controlled sweeping process
//
//   -x'(t) in N(x(t) - u(t); C) + f(x(t), a(t)),   x(0) = x0,
//
// with Bolza cost phi(x(T)) + int l(t, x, u, a, x', u', a') dt, together
// with the uniform mesh and discrete trajectory containers.

#ifndef SWEEP_PROBLEM_HPP_
#define SWEEP_PROBLEM_HPP_

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "sweep/common.hpp"
#include "sweep/geometry.hpp"

namespace sweep {

// Perturbation f(x, a) from a closed set of forms with closed-form Jacobians.
struct Perturbation {
  enum class Kind { kIdentity, kDiagSpeeds, kAffine };
  Kind kind = Kind::kIdentity;
  Vec speeds;  // kDiagSpeeds: f = (s_1 a_1, ..., s_n a_n)
  Mat A, B;    // kAffine: f = A x + B a + c
  Vec c;

  static Perturbation Identity() { return Perturbation{}; }
  static Perturbation DiagSpeeds(Vec s) {
    Perturbation p;
    p.kind = Kind::kDiagSpeeds;
    p.speeds = std::move(s);
    return p;
  }
  static Perturbation Affine(Mat a, Mat b, Vec c) {
    Perturbation p;
    p.kind = Kind::kAffine;
    p.A = std::move(a);
    p.B = std::move(b);
    p.c = std::move(c);
    return p;
  }

  Vec Eval(const Vec& x, const Vec& a) const {
    switch (kind) {
      case Kind::kIdentity:
        return a;
      case Kind::kDiagSpeeds:
        return speeds.cwiseProduct(a);
      case Kind::kAffine:
        return A * x + B * a + c;
    }
    return a;
  }
  Mat JacX(int n) const {
    if (kind == Kind::kAffine) return A;
    return Mat::Zero(n, n);
  }
  Mat JacA(int n, int d) const {
    switch (kind) {
      case Kind::kIdentity:
        return Mat::Identity(n, d);
      case Kind::kDiagSpeeds:
        return speeds.asDiagonal().toDenseMatrix();
      case Kind::kAffine:
        return B;
    }
    return Mat::Identity(n, d);
  }
  // True when f is affine in (x, a); every built-in form is.
  bool IsAffine() const { return true; }
};

// phi(x) = (weight / 2) ||x - target||^2.
struct TerminalCost {
  double weight = 0.0;
  Vec target;

  double Value(const Vec& x) const {
    if (weight == 0.0) return 0.0;
    return 0.5 * weight * (x - target).squaredNorm();
  }
  Vec Grad(const Vec& x) const {
    if (weight == 0.0) return Vec::Zero(x.size());
    return weight * (x - target);
  }
};

// One additive term of the running cost.
struct RunningTerm {
  enum class Kind {
    kControlQuadratic,      // (w/2) ||a + slope t + offset||^2
    kVelocityQuadratic,     // (w/2) ||x'||^2
    kStateQuadratic,        // (w/2) ||x - target||^2
    kURateQuadratic,        // (w/2) ||u'||^2
    kControlRateQuadratic,  // (w/2) ||a' + slope t + offset||^2
    kControlRateAbs,        // w sum_i |a'_i + slope_i t + offset_i|
  };
  Kind kind = Kind::kControlQuadratic;
  double weight = 1.0;
  Vec slope;   // optional time shift; empty means zero
  Vec offset;  // optional constant shift; empty means zero
  Vec target;  // kStateQuadratic

  Vec Shift(double t, Eigen::Index size) const {
    Vec s = Vec::Zero(size);
    if (slope.size() == size) s += t * slope;
    if (offset.size() == size) s += offset;
    return s;
  }
};

inline const char* RunningTermName(RunningTerm::Kind kind) {
  switch (kind) {
    case RunningTerm::Kind::kControlQuadratic:
      return "control_quadratic";
    case RunningTerm::Kind::kVelocityQuadratic:
      return "velocity_quadratic";
    case RunningTerm::Kind::kStateQuadratic:
      return "state_quadratic";
    case RunningTerm::Kind::kURateQuadratic:
      return "u_rate_quadratic";
    case RunningTerm::Kind::kControlRateQuadratic:
      return "control_rate_quadratic";
    case RunningTerm::Kind::kControlRateAbs:
      return "control_rate_abs";
  }
  return "unknown";
}

// Arguments of the running cost on one interval.
struct RunningPoint {
  double t = 0.0;
  Vec x, u, a, xdot, udot, adot;
};

// Value and one (sub)gradient: w = d/d(x,u,a), v = d/d(x',u',a').
// `kinks` lists the components of a' where an absolute-value term is at its
// kink; there the subdifferential of that component is the interval
// [-abs_weight, abs_weight] around the returned smooth part.
struct RunningEval {
  double value = 0.0;
  Vec wx, wu, wa, vx, vu, va;
  std::vector<int> kinks;
  double abs_weight = 0.0;
};

struct RunningCost {
  std::vector<RunningTerm> terms;

  bool HasControlRate() const {
    for (const auto& t : terms) {
      if (t.kind == RunningTerm::Kind::kControlRateQuadratic ||
          t.kind == RunningTerm::Kind::kControlRateAbs) {
        return true;
      }
    }
    return false;
  }
  bool HasAbs() const {
    for (const auto& t : terms) {
      if (t.kind == RunningTerm::Kind::kControlRateAbs) return true;
    }
    return false;
  }

  // `kink_tol` decides when an absolute-value argument counts as zero.
  RunningEval Eval(const RunningPoint& p, double kink_tol = 1e-12) const {
    RunningEval e;
    const auto n = p.x.size();
    const auto d = p.a.size();
    e.wx = Vec::Zero(n);
    e.wu = Vec::Zero(n);
    e.wa = Vec::Zero(d);
    e.vx = Vec::Zero(n);
    e.vu = Vec::Zero(n);
    e.va = Vec::Zero(d);
    for (const auto& term : terms) {
      const double w = term.weight;
      switch (term.kind) {
        case RunningTerm::Kind::kControlQuadratic: {
          const Vec s = p.a + term.Shift(p.t, d);
          e.value += 0.5 * w * s.squaredNorm();
          e.wa += w * s;
          break;
        }
        case RunningTerm::Kind::kVelocityQuadratic:
          e.value += 0.5 * w * p.xdot.squaredNorm();
          e.vx += w * p.xdot;
          break;
        case RunningTerm::Kind::kStateQuadratic: {
          const Vec s = term.target.size() == n ? Vec(p.x - term.target) : p.x;
          e.value += 0.5 * w * s.squaredNorm();
          e.wx += w * s;
          break;
        }
        case RunningTerm::Kind::kURateQuadratic:
          e.value += 0.5 * w * p.udot.squaredNorm();
          e.vu += w * p.udot;
          break;
        case RunningTerm::Kind::kControlRateQuadratic: {
          const Vec s = p.adot + term.Shift(p.t, d);
          e.value += 0.5 * w * s.squaredNorm();
          e.va += w * s;
          break;
        }
        case RunningTerm::Kind::kControlRateAbs: {
          const Vec s = p.adot + term.Shift(p.t, d);
          e.abs_weight += w;
          for (Eigen::Index i = 0; i < d; ++i) {
            e.value += w * std::abs(s(i));
            if (std::abs(s(i)) <= kink_tol) {
              e.kinks.push_back(static_cast<int>(i));
            } else {
              e.va(i) += w * (s(i) > 0 ? 1.0 : -1.0);
            }
          }
          break;
        }
      }
    }
    return e;
  }
};

// Affine path value + slope * t, used for u and for prescribed controls.
struct LinearPath {
  Vec value;
  Vec slope;

  static LinearPath Constant(Vec v) {
    LinearPath p;
    p.slope = Vec::Zero(v.size());
    p.value = std::move(v);
    return p;
  }
  Vec Eval(double t) const { return value + t * slope; }
  Vec Rate() const { return slope; }
};

struct SweepingProblem {
  int n = 1;
  int d = 1;
  double T = 1.0;
  Vec x0;
  Polyhedron C;
  double r = 1.0;
  double tau = 0.0;
  Perturbation f;
  TerminalCost phi;
  RunningCost ell;
  // u-control: either fixed to `u_path` or a decision variable whose initial
  // guess is `u_path`.
  LinearPath u_path;
  bool u_decision = false;
  // Require max_i <g_i, x(T) - u(T)> = 0 (terminal state on the boundary).
  bool terminal_on_boundary = false;
  std::optional<double> M;  // growth constant: ||f(x,a)|| <= M (1 + ||x||)
  std::optional<double> K;  // Lipschitz constant of f
  double init_scale = 1.0;  // multistart controls drawn from [-s, s]^d

  void Validate() const {
    if (n <= 0 || d <= 0) {
      throw Error(ErrorCode::kConfigError, "dimensions must be positive");
    }
    if (!(T > 0.0)) throw Error(ErrorCode::kConfigError, "T must be positive");
    if (!(r > 0.0)) throw Error(ErrorCode::kConfigError, "r must be positive");
    if (tau < 0.0 || tau > std::min(r, T)) {
      throw Error(ErrorCode::kConfigError, "tau must lie in [0, min(r, T)]");
    }
    RequireSize(x0, n, "x0");
    if (C.dim() != n) {
      throw Error(ErrorCode::kDimensionMismatch, "polyhedron dimension");
    }
    RequireSize(u_path.value, n, "u value");
    RequireSize(u_path.slope, n, "u slope");
    if (f.kind == Perturbation::Kind::kIdentity && d != n) {
      throw Error(ErrorCode::kConfigError,
                  "identity perturbation needs d == n");
    }
    if (f.kind == Perturbation::Kind::kDiagSpeeds) {
      RequireSize(f.speeds, n, "speeds");
      if (d != n) {
        throw Error(ErrorCode::kConfigError, "diag_speeds needs d == n");
      }
    }
    if (f.kind == Perturbation::Kind::kAffine) {
      if (f.A.rows() != n || f.A.cols() != n || f.B.rows() != n ||
          f.B.cols() != d || f.c.size() != n) {
        throw Error(ErrorCode::kDimensionMismatch, "affine perturbation");
      }
    }
    if (phi.weight != 0.0) RequireSize(phi.target, n, "terminal target");
    if (!C.Contains(x0 - u_path.Eval(0.0), DefaultTol(x0))) {
      throw Error(ErrorCode::kInfeasibleStart,
                  "x0 - u(0) is outside the polyhedron");
    }
  }
};

class Mesh {
 public:
  Mesh() = default;
  Mesh(int k, double T) : k_(k), T_(T) {
    if (k <= 0) throw Error(ErrorCode::kConfigError, "grid must be positive");
  }
  int k() const { return k_; }
  double T() const { return T_; }
  double h() const { return T_ / k_; }
  double t(int j) const { return j == k_ ? T_ : j * h(); }

  // Smallest j with t_j >= tau.
  int LowerWindow(double tau) const {
    const double s = tau * k_ / T_;
    int j = static_cast<int>(std::ceil(s - 1e-9));
    return std::clamp(j, 0, k_);
  }
  // Largest j with t_j <= T - tau.
  int UpperWindow(double tau) const {
    const double s = (T_ - tau) * k_ / T_;
    int j = static_cast<int>(std::floor(s + 1e-9));
    return std::clamp(j, 0, k_);
  }

 private:
  int k_ = 1;
  double T_ = 1.0;
};

struct DiscreteTrajectory {
  Mesh mesh;
  Mat x;  // (k+1) x n
  Mat u;  // (k+1) x n
  Mat a;  // (k+1) x d

  int k() const { return mesh.k(); }
  Vec X(int j) const { return x.row(j).transpose(); }
  Vec U(int j) const { return u.row(j).transpose(); }
  Vec A(int j) const { return a.row(j).transpose(); }
  Vec XDot(int j) const { return (X(j + 1) - X(j)) / mesh.h(); }
  Vec UDot(int j) const { return (U(j + 1) - U(j)) / mesh.h(); }
  Vec ADot(int j) const { return (A(j + 1) - A(j)) / mesh.h(); }
};

}  // namespace sweep

#endif  // SWEEP_PROBLEM_HPP_
