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

// Dual certificates for the sweeping control problem.
//
// A discrete certificate collects the multipliers of the discretized problem:
// the cost multiplier lambda, the adjoint sequence p = (p^x, p^u, p^a), the
// contact multipliers eta (primal) and the terminal eta, the state-constraint
// multipliers gamma, the control-band multipliers xi and the subgradient
// selections of the running cost. All unknowns enter the optimality system
// linearly once lambda is fixed, so a certificate is recovered from a
// converged solution by one least-squares solve.
//
// A continuous certificate lives on a sampling mesh: p at the nodes, the
// left-continuous track q, and the measures gamma and xi represented by node
// atoms plus piecewise-constant densities on the intervals.
//
// The adjoint recursion couples p to the Jacobian of the perturbation through
// psi = lambda (v + theta / h) - p. Two sign conventions are offered for that
// coupling; see AdjointSign.

#ifndef SWEEP_CERTIFICATES_HPP_
#define SWEEP_CERTIFICATES_HPP_

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sweep/common.hpp"
#include "sweep/dynamics.hpp"
#include "sweep/geometry.hpp"
#include "sweep/nnls.hpp"
#include "sweep/optimizer.hpp"
#include "sweep/problem.hpp"
#include "sweep/transcription.hpp"

namespace sweep {

// Sign of the Jacobian coupling in the adjoint recursion,
//
//   (p_{j+1} - p_j)/h - lambda w_j = s J^T psi_{j+1} + sum_i gamma_ji g_i.
//
// kLagrangian (s = -1) is the form obtained by differentiating the
// Lagrangian of this library's transcription; it is the default and the one
// under which converged discrete solutions are certified. kPublished
// (s = +1) is the form used in the published crowd computations and is kept
// to reproduce them. The two coincide whenever J^T psi = 0.
enum class AdjointSign { kLagrangian, kPublished };

inline double SignFactor(AdjointSign s) {
  return s == AdjointSign::kPublished ? 1.0 : -1.0;
}

inline const char* AdjointSignName(AdjointSign s) {
  return s == AdjointSign::kPublished ? "published" : "lagrangian";
}

// ---------------------------------------------------------------------------
// Reports.

struct CheckEntry {
  std::string name;
  double residual = 0.0;
  double tol = 0.0;
  double t = 0.0;  // location of the worst residual
  bool pass = true;
};

struct CheckReport {
  std::vector<CheckEntry> entries;
  std::vector<std::string> flags;
  bool verdict = true;

  void Add(const std::string& name, double residual, double tol, double t) {
    if (!std::isfinite(residual)) residual = std::numeric_limits<double>::max();
    CheckEntry e{name, residual, tol, t, residual <= tol};
    verdict = verdict && e.pass;
    entries.push_back(std::move(e));
  }

  const CheckEntry* Find(const std::string& name) const {
    for (const auto& e : entries) {
      if (e.name == name) return &e;
    }
    return nullptr;
  }

  std::vector<std::string> Failed() const {
    std::vector<std::string> out;
    for (const auto& e : entries) {
      if (!e.pass) out.push_back(e.name);
    }
    return out;
  }

  bool HasFlag(const std::string& f) const {
    return std::find(flags.begin(), flags.end(), f) != flags.end();
  }

  nlohmann::json ToJson() const {
    nlohmann::json j;
    j["verdict"] = verdict ? "pass" : "fail";
    j["flags"] = flags;
    nlohmann::json list = nlohmann::json::array();
    for (const auto& e : entries) {
      list.push_back({{"name", e.name},
                      {"residual", e.residual},
                      {"tol", e.tol},
                      {"t", e.t},
                      {"pass", e.pass}});
    }
    j["conditions"] = list;
    return j;
  }
};

// Residual reported for a nontriviality sum: zero when the sum exceeds
// 2 tol relative to the certificate magnitude, growing to 2 tol as the sum
// vanishes. Passing therefore requires sum >= tol * magnitude.
inline double NontrivialityResidual(double sum, double magnitude, double tol) {
  const double ratio = magnitude > 0.0 ? sum / magnitude : 0.0;
  return std::max(0.0, 2.0 * tol - ratio);
}

// ---------------------------------------------------------------------------
// Certificate types.

struct CertificateOptions {
  AdjointSign sign = AdjointSign::kLagrangian;
  // Relative least-squares residual accepted as a consistent system.
  double consistency_tol = 1e-6;
  // Constraint values within this (relative) distance of zero count as
  // active when placing gamma unknowns.
  double active_tol = 1e-6;
  double kink_tol = 1e-9;
  int featured_iterations = 5;
};

struct DiscreteCertificate {
  Mesh mesh;
  int n = 0, d = 0, m = 0;
  AdjointSign sign = AdjointSign::kLagrangian;
  double lambda = 0.0;
  Vec xi;            // k+1
  Mat p;             // (k+1) x (2n+d): (p^x, p^u, p^a)
  Mat eta;           // k x m, contact multipliers of the trajectory
  Vec eta_terminal;  // m, multiplier of the terminal constraint
  Mat gamma;         // k x m, density of the node-j constraint multipliers
  Mat kink;          // k x d, offsets inside the absolute-value intervals
  Mat w, v;          // k x (2n+d) subgradients at (z_j, dz_j / h)
  Mat theta;         // k x (2n+d) proximity vectors (zero without proximity)
  Mat chi;           // k x n budget vectors (zero without proximity)
  Mat u;             // (k+1) x n copy of the control nodes
  bool u_decision = false;
  double ls_residual = 0.0;
  bool degenerate = false;  // lambda == 0

  int k() const { return mesh.k(); }
  Vec Px(int j) const { return p.row(j).segment(0, n).transpose(); }
  Vec Pu(int j) const { return p.row(j).segment(n, n).transpose(); }
  Vec Pa(int j) const { return p.row(j).segment(2 * n, d).transpose(); }

  // Nontriviality sum; equals 1 after normalization.
  double NontrivialitySum(const Polyhedron& c) const {
    const int kk = k();
    double s = lambda + p.row(kk).norm() + Pu(0).norm() + Pa(0).norm();
    for (int j = 0; j <= kk; ++j) s += std::abs(xi(j));
    for (int j = 0; j < kk; ++j) {
      s += mesh.h() *
           (c.generators().transpose() * gamma.row(j).transpose()).norm();
    }
    return s;
  }

  // Multiplies every dual field by c > 0; the primal eta is unchanged.
  DiscreteCertificate Scaled(double c) const {
    DiscreteCertificate out = *this;
    out.lambda *= c;
    out.xi *= c;
    out.p *= c;
    out.eta_terminal *= c;
    out.gamma *= c;
    out.kink *= c;
    return out;
  }
};

struct ContinuousCertificate {
  Mesh mesh;
  int n = 0, d = 0, m = 0;
  AdjointSign sign = AdjointSign::kLagrangian;
  double lambda = 0.0;
  Mat p;                    // (N+1) x (2n+d)
  Mat q;                    // (N+1) x (2n+d), left-continuous: q(t_j)
  Mat eta;                  // N x m interval values of the contact multipliers
  Vec eta_terminal;         // m, eta(T) scaled by lambda in the transversality
  Mat gamma_atoms;          // (N+1) x n
  Mat gamma_density;        // N x n
  Vec xi_atoms;             // N+1
  Vec xi_density;           // N
  Mat kink;                 // N x d
  Mat w, v;                 // N x (2n+d) subgradients at interval midpoints
  Mat u;                    // (N+1) x n control nodes used by the xi integral
  bool u_decision = false;  // with u fixed, p^u = q^u = 0
  std::vector<std::pair<double, Vec>> detected_atoms;
  std::vector<std::string> notes;

  int N() const { return mesh.k(); }
  double h() const { return mesh.h(); }

  // gamma([t_j, T]).
  Vec GammaTail(int j) const {
    Vec s = Vec::Zero(n);
    for (int l = j; l <= N(); ++l) s += gamma_atoms.row(l).transpose();
    for (int l = j; l < N(); ++l) s += h() * gamma_density.row(l).transpose();
    return s;
  }
  // int_{[t_j, T]} 2 u dxi.
  Vec XiTail(int j) const {
    Vec s = Vec::Zero(n);
    for (int l = j; l <= N(); ++l)
      s += 2.0 * xi_atoms(l) * u.row(l).transpose();
    for (int l = j; l < N(); ++l) {
      s += 2.0 * h() * xi_density(l) * u.row(l).transpose();
    }
    return s;
  }

  // q(t_j) = p(t_j) - (gamma tail, xi tail - gamma tail, 0).
  Mat ReconstructQ() const {
    Mat out = p;
    for (int j = 0; j <= N(); ++j) {
      const Vec g = GammaTail(j);
      out.row(j).segment(0, n) -= g.transpose();
      if (u_decision) out.row(j).segment(n, n) -= (XiTail(j) - g).transpose();
    }
    return out;
  }

  ContinuousCertificate Scaled(double c) const {
    ContinuousCertificate out = *this;
    out.lambda *= c;
    out.p *= c;
    out.q *= c;
    out.eta_terminal *= c;
    out.gamma_atoms *= c;
    out.gamma_density *= c;
    out.xi_atoms *= c;
    out.xi_density *= c;
    out.kink *= c;
    for (auto& a : out.detected_atoms) a.second *= c;
    return out;
  }
};

namespace internal {

// Dense linear system assembled row by row: A y = lambda b + c.
class DualSystem {
 public:
  int AddUnknowns(int count) {
    const int off = cols_;
    cols_ += count;
    return off;
  }
  int cols() const { return cols_; }
  int rows() const { return static_cast<int>(b_.size()); }

  int NewRow(double b = 0.0, double c = 0.0) {
    b_.push_back(b);
    c_.push_back(c);
    return rows() - 1;
  }
  void Set(int row, int col, double value) {
    if (value != 0.0) entries_.push_back({row, col, value});
  }

  Mat A() const {
    Mat a = Mat::Zero(rows(), cols_);
    for (const auto& e : entries_) a(e.row, e.col) += e.value;
    return a;
  }
  Vec B() const { return FromStd(b_); }
  Vec C() const { return FromStd(c_); }

 private:
  struct Entry {
    int row, col;
    double value;
  };
  int cols_ = 0;
  std::vector<Entry> entries_;
  std::vector<double> b_, c_;
};

struct DualSolve {
  Vec y;
  double lambda = 0.0;
  double residual = 0.0;  // relative residual of the accepted solve
  bool consistent = false;
};

// Tries lambda = 1; if inconsistent, looks for a null vector (lambda = 0).
// Any lambda > 0 is equivalent to lambda = 1 by homogeneity.
inline DualSolve SolveDuals(const DualSystem& sys, double tol) {
  DualSolve out;
  const Mat a = sys.A();
  const Vec rhs = sys.B() + sys.C();
  if (a.cols() == 0) {
    out.residual = rhs.lpNorm<Eigen::Infinity>();
    out.lambda = 1.0;
    out.y = Vec::Zero(0);
    out.consistent =
        out.residual <= tol * (1.0 + rhs.lpNorm<Eigen::Infinity>());
    return out;
  }
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(a);
  const Vec y = cod.solve(rhs);
  const double scale = 1.0 + rhs.lpNorm<Eigen::Infinity>();
  const double res = (a * y - rhs).lpNorm<Eigen::Infinity>() / scale;
  if (res <= tol) {
    out.y = y;
    out.lambda = 1.0;
    out.residual = res;
    out.consistent = true;
    return out;
  }
  out.residual = res;
  // Homogeneous system with lambda = 0: the constant part c must vanish.
  if (sys.C().lpNorm<Eigen::Infinity>() > 0.0) return out;
  Eigen::BDCSVD<Mat> svd(a, Eigen::ComputeFullV);
  const Vec& s = svd.singularValues();
  const double smax = s.size() ? s(0) : 0.0;
  Vec null;
  if (a.rows() < a.cols()) {
    null = svd.matrixV().col(a.cols() - 1);
  } else if (s.size() && s(s.size() - 1) <= tol * std::max(1.0, smax)) {
    null = svd.matrixV().col(s.size() - 1);
  }
  if (null.size() == 0) return out;
  out.y = null;
  out.lambda = 0.0;
  out.residual = (a * null).lpNorm<Eigen::Infinity>() / std::max(1.0, smax);
  out.consistent = true;
  return out;
}

inline int BandState(double norm, double lo, double hi, double tol) {
  // -1 lower edge, +1 upper edge, 0 strictly inside.
  if (std::abs(norm - hi) <= tol) return 1;
  if (std::abs(norm - lo) <= tol) return -1;
  return 0;
}

inline double NodeActiveTol(const Vec& pos, double rel) {
  return rel * (1.0 + pos.norm());
}

inline Mat Stack(const Vec& x, const Vec& u, const Vec& a) {
  Mat r(1, x.size() + u.size() + a.size());
  r << x.transpose(), u.transpose(), a.transpose();
  return r;
}

}  // namespace internal

// ---------------------------------------------------------------------------
// Discrete certificate.

inline DiscreteCertificate build_discrete_certificate(
    const DiscreteProblem& dp, const DiscreteSolution& sol,
    const CertificateOptions& opts = {}) {
  const SweepingProblem& pr = dp.problem;
  const DecisionVector& z = sol.z;
  const int k = dp.mesh.k();
  const int n = pr.n, d = pr.d, m = pr.C.size();
  const double h = dp.mesh.h();
  const double s = SignFactor(opts.sign);
  const Mat& g = pr.C.generators();
  const Mat jx = pr.f.JacX(n);
  const Mat ja = pr.f.JacA(n, d);
  const bool free_u = pr.u_decision;
  const bool free_start = !dp.pins_initial_controls();

  DiscreteCertificate cert;
  cert.mesh = dp.mesh;
  cert.n = n;
  cert.d = d;
  cert.m = m;
  cert.sign = opts.sign;
  cert.u = z.u;
  cert.u_decision = free_u;
  cert.eta = eta_from_trajectory(z, pr);
  cert.w = Mat::Zero(k, 2 * n + d);
  cert.v = Mat::Zero(k, 2 * n + d);
  cert.theta = Mat::Zero(k, 2 * n + d);
  cert.chi = Mat::Zero(k, n);
  std::vector<RunningEval> evals(k);
  for (int j = 0; j < k; ++j) {
    evals[j] = pr.ell.Eval(PointAt(z, j), opts.kink_tol);
    cert.w.row(j) = internal::Stack(evals[j].wx, evals[j].wu, evals[j].wa);
    cert.v.row(j) = internal::Stack(evals[j].vx, evals[j].vu, evals[j].va);
  }
  if (dp.proximity_on) {
    const DiscreteTrajectory& ref = *dp.reference;
    for (int j = 0; j < k; ++j) {
      cert.theta.row(j) =
          2.0 * internal::Stack(z.X(j + 1) - z.X(j) - ref.X(j + 1) + ref.X(j),
                                z.U(j + 1) - z.U(j) - ref.U(j + 1) + ref.U(j),
                                z.A(j + 1) - z.A(j) - ref.A(j + 1) + ref.A(j));
    }
    const BudgetEval b = UBudgets(dp, z.u);
    const double e1 = std::max(0.0, b.first - dp.mu_tilde);
    const double e2 = std::max(0.0, b.second - dp.mu_tilde);
    for (int j = 0; j < k; ++j) {
      cert.chi.row(j) =
          2.0 * e1 * b.g_first.row(j) + 2.0 * e2 * b.g_second.row(j);
    }
  }

  // Node activity.
  std::vector<std::vector<int>> active(k + 1);
  for (int j = 0; j <= k; ++j) {
    const Vec pos = z.X(j) - z.U(j);
    const double tol = internal::NodeActiveTol(pos, opts.active_tol);
    for (int i = 0; i < m; ++i) {
      if (std::abs(g.row(i).dot(pos)) <= tol) active[j].push_back(i);
    }
  }
  RequireIndependent(pr.C, active[k]);
  const int lo = dp.j_lower(), hi = dp.j_upper();
  auto band = [&](int j) {
    if (j >= lo && j <= hi) return 2;  // window: free sign
    return internal::BandState(z.U(j).norm(), pr.r - pr.tau - dp.eps_k,
                               pr.r + pr.tau + dp.eps_k, 1e-6 * (1.0 + pr.r));
  };

  // Premises of the implications.
  const double eta_margin = 10.0 * opts.consistency_tol;
  std::vector<std::vector<bool>> excluded(k, std::vector<bool>(m, false));

  DiscreteCertificate best;
  for (int iter = 0; iter < std::max(1, opts.featured_iterations); ++iter) {
    internal::DualSystem sys;
    const int stride = 2 * n + d;
    const int off_p = sys.AddUnknowns((k + 1) * stride);
    auto px = [&](int j, int c) { return off_p + j * stride + c; };
    auto pu = [&](int j, int c) { return off_p + j * stride + n + c; };
    auto pa = [&](int j, int c) { return off_p + j * stride + 2 * n + c; };
    std::vector<std::vector<int>> gidx(k, std::vector<int>(m, -1));
    const int j0 = (free_u && free_start) ? 0 : 1;
    for (int j = j0; j < k; ++j) {
      for (int i : active[j]) {
        if (!excluded[j][i]) gidx[j][i] = sys.AddUnknowns(1);
      }
    }
    std::vector<int> xidx(k + 1, -1);
    if (free_u) {
      for (int j = 0; j <= k; ++j) {
        if (band(j) != 0) xidx[j] = sys.AddUnknowns(1);
      }
    }
    std::vector<int> eidx(m, -1);
    for (int i : active[k]) eidx[i] = sys.AddUnknowns(1);
    std::vector<std::vector<int>> kidx(k);
    for (int j = 0; j < k; ++j) {
      for (int c : evals[j].kinks) {
        (void)c;
        kidx[j].push_back(sys.AddUnknowns(1));
      }
    }

    for (int j = 0; j < k; ++j) {
      const Vec vx =
          evals[j].vx + cert.theta.row(j).segment(0, n).transpose() / h;
      const Vec vu =
          evals[j].vu + cert.theta.row(j).segment(n, n).transpose() / h;
      const Vec va =
          evals[j].va + cert.theta.row(j).segment(2 * n, d).transpose() / h;
      const Vec rx = evals[j].wx + s * jx.transpose() * vx;
      const Vec ra = evals[j].wa + s * ja.transpose() * vx;
      // x rows.
      for (int c = 0; c < n; ++c) {
        const int r = sys.NewRow(rx(c));
        sys.Set(r, px(j + 1, c), 1.0 / h);
        sys.Set(r, px(j, c), -1.0 / h);
        for (int l = 0; l < n; ++l) sys.Set(r, px(j + 1, l), s * jx(l, c));
        for (int i = 0; i < m; ++i) {
          if (gidx[j][i] >= 0) sys.Set(r, gidx[j][i], -g(i, c));
        }
      }
      // u rows; with u fixed p^u carries no information and is pinned to 0.
      for (int c = 0; c < n && !free_u; ++c) {
        sys.Set(sys.NewRow(0.0), pu(j, c), 1.0);
      }
      for (int c = 0; c < n && free_u; ++c) {
        const int r = sys.NewRow(evals[j].wu(c));
        sys.Set(r, pu(j + 1, c), 1.0 / h);
        sys.Set(r, pu(j, c), -1.0 / h);
        if (xidx[j] >= 0) sys.Set(r, xidx[j], -2.0 / h * z.u(j, c));
        for (int i = 0; i < m; ++i) {
          if (gidx[j][i] >= 0) sys.Set(r, gidx[j][i], g(i, c));
        }
      }
      // a rows.
      for (int c = 0; c < d; ++c) {
        const int r = sys.NewRow(ra(c));
        sys.Set(r, pa(j + 1, c), 1.0 / h);
        sys.Set(r, pa(j, c), -1.0 / h);
        for (int l = 0; l < n; ++l) sys.Set(r, px(j + 1, l), s * ja(l, c));
      }
      // Velocity identities.
      for (int c = 0; c < n && free_u; ++c) {
        const int r = sys.NewRow(vu(c));
        sys.Set(r, pu(j + 1, c), 1.0);
      }
      for (int c = 0; c < d; ++c) {
        const int r = sys.NewRow(va(c));
        sys.Set(r, pa(j + 1, c), 1.0);
        for (size_t q = 0; q < evals[j].kinks.size(); ++q) {
          if (evals[j].kinks[q] == c) sys.Set(r, kidx[j][q], -1.0);
        }
      }
      // Implications: eta_ji > 0 => <g_i, psi_{j+1}> = 0.
      for (int i = 0; i < m; ++i) {
        if (cert.eta(j, i) > eta_margin * (1.0 + cert.eta.row(j).norm())) {
          const int r = sys.NewRow(g.row(i).dot(vx));
          for (int c = 0; c < n; ++c) sys.Set(r, px(j + 1, c), g(i, c));
        }
      }
    }
    // Transversality.
    const Vec grad = pr.phi.Grad(z.X(k));
    for (int c = 0; c < n; ++c) {
      const int r = sys.NewRow(grad(c));
      sys.Set(r, px(k, c), -1.0);
      for (int i = 0; i < m; ++i) {
        if (eidx[i] >= 0) sys.Set(r, eidx[i], -g(i, c));
      }
    }
    for (int c = 0; c < n; ++c) {
      const int r = sys.NewRow(0.0);
      sys.Set(r, pu(k, c), 1.0);
      if (!free_u) continue;
      for (int i = 0; i < m; ++i) {
        if (eidx[i] >= 0) sys.Set(r, eidx[i], -g(i, c));
      }
      if (xidx[k] >= 0) sys.Set(r, xidx[k], 2.0 * z.u(k, c));
    }
    for (int c = 0; c < d; ++c) {
      const int r = sys.NewRow(0.0);
      sys.Set(r, pa(k, c), 1.0);
    }
    if (free_start) {
      for (int c = 0; c < d; ++c) sys.Set(sys.NewRow(0.0), pa(0, c), 1.0);
      if (free_u) {
        for (int c = 0; c < n; ++c) sys.Set(sys.NewRow(0.0), pu(0, c), 1.0);
      }
    }

    const internal::DualSolve sol_d =
        internal::SolveDuals(sys, opts.consistency_tol);
    if (!sol_d.consistent) {
      throw Error(ErrorCode::kNoConsistentDuals,
                  "adjoint system has no consistent multipliers (relative "
                  "residual " +
                      std::to_string(sol_d.residual) + ")",
                  sol_d.residual);
    }
    const Vec& y = sol_d.y;
    DiscreteCertificate c = cert;
    c.lambda = sol_d.lambda;
    c.ls_residual = sol_d.residual;
    c.p = Mat::Zero(k + 1, stride);
    for (int j = 0; j <= k; ++j) {
      c.p.row(j) = y.segment(off_p + j * stride, stride).transpose();
    }
    c.gamma = Mat::Zero(k, m);
    for (int j = 0; j < k; ++j) {
      for (int i = 0; i < m; ++i) {
        if (gidx[j][i] >= 0) c.gamma(j, i) = y(gidx[j][i]);
      }
    }
    c.xi = Vec::Zero(k + 1);
    for (int j = 0; j <= k; ++j) {
      if (xidx[j] >= 0) c.xi(j) = y(xidx[j]);
    }
    c.eta_terminal = Vec::Zero(m);
    for (int i = 0; i < m; ++i) {
      if (eidx[i] >= 0) c.eta_terminal(i) = y(eidx[i]);
    }
    c.kink = Mat::Zero(k, d);
    for (int j = 0; j < k; ++j) {
      for (size_t q = 0; q < evals[j].kinks.size(); ++q) {
        c.kink(j, evals[j].kinks[q]) = y(kidx[j][q]);
      }
    }
    best = c;

    // Featured-set fixed point: drop gamma on indices with <g_i, psi> < 0.
    const double mag = std::max(c.lambda, c.p.lpNorm<Eigen::Infinity>());
    bool changed = false;
    for (int j = 0; j < k; ++j) {
      const Vec psi =
          c.lambda *
              (evals[j].vx + c.theta.row(j).segment(0, n).transpose() / h) -
          c.Px(j + 1);
      for (int i = 0; i < m; ++i) {
        if (gidx[j][i] < 0) continue;
        if (g.row(i).dot(psi) < -opts.consistency_tol * std::max(1.0, mag)) {
          excluded[j][i] = true;
          changed = true;
        }
      }
    }
    if (!changed) break;
  }

  const double sum = best.NontrivialitySum(pr.C);
  if (sum > 0.0) {
    best = best.Scaled(1.0 / sum);
  }
  best.degenerate = best.lambda <= 0.0;
  return best;
}

inline CheckReport check_discrete(const DiscreteProblem& dp,
                                  const DiscreteSolution& sol,
                                  const DiscreteCertificate& cert,
                                  double tol = 1e-5) {
  const SweepingProblem& pr = dp.problem;
  const DecisionVector& z = sol.z;
  const int k = dp.mesh.k();
  const int n = pr.n, d = pr.d, m = pr.C.size();
  const double h = dp.mesh.h();
  const Mat& g = pr.C.generators();
  const double s = SignFactor(cert.sign);
  const Mat jx = pr.f.JacX(n);
  const Mat ja = pr.f.JacA(n, d);
  const bool free_u = pr.u_decision;
  const bool free_start = !dp.pins_initial_controls();
  CheckReport rep;
  if (cert.k() != k || cert.p.rows() != k + 1 || cert.p.cols() != 2 * n + d ||
      cert.eta.rows() != k || cert.gamma.rows() != k ||
      cert.xi.size() != k + 1) {
    rep.Add("shape", 1.0, 0.0, 0.0);
    return rep;
  }

  const double mag = std::max(
      {std::abs(cert.lambda), cert.p.lpNorm<Eigen::Infinity>(),
       cert.eta_terminal.size() ? cert.eta_terminal.lpNorm<Eigen::Infinity>()
                                : 0.0});
  const double dual = mag > 0.0 ? 1.0 / mag : 1.0;
  double vscale = 1.0;
  for (int j = 0; j < k; ++j) vscale = std::max(vscale, 1.0 + z.XDot(j).norm());

  struct Worst {
    double r = 0.0, t = 0.0;
    void Take(double value, double at) {
      if (value > r || !std::isfinite(value)) {
        r = value;
        t = at;
      }
    }
  };
  Worst dyn, esign, einact, ecompl, adx, adu, ada, velu, vela, kinc, ginact,
      gsign, xicone;

  auto active_at = [&](int j, int i) {
    const Vec pos = z.X(j) - z.U(j);
    return std::abs(g.row(i).dot(pos)) <= 1e-6 * (1.0 + pos.norm());
  };
  auto inactive_at = [&](int j, int i) {
    const Vec pos = z.X(j) - z.U(j);
    return g.row(i).dot(pos) < -10.0 * 1e-6 * (1.0 + pos.norm());
  };

  for (int j = 0; j < k; ++j) {
    const double t = dp.mesh.t(j);
    const RunningEval e = pr.ell.Eval(PointAt(z, j), 1e-9);
    const Vec eta = cert.eta.row(j).transpose();
    // Dynamics with the stored eta.
    const Vec pos = z.X(j + 1) - z.U(j + 1);
    const Vec nv = NormalVelocity(pr, z, j);
    const Vec rd = nv - g.transpose() * eta;
    dyn.Take(std::max(rd.lpNorm<Eigen::Infinity>() / vscale,
                      std::max(0.0, pr.C.MaxViolation(pos))),
             t);
    for (int i = 0; i < m; ++i) {
      esign.Take(std::max(0.0, -eta(i)) / vscale, t);
      if (inactive_at(j + 1, i)) einact.Take(std::abs(eta(i)) / vscale, t);
    }
    const Vec th = cert.theta.row(j).transpose();
    const Vec vx = e.vx + th.segment(0, n) / h;
    const Vec vu = e.vu + th.segment(n, n) / h;
    const Vec va = e.va + th.segment(2 * n, d) / h;
    const Vec psi = cert.lambda * vx - cert.Px(j + 1);
    for (int i = 0; i < m; ++i) {
      if (eta(i) > 10.0 * tol * (1.0 + eta.norm())) {
        ecompl.Take(std::abs(g.row(i).dot(psi)) * dual, t);
      }
    }
    const Vec gam = cert.gamma.row(j).transpose();
    const Vec gsum = g.transpose() * gam;
    const Vec rx = (cert.Px(j + 1) - cert.Px(j)) / h - cert.lambda * e.wx -
                   s * jx.transpose() * psi - gsum;
    adx.Take(h * rx.lpNorm<Eigen::Infinity>() * dual, t);
    if (free_u) {
      const Vec ru = (cert.Pu(j + 1) - cert.Pu(j)) / h -
                     2.0 / h * cert.xi(j) * z.U(j) + gsum - cert.lambda * e.wu;
      adu.Take(h * ru.lpNorm<Eigen::Infinity>() * dual, t);
    } else {
      // With u fixed the u-adjoint is identically zero.
      adu.Take(cert.Pu(j).lpNorm<Eigen::Infinity>() * dual, t);
    }
    const Vec ra = (cert.Pa(j + 1) - cert.Pa(j)) / h - cert.lambda * e.wa -
                   s * ja.transpose() * psi;
    ada.Take(h * ra.lpNorm<Eigen::Infinity>() * dual, t);
    velu.Take(
        (cert.Pu(j + 1) - cert.lambda * vu).lpNorm<Eigen::Infinity>() * dual,
        t);
    Vec kv = Vec::Zero(d);
    for (int c = 0; c < d; ++c) {
      const bool is_kink =
          std::find(e.kinks.begin(), e.kinks.end(), c) != e.kinks.end();
      if (is_kink) {
        kv(c) = cert.kink(j, c);
        kinc.Take(
            std::max(0.0, std::abs(kv(c)) - cert.lambda * e.abs_weight) * dual,
            t);
      } else if (cert.kink(j, c) != 0.0) {
        kinc.Take(std::abs(cert.kink(j, c)) * dual, t);
      }
    }
    vela.Take(
        (cert.Pa(j + 1) - kv - cert.lambda * va).lpNorm<Eigen::Infinity>() *
            dual,
        t);
    // Sign structure of gamma at node j.
    for (int i = 0; i < m; ++i) {
      const double mass = h * std::abs(gam(i)) * dual;
      if (!active_at(j, i) || (j == 0 && !(free_u && free_start))) {
        ginact.Take(mass, t);
        continue;
      }
      const double feat = g.row(i).dot(psi) * dual;
      if (feat < -tol) {
        gsign.Take(mass, t);
      } else if (feat > tol) {
        gsign.Take(std::max(0.0, -h * gam(i) * dual), t);
      }
    }
  }
  // Band memberships of xi.
  for (int j = 0; j <= k; ++j) {
    if (j >= dp.j_lower() && j <= dp.j_upper()) continue;
    const double x = cert.xi(j) * dual;
    const int st = free_u ? internal::BandState(
                                z.U(j).norm(), pr.r - pr.tau - dp.eps_k,
                                pr.r + pr.tau + dp.eps_k, 1e-6 * (1.0 + pr.r))
                          : 0;
    const double r = st == 1    ? std::max(0.0, -x)
                     : st == -1 ? std::max(0.0, x)
                                : std::abs(x);
    xicone.Take(r, dp.mesh.t(j));
  }

  const double T = pr.T;
  rep.Add("dynamics", dyn.r, tol, dyn.t);
  rep.Add("eta_sign", esign.r, tol, esign.t);
  rep.Add("eta_inactive", einact.r, tol, einact.t);
  rep.Add("eta_complementarity", ecompl.r, tol, ecompl.t);
  rep.Add("adjoint_x", adx.r, tol, adx.t);
  rep.Add("adjoint_u", adu.r, tol, adu.t);
  rep.Add("adjoint_a", ada.r, tol, ada.t);
  if (free_u) rep.Add("velocity_u", velu.r, tol, velu.t);
  rep.Add("velocity_a", vela.r, tol, vela.t);
  rep.Add("kink_inclusion", kinc.r, tol, kinc.t);
  rep.Add("gamma_inactive", ginact.r, tol, ginact.t);
  rep.Add("gamma_sign", gsign.r, tol, gsign.t);
  rep.Add("xi_normal_cone", xicone.r, tol, xicone.t);

  // Transversality at T.
  const Vec et = cert.eta_terminal;
  const Vec gsum_t = g.transpose() * et;
  const Vec tx = -cert.Px(k) - gsum_t - cert.lambda * pr.phi.Grad(z.X(k));
  rep.Add("transversality_x", tx.lpNorm<Eigen::Infinity>() * dual, tol, T);
  if (free_u) {
    const Vec tu = cert.Pu(k) - gsum_t + 2.0 * cert.xi(k) * z.U(k);
    rep.Add("transversality_u", tu.lpNorm<Eigen::Infinity>() * dual, tol, T);
  }
  rep.Add("transversality_a", cert.Pa(k).lpNorm<Eigen::Infinity>() * dual, tol,
          T);
  double te = 0.0;
  for (int i = 0; i < m; ++i) {
    if (!active_at(k, i)) {
      te = std::max(te, std::abs(et(i)) * dual);
    } else if (!pr.terminal_on_boundary) {
      te = std::max(te, std::max(0.0, -et(i)) * dual);
    }
  }
  rep.Add("terminal_eta", te, tol, T);
  if (free_start) {
    double r0 = cert.Pa(0).lpNorm<Eigen::Infinity>();
    if (free_u) r0 = std::max(r0, cert.Pu(0).lpNorm<Eigen::Infinity>());
    rep.Add("initial_controls", r0 * dual, tol, 0.0);
  }
  rep.Add("lambda_sign", std::max(0.0, -cert.lambda) * dual, tol, 0.0);

  double field_max = mag;
  field_max = std::max(field_max, cert.xi.lpNorm<Eigen::Infinity>());
  field_max = std::max(field_max, h * cert.gamma.lpNorm<Eigen::Infinity>());
  const double sum = cert.NontrivialitySum(pr.C);
  rep.Add("nontriviality", NontrivialityResidual(sum, field_max, tol), tol,
          0.0);
  if (cert.lambda <= tol * std::max(field_max, 1e-300)) {
    rep.flags.push_back("lambda_zero");
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Continuous certificate.

struct ContinuousOptions {
  AdjointSign sign = AdjointSign::kLagrangian;
  double consistency_tol = 1e-8;
  // Nodes whose constraint value is within this relative margin of zero may
  // carry gamma atoms.
  double active_margin = 1e-6;
  double kink_tol = 1e-9;
};

namespace internal {

// Running-cost evaluation at the midpoint of interval j of a sampled
// candidate.
inline RunningEval MidpointEval(const SweepingProblem& pr,
                                const DiscreteTrajectory& c, int j,
                                double kink_tol) {
  RunningPoint p;
  p.t = 0.5 * (c.mesh.t(j) + c.mesh.t(j + 1));
  p.x = 0.5 * (c.X(j) + c.X(j + 1));
  p.u = 0.5 * (c.U(j) + c.U(j + 1));
  p.a = 0.5 * (c.A(j) + c.A(j + 1));
  p.xdot = c.XDot(j);
  p.udot = c.UDot(j);
  p.adot = c.ADot(j);
  return pr.ell.Eval(p, kink_tol);
}

// Trapezoid normal velocity on interval j: -dx/dt - mean of f at the nodes.
inline Vec TrapezoidNormal(const SweepingProblem& pr,
                           const DiscreteTrajectory& c, int j) {
  return -c.XDot(j) -
         0.5 * (pr.f.Eval(c.X(j), c.A(j)) + pr.f.Eval(c.X(j + 1), c.A(j + 1)));
}

}  // namespace internal

// Fits a continuous certificate to a sampled candidate: eta from the primal
// inclusion, then p, gamma atoms, xi atoms and kink selections from the
// adjoint system with lambda = 1; if that system is inconsistent, a null
// vector with lambda = 0 is returned, and failing that the zero certificate.
inline ContinuousCertificate fit_continuous_certificate(
    const SweepingProblem& pr, const DiscreteTrajectory& cand,
    const ContinuousOptions& opts = {}) {
  const int N = cand.k();
  const int n = pr.n, d = pr.d, m = pr.C.size();
  const double h = cand.mesh.h();
  const double s = SignFactor(opts.sign);
  const Mat& g = pr.C.generators();
  const Mat jx = pr.f.JacX(n);
  const Mat ja = pr.f.JacA(n, d);
  const bool free_u = pr.u_decision;
  const int stride = 2 * n + d;

  ContinuousCertificate cert;
  cert.mesh = cand.mesh;
  cert.n = n;
  cert.d = d;
  cert.m = m;
  cert.sign = opts.sign;
  cert.u = cand.u;
  cert.u_decision = free_u;
  cert.eta = Mat::Zero(N, m);
  cert.w = Mat::Zero(N, stride);
  cert.v = Mat::Zero(N, stride);
  std::vector<RunningEval> evals(N);
  for (int j = 0; j < N; ++j) {
    const Vec pos = cand.X(j + 1) - cand.U(j + 1);
    const Vec nv = internal::TrapezoidNormal(pr, cand, j);
    const double tol = DefaultTol(pos) * (1.0 + nv.norm());
    if (m > 0 && pr.C.MaxViolation(pos) <= tol) {
      cert.eta.row(j) = FitNormal(nv, pos, pr.C, tol).Dense(m).transpose();
    }
    evals[j] = internal::MidpointEval(pr, cand, j, opts.kink_tol);
    cert.w.row(j) = internal::Stack(evals[j].wx, evals[j].wu, evals[j].wa);
    cert.v.row(j) = internal::Stack(evals[j].vx, evals[j].vu, evals[j].va);
  }
  const Vec eta_T = N > 0 ? Vec(cert.eta.row(N - 1).transpose()) : Vec::Zero(m);

  auto near_active = [&](int j) {
    const Vec pos = cand.X(j) - cand.U(j);
    const double tol = opts.active_margin * (1.0 + pos.norm());
    for (int i = 0; i < m; ++i) {
      if (std::abs(g.row(i).dot(pos)) <= tol) return true;
    }
    return false;
  };

  internal::DualSystem sys;
  const int off_p = sys.AddUnknowns((N + 1) * stride);
  auto px = [&](int j, int c) { return off_p + j * stride + c; };
  auto pu = [&](int j, int c) { return off_p + j * stride + n + c; };
  auto pa = [&](int j, int c) { return off_p + j * stride + 2 * n + c; };
  std::vector<int> gidx(N + 1, -1);
  for (int j = 0; j <= N; ++j) {
    if (near_active(j)) gidx[j] = sys.AddUnknowns(n);
  }
  std::vector<int> xidx(N + 1, -1);
  if (free_u) {
    for (int j = 0; j <= N; ++j) {
      if (internal::BandState(cand.U(j).norm(), pr.r - pr.tau, pr.r + pr.tau,
                              1e-6 * (1.0 + pr.r)) != 0) {
        xidx[j] = sys.AddUnknowns(1);
      }
    }
  }
  std::vector<std::vector<std::pair<int, int>>> kidx(N + 1);
  for (int j = 0; j < N; ++j) {
    for (int c : evals[j].kinks) kidx[j].push_back({c, sys.AddUnknowns(1)});
  }

  // Coefficients of q(t_j) in terms of the unknowns: q^x_j = p^x_j - sum of
  // gamma atoms at nodes >= j; q^u_j = p^u_j - sum 2 u xi + sum gamma.
  auto add_qx = [&](int row, int j, int c, double coef) {
    sys.Set(row, px(j, c), coef);
    for (int l = j; l <= N; ++l) {
      if (gidx[l] >= 0) sys.Set(row, gidx[l] + c, -coef);
    }
  };
  auto add_qu = [&](int row, int j, int c, double coef) {
    sys.Set(row, pu(j, c), coef);
    for (int l = j; l <= N; ++l) {
      if (xidx[l] >= 0) sys.Set(row, xidx[l], -coef * 2.0 * cand.u(l, c));
      if (gidx[l] >= 0) sys.Set(row, gidx[l] + c, coef);
    }
  };

  for (int j = 0; j < N; ++j) {
    const RunningEval& e = evals[j];
    // Integrated adjoint on [t_j, t_{j+1}] with Q = q(t_{j+1}).
    for (int c = 0; c < n; ++c) {
      const int r = sys.NewRow(h * (e.wx(c) + s * jx.col(c).dot(e.vx)));
      sys.Set(r, px(j + 1, c), 1.0);
      sys.Set(r, px(j, c), -1.0);
      for (int l = 0; l < n; ++l) add_qx(r, j + 1, l, h * s * jx(l, c));
    }
    for (int c = 0; c < n; ++c) {
      if (!free_u) {
        sys.Set(sys.NewRow(0.0), pu(j, c), 1.0);
        continue;
      }
      const int r = sys.NewRow(h * e.wu(c));
      sys.Set(r, pu(j + 1, c), 1.0);
      sys.Set(r, pu(j, c), -1.0);
    }
    for (int c = 0; c < d; ++c) {
      const int r = sys.NewRow(h * (e.wa(c) + s * ja.col(c).dot(e.vx)));
      sys.Set(r, pa(j + 1, c), 1.0);
      sys.Set(r, pa(j, c), -1.0);
      for (int l = 0; l < n; ++l) add_qx(r, j + 1, l, h * s * ja(l, c));
    }
    // Velocity identities on the interval.
    for (int c = 0; c < n && free_u; ++c) {
      const int r = sys.NewRow(e.vu(c));
      add_qu(r, j + 1, c, 1.0);
    }
    for (int c = 0; c < d; ++c) {
      const int r = sys.NewRow(e.va(c));
      sys.Set(r, pa(j + 1, c), 1.0);
      for (const auto& [kc, col] : kidx[j]) {
        if (kc == c) sys.Set(r, col, -1.0);
      }
    }
    // Implications: eta_i > 0 => <g_i, lambda v^x - q^x> = 0.
    for (int i = 0; i < m; ++i) {
      if (cert.eta(j, i) >
          10.0 * opts.consistency_tol * (1.0 + cert.eta.row(j).norm())) {
        const int r = sys.NewRow(g.row(i).dot(e.vx));
        for (int c = 0; c < n; ++c) add_qx(r, j + 1, c, g(i, c));
      }
    }
  }
  // Left endpoint: q^a(0) = lambda v^a(0).
  if (N > 0) {
    for (int c = 0; c < d; ++c) {
      const int r = sys.NewRow(evals[0].va(c));
      sys.Set(r, pa(0, c), 1.0);
      for (int c2 : evals[0].kinks) {
        if (c2 == c) {
          const int col = sys.AddUnknowns(1);
          kidx[N].push_back({c, col});
          sys.Set(r, col, -1.0);
        }
      }
    }
  }
  // Right endpoint.
  const Vec grad = pr.phi.Grad(cand.X(N));
  const Vec geta = g.transpose() * eta_T;
  for (int c = 0; c < n; ++c) {
    const int r = sys.NewRow(grad(c) + geta(c));
    sys.Set(r, px(N, c), -1.0);
  }
  int zeta = -1;
  if (free_u && internal::BandState(cand.U(N).norm(), pr.r - pr.tau,
                                    pr.r + pr.tau, 1e-6 * (1.0 + pr.r)) != 0) {
    zeta = sys.AddUnknowns(1);
  }
  for (int c = 0; c < n; ++c) {
    const int r = sys.NewRow(free_u ? geta(c) : 0.0);
    sys.Set(r, pu(N, c), 1.0);
    if (zeta >= 0) sys.Set(r, zeta, -2.0 * cand.u(N, c));
  }
  for (int c = 0; c < d; ++c) sys.Set(sys.NewRow(0.0), pa(N, c), 1.0);

  const internal::DualSolve ds =
      internal::SolveDuals(sys, opts.consistency_tol);
  cert.p = Mat::Zero(N + 1, stride);
  cert.gamma_atoms = Mat::Zero(N + 1, n);
  cert.gamma_density = Mat::Zero(N, n);
  cert.xi_atoms = Vec::Zero(N + 1);
  cert.xi_density = Vec::Zero(N);
  cert.kink = Mat::Zero(N, d);
  cert.eta_terminal = Vec::Zero(m);
  if (!ds.consistent) {
    cert.lambda = 0.0;
    cert.q = cert.p;
    cert.notes.push_back("no consistent multipliers; zero certificate");
    return cert;
  }
  const Vec& y = ds.y;
  cert.lambda = ds.lambda;
  for (int j = 0; j <= N; ++j) {
    cert.p.row(j) = y.segment(off_p + j * stride, stride).transpose();
    if (gidx[j] >= 0)
      cert.gamma_atoms.row(j) = y.segment(gidx[j], n).transpose();
    if (xidx[j] >= 0) cert.xi_atoms(j) = y(xidx[j]);
  }
  for (int j = 0; j < N; ++j) {
    for (const auto& [c, col] : kidx[j]) cert.kink(j, c) = y(col);
  }
  cert.eta_terminal = cert.lambda * eta_T;
  cert.q = cert.ReconstructQ();
  if (cert.lambda == 0.0) cert.notes.push_back("multipliers force lambda = 0");
  return cert;
}

struct ContinuousCheckOptions {
  double active_margin = 1e-6;
  double kink_tol = 1e-9;
};

inline CheckReport check_continuous(const SweepingProblem& pr,
                                    const DiscreteTrajectory& cand,
                                    const ContinuousCertificate& cert,
                                    double tol = 1e-6,
                                    const ContinuousCheckOptions& opts = {}) {
  CheckReport rep;
  const int N = cand.k();
  const int n = pr.n, d = pr.d, m = pr.C.size();
  const int stride = 2 * n + d;
  if (cert.N() != N || cert.p.rows() != N + 1 || cert.p.cols() != stride ||
      cert.q.rows() != N + 1 || cert.n != n || cert.d != d ||
      cert.gamma_atoms.rows() != N + 1 || cert.gamma_density.rows() != N) {
    rep.Add("shape", 1.0, 0.0, 0.0);
    return rep;
  }
  const double h = cand.mesh.h();
  const double T = pr.T;
  const double s = SignFactor(cert.sign);
  const Mat& g = pr.C.generators();
  const Mat jx = pr.f.JacX(n);
  const Mat ja = pr.f.JacA(n, d);
  const bool free_u = pr.u_decision;

  const double mag =
      std::max({std::abs(cert.lambda), cert.p.lpNorm<Eigen::Infinity>(),
                cert.q.lpNorm<Eigen::Infinity>()});
  const double dual = mag > 0.0 ? 1.0 / mag : 1.0;
  const Mat q = cert.ReconstructQ();
  auto Qx = [&](int j) { return Vec(q.row(j).segment(0, n).transpose()); };
  auto Qu = [&](int j) { return Vec(q.row(j).segment(n, n).transpose()); };
  auto Qa = [&](int j) { return Vec(q.row(j).segment(2 * n, d).transpose()); };
  auto Px = [&](int j) { return Vec(cert.p.row(j).segment(0, n).transpose()); };
  auto Pu = [&](int j) { return Vec(cert.p.row(j).segment(n, n).transpose()); };
  auto Pa = [&](int j) {
    return Vec(cert.p.row(j).segment(2 * n, d).transpose());
  };
  auto value_margin = [&](int j) {
    const Vec pos = cand.X(j) - cand.U(j);
    return opts.active_margin * (1.0 + pos.norm());
  };

  double vscale = 1.0;
  for (int j = 0; j < N; ++j)
    vscale = std::max(vscale, 1.0 + cand.XDot(j).norm());

  struct Worst {
    double r = 0.0, t = 0.0;
    void Take(double value, double at) {
      if (value > r || !std::isfinite(value)) {
        r = value;
        t = at;
      }
    }
  };
  Worst prim, adj, velu, vela, einact, ecompl;
  std::vector<Vec> eta_fit(N);
  for (int j = 0; j < N; ++j) {
    const double t = cand.mesh.t(j);
    const Vec pos = cand.X(j + 1) - cand.U(j + 1);
    const Vec nv = internal::TrapezoidNormal(pr, cand, j);
    const double ftol = DefaultTol(pos) * (1.0 + nv.norm());
    if (m == 0) {
      eta_fit[j] = Vec::Zero(0);
      prim.Take(nv.lpNorm<Eigen::Infinity>() / vscale, t);
    } else if (pr.C.MaxViolation(pos) > ftol) {
      eta_fit[j] = Vec::Zero(m);
      prim.Take(pr.C.MaxViolation(pos), t);
    } else {
      const ConeDecomposition dec = FitNormal(nv, pos, pr.C, ftol);
      eta_fit[j] = dec.Dense(m);
      prim.Take(dec.residual / vscale, t);
    }
    const RunningEval e = internal::MidpointEval(pr, cand, j, opts.kink_tol);
    const Vec psi = cert.lambda * e.vx - Qx(j + 1);
    const Vec rx =
        Px(j + 1) - Px(j) - h * (cert.lambda * e.wx + s * jx.transpose() * psi);
    const Vec ru =
        free_u ? Vec(Pu(j + 1) - Pu(j) - h * cert.lambda * e.wu) : Pu(j);
    const Vec ra =
        Pa(j + 1) - Pa(j) - h * (cert.lambda * e.wa + s * ja.transpose() * psi);
    adj.Take(
        std::max({rx.lpNorm<Eigen::Infinity>(), ru.lpNorm<Eigen::Infinity>(),
                  ra.size() ? ra.lpNorm<Eigen::Infinity>() : 0.0}) *
            dual,
        t);
    velu.Take((Qu(j + 1) - cert.lambda * e.vu).lpNorm<Eigen::Infinity>() * dual,
              t);
    for (int c = 0; c < d; ++c) {
      const bool is_kink =
          std::find(e.kinks.begin(), e.kinks.end(), c) != e.kinks.end();
      const double diff = Qa(j + 1)(c) - cert.lambda * e.va(c);
      const double r =
          is_kink ? std::max(0.0, std::abs(diff) - cert.lambda * e.abs_weight)
                  : std::abs(diff);
      vela.Take(r * dual, t);
    }
    for (int i = 0; i < m; ++i) {
      const double val = g.row(i).dot(pos);
      if (val < -10.0 * value_margin(j + 1)) {
        einact.Take(std::abs(eta_fit[j](i)) / vscale, t);
      }
      if (eta_fit[j](i) > 10.0 * tol * (1.0 + eta_fit[j].norm())) {
        ecompl.Take(std::abs(g.row(i).dot(psi)) * dual, t);
      }
    }
  }
  rep.Add("primal_dynamics", prim.r, tol, prim.t);
  rep.Add("adjoint", adj.r, tol, adj.t);
  if (free_u) rep.Add("velocity_u", velu.r, tol, velu.t);
  rep.Add("velocity_a", vela.r, tol, vela.t);
  rep.Add("q_reconstruction", (q - cert.q).lpNorm<Eigen::Infinity>() * dual,
          1e-8, 0.0);
  rep.Add("eta_inactive", einact.r, tol, einact.t);
  rep.Add("eta_complementarity", ecompl.r, tol, ecompl.t);

  // Right endpoint.
  const Vec et =
      cert.eta_terminal.size() == m ? cert.eta_terminal : Vec::Zero(m);
  const Vec gsum = g.transpose() * et;
  const Vec tx = -Px(N) - gsum - cert.lambda * pr.phi.Grad(cand.X(N));
  rep.Add("transversality_x", tx.lpNorm<Eigen::Infinity>() * dual, tol, T);
  rep.Add("transversality_a",
          (d ? Pa(N).lpNorm<Eigen::Infinity>() : 0.0) * dual, tol, T);
  if (free_u) {
    // p^u(T) - sum eta x* must be a multiple of 2 u(T) with the band sign.
    const Vec r0 = Pu(N) - gsum;
    const Vec uT = cand.U(N);
    const int st = internal::BandState(uT.norm(), pr.r - pr.tau, pr.r + pr.tau,
                                       1e-6 * (1.0 + pr.r));
    double res = r0.lpNorm<Eigen::Infinity>();
    if (st != 0 && uT.squaredNorm() > 0.0) {
      double c = r0.dot(2.0 * uT) / (4.0 * uT.squaredNorm());
      if (st == 1) c = std::max(0.0, c);
      if (st == -1) c = std::min(0.0, c);
      res = (r0 - 2.0 * c * uT).lpNorm<Eigen::Infinity>();
    }
    rep.Add("transversality_u", res * dual, tol, T);
  }
  {
    double r = 0.0;
    const Vec posT = cand.X(N) - cand.U(N);
    for (int i = 0; i < m; ++i) {
      r = std::max(r, std::max(0.0, -et(i)) * dual);
      if (g.row(i).dot(posT) < -10.0 * value_margin(N)) {
        r = std::max(r, std::abs(et(i)) * dual);
      }
    }
    rep.Add("endpoint_cone", r, tol, T);
  }

  // Left endpoint.
  if (N > 0) {
    const RunningEval e0 = internal::MidpointEval(pr, cand, 0, opts.kink_tol);
    double r = 0.0;
    for (int c = 0; c < d; ++c) {
      const double diff = Qa(0)(c) - cert.lambda * e0.va(c);
      const bool is_kink =
          std::find(e0.kinks.begin(), e0.kinks.end(), c) != e0.kinks.end();
      r = std::max(r, is_kink ? std::max(0.0, std::abs(diff) -
                                                  cert.lambda * e0.abs_weight)
                              : std::abs(diff));
    }
    if (free_u) {
      // q^u(0) - lambda v^u(0) in -2 u(0) N(band) + D*N(x0-u0, y)(w).
      const Vec pos0 = cand.X(0) - cand.U(0);
      const Vec y0 = internal::TrapezoidNormal(pr, cand, 0);
      const Vec dir = -Qx(0) + cert.lambda * e0.vx;
      const Vec target = Qu(0) - cert.lambda * e0.vu;
      double res = target.lpNorm<Eigen::Infinity>();
      try {
        const CoderivativeGenerators cg =
            coderivative_generators(pos0, y0, dir, pr.C, value_margin(0));
        if (cg.in_domain) {
          std::vector<Vec> cols;
          for (int i : cg.span_indices) {
            cols.push_back(pr.C.generator(i));
            cols.push_back(-pr.C.generator(i));
          }
          for (int i : cg.cone_indices) cols.push_back(pr.C.generator(i));
          const Vec u0 = cand.U(0);
          const int st = internal::BandState(
              u0.norm(), pr.r - pr.tau, pr.r + pr.tau, 1e-6 * (1.0 + pr.r));
          if (st == 1) cols.push_back(-2.0 * u0);
          if (st == -1) cols.push_back(2.0 * u0);
          if (cols.empty()) {
            res = target.lpNorm<Eigen::Infinity>();
          } else {
            Mat a(n, static_cast<Eigen::Index>(cols.size()));
            for (size_t c = 0; c < cols.size(); ++c) {
              a.col(static_cast<Eigen::Index>(c)) = cols[c];
            }
            const Vec coef = Nnls(a, target).x;
            res = (a * coef - target).lpNorm<Eigen::Infinity>();
          }
        }
      } catch (const Error&) {
        // Outside the coderivative's domain: keep the full residual.
      }
      r = std::max(r, res);
    }
    rep.Add("left_endpoint", r * dual, tol, 0.0);
  }

  // Nonatomicity: no gamma mass on maximal runs of strictly inactive nodes.
  {
    std::vector<bool> inactive(N + 1, true);
    for (int j = 0; j <= N; ++j) {
      const Vec pos = cand.X(j) - cand.U(j);
      for (int i = 0; i < m; ++i) {
        if (g.row(i).dot(pos) >= -10.0 * std::max(tol, value_margin(j))) {
          inactive[j] = false;
        }
      }
    }
    double worst = 0.0, at = 0.0;
    int j = 0;
    while (j <= N) {
      if (!inactive[j]) {
        ++j;
        continue;
      }
      int e = j;
      while (e + 1 <= N && inactive[e + 1]) ++e;
      double mass = 0.0;
      for (int l = j; l <= e; ++l) mass += cert.gamma_atoms.row(l).norm();
      for (int l = j; l < e; ++l) mass += h * cert.gamma_density.row(l).norm();
      if (mass * dual > worst) {
        worst = mass * dual;
        at = cand.mesh.t(j);
      }
      j = e + 1;
    }
    rep.Add("nonatomicity_gamma", worst, tol, at);
    if (free_u && pr.tau > 0.0) {
      double xm = 0.0, xt = 0.0;
      for (int l = 0; l <= N; ++l) {
        const int st = internal::BandState(cand.U(l).norm(), pr.r - pr.tau,
                                           pr.r + pr.tau, 1e-6 * (1.0 + pr.r));
        if (st != 0) continue;
        double mass = std::abs(cert.xi_atoms(l));
        if (l < N) mass += h * std::abs(cert.xi_density(l));
        if (mass * dual > xm) {
          xm = mass * dual;
          xt = cand.mesh.t(l);
        }
      }
      rep.Add("nonatomicity_xi", xm, tol, xt);
    }
  }

  // Nontriviality.
  double field_max = mag;
  field_max = std::max(field_max, cert.gamma_atoms.lpNorm<Eigen::Infinity>());
  field_max =
      std::max(field_max, h * cert.gamma_density.lpNorm<Eigen::Infinity>());
  const double pT = cert.p.row(N).norm();
  const double qu0 = free_u ? Qu(0).norm() : 0.0;
  const double basic = std::abs(cert.lambda) + qu0 + pT;
  rep.Add("nontriviality", NontrivialityResidual(basic, field_max, tol), tol,
          0.0);
  // Enhanced forms under the interiority premises.
  {
    bool premise_pT = false, premise_qu = false;
    const Vec pos0 = cand.X(0) - cand.U(0);
    const bool x0_interior =
        m == 0 || pr.C.MaxViolation(pos0) < -10.0 * value_margin(0);
    if (!free_u) {
      bool off_sphere = true;
      for (int j = 0; j < N; ++j) {
        const Vec uj = cand.U(j);
        if (std::abs(cand.X(j).dot(uj) - uj.squaredNorm()) <= 1e-9) {
          off_sphere = false;
        }
      }
      premise_pT = off_sphere || x0_interior;
    } else {
      const double un = cand.U(0).norm();
      const bool band_open =
          un > pr.r - pr.tau + 1e-9 && un < pr.r + pr.tau - 1e-9;
      premise_pT = pr.tau > 0.0 && pr.tau < pr.r && x0_interior && band_open;
      premise_qu = !x0_interior && band_open;
    }
    if (premise_pT) {
      rep.Add("enhanced_nontriviality",
              NontrivialityResidual(std::abs(cert.lambda) + pT, field_max, tol),
              tol, T);
    } else if (premise_qu) {
      rep.Add(
          "enhanced_nontriviality",
          NontrivialityResidual(std::abs(cert.lambda) + qu0, field_max, tol),
          tol, 0.0);
    }
  }
  rep.Add("lambda_sign", std::max(0.0, -cert.lambda) * dual, tol, 0.0);

  // Degeneracy flags.
  if (std::abs(cert.lambda) <= tol * std::max(field_max, 1e-300)) {
    rep.flags.push_back("lambda_zero");
    double interior = 0.0;
    for (int j = 1; j < N; ++j) {
      interior = std::max(interior, cert.gamma_atoms.row(j).norm());
    }
    interior =
        std::max(interior, h * cert.gamma_density.lpNorm<Eigen::Infinity>());
    const double endpoint = std::max(cert.gamma_atoms.row(0).norm(),
                                     cert.gamma_atoms.row(N).norm());
    if (endpoint > tol * std::max(field_max, 1e-300) &&
        interior <= tol * std::max(field_max, 1e-300)) {
      rep.flags.push_back("endpoint_only");
    }
  }
  return rep;
}

// Continuous certificate assembled from a sequence of discrete certificates
// on refined meshes: the finest level's duals are extended piecewise, the
// node multipliers become densities on the intervals, and the terminal
// multiplier beyond the last contact multiplier becomes an atom at T.
inline ContinuousCertificate limit_certificate(
    const std::vector<DiscreteCertificate>& seq, const Polyhedron& c) {
  if (seq.size() < 2) {
    throw Error(ErrorCode::kInconsistentSequence,
                "at least two refinement levels are required");
  }
  for (size_t l = 1; l < seq.size(); ++l) {
    if (seq[l].k() <= seq[l - 1].k()) {
      throw Error(ErrorCode::kInconsistentSequence,
                  "levels must be ordered by increasing k");
    }
  }
  // Dual norms must stay bounded under the common normalization.
  const double first =
      seq.front().p.lpNorm<Eigen::Infinity>() + std::abs(seq.front().lambda);
  const double last =
      seq.back().p.lpNorm<Eigen::Infinity>() + std::abs(seq.back().lambda);
  if (!std::isfinite(last) || last > 100.0 * std::max(first, 1e-12)) {
    throw Error(ErrorCode::kInconsistentSequence,
                "dual norms grow along the refinement sequence", last / first);
  }
  const DiscreteCertificate& f = seq.back();
  const int k = f.k();
  const int n = f.n, d = f.d, m = f.m;
  const double h = f.mesh.h();
  const Mat& g = c.generators();

  ContinuousCertificate out;
  out.mesh = f.mesh;
  out.n = n;
  out.d = d;
  out.m = m;
  out.sign = f.sign;
  out.lambda = f.lambda;
  out.u = f.u;
  out.u_decision = f.u_decision;
  out.eta = f.eta;
  out.w = f.w;
  out.v = f.v;
  out.kink = f.kink;
  out.gamma_density = Mat::Zero(k, n);
  for (int j = 0; j < k; ++j) {
    out.gamma_density.row(j) =
        (g.transpose() * f.gamma.row(j).transpose()).transpose();
  }
  out.xi_atoms = Vec::Zero(k + 1);
  out.xi_density = Vec::Zero(k);
  for (int j = 0; j < k; ++j) out.xi_density(j) = f.xi(j) / h;
  out.xi_atoms(k) = f.xi(k);
  // Terminal atom c = sum (eta_k - lambda eta_{k-1}) g.
  const Vec eta_last = k > 0 ? Vec(f.eta.row(k - 1).transpose()) : Vec::Zero(m);
  out.eta_terminal = f.lambda * eta_last;
  out.gamma_atoms = Mat::Zero(k + 1, n);
  out.gamma_atoms.row(k) =
      (g.transpose() * (f.eta_terminal - out.eta_terminal)).transpose();
  // p^c = p^d + (gamma tail, xi tail - gamma tail, 0), so that q = p^d.
  out.p = f.p;
  for (int j = 0; j <= k; ++j) {
    const Vec gt = out.GammaTail(j);
    out.p.row(j).segment(0, n) += gt.transpose();
    if (out.u_decision) {
      out.p.row(j).segment(n, n) += (out.XiTail(j) - gt).transpose();
    }
  }
  out.q = out.ReconstructQ();

  // Atom detection: node masses that dominate their neighbours.
  Vec mass(k + 1);
  for (int j = 0; j < k; ++j) mass(j) = h * out.gamma_density.row(j).norm();
  mass(k) = out.gamma_atoms.row(k).norm();
  const double scale = std::max(1e-12, mass.maxCoeff());
  for (int j = 0; j <= k; ++j) {
    const double left = j > 0 ? mass(j - 1) : 0.0;
    const double right = j < k ? mass(j + 1) : 0.0;
    if (mass(j) > 1e-6 * scale && mass(j) > 10.0 * std::max(left, right)) {
      Vec atom = j < k ? Vec(h * out.gamma_density.row(j).transpose())
                       : Vec(out.gamma_atoms.row(k).transpose());
      out.detected_atoms.push_back({f.mesh.t(j), atom});
    }
  }
  return out;
}

}  // namespace sweep

#endif  // SWEEP_CERTIFICATES_HPP_
