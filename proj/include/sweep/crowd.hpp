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

// Corridor crowd motion: n participants (disks of radius R) on a line move
// towards the exit at the origin with velocities -s_i a_i, where the a_i are
// constant controls. Participants are ordered, x_1 < ... < x_n, and may not
// overlap: x_{i+1} - x_i >= 2R. The contact forces eta_i >= 0 act between
// neighbours i and i+1:
//
//   dx_i/dt = -s_i a_i - eta_i + eta_{i-1},   eta_0 = eta_n = 0.
//
// The cost is |x(T)|^2 / 2 + T |a|^2 / 2. The model embeds into the general
// sweeping problem with C = {x : x_i <= x_{i+1}} and a constant shift u whose
// consecutive entries differ by 2R.

#ifndef SWEEP_CROWD_HPP_
#define SWEEP_CROWD_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sweep/certificates.hpp"
#include "sweep/common.hpp"
#include "sweep/geometry.hpp"
#include "sweep/problem.hpp"

namespace sweep {

struct CrowdConfig {
  int n = 2;
  double R = 0.0;
  double T = 1.0;
  Vec speeds;
  Vec x0;
  std::optional<double> alpha;  // base of the constant shift u

  // Gap tolerance used for contact detection.
  double GapTol() const { return 1e-9 * (1.0 + x0.lpNorm<Eigen::Infinity>()); }

  void Validate() const {
    if (n < 1) throw Error(ErrorCode::kConfigError, "n must be positive");
    if (!(T > 0.0)) throw Error(ErrorCode::kConfigError, "T must be positive");
    if (R < 0.0) throw Error(ErrorCode::kConfigError, "R must be >= 0");
    RequireSize(speeds, n, "speeds");
    RequireSize(x0, n, "x0");
    for (int i = 0; i < n; ++i) {
      if (!(speeds(i) > 0.0)) {
        throw Error(ErrorCode::kConfigError, "speeds must be positive");
      }
    }
    for (int i = 0; i + 1 < n; ++i) {
      if (x0(i + 1) - x0(i) < 2.0 * R - GapTol()) {
        throw Error(
            ErrorCode::kConfigError,
            "initial positions overlap at pair " + std::to_string(i + 1),
            x0(i + 1) - x0(i));
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Event-driven simulation.

struct CrowdSegment {
  double t0 = 0.0, t1 = 0.0;
  Vec x_start;                // positions at t0
  Vec slopes;                 // velocities on (t0, t1)
  Vec eta;                    // n-1 contact forces on (t0, t1)
  std::vector<bool> contact;  // pair in contact on (t0, t1)
};

struct CrowdTrajectory {
  std::vector<CrowdSegment> segments;
  std::vector<std::optional<double>> contact_times;  // first contact per pair
  Vec x_final;

  Vec Position(double t) const {
    for (const auto& s : segments) {
      if (t <= s.t1 || &s == &segments.back()) {
        return s.x_start + (std::min(t, s.t1) - s.t0) * s.slopes;
      }
    }
    return x_final;
  }
  // Contact force of pair i just after time t.
  double EtaAfter(int i, double t) const {
    for (const auto& s : segments) {
      if (t < s.t1) return s.eta(i);
    }
    return segments.empty() ? 0.0 : segments.back().eta(i);
  }
  double MaxEtaAfter(int i, double t) const {
    double m = 0.0;
    for (const auto& s : segments) {
      if (s.t1 > t) m = std::max(m, s.eta(i));
    }
    return m;
  }
  // Maximal contact run [first, last] containing pair i just after t.
  std::pair<int, int> ClusterAfter(int i, double t) const {
    for (const auto& s : segments) {
      if (t < s.t1 || &s == &segments.back()) {
        int lo = i, hi = i + 1;
        while (lo > 0 && s.contact[lo - 1]) --lo;
        while (hi < static_cast<int>(s.slopes.size()) - 1 && s.contact[hi]) {
          ++hi;
        }
        return {lo, hi};
      }
    }
    return {i, i + 1};
  }
};

namespace internal {

// Velocities of one contact run: the nondecreasing (pool-adjacent-violators)
// fit to the free velocities.
inline void PoolRun(const Vec& free_v, int lo, int hi, Vec& v) {
  struct Block {
    double sum;
    int count;
    int first;
  };
  std::vector<Block> st;
  for (int i = lo; i <= hi; ++i) {
    st.push_back({free_v(i), 1, i});
    while (st.size() >= 2) {
      const Block& b = st[st.size() - 1];
      const Block& a = st[st.size() - 2];
      if (a.sum / a.count > b.sum / b.count) {
        Block merged{a.sum + b.sum, a.count + b.count, a.first};
        st.pop_back();
        st.back() = merged;
      } else {
        break;
      }
    }
  }
  for (const Block& b : st) {
    for (int i = b.first; i < b.first + b.count; ++i) v(i) = b.sum / b.count;
  }
}

}  // namespace internal

inline Vec CrowdFreeVelocity(const CrowdConfig& cfg, const Vec& a) {
  return -cfg.speeds.cwiseProduct(a);
}

inline CrowdTrajectory simulate_crowd(const CrowdConfig& cfg, const Vec& a) {
  cfg.Validate();
  RequireSize(a, cfg.n, "crowd controls");
  const int n = cfg.n;
  const double tol = cfg.GapTol();
  const Vec U = CrowdFreeVelocity(cfg, a);
  CrowdTrajectory out;
  out.contact_times.assign(std::max(0, n - 1), std::nullopt);
  Vec x = cfg.x0;
  double t = 0.0;
  for (int iter = 0; iter < 4 * n + 8 && t < cfg.T; ++iter) {
    CrowdSegment seg;
    seg.t0 = t;
    seg.x_start = x;
    seg.contact.assign(std::max(0, n - 1), false);
    for (int i = 0; i + 1 < n; ++i) {
      seg.contact[i] = x(i + 1) - x(i) - 2.0 * cfg.R <= tol;
    }
    Vec v = U;
    int lo = 0;
    while (lo < n) {
      int hi = lo;
      while (hi + 1 < n && seg.contact[hi]) ++hi;
      internal::PoolRun(U, lo, hi, v);
      lo = hi + 1;
    }
    seg.slopes = v;
    seg.eta = Vec::Zero(std::max(0, n - 1));
    double acc = 0.0;
    for (int i = 0; i + 1 < n; ++i) {
      acc += U(i) - v(i);
      seg.eta(i) = seg.contact[i] ? std::max(0.0, acc) : 0.0;
    }
    for (int i = 0; i + 1 < n; ++i) {
      if (seg.contact[i] && v(i) >= v(i + 1) - 1e-14 * (1.0 + std::abs(v(i))) &&
          !out.contact_times[i]) {
        out.contact_times[i] = t;
      }
    }
    double next = cfg.T;
    for (int i = 0; i + 1 < n; ++i) {
      if (seg.contact[i]) continue;
      const double closing = v(i) - v(i + 1);
      if (closing <= 0.0) continue;
      const double dt = (x(i + 1) - x(i) - 2.0 * cfg.R) / closing;
      next = std::min(next, t + std::max(0.0, dt));
    }
    if (next > cfg.T - 1e-12 * cfg.T) next = cfg.T;
    seg.t1 = next;
    x = x + (next - t) * v;
    // Snap pairs that close at this event onto the contact distance.
    for (int i = 0; i + 1 < n; ++i) {
      if (x(i + 1) - x(i) - 2.0 * cfg.R <= tol) {
        x(i + 1) = std::max(x(i + 1), x(i) + 2.0 * cfg.R);
      }
    }
    t = next;
    out.segments.push_back(seg);
  }
  out.x_final = x;
  return out;
}

inline double crowd_cost(const CrowdConfig& cfg, const Vec& a) {
  const CrowdTrajectory tr = simulate_crowd(cfg, a);
  return 0.5 * tr.x_final.squaredNorm() + 0.5 * cfg.T * a.squaredNorm();
}

// ---------------------------------------------------------------------------
// Contact relations.

// State at the last event theta before pair i meets: the gap of the pair and
// the forces acting on its outer sides.
struct EtaHistory {
  double theta = 0.0;
  double gap = 0.0;       // x_{i+1}(theta) - x_i(theta)
  double eta_prev = 0.0;  // eta_{i-1}(theta)
  double eta_next = 0.0;  // eta_{i+1}(theta)
};

// Contact time of pair i (participants i and i+1, zero-based i):
// theta + (gap - 2R) / (eta_{i+1} + eta_{i-1} + s_{i+1} a_{i+1} - s_i a_i).
// Returns 0 for an initial contact and nothing when the pair does not
// approach or meets after T.
inline std::optional<double> contact_time(int i, const CrowdConfig& cfg,
                                          const Vec& a, const EtaHistory& h) {
  if (h.theta == 0.0 && h.gap - 2.0 * cfg.R <= cfg.GapTol()) return 0.0;
  const double den = h.eta_next + h.eta_prev + cfg.speeds(i + 1) * a(i + 1) -
                     cfg.speeds(i) * a(i);
  if (!(den > 0.0)) return std::nullopt;
  const double t = h.theta + (h.gap - 2.0 * cfg.R) / den;
  if (t > cfg.T) return std::nullopt;
  return t;
}

// Force of pair i at its contact time from the forces of the neighbouring
// pairs: 2 eta_i = eta_{i+1} + eta_{i-1} + s_{i+1} a_{i+1} - s_i a_i.
inline double velocity_match(int i, const CrowdConfig& cfg, const Vec& a,
                             double eta_prev, double eta_next) {
  return 0.5 * (eta_next + eta_prev + cfg.speeds(i + 1) * a(i + 1) -
                cfg.speeds(i) * a(i));
}

// Linear relation coef . a = rhs among the controls.
struct LinearRelation {
  Vec coef;
  double rhs = 0.0;
  std::string label;
};

// s_{i+1} a_i = s_i a_{i+1} for every pair i with a positive contact force.
inline std::vector<LinearRelation> proportionality_relations(
    const CrowdConfig& cfg, const std::vector<int>& pairs) {
  std::vector<LinearRelation> out;
  for (int i : pairs) {
    LinearRelation r;
    r.coef = Vec::Zero(cfg.n);
    r.coef(i) = cfg.speeds(i + 1);
    r.coef(i + 1) = -cfg.speeds(i);
    r.label = "s" + std::to_string(i + 2) + " a" + std::to_string(i + 1) +
              " = s" + std::to_string(i + 1) + " a" + std::to_string(i + 2);
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Embedding into the general problem.

inline double CrowdAlpha(const CrowdConfig& cfg) {
  if (cfg.alpha) return *cfg.alpha;
  const double l = cfg.x0.norm() + 5.0 * cfg.T * cfg.speeds.maxCoeff();
  return 10.0 * (l + 2.0 * cfg.R * cfg.n);
}

inline Vec CrowdShift(const CrowdConfig& cfg) {
  Vec u(cfg.n);
  const double alpha = CrowdAlpha(cfg);
  for (int i = 0; i < cfg.n; ++i) u(i) = alpha + 2.0 * cfg.R * i;
  return u;
}

inline SweepingProblem crowd_problem(const CrowdConfig& cfg) {
  cfg.Validate();
  SweepingProblem p;
  p.n = p.d = cfg.n;
  p.T = cfg.T;
  p.x0 = cfg.x0;
  p.C = ChainPolyhedron(cfg.n);
  p.u_path = LinearPath::Constant(CrowdShift(cfg));
  p.r = p.u_path.value.norm();
  p.f = Perturbation::DiagSpeeds(cfg.speeds);
  p.phi.weight = 1.0;
  p.phi.target = Vec::Zero(cfg.n);
  RunningTerm ctl;
  ctl.kind = RunningTerm::Kind::kControlQuadratic;
  ctl.weight = 1.0;
  p.ell.terms = {ctl};
  p.M = cfg.speeds.maxCoeff();
  return p;
}

// Samples an exact crowd trajectory on N uniform intervals.
inline DiscreteTrajectory SampleCrowd(const CrowdConfig& cfg, const Vec& a,
                                      const CrowdTrajectory& tr, int N) {
  DiscreteTrajectory c;
  c.mesh = Mesh(N, cfg.T);
  c.x = Mat(N + 1, cfg.n);
  c.u = Mat(N + 1, cfg.n);
  c.a = Mat(N + 1, cfg.n);
  const Vec u = CrowdShift(cfg);
  for (int j = 0; j <= N; ++j) {
    c.x.row(j) = tr.Position(c.mesh.t(j)).transpose();
    c.u.row(j) = u.transpose();
    c.a.row(j) = a.transpose();
  }
  return c;
}

// ---------------------------------------------------------------------------
// Pattern enumeration.

struct CrowdBranch {
  std::vector<bool> contact_at_T;  // per pair
  std::vector<bool> zero_force;    // per pair in contact: eta_i(t_i) = 0
  // Separated pairs held exactly at distance 2R at T (constraint active).
  std::vector<bool> touching_at_T;
  Vec a_bar;
  double cost = std::numeric_limits<double>::infinity();
  bool feasible = false;
  std::string reason;

  std::string Label() const {
    std::string s = "{";
    bool first = true;
    for (size_t i = 0; i < contact_at_T.size(); ++i) {
      const bool touch = i < touching_at_T.size() && touching_at_T[i];
      if (!contact_at_T[i] && !touch) continue;
      if (!first) s += ",";
      first = false;
      s += std::to_string(i + 1) + (touch           ? ":touch@T"
                                    : zero_force[i] ? ":eta=0"
                                                    : ":eta>0");
    }
    return s + "}";
  }
};

struct CrowdCertificateSummary {
  bool verdict = false;
  double lambda = 0.0;
  Vec gamma_total;                    // gamma([t_first_contact, T])
  double gamma_before_contact = 0.0;  // mass on [0, t_first - 0.01]
  std::vector<std::string> failed;
  AdjointSign sign = AdjointSign::kPublished;
};

struct CrowdSolution {
  Vec a_bar;
  double cost = 0.0;
  CrowdTrajectory trajectory;
  std::vector<bool> pattern;  // pairs in contact at T
  std::vector<CrowdBranch> branches;
  bool refined = false;  // the local search improved on the branch optimum
  CrowdCertificateSummary certificate;
  std::vector<std::string> flags;
};

namespace internal {

// Terminal positions x(T) = c + M a when the contact blocks at T are
// given by `contact_at_T`: every block ends packed at distance 2R around the
// mean of its initial positions, shifted by T times its mean free velocity.
struct BlockModel {
  Vec c;
  Mat M;
};

inline BlockModel TerminalBlockModel(const CrowdConfig& cfg,
                                     const std::vector<bool>& contact_at_T) {
  const int n = cfg.n;
  BlockModel bm{Vec::Zero(n), Mat::Zero(n, n)};
  int lo = 0;
  while (lo < n) {
    int hi = lo;
    while (hi + 1 < n && contact_at_T[hi]) ++hi;
    const int size = hi - lo + 1;
    const double mean_x0 = cfg.x0.segment(lo, size).mean();
    const double mid = 0.5 * (lo + hi);
    for (int i = lo; i <= hi; ++i) {
      bm.c(i) = mean_x0 + 2.0 * cfg.R * (i - mid);
      for (int k = lo; k <= hi; ++k) bm.M(i, k) = -cfg.T * cfg.speeds(k) / size;
    }
    lo = hi + 1;
  }
  return bm;
}

// Minimizes the cost over constant controls under the block model, subject
// to linear relations.
inline Vec SolvePartition(const CrowdConfig& cfg,
                          const std::vector<bool>& contact_at_T,
                          const std::vector<LinearRelation>& rel) {
  const int n = cfg.n;
  const BlockModel bm = TerminalBlockModel(cfg, contact_at_T);
  const int e = static_cast<int>(rel.size());
  Mat kkt = Mat::Zero(n + e, n + e);
  kkt.topLeftCorner(n, n) =
      bm.M.transpose() * bm.M + cfg.T * Mat::Identity(n, n);
  Vec rhs = Vec::Zero(n + e);
  rhs.head(n) = -bm.M.transpose() * bm.c;
  for (int r = 0; r < e; ++r) {
    kkt.block(n + r, 0, 1, n) = rel[r].coef.transpose();
    kkt.block(0, n + r, n, 1) = rel[r].coef;
    rhs(n + r) = rel[r].rhs;
  }
  const Vec sol = kkt.completeOrthogonalDecomposition().solve(rhs);
  return sol.head(n);
}

// Pair i (separated at T under the block model) just touching at T:
// x_{i+1}(T) - x_i(T) = 2R.
inline LinearRelation TouchingAtTRelation(const CrowdConfig& cfg,
                                          const std::vector<bool>& contact_at_T,
                                          int i) {
  const BlockModel bm = TerminalBlockModel(cfg, contact_at_T);
  LinearRelation r;
  r.coef = (bm.M.row(i + 1) - bm.M.row(i)).transpose();
  r.rhs = 2.0 * cfg.R - (bm.c(i + 1) - bm.c(i));
  r.label = "pair " + std::to_string(i + 1) + " touches at T";
  return r;
}

// eta_i at the moment a cluster [lo, hi] moves as one block, as a linear
// function of a: sum_{m=lo..i} (U_m - mean U).
inline LinearRelation ZeroForceRelation(const CrowdConfig& cfg, int i, int lo,
                                        int hi) {
  LinearRelation r;
  r.coef = Vec::Zero(cfg.n);
  const double size = hi - lo + 1;
  const double frac = (i - lo + 1) / size;
  for (int k = lo; k <= hi; ++k) {
    r.coef(k) = -cfg.speeds(k) * ((k <= i ? 1.0 : 0.0) - frac);
  }
  r.label =
      "eta" + std::to_string(i + 1) + "(t" + std::to_string(i + 1) + ") = 0";
  return r;
}

inline std::pair<int, int> InitialCluster(const CrowdConfig& cfg, int i) {
  const double tol = cfg.GapTol();
  auto touching = [&](int p) {
    return cfg.x0(p + 1) - cfg.x0(p) - 2.0 * cfg.R <= tol;
  };
  int lo = i, hi = i + 1;
  while (lo > 0 && touching(lo - 1)) --lo;
  while (hi + 1 < cfg.n && touching(hi)) ++hi;
  return {lo, hi};
}

// Removes round-off from proportional controls: on every run of adjacent
// pairs with positive contact force the controls satisfy a_i / s_i = c, so
// the run is replaced by s_i c with c the least-squares ratio.
inline void SnapProportional(const CrowdConfig& cfg,
                             const std::vector<int>& positive, Vec& a) {
  size_t q = 0;
  while (q < positive.size()) {
    size_t e = q;
    while (e + 1 < positive.size() && positive[e + 1] == positive[e] + 1) ++e;
    const int lo = positive[q], hi = positive[e] + 1;
    const Vec s = cfg.speeds.segment(lo, hi - lo + 1);
    const double c = s.dot(a.segment(lo, hi - lo + 1)) / s.squaredNorm();
    for (int i = lo; i <= hi; ++i) a(i) = cfg.speeds(i) * c;
    q = e + 1;
  }
}

inline void EvaluateBranch(const CrowdConfig& cfg, CrowdBranch& b) {
  const int n = cfg.n;
  const double tol = cfg.GapTol();
  b.touching_at_T.assign(std::max(0, n - 1), false);
  std::vector<int> positive;
  for (int i = 0; i + 1 < n; ++i) {
    if (b.contact_at_T[i] && !b.zero_force[i]) positive.push_back(i);
  }
  const std::vector<LinearRelation> prop =
      proportionality_relations(cfg, positive);
  auto at_T = [&](const CrowdTrajectory& tr, int i) {
    return tr.x_final(i + 1) - tr.x_final(i) - 2.0 * cfg.R <= 1e3 * tol;
  };
  Vec a;
  // Outer loop: separated pairs whose unconstrained optimum would overlap
  // are held at the switching surface (touching exactly at T).
  for (int outer = 0; outer < n; ++outer) {
    std::vector<LinearRelation> base = prop;
    for (int i = 0; i + 1 < n; ++i) {
      if (b.touching_at_T[i]) {
        base.push_back(TouchingAtTRelation(cfg, b.contact_at_T, i));
      }
    }
    a = SolvePartition(cfg, b.contact_at_T, base);
    // Zero-force relations depend on the cluster composition at contact.
    for (int pass = 0; pass < 4; ++pass) {
      const CrowdTrajectory tr = simulate_crowd(cfg, a);
      std::vector<LinearRelation> rel = base;
      for (int i = 0; i + 1 < n; ++i) {
        if (!b.contact_at_T[i] || !b.zero_force[i]) continue;
        std::pair<int, int> cl;
        if (cfg.x0(i + 1) - cfg.x0(i) - 2.0 * cfg.R <= tol) {
          cl = InitialCluster(cfg, i);
        } else if (tr.contact_times[i]) {
          cl = tr.ClusterAfter(i, *tr.contact_times[i]);
        } else {
          cl = {i, i + 1};
        }
        rel.push_back(ZeroForceRelation(cfg, i, cl.first, cl.second));
      }
      const Vec next = SolvePartition(cfg, b.contact_at_T, rel);
      const bool same = (next - a).norm() <= 1e-12 * (1.0 + a.norm());
      a = next;
      if (same) break;
    }
    const CrowdTrajectory tr = simulate_crowd(cfg, a);
    bool added = false;
    for (int i = 0; i + 1 < n; ++i) {
      if (!b.contact_at_T[i] && !b.touching_at_T[i] && at_T(tr, i)) {
        b.touching_at_T[i] = true;
        added = true;
      }
    }
    if (!added) break;
  }
  SnapProportional(cfg, positive, a);
  b.a_bar = a;
  const CrowdTrajectory tr = simulate_crowd(cfg, a);
  b.cost = 0.5 * tr.x_final.squaredNorm() + 0.5 * cfg.T * a.squaredNorm();
  const double etol = 1e-7 * (1.0 + cfg.speeds.maxCoeff() * a.norm());
  for (int i = 0; i + 1 < n; ++i) {
    const bool touching = at_T(tr, i);
    if (b.touching_at_T[i]) {
      if (std::abs(tr.x_final(i + 1) - tr.x_final(i) - 2.0 * cfg.R) >
          1e3 * tol) {
        b.reason = "pair " + std::to_string(i + 1) + " cannot touch at T";
        return;
      }
      continue;
    }
    if (touching != b.contact_at_T[i]) {
      b.reason = "pair " + std::to_string(i + 1) +
                 (touching ? " is in contact at T" : " is not in contact at T");
      return;
    }
    if (!touching) continue;
    if (!tr.contact_times[i]) {
      b.reason = "pair " + std::to_string(i + 1) + " has no contact time";
      return;
    }
    const double ti = *tr.contact_times[i];
    const double eta_i = tr.EtaAfter(i, ti);
    if (!b.zero_force[i] && !(eta_i > etol)) {
      b.reason = "eta" + std::to_string(i + 1) + "(t" + std::to_string(i + 1) +
                 ") is not positive";
      return;
    }
    if (b.zero_force[i]) {
      if (std::abs(eta_i) > etol) {
        b.reason = "eta" + std::to_string(i + 1) + " at contact is nonzero";
        return;
      }
      const double prop_res =
          std::abs(cfg.speeds(i + 1) * a(i) - cfg.speeds(i) * a(i + 1));
      if (tr.MaxEtaAfter(i, ti) > etol && prop_res > 1e-8 * (1.0 + a.norm())) {
        b.reason = "eta" + std::to_string(i + 1) +
                   " turns positive later without proportional controls";
        return;
      }
    }
  }
  b.feasible = true;
  b.reason = "feasible";
}

// Compass search on the exact simulated cost.
inline Vec RefineLocally(const CrowdConfig& cfg, Vec a, double step,
                         double min_step) {
  double best = crowd_cost(cfg, a);
  while (step > min_step) {
    bool improved = false;
    for (int k = 0; k < cfg.n; ++k) {
      for (double dir : {1.0, -1.0}) {
        Vec trial = a;
        trial(k) += dir * step;
        const double c = crowd_cost(cfg, trial);
        if (c < best - 1e-14 * (1.0 + std::abs(best))) {
          best = c;
          a = trial;
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return a;
}

}  // namespace internal

struct CrowdSolveOptions {
  int certificate_intervals = 60;
  AdjointSign certificate_sign = AdjointSign::kPublished;
  double certificate_tol = 1e-6;
  bool refine = true;
};

inline CrowdCertificateSummary CertifyCrowd(const CrowdConfig& cfg,
                                            const Vec& a,
                                            const CrowdTrajectory& tr,
                                            const CrowdSolveOptions& opts) {
  CrowdCertificateSummary s;
  s.sign = opts.certificate_sign;
  const SweepingProblem p = crowd_problem(cfg);
  const DiscreteTrajectory cand =
      SampleCrowd(cfg, a, tr, opts.certificate_intervals);
  ContinuousOptions co;
  co.sign = opts.certificate_sign;
  const ContinuousCertificate cert = fit_continuous_certificate(p, cand, co);
  const CheckReport rep = check_continuous(p, cand, cert, opts.certificate_tol);
  s.verdict = rep.verdict;
  s.lambda = cert.lambda;
  s.failed = rep.Failed();
  double first = cfg.T;
  for (const auto& t : tr.contact_times) {
    if (t) first = std::min(first, *t);
  }
  const int N = cand.k();
  const double h = cand.mesh.h();
  int j_first = static_cast<int>(std::ceil(first / h - 1e-12));
  j_first = std::clamp(j_first, 0, N);
  s.gamma_total = cert.GammaTail(j_first);
  const Vec all = cert.GammaTail(0);
  double before = 0.0;
  for (int j = 0; j <= N && cand.mesh.t(j) <= first - 0.01; ++j) {
    before += cert.gamma_atoms.row(j).norm();
    if (j < N) before += h * cert.gamma_density.row(j).norm();
  }
  (void)all;
  s.gamma_before_contact = before;
  return s;
}

inline CrowdSolution solve_crowd(const CrowdConfig& cfg,
                                 const CrowdSolveOptions& opts = {}) {
  cfg.Validate();
  const int n = cfg.n;
  const int pairs = n - 1;
  CrowdSolution out;
  int best = -1;
  for (int mask = 0; mask < (1 << pairs); ++mask) {
    std::vector<int> in;
    for (int i = 0; i < pairs; ++i) {
      if (mask & (1 << i)) in.push_back(i);
    }
    const int sub_count = 1 << in.size();
    for (int sub = 0; sub < sub_count; ++sub) {
      CrowdBranch b;
      b.contact_at_T.assign(pairs, false);
      b.zero_force.assign(pairs, false);
      for (size_t q = 0; q < in.size(); ++q) {
        b.contact_at_T[in[q]] = true;
        b.zero_force[in[q]] = (sub >> q) & 1;
      }
      internal::EvaluateBranch(cfg, b);
      out.branches.push_back(b);
      if (b.feasible &&
          (best < 0 || b.cost < out.branches[best].cost - 1e-12)) {
        best = static_cast<int>(out.branches.size()) - 1;
      }
    }
  }
  if (best < 0) {
    throw Error(ErrorCode::kNoFeasiblePattern,
                "no contact pattern is consistent with the dynamics");
  }
  Vec a = out.branches[best].a_bar;
  if (opts.refine) {
    const double c0 = crowd_cost(cfg, a);
    const Vec r = internal::RefineLocally(cfg, a, 1e-2, 1e-10);
    if (crowd_cost(cfg, r) < c0 - 1e-9 * (1.0 + std::abs(c0))) {
      a = r;
      out.refined = true;
      out.flags.push_back("local_search_improved_branch_optimum");
    }
  }
  out.a_bar = a;
  out.trajectory = simulate_crowd(cfg, a);
  out.cost = 0.5 * out.trajectory.x_final.squaredNorm() +
             0.5 * cfg.T * a.squaredNorm();
  out.pattern.assign(pairs, false);
  for (int i = 0; i < pairs; ++i) {
    out.pattern[i] = out.trajectory.x_final(i + 1) - out.trajectory.x_final(i) -
                         2.0 * cfg.R <=
                     1e3 * cfg.GapTol();
  }
  // Chain merges: more than one pair closing at the same or later events.
  int merges = 0;
  for (const auto& t : out.trajectory.contact_times) {
    if (t && *t > 0.0) ++merges;
  }
  if (merges > 1) out.flags.push_back("multiple_contact_events");
  out.certificate = CertifyCrowd(cfg, a, out.trajectory, opts);
  if (!out.certificate.verdict) out.flags.push_back("certificate_failed");
  return out;
}

// Exhaustive grid search over [lo, hi]^n with successive local refinement:
// a coarse grid, then grids of ten times finer step in a box of two coarse
// steps around the incumbent, down to `fine_step`.
struct BruteForceResult {
  Vec a_bar;
  double cost = std::numeric_limits<double>::infinity();
  long evaluations = 0;
};

inline BruteForceResult crowd_brute_force(const CrowdConfig& cfg, double lo,
                                          double hi, double coarse_step,
                                          double fine_step) {
  cfg.Validate();
  const int n = cfg.n;
  BruteForceResult res;
  Vec center = Vec::Constant(n, 0.5 * (lo + hi));
  double half = 0.5 * (hi - lo);
  double step = coarse_step;
  while (true) {
    const int per = static_cast<int>(std::floor(2.0 * half / step + 1e-9)) + 1;
    long total = 1;
    for (int k = 0; k < n; ++k) total *= per;
    Vec best_a = center;
    double best_c = std::numeric_limits<double>::infinity();
    Vec a(n);
    for (long idx = 0; idx < total; ++idx) {
      long r = idx;
      for (int k = 0; k < n; ++k) {
        a(k) = std::clamp(center(k) - half + step * (r % per), lo, hi);
        r /= per;
      }
      const double c = crowd_cost(cfg, a);
      ++res.evaluations;
      if (c < best_c) {
        best_c = c;
        best_a = a;
      }
    }
    if (best_c < res.cost) {
      res.cost = best_c;
      res.a_bar = best_a;
    }
    if (step <= fine_step * (1.0 + 1e-9)) break;
    center = res.a_bar;
    half = 2.0 * step;
    step = std::max(fine_step, step / 10.0);
  }
  return res;
}

}  // namespace sweep

#endif  // SWEEP_CROWD_HPP_
