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

// Reduced-space solver for the discrete problem. The controls (u, a) are the
// only variables: the state is recomputed by the catching-up scheme at every
// evaluation, and the reduced gradient is obtained by a backward adjoint
// sweep through the Jacobians of the projections. The norm constraint on u
// is built into the parameterization (radius boxed to its band, direction
// by angle or normalization). The remaining inequalities are handled by an
// augmented Lagrangian around a projected L-BFGS inner loop.

#ifndef SWEEP_OPTIMIZER_HPP_
#define SWEEP_OPTIMIZER_HPP_

#include <algorithm>
#include <cmath>
#include <deque>
#include <future>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sweep/common.hpp"
#include "sweep/dynamics.hpp"
#include "sweep/problem.hpp"
#include "sweep/transcription.hpp"

namespace sweep {

struct SolveOptions {
  int multistart = 8;
  std::uint64_t seed = 0;
  int max_iter = 2000;  // inner iterations per outer iteration
  int max_outer = 25;
  double tol_stat = 1e-6;    // projected-gradient density tolerance
  double tol_feas = 1e-7;    // augmented-Lagrangian constraint tolerance
  double rho0 = 10.0;        // initial penalty
  double rho_growth = 10.0;  // penalty increase on slow progress
  int lbfgs_memory = 12;
  bool parallel = true;
};

enum class SolveStatus { kConverged, kMaxIterExceeded };

inline const char* SolveStatusName(SolveStatus s) {
  return s == SolveStatus::kConverged ? "converged" : "max_iter_exceeded";
}

struct DiscreteSolution {
  DecisionVector z;
  double cost = 0.0;
  std::map<std::string, Vec> kkt_multipliers;
  SolveStatus status = SolveStatus::kMaxIterExceeded;
  double stationarity = 0.0;
  double max_violation = 0.0;
  int iterations = 0;  // inner iterations of the winning start
  int start_index = 0;
  std::vector<double> merit_history;  // winning start, per accepted step
  std::vector<int> outer_breaks;      // merit_history index at each outer
};

namespace internal {

// Maps the free parameter vector to (u, a) node arrays and back.
class ControlParam {
 public:
  explicit ControlParam(const DiscreteProblem& dp) : dp_(dp) {
    const SweepingProblem& pr = dp.problem;
    k_ = dp.mesh.k();
    n_ = pr.n;
    d_ = pr.d;
    a_first_ = dp.pins_initial_controls() ? 1 : 0;
    size_ = (k_ + 1 - a_first_) * d_;
    if (pr.u_decision) {
      const int u_first = dp.pins_initial_controls() ? 1 : 0;
      const int lo = dp.j_lower(), hi = dp.j_upper();
      for (int j = u_first; j <= k_; ++j) {
        UNode node;
        node.j = j;
        node.dir_offset = size_;
        node.dir_size = n_ == 1 ? 0 : (n_ == 2 ? 1 : n_);
        size_ += node.dir_size;
        if (j < lo || j > hi) {
          node.rho_offset = size_++;
        }
        u_nodes_.push_back(node);
      }
    }
    lower_ = Vec::Constant(size_, -std::numeric_limits<double>::infinity());
    upper_ = Vec::Constant(size_, std::numeric_limits<double>::infinity());
    const double band_lo = std::max(1e-9, pr.r - pr.tau - dp.eps_k);
    const double band_hi = pr.r + pr.tau + dp.eps_k;
    for (const UNode& node : u_nodes_) {
      if (node.rho_offset >= 0) {
        lower_(node.rho_offset) = band_lo;
        upper_(node.rho_offset) = band_hi;
      }
    }
  }

  int size() const { return size_; }
  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }

  Vec Clamp(const Vec& th) const {
    return th.cwiseMax(lower_).cwiseMin(upper_);
  }

  // Parameters reproducing the given arrays as closely as the
  // parameterization allows. `base_u` fixes the sign for n = 1.
  Vec FromControls(const Mat& u, const Mat& a) {
    Vec th = Vec::Zero(size_);
    for (int j = a_first_; j <= k_; ++j) {
      th.segment((j - a_first_) * d_, d_) = a.row(j).transpose();
    }
    sign_.assign(k_ + 1, 1.0);
    for (const UNode& node : u_nodes_) {
      const Vec uj = u.row(node.j).transpose();
      const double rho = uj.norm();
      if (n_ == 1) {
        sign_[node.j] = uj(0) < 0 ? -1.0 : 1.0;
      } else if (n_ == 2) {
        th(node.dir_offset) = std::atan2(uj(1), uj(0));
      } else {
        th.segment(node.dir_offset, n_) =
            rho > 0 ? Vec(uj / rho) : Vec(Vec::Unit(n_, 0));
      }
      if (node.rho_offset >= 0) th(node.rho_offset) = rho;
    }
    return Clamp(th);
  }

  // Writes the controls into `u` and `a` (pinned rows are left untouched).
  void ToControls(const Vec& th, Mat& u, Mat& a) const {
    for (int j = a_first_; j <= k_; ++j) {
      a.row(j) = th.segment((j - a_first_) * d_, d_).transpose();
    }
    const double r = dp_.problem.r;
    for (const UNode& node : u_nodes_) {
      const double rho = node.rho_offset >= 0 ? th(node.rho_offset) : r;
      u.row(node.j) = (rho * Direction(th, node)).transpose();
    }
  }

  // Chain rule from node gradients to parameter gradients.
  Vec Pullback(const Vec& th, const Mat& gu, const Mat& ga) const {
    Vec g = Vec::Zero(size_);
    for (int j = a_first_; j <= k_; ++j) {
      g.segment((j - a_first_) * d_, d_) = ga.row(j).transpose();
    }
    const double r = dp_.problem.r;
    for (const UNode& node : u_nodes_) {
      const double rho = node.rho_offset >= 0 ? th(node.rho_offset) : r;
      const Vec dir = Direction(th, node);
      const Vec gj = gu.row(node.j).transpose();
      if (node.rho_offset >= 0) g(node.rho_offset) = gj.dot(dir);
      if (n_ == 2) {
        const double ang = th(node.dir_offset);
        Vec dd(2);
        dd << -std::sin(ang), std::cos(ang);
        g(node.dir_offset) = rho * gj.dot(dd);
      } else if (n_ >= 3) {
        const Vec w = th.segment(node.dir_offset, n_);
        const double wn = std::max(w.norm(), 1e-300);
        const Vec proj = gj - dir * dir.dot(gj);
        g.segment(node.dir_offset, n_) = rho * proj / wn;
      }
    }
    return g;
  }

 private:
  struct UNode {
    int j = 0;
    int dir_offset = 0;
    int dir_size = 0;
    int rho_offset = -1;
  };

  Vec Direction(const Vec& th, const UNode& node) const {
    if (n_ == 1) return Vec::Constant(1, sign_.empty() ? 1.0 : sign_[node.j]);
    if (n_ == 2) {
      const double ang = th(node.dir_offset);
      Vec v(2);
      v << std::cos(ang), std::sin(ang);
      return v;
    }
    const Vec w = th.segment(node.dir_offset, n_);
    const double wn = w.norm();
    return wn > 0 ? Vec(w / wn) : Vec(Vec::Unit(n_, 0));
  }

  const DiscreteProblem& dp_;
  int k_ = 0, n_ = 0, d_ = 0, a_first_ = 0, size_ = 0;
  std::vector<UNode> u_nodes_;
  std::vector<double> sign_;
  Vec lower_, upper_;
};

// Inequality constraints g_i(z) <= 0 handled by the augmented Lagrangian.
struct AlConstraints {
  std::vector<std::string> family;  // family name per constraint
  Vec values;
  std::vector<Mat> gx, gu, ga;  // gradient per constraint (sparse-ish)
};

inline AlConstraints EvalAlConstraints(const DiscreteProblem& dp,
                                       const DecisionVector& z,
                                       bool with_gradients) {
  const SweepingProblem& pr = dp.problem;
  const int k = dp.mesh.k();
  const double h = dp.mesh.h();
  AlConstraints out;
  std::vector<double> vals;
  auto zero_grads = [&]() {
    if (!with_gradients) return;
    out.gx.push_back(Mat::Zero(k + 1, pr.n));
    out.gu.push_back(Mat::Zero(k + 1, pr.n));
    out.ga.push_back(Mat::Zero(k + 1, pr.d));
  };
  if (pr.u_decision && !dp.pins_initial_controls()) {
    const Vec vals_c = pr.C.Values(z.X(0) - z.U(0));
    for (int i = 0; i < pr.C.size(); ++i) {
      out.family.push_back("initial");
      vals.push_back(vals_c(i));
      zero_grads();
      if (with_gradients) out.gu.back().row(0) = -pr.C.generator(i).transpose();
    }
  }
  if (pr.terminal_on_boundary && pr.C.size() > 0) {
    const Vec vals_c = pr.C.Values(z.X(k) - z.U(k));
    Eigen::Index arg;
    const double mx = vals_c.maxCoeff(&arg);
    out.family.push_back("terminal_boundary");
    vals.push_back(-mx);
    zero_grads();
    if (with_gradients) {
      const Vec g = pr.C.generator(static_cast<int>(arg));
      out.gx.back().row(k) = -g.transpose();
      out.gu.back().row(k) = g.transpose();
    }
  }
  if (pr.u_decision) {
    const BudgetEval b = UBudgets(dp, z.u);
    out.family.push_back("budget_first");
    vals.push_back(b.first - (dp.mu_tilde + 1.0));
    zero_grads();
    if (with_gradients) out.gu.back() = b.g_first;
    out.family.push_back("budget_second");
    vals.push_back(b.second - (dp.mu_tilde + 1.0));
    zero_grads();
    if (with_gradients) out.gu.back() = b.g_second;
  }
  if (dp.reference && dp.proximity_on) {
    const DiscreteTrajectory& ref = *dp.reference;
    for (int j = 0; j < k; ++j) {
      const Vec dx = z.X(j) - ref.X(j), du = z.U(j) - ref.U(j),
                da = z.A(j) - ref.A(j);
      const double nrm =
          std::sqrt(dx.squaredNorm() + du.squaredNorm() + da.squaredNorm());
      out.family.push_back("trust_sup");
      vals.push_back(nrm - dp.epsilon / 2.0);
      zero_grads();
      if (with_gradients && nrm > 0) {
        out.gx.back().row(j) = dx.transpose() / nrm;
        out.gu.back().row(j) = du.transpose() / nrm;
        out.ga.back().row(j) = da.transpose() / nrm;
      }
    }
    double w12 = 0.0;
    zero_grads();
    for (int j = 0; j < k; ++j) {
      const Vec vx = z.XDot(j) - ref.XDot(j), vu = z.UDot(j) - ref.UDot(j),
                va = z.ADot(j) - ref.ADot(j);
      w12 += h * (vx.squaredNorm() + vu.squaredNorm() + va.squaredNorm());
      if (with_gradients) {
        out.gx.back().row(j + 1) += 2.0 * vx.transpose();
        out.gx.back().row(j) -= 2.0 * vx.transpose();
        out.gu.back().row(j + 1) += 2.0 * vu.transpose();
        out.gu.back().row(j) -= 2.0 * vu.transpose();
        out.ga.back().row(j + 1) += 2.0 * va.transpose();
        out.ga.back().row(j) -= 2.0 * va.transpose();
      }
    }
    out.family.push_back("trust_w12");
    vals.push_back(w12 - dp.epsilon / 2.0);
  }
  out.values = FromStd(vals);
  return out;
}

// Jacobian of the projection onto C at a point whose projection multipliers
// are `mult`: the orthogonal projector onto the null space of the strictly
// active generators.
inline Mat ProjectionJacobian(const Polyhedron& c, const Vec& mult) {
  const int n = c.dim();
  std::vector<int> idx;
  const double scale = std::max(1.0, mult.size() ? mult.maxCoeff() : 0.0);
  for (int i = 0; i < c.size(); ++i) {
    if (mult(i) > 1e-13 * scale) idx.push_back(i);
  }
  if (idx.empty()) return Mat::Identity(n, n);
  const Mat a = GeneratorColumns(c, idx);  // n x |J|
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(a);
  const Mat pinv = cod.pseudoInverse();  // |J| x n
  return Mat::Identity(n, n) - a * pinv;
}

struct EvalResult {
  double merit = 0.0;
  double cost = 0.0;
  Vec grad;
  DecisionVector z;
  Vec constraint_values;
  std::vector<std::string> families;
};

// Evaluates the augmented-Lagrangian merit and its reduced gradient.
class ReducedObjective {
 public:
  ReducedObjective(const DiscreteProblem& dp, ControlParam& param,
                   const DecisionVector& base)
      : dp_(dp), param_(param), base_(base) {}

  Vec mu;
  double rho = 10.0;

  EvalResult Eval(const Vec& th) const {
    const SweepingProblem& pr = dp_.problem;
    const int k = dp_.mesh.k();
    const double h = dp_.mesh.h();
    Mat u = base_.u, a = base_.a;
    param_.ToControls(th, u, a);
    const CatchingUpRecord rec = CatchingUpSequences(pr, dp_.mesh, u, a,
                                                     /*check_start=*/false);
    EvalResult res;
    res.z = rec.traj;
    const CostEval ce = assemble_cost(dp_, res.z);
    res.cost = ce.value;
    res.merit = ce.value;
    Mat gx = ce.gx, gu = ce.gu, ga = ce.ga;
    const AlConstraints al = EvalAlConstraints(dp_, res.z, true);
    res.constraint_values = al.values;
    res.families = al.family;
    for (Eigen::Index i = 0; i < al.values.size(); ++i) {
      const double m = mu.size() == al.values.size() ? mu(i) : 0.0;
      const double s = std::max(0.0, al.values(i) + m / rho);
      res.merit += 0.5 * rho * (s * s - (m / rho) * (m / rho));
      if (s > 0) {
        gx += rho * s * al.gx[i];
        gu += rho * s * al.gu[i];
        ga += rho * s * al.ga[i];
      }
    }
    // Backward sweep: mu_x holds dMerit/dx_{j+1} including downstream terms.
    const Mat fx = pr.f.JacX(pr.n);
    const Mat fa = pr.f.JacA(pr.n, pr.d);
    const Mat eye = Mat::Identity(pr.n, pr.n);
    Vec lam = gx.row(k).transpose();
    for (int j = k - 1; j >= 0; --j) {
      const Mat dj = pr.C.size() ? ProjectionJacobian(
                                       pr.C, rec.multipliers.row(j).transpose())
                                 : eye;
      const Vec dl = dj * lam;
      ga.row(j) += (-h * fa.transpose() * dl).transpose();
      gu.row(j + 1) += (lam - dl).transpose();
      lam = gx.row(j).transpose() + (eye - h * fx).transpose() * dl;
    }
    res.grad = param_.Pullback(th, gu, ga);
    return res;
  }

 private:
  const DiscreteProblem& dp_;
  ControlParam& param_;
  const DecisionVector& base_;
};

inline Vec ProjectedGradient(const Vec& th, const Vec& g, const Vec& lo,
                             const Vec& hi) {
  Vec pg = g;
  for (Eigen::Index i = 0; i < th.size(); ++i) {
    if ((th(i) <= lo(i) && g(i) > 0) || (th(i) >= hi(i) && g(i) < 0)) {
      pg(i) = 0.0;
    }
  }
  return pg;
}

struct InnerResult {
  Vec th;
  EvalResult eval;
  int iterations = 0;
  bool converged = false;
};

// Projected L-BFGS with Armijo backtracking along the projected path.
inline InnerResult ProjectedLbfgs(const ReducedObjective& obj,
                                  const ControlParam& param, Vec th, double tol,
                                  int max_iter, int memory,
                                  std::vector<double>* history) {
  const Vec& lo = param.lower();
  const Vec& hi = param.upper();
  th = param.Clamp(th);
  InnerResult out;
  EvalResult cur = obj.Eval(th);
  std::deque<Vec> s_list, y_list;
  int stall = 0;
  for (int it = 0; it < max_iter; ++it) {
    const Vec pg = ProjectedGradient(th, cur.grad, lo, hi);
    if (pg.lpNorm<Eigen::Infinity>() <= tol) {
      out.converged = true;
      break;
    }
    // Two-loop recursion restricted to the free variables.
    Vec q = pg;
    const size_t mem = s_list.size();
    std::vector<double> alpha(mem), rho_v(mem);
    for (size_t i = mem; i-- > 0;) {
      rho_v[i] = 1.0 / y_list[i].dot(s_list[i]);
      alpha[i] = rho_v[i] * s_list[i].dot(q);
      q -= alpha[i] * y_list[i];
    }
    double gamma = 1.0;
    if (mem > 0) {
      gamma = s_list.back().dot(y_list.back()) / y_list.back().squaredNorm();
    } else {
      gamma = 1.0 / std::max(1.0, pg.lpNorm<Eigen::Infinity>());
    }
    Vec dir = gamma * q;
    for (size_t i = 0; i < mem; ++i) {
      const double beta = rho_v[i] * y_list[i].dot(dir);
      dir += s_list[i] * (alpha[i] - beta);
    }
    dir = -dir;
    for (Eigen::Index i = 0; i < th.size(); ++i) {
      if (pg(i) == 0.0 && cur.grad(i) != 0.0) dir(i) = 0.0;
    }
    if (cur.grad.dot(dir) >= 0.0) {
      s_list.clear();
      y_list.clear();
      dir = -pg * (1.0 / std::max(1.0, pg.lpNorm<Eigen::Infinity>()));
    }
    double step = 1.0;
    bool accepted = false;
    Vec th_new;
    EvalResult trial;
    for (int ls = 0; ls < 50; ++ls) {
      th_new = param.Clamp(th + step * dir);
      trial = obj.Eval(th_new);
      const double decrease = cur.grad.dot(th_new - th);
      if (std::isfinite(trial.merit) &&
          trial.merit <= cur.merit + 1e-4 * decrease) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++out.iterations;
    if (!accepted || trial.merit > cur.merit) {
      if (!s_list.empty()) {
        s_list.clear();
        y_list.clear();
        continue;
      }
      break;  // no descent possible along the steepest direction
    }
    const Vec s = th_new - th;
    const Vec y = trial.grad - cur.grad;
    const double prev = cur.merit;
    th = th_new;
    cur = std::move(trial);
    if (history) history->push_back(cur.merit);
    if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
      s_list.push_back(s);
      y_list.push_back(y);
      if (static_cast<int>(s_list.size()) > memory) {
        s_list.pop_front();
        y_list.pop_front();
      }
    }
    if (prev - cur.merit <= 1e-16 * (1.0 + std::abs(prev))) {
      if (++stall >= 8) break;
    } else {
      stall = 0;
    }
  }
  out.th = th;
  out.eval = std::move(cur);
  return out;
}

// Feasibility measure of AL inequalities.
inline double AlViolation(const Vec& values) {
  double v = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    v = std::max(v, values(i));
  }
  return v;
}

inline DiscreteSolution SolveFromStart(const DiscreteProblem& dp,
                                       const SolveOptions& opts,
                                       const DecisionVector& start,
                                       int start_index) {
  const double h = dp.mesh.h();
  ControlParam param(dp);
  Vec th = param.FromControls(start.u, start.a);
  ReducedObjective obj(dp, param, start);
  obj.rho = opts.rho0;
  DiscreteSolution sol;
  sol.start_index = start_index;
  const AlConstraints c0 = EvalAlConstraints(dp, start, false);
  obj.mu = Vec::Zero(c0.values.size());
  const double inner_tol = 0.1 * opts.tol_stat * h;
  double prev_viol = std::numeric_limits<double>::infinity();
  bool converged = false;
  InnerResult inner;
  for (int outer = 0; outer < std::max(1, opts.max_outer); ++outer) {
    sol.outer_breaks.push_back(static_cast<int>(sol.merit_history.size()));
    inner = ProjectedLbfgs(obj, param, th, inner_tol, opts.max_iter,
                           opts.lbfgs_memory, &sol.merit_history);
    sol.iterations += inner.iterations;
    th = inner.th;
    const Vec& g = inner.eval.constraint_values;
    const double viol = AlViolation(g);
    if (g.size() == 0) {
      converged = inner.converged;
      break;
    }
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      obj.mu(i) = std::max(0.0, obj.mu(i) + obj.rho * g(i));
    }
    if (viol <= opts.tol_feas) {
      // Confirm stationarity for the updated multipliers.
      const EvalResult re = obj.Eval(th);
      const Vec pg =
          ProjectedGradient(th, re.grad, param.lower(), param.upper());
      if (pg.lpNorm<Eigen::Infinity>() <= opts.tol_stat * h) {
        converged = true;
        break;
      }
    }
    if (viol > 0.25 * prev_viol) obj.rho *= opts.rho_growth;
    prev_viol = viol;
  }
  const EvalResult fin = obj.Eval(th);
  sol.z = fin.z;
  const SweepingProblem& pr = dp.problem;
  const int k = dp.mesh.k();
  if (!pr.ell.HasControlRate()) {
    // a_k does not enter the cost; carry the last active control forward.
    sol.z.a.row(k) = sol.z.a.row(k - 1);
  }
  sol.cost = assemble_cost(dp, sol.z).value;
  const Vec pg = ProjectedGradient(th, fin.grad, param.lower(), param.upper());
  sol.stationarity = pg.size() ? pg.lpNorm<Eigen::Infinity>() / h : 0.0;
  sol.max_violation = constraint_residuals(dp, sol.z).Max();
  for (Eigen::Index i = 0; i < obj.mu.size(); ++i) {
    Vec& v = sol.kkt_multipliers[fin.families[i]];
    v.conservativeResize(v.size() + 1);
    v(v.size() - 1) = obj.mu(i);
  }
  sol.status = (converged || sol.stationarity <= opts.tol_stat) &&
                       sol.max_violation <= 1e-6
                   ? SolveStatus::kConverged
                   : SolveStatus::kMaxIterExceeded;
  return sol;
}

}  // namespace internal

// Start i > 0 draws one constant control vector uniformly from
// [-s, s]^d with s = problem.init_scale; start 0 uses the feasible seed (or
// the warm start when one is given).
inline std::vector<DecisionVector> MultistartPoints(
    const DiscreteProblem& dp, const SolveOptions& opts,
    const std::optional<DecisionVector>& warm) {
  const SweepingProblem& pr = dp.problem;
  const DecisionVector seed = warm ? *warm : feasible_seed(dp);
  std::vector<DecisionVector> starts{seed};
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unif(-pr.init_scale, pr.init_scale);
  for (int s = 1; s < std::max(1, opts.multistart); ++s) {
    Vec c(pr.d);
    for (int i = 0; i < pr.d; ++i) c(i) = unif(rng);
    DecisionVector z = seed;
    for (int j = dp.pins_initial_controls() ? 1 : 0; j <= dp.mesh.k(); ++j) {
      z.a.row(j) = c.transpose();
    }
    starts.push_back(z);
  }
  return starts;
}

inline DiscreteSolution solve_discrete(
    const DiscreteProblem& dp, const SolveOptions& opts = {},
    const std::optional<DecisionVector>& warm_start = std::nullopt) {
  const std::vector<DecisionVector> starts =
      MultistartPoints(dp, opts, warm_start);
  std::vector<DiscreteSolution> sols(starts.size());
  if (opts.parallel && starts.size() > 1) {
    std::vector<std::future<DiscreteSolution>> futs;
    for (size_t s = 0; s < starts.size(); ++s) {
      futs.push_back(std::async(std::launch::async, [&, s]() {
        return internal::SolveFromStart(dp, opts, starts[s],
                                        static_cast<int>(s));
      }));
    }
    for (size_t s = 0; s < starts.size(); ++s) sols[s] = futs[s].get();
  } else {
    for (size_t s = 0; s < starts.size(); ++s) {
      sols[s] =
          internal::SolveFromStart(dp, opts, starts[s], static_cast<int>(s));
    }
  }
  // Feasible solutions first, then lowest cost, ties by start index.
  size_t best = 0;
  auto feasible = [](const DiscreteSolution& s) {
    return s.max_violation <= 1e-6;
  };
  for (size_t s = 1; s < sols.size(); ++s) {
    const bool fs = feasible(sols[s]), fb = feasible(sols[best]);
    if (fs != fb) {
      if (fs) best = s;
      continue;
    }
    if (sols[s].cost < sols[best].cost) best = s;
  }
  return sols[best];
}

// Piecewise-linear interpolation of node arrays onto a finer mesh.
inline Mat InterpolateNodes(const Mat& coarse, const Mesh& from,
                            const Mesh& to) {
  Mat out(to.k() + 1, coarse.cols());
  for (int j = 0; j <= to.k(); ++j) {
    const double t = to.t(j);
    const double s = t / from.h();
    int i = std::min(static_cast<int>(std::floor(s)), from.k() - 1);
    i = std::max(i, 0);
    const double w = std::clamp(s - i, 0.0, 1.0);
    out.row(j) = (1.0 - w) * coarse.row(i) + w * coarse.row(i + 1);
  }
  return out;
}

struct Refinement {
  DiscreteProblem dp;
  DecisionVector warm_start;
};

inline Refinement refine_grid(const DiscreteProblem& dp,
                              const DiscreteSolution& sol, int k_new) {
  const int k = dp.mesh.k();
  if (k_new <= k || k_new % k != 0) {
    throw Error(ErrorCode::kConfigError,
                "refined grid must be a multiple of the current grid");
  }
  TranscriptionOptions topts;
  topts.epsilon = dp.epsilon;
  topts.mu_tilde = dp.mu_tilde;
  topts.proximity_on = dp.proximity_on;
  std::optional<DiscreteTrajectory> ref;
  const Mesh fine(k_new, dp.problem.T);
  if (dp.reference) {
    DiscreteTrajectory r;
    r.mesh = fine;
    r.x = InterpolateNodes(dp.reference->x, dp.mesh, fine);
    r.u = InterpolateNodes(dp.reference->u, dp.mesh, fine);
    r.a = InterpolateNodes(dp.reference->a, dp.mesh, fine);
    ref = r;
  }
  Refinement out{make_discrete_problem(dp.problem, k_new, ref, topts), {}};
  Mat u = InterpolateNodes(sol.z.u, dp.mesh, fine);
  const Mat a = InterpolateNodes(sol.z.a, dp.mesh, fine);
  if (dp.problem.u_decision) {
    // Chords of the sphere shrink; restore the node norms.
    for (int j = 0; j <= k_new; ++j) {
      const double s = u.row(j).norm();
      const double target = std::clamp(s, dp.problem.r - dp.problem.tau,
                                       dp.problem.r + dp.problem.tau);
      if (s > 0) u.row(j) *= target / s;
    }
  }
  out.warm_start =
      CatchingUpSequences(dp.problem, fine, u, a, /*check_start=*/false).traj;
  return out;
}

}  // namespace sweep

#endif  // SWEEP_OPTIMIZER_HPP_
