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

// Polyhedral cone calculus for C = {x : <g_i, x> <= 0, i = 0..m-1}: active
// sets, normal-cone decompositions, Euclidean projection onto translates of
// C, and the generators of the coderivative of the normal-cone mapping.
//
// Constraint indices are zero-based throughout the library.

#ifndef SWEEP_GEOMETRY_HPP_
#define SWEEP_GEOMETRY_HPP_

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "sweep/common.hpp"
#include "sweep/nnls.hpp"

namespace sweep {

// Generators are stored row-wise: row i holds g_i.
class Polyhedron {
 public:
  Polyhedron() = default;
  explicit Polyhedron(Mat generators) : g_(std::move(generators)) {
    for (Eigen::Index i = 0; i < g_.rows(); ++i) {
      if (g_.row(i).norm() == 0.0) {
        throw Error(ErrorCode::kConfigError,
                    "generator " + std::to_string(i) + " is zero");
      }
    }
  }

  int dim() const { return static_cast<int>(g_.cols()); }
  int size() const { return static_cast<int>(g_.rows()); }
  const Mat& generators() const { return g_; }
  Vec generator(int i) const { return g_.row(i).transpose(); }

  // Constraint values <g_i, x>.
  Vec Values(const Vec& x) const { return g_ * x; }
  double MaxViolation(const Vec& x) const {
    return size() == 0 ? -1.0 : Values(x).maxCoeff();
  }
  bool Contains(const Vec& x, double tol) const {
    return size() == 0 || MaxViolation(x) <= tol;
  }

 private:
  Mat g_;
};

struct ActiveSet {
  std::vector<int> indices;
  double tol = 0.0;
};

struct FeaturedSets {
  std::vector<int> zero_set;
  std::vector<int> pos_set;
};

struct ConeDecomposition {
  std::map<int, double> multipliers;
  double residual = 0.0;

  // Dense multiplier vector of length m (zeros off the active set).
  Vec Dense(int m) const {
    Vec out = Vec::Zero(m);
    for (const auto& [i, l] : multipliers) out(i) = l;
    return out;
  }
};

inline ActiveSet active_set(const Vec& x, const Polyhedron& c, double tol) {
  RequireSize(x, c.dim(), "query point");
  ActiveSet out;
  out.tol = tol;
  const Vec vals = c.Values(x);
  for (int i = 0; i < c.size(); ++i) {
    if (vals(i) > tol) {
      throw Error(ErrorCode::kInfeasiblePoint,
                  "constraint " + std::to_string(i) + " violated by " +
                      std::to_string(vals(i)),
                  vals(i));
    }
    if (std::abs(vals(i)) <= tol) out.indices.push_back(i);
  }
  return out;
}

inline FeaturedSets featured_sets(const Vec& y, const ActiveSet& active,
                                  const Polyhedron& c, double tol) {
  RequireSize(y, c.dim(), "direction");
  FeaturedSets out;
  for (int i : active.indices) {
    const double v = c.generators().row(i).dot(y);
    if (std::abs(v) <= tol) {
      out.zero_set.push_back(i);
    } else if (v > tol) {
      out.pos_set.push_back(i);
    }
  }
  return out;
}

// Column matrix of the listed generators.
inline Mat GeneratorColumns(const Polyhedron& c, const std::vector<int>& idx) {
  Mat a(c.dim(), static_cast<Eigen::Index>(idx.size()));
  for (size_t k = 0; k < idx.size(); ++k) {
    a.col(static_cast<Eigen::Index>(k)) = c.generator(idx[k]);
  }
  return a;
}

// Throws DependentGenerators when the listed generators are linearly
// dependent (singular-value cutoff 1e-10 relative to the largest one).
inline void RequireIndependent(const Polyhedron& c,
                               const std::vector<int>& idx) {
  if (idx.size() <= 1) return;
  if (static_cast<int>(idx.size()) > c.dim()) {
    throw Error(ErrorCode::kDependentGenerators,
                "more active generators than the state dimension");
  }
  const Mat a = GeneratorColumns(c, idx);
  Eigen::JacobiSVD<Mat> svd(a);
  const Vec& s = svd.singularValues();
  if (s(s.size() - 1) <= 1e-10 * s(0)) {
    throw Error(ErrorCode::kDependentGenerators,
                "active generators are linearly dependent", s(s.size() - 1));
  }
}

// Nonnegative fit of v over the generators active at x. Never throws on a
// bad fit; the residual is reported instead.
inline ConeDecomposition FitNormal(const Vec& v, const Vec& x,
                                   const Polyhedron& c, double tol) {
  RequireSize(v, c.dim(), "normal vector");
  const ActiveSet act = active_set(x, c, tol);
  ConeDecomposition out;
  const Mat a = GeneratorColumns(c, act.indices);
  const NnlsResult fit = Nnls(a, v);
  for (size_t k = 0; k < act.indices.size(); ++k) {
    out.multipliers[act.indices[k]] = fit.x(static_cast<Eigen::Index>(k));
  }
  out.residual = (a * fit.x - v).norm();
  return out;
}

inline ConeDecomposition decompose_normal(const Vec& v, const Vec& x,
                                          const Polyhedron& c, double tol) {
  ConeDecomposition out = FitNormal(v, x, c, tol);
  if (out.residual > tol) {
    throw Error(ErrorCode::kNotInCone,
                "vector is not in the normal cone (residual " +
                    std::to_string(out.residual) + ")",
                out.residual);
  }
  return out;
}

struct Projection {
  Vec point;
  Vec multipliers;  // length m; z - point = sum_i multipliers_i g_i
};

// Euclidean projection of z onto C + shift. By the Moreau decomposition the
// residual z - shift - proj lies in the polar cone spanned nonnegatively by
// the generators, so the multipliers come from one NNLS solve.
inline Projection ProjectWithMultipliers(const Vec& z, const Polyhedron& c,
                                         const Vec& shift) {
  RequireSize(z, c.dim(), "projected point");
  RequireSize(shift, c.dim(), "shift");
  Projection out;
  const Vec y = z - shift;
  const double tol = 1e-12 * (1.0 + y.norm());
  if (c.Contains(y, tol)) {
    out.point = z;
    out.multipliers = Vec::Zero(c.size());
    return out;
  }
  const Mat a = c.generators().transpose();
  const NnlsResult fit = Nnls(a, y, 100 * std::max(1, c.size()));
  out.multipliers = fit.x;
  Vec p = y - a * fit.x;
  // Clean round-off so that the result is feasible to machine precision.
  const double viol = c.MaxViolation(p);
  if (viol > 1e-9 * (1.0 + y.norm())) {
    throw Error(ErrorCode::kNumericalFailure,
                "projection left a constraint violated", viol);
  }
  out.point = p + shift;
  return out;
}

inline Vec project(const Vec& z, const Polyhedron& c, const Vec& shift) {
  return ProjectWithMultipliers(z, c, shift).point;
}

struct CoderivativeGenerators {
  bool in_domain = true;
  std::vector<int> span_indices;  // I_0(u)
  std::vector<int> cone_indices;  // I_>(u)
  std::vector<int> strict_set;    // J(x, y)
};

// Generators of D*N(.;C)(x, y)(u) = span{g_i : i in I_0(u)} +
// cone{g_i : i in I_>(u)}, valid when u is in the coderivative domain, i.e.
// <g_i, u> = 0 for every strictly complementary index i.
inline CoderivativeGenerators coderivative_generators(
    const Vec& x, const Vec& y, const Vec& u, const Polyhedron& c, double tol) {
  RequireSize(u, c.dim(), "coderivative direction");
  const ActiveSet act = active_set(x, c, tol);
  RequireIndependent(c, act.indices);
  const ConeDecomposition dec = decompose_normal(y, x, c, tol);
  CoderivativeGenerators out;
  for (const auto& [i, l] : dec.multipliers) {
    if (l > 1e-8) out.strict_set.push_back(i);
  }
  for (int i : out.strict_set) {
    if (std::abs(c.generators().row(i).dot(u)) > tol) out.in_domain = false;
  }
  const FeaturedSets fs = featured_sets(u, act, c, tol);
  out.span_indices = fs.zero_set;
  out.cone_indices = fs.pos_set;
  return out;
}

// Chain polyhedron of the corridor model: g_i = e_i - e_{i+1}, i < n-1.
inline Polyhedron ChainPolyhedron(int n) {
  Mat g = Mat::Zero(std::max(0, n - 1), n);
  for (int i = 0; i + 1 < n; ++i) {
    g(i, i) = 1.0;
    g(i, i + 1) = -1.0;
  }
  return Polyhedron(g);
}

}  // namespace sweep

#endif  // SWEEP_GEOMETRY_HPP_
