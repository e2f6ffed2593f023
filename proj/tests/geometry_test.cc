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

#include "sweep/geometry.hpp"

#include <random>
#include <vector>

#include "gmock/gmock.h"
#include "gtest/gtest.h"

namespace sweep {
namespace {

using ::testing::ElementsAre;
using ::testing::IsEmpty;

Vec V(std::initializer_list<double> v) {
  return FromStd(std::vector<double>(v));
}

Polyhedron ThreeDimChain() {
  Mat g(2, 3);
  g << 1, -1, 0, 0, 1, -1;
  return Polyhedron(g);
}

// Exhaustive oracle for min ||A x - b||, x >= 0: try every support pattern,
// solve the unconstrained least squares on it, keep nonnegative solutions.
Vec BruteForceNnls(const Mat& a, const Vec& b) {
  const int p = static_cast<int>(a.cols());
  Vec best = Vec::Zero(p);
  double best_res = b.norm();
  for (int mask = 1; mask < (1 << p); ++mask) {
    std::vector<int> cols;
    for (int j = 0; j < p; ++j) {
      if (mask & (1 << j)) cols.push_back(j);
    }
    Mat sub(a.rows(), static_cast<Eigen::Index>(cols.size()));
    for (size_t c = 0; c < cols.size(); ++c) sub.col(c) = a.col(cols[c]);
    const Vec s = sub.colPivHouseholderQr().solve(b);
    if (s.minCoeff() < -1e-12) continue;
    Vec x = Vec::Zero(p);
    for (size_t c = 0; c < cols.size(); ++c) x(cols[c]) = s(c);
    const double res = (a * x - b).norm();
    if (res < best_res - 1e-13) {
      best_res = res;
      best = x;
    }
  }
  return best;
}

// Exhaustive projection oracle: for each subset of constraints taken as
// equalities, project onto that subspace; keep feasible candidates.
Vec BruteForceProjection(const Vec& z, const Polyhedron& c) {
  const int m = c.size();
  Vec best;
  double best_d = std::numeric_limits<double>::infinity();
  for (int mask = 0; mask < (1 << m); ++mask) {
    std::vector<int> idx;
    for (int i = 0; i < m; ++i) {
      if (mask & (1 << i)) idx.push_back(i);
    }
    Vec cand = z;
    if (!idx.empty()) {
      const Mat a = GeneratorColumns(c, idx);
      const Mat pinv = a.completeOrthogonalDecomposition().pseudoInverse();
      cand = z - a * (pinv * z);
    }
    if (!c.Contains(cand, 1e-10)) continue;
    const double dist = (cand - z).norm();
    if (dist < best_d) {
      best_d = dist;
      best = cand;
    }
  }
  return best;
}

TEST(ActiveSetTest, ChainExamples) {
  const Polyhedron c = ThreeDimChain();
  EXPECT_THAT(active_set(V({0, 0, 5}), c, 1e-9).indices, ElementsAre(0));
  EXPECT_THAT(active_set(V({0, 0, 0}), c, 1e-9).indices, ElementsAre(0, 1));
  EXPECT_THAT(active_set(V({-1, 0, 5}), c, 1e-9).indices, IsEmpty());
}

TEST(ActiveSetTest, InfeasiblePointThrows) {
  const Polyhedron c = ThreeDimChain();
  try {
    active_set(V({1, 0, 0}), c, 1e-9);
    FAIL() << "expected InfeasiblePoint";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInfeasiblePoint);
  }
}

TEST(FeaturedSetsTest, Examples) {
  const Polyhedron c = ThreeDimChain();
  ActiveSet both;
  both.indices = {0, 1};
  const FeaturedSets z = featured_sets(V({0, 0, 0}), both, c, 1e-9);
  EXPECT_THAT(z.zero_set, ElementsAre(0, 1));
  EXPECT_THAT(z.pos_set, IsEmpty());

  Mat g(1, 2);
  g << 1, -1;
  const Polyhedron half(g);
  ActiveSet one;
  one.indices = {0};
  EXPECT_THAT(featured_sets(V({1, 0}), one, half, 1e-9).pos_set,
              ElementsAre(0));
  EXPECT_THAT(featured_sets(V({1, 1}), one, half, 1e-9).zero_set,
              ElementsAre(0));
}

TEST(DecomposeNormalTest, Examples) {
  const Polyhedron c = ThreeDimChain();
  const ConeDecomposition d =
      decompose_normal(V({1, -1, 0}), V({0, 0, 5}), c, 1e-9);
  ASSERT_EQ(d.multipliers.size(), 1u);
  EXPECT_NEAR(d.multipliers.at(0), 1.0, 1e-12);
  EXPECT_NEAR(d.residual, 0.0, 1e-12);

  const ConeDecomposition zero =
      decompose_normal(V({0, 0, 0}), V({0, 0, 0}), c, 1e-9);
  for (const auto& [i, l] : zero.multipliers) EXPECT_EQ(l, 0.0);
}

TEST(DecomposeNormalTest, CrowdContactState) {
  // Two participants in contact: x - u on the facet <(1,-1), .> = 0.
  Mat g(1, 2);
  g << 1, -1;
  const Polyhedron c(g);
  const double eta = 4.5 * 1.1912;
  const ConeDecomposition d =
      decompose_normal(V({eta, -eta}), V({-6, -6}), c, 1e-9);
  EXPECT_NEAR(d.multipliers.at(0), 5.360, 1e-3);
  const Vec oracle = BruteForceNnls(GeneratorColumns(c, {0}), V({eta, -eta}));
  EXPECT_NEAR(d.multipliers.at(0), oracle(0), 1e-12);
}

TEST(DecomposeNormalTest, NotInConeReportsResidual) {
  const Polyhedron c = ThreeDimChain();
  try {
    decompose_normal(V({-1, 1, 0}), V({0, 0, 5}), c, 1e-9);
    FAIL() << "expected NotInCone";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotInCone);
    EXPECT_NEAR(e.value(), std::sqrt(2.0), 1e-12);
  }
}

TEST(DecomposeNormalTest, ResynthesisMatchesResidual) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  const Polyhedron c = ThreeDimChain();
  for (int trial = 0; trial < 50; ++trial) {
    Vec v(3);
    for (int i = 0; i < 3; ++i) v(i) = nd(rng);
    const ConeDecomposition d = FitNormal(v, V({0, 0, 0}), c, 1e-9);
    Vec synth = Vec::Zero(3);
    for (const auto& [i, l] : d.multipliers) synth += l * c.generator(i);
    EXPECT_NEAR((synth - v).norm(), d.residual, 1e-14);
  }
}

TEST(NnlsTest, MatchesBruteForceOnRandomIndependentGenerators) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  std::uniform_int_distribution<int> count(1, 4);
  for (int trial = 0; trial < 200; ++trial) {
    const int p = count(rng);
    const int n = p + (trial % 2);
    Mat a(n, p);
    Vec b(n);
    for (int i = 0; i < n; ++i) {
      b(i) = nd(rng);
      for (int j = 0; j < p; ++j) a(i, j) = nd(rng);
    }
    const Vec x = Nnls(a, b).x;
    const Vec oracle = BruteForceNnls(a, b);
    EXPECT_LE((x - oracle).lpNorm<Eigen::Infinity>(), 1e-8)
        << "trial " << trial;
  }
}

TEST(ProjectTest, Examples) {
  Mat g(1, 2);
  g << 1, -1;
  const Polyhedron half(g);
  EXPECT_LE((project(V({1, 0}), half, V({0, 0})) - V({0.5, 0.5})).norm(),
            1e-12);
  const Vec inside = V({-2, 3});
  EXPECT_EQ(project(inside, half, V({0, 0})), inside);

  const Polyhedron chain = ThreeDimChain();
  const Vec p = project(V({2, 0, 0}), chain, V({0, 0, 0}));
  const Vec oracle = BruteForceProjection(V({2, 0, 0}), chain);
  EXPECT_LE((p - oracle).norm(), 1e-10);
  // Both chain constraints: the isotonic mean (2/3, 2/3, 2/3).
  EXPECT_LE((p - Vec::Constant(3, 2.0 / 3.0)).norm(), 1e-10);
  // First facet only: the reflection-free midpoint (1, 1, 0).
  Mat g1(1, 3);
  g1 << 1, -1, 0;
  const Polyhedron facet(g1);
  EXPECT_LE((project(V({2, 0, 0}), facet, V({0, 0, 0})) - V({1, 1, 0})).norm(),
            1e-10);
}

TEST(ProjectTest, IdempotenceAndVariationalInequality) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + trial % 3;
    const int m = 1 + trial % 4;
    Mat g(m, n);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) g(i, j) = nd(rng);
    }
    const Polyhedron c(g);
    Vec z(n), shift(n);
    for (int j = 0; j < n; ++j) {
      z(j) = 3 * nd(rng);
      shift(j) = nd(rng);
    }
    const Vec p = project(z, c, shift);
    const Vec pp = project(p, c, shift);
    EXPECT_LE((pp - p).norm(), 1e-10);
    EXPECT_LE(c.MaxViolation(p - shift), 1e-9);
    EXPECT_LE((p - shift - BruteForceProjection(z - shift, c)).norm(), 1e-8);
    // Random members of C + shift, obtained by projecting random points.
    for (int tested = 0; tested < 100; ++tested) {
      Vec y(n);
      for (int j = 0; j < n; ++j) y(j) = 5 * nd(rng);
      const Vec member = project(y, c, shift);
      EXPECT_LE((z - p).dot(member - p), 1e-8);
    }
  }
}

TEST(CoderivativeTest, Examples) {
  Mat g(1, 2);
  g << 1, -1;
  const Polyhedron half(g);
  const CoderivativeGenerators interior =
      coderivative_generators(V({-1, 0}), V({0, 0}), V({3, 4}), half, 1e-9);
  EXPECT_TRUE(interior.in_domain);
  EXPECT_THAT(interior.span_indices, IsEmpty());
  EXPECT_THAT(interior.cone_indices, IsEmpty());

  const CoderivativeGenerators ortho =
      coderivative_generators(V({1, 1}), V({0, 0}), V({1, 1}), half, 1e-9);
  EXPECT_THAT(ortho.span_indices, ElementsAre(0));
  EXPECT_THAT(ortho.cone_indices, IsEmpty());

  const CoderivativeGenerators sign =
      coderivative_generators(V({1, 1}), V({0, 0}), V({1, 0}), half, 1e-9);
  EXPECT_THAT(sign.span_indices, IsEmpty());
  EXPECT_THAT(sign.cone_indices, ElementsAre(0));
}

TEST(CoderivativeTest, DomainViolationWhenStrictlyComplementary) {
  Mat g(1, 2);
  g << 1, -1;
  const Polyhedron half(g);
  const CoderivativeGenerators res =
      coderivative_generators(V({1, 1}), V({2, -2}), V({1, 0}), half, 1e-9);
  EXPECT_FALSE(res.in_domain);
  EXPECT_THAT(res.strict_set, ElementsAre(0));
}

TEST(CoderivativeTest, IndexSetsArePartitionOfActiveSet) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  const Polyhedron c = ThreeDimChain();
  for (int trial = 0; trial < 50; ++trial) {
    Vec u(3);
    for (int j = 0; j < 3; ++j) u(j) = nd(rng);
    if (trial % 3 == 0) u(1) = u(0);
    const CoderivativeGenerators res =
        coderivative_generators(V({0, 0, 0}), V({0, 0, 0}), u, c, 1e-9);
    ASSERT_TRUE(res.in_domain);
    for (int i : res.span_indices) {
      EXPECT_EQ(std::count(res.cone_indices.begin(), res.cone_indices.end(), i),
                0);
    }
    for (int i : res.cone_indices) EXPECT_TRUE(i == 0 || i == 1);
  }
}

TEST(CoderivativeTest, DependentGeneratorsRejected) {
  Mat g(2, 2);
  g << 1, 0, 2, 0;
  const Polyhedron c(g);
  try {
    coderivative_generators(V({0, 0}), V({0, 0}), V({1, 1}), c, 1e-9);
    FAIL() << "expected DependentGenerators";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDependentGenerators);
  }
}

}  // namespace
}  // namespace sweep
