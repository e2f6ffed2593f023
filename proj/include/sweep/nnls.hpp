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

// Lawson-Hanson active-set solver for min ||A x - b|| subject to x >= 0.

#ifndef SWEEP_NNLS_HPP_
#define SWEEP_NNLS_HPP_

#include <algorithm>
#include <limits>
#include <vector>

#include "sweep/common.hpp"

namespace sweep {

struct NnlsResult {
  Vec x;
  double residual = 0.0;  // ||A x - b||
  int iterations = 0;
};

namespace internal {

// Least squares restricted to the columns listed in `passive`; other entries
// of the returned vector are zero.
inline Vec SolvePassive(const Mat& a, const Vec& b,
                        const std::vector<bool>& passive) {
  std::vector<Eigen::Index> cols;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    if (passive[j]) cols.push_back(j);
  }
  Vec s = Vec::Zero(a.cols());
  if (cols.empty()) return s;
  Mat sub(a.rows(), static_cast<Eigen::Index>(cols.size()));
  for (size_t c = 0; c < cols.size(); ++c) sub.col(c) = a.col(cols[c]);
  Vec sol = sub.colPivHouseholderQr().solve(b);
  for (size_t c = 0; c < cols.size(); ++c) s(cols[c]) = sol(c);
  return s;
}

}  // namespace internal

// Solves the nonnegative least-squares problem. `max_iter` bounds the number
// of outer (column-adding) iterations; exceeding it throws NumericalFailure.
inline NnlsResult Nnls(const Mat& a, const Vec& b, int max_iter = -1) {
  const Eigen::Index p = a.cols();
  if (b.size() != a.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "NNLS right-hand side size");
  }
  if (max_iter < 0) max_iter = std::max<int>(30, 3 * static_cast<int>(p) + 10);
  NnlsResult out;
  out.x = Vec::Zero(p);
  if (p == 0) {
    out.residual = b.norm();
    return out;
  }
  const double scale = std::max(1.0, a.norm() * std::max(1.0, b.norm()));
  const double tol = 1e-13 * scale;
  std::vector<bool> passive(p, false);
  Vec& x = out.x;
  Vec w = a.transpose() * (b - a * x);
  int iter = 0;
  while (true) {
    Eigen::Index best = -1;
    double best_w = tol;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (!passive[j] && w(j) > best_w) {
        best_w = w(j);
        best = j;
      }
    }
    if (best < 0) break;
    if (++iter > max_iter) {
      throw Error(ErrorCode::kNumericalFailure,
                  "NNLS exceeded its iteration budget", iter);
    }
    passive[best] = true;
    Vec s = internal::SolvePassive(a, b, passive);
    // If the freshly added column does not enter positively the problem is
    // degenerate at this point; drop it and stop.
    if (s(best) <= 0.0) {
      passive[best] = false;
      break;
    }
    int inner = 0;
    while (true) {
      double alpha = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < p; ++j) {
        if (passive[j] && s(j) <= 0.0) {
          alpha = std::min(alpha, x(j) / (x(j) - s(j)));
        }
      }
      if (!std::isfinite(alpha)) break;
      x += alpha * (s - x);
      for (Eigen::Index j = 0; j < p; ++j) {
        if (passive[j] && x(j) <= 1e-15 * scale) {
          passive[j] = false;
          x(j) = 0.0;
        }
      }
      s = internal::SolvePassive(a, b, passive);
      if (++inner > 3 * p + 10) {
        throw Error(ErrorCode::kNumericalFailure, "NNLS inner loop stalled");
      }
    }
    x = s;
    w = a.transpose() * (b - a * x);
  }
  for (Eigen::Index j = 0; j < p; ++j) x(j) = std::max(0.0, x(j));
  out.residual = (a * x - b).norm();
  out.iterations = iter;
  return out;
}

}  // namespace sweep

#endif  // SWEEP_NNLS_HPP_
