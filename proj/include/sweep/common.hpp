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

// Shared vocabulary: dense linear-algebra aliases and the error type thrown
// by every module.

#ifndef SWEEP_COMMON_HPP_
#define SWEEP_COMMON_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace sweep {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class ErrorCode {
  kInfeasiblePoint,
  kNotInCone,
  kNumericalFailure,
  kDomainViolation,
  kDependentGenerators,
  kInfeasibleStart,
  kDimensionMismatch,
  kMaxIterExceeded,
  kNoConsistentDuals,
  kInconsistentSequence,
  kNoFeasiblePattern,
  kConfigError,
};

inline const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInfeasiblePoint:
      return "InfeasiblePoint";
    case ErrorCode::kNotInCone:
      return "NotInCone";
    case ErrorCode::kNumericalFailure:
      return "NumericalFailure";
    case ErrorCode::kDomainViolation:
      return "DomainViolation";
    case ErrorCode::kDependentGenerators:
      return "DependentGenerators";
    case ErrorCode::kInfeasibleStart:
      return "InfeasibleStart";
    case ErrorCode::kDimensionMismatch:
      return "DimensionMismatch";
    case ErrorCode::kMaxIterExceeded:
      return "MaxIterExceeded";
    case ErrorCode::kNoConsistentDuals:
      return "NoConsistentDuals";
    case ErrorCode::kInconsistentSequence:
      return "InconsistentSequence";
    case ErrorCode::kNoFeasiblePattern:
      return "NoFeasiblePattern";
    case ErrorCode::kConfigError:
      return "ConfigError";
  }
  return "Unknown";
}

// Every failure in the library is reported through this exception. `value`
// carries a diagnostic number when one is meaningful (e.g. the residual of a
// failed cone fit).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, double value = 0.0)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code),
        value_(value) {}

  ErrorCode code() const { return code_; }
  double value() const { return value_; }

 private:
  ErrorCode code_;
  double value_;
};

// Default feasibility tolerance relative to the magnitude of the query point.
inline double DefaultTol(const Vec& x) { return 1e-8 * (1.0 + x.norm()); }

inline void RequireSize(const Vec& v, Eigen::Index n, const char* what) {
  if (v.size() != n) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(what) + " has size " + std::to_string(v.size()) +
                    ", expected " + std::to_string(n));
  }
}

inline std::vector<double> ToStd(const Vec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Vec FromStd(const std::vector<double>& v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

}  // namespace sweep

#endif  // SWEEP_COMMON_HPP_
