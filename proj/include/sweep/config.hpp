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

// JSON problem configurations and CSV trajectory files.
//
// A configuration is a JSON object with "schema_version": 1 and
// "kind": "sweeping" or "crowd". Unknown keys are rejected at every level.
//
// Sweeping keys:
//   n, d, T, x0[n], generators[m][n], r, tau (default 0),
//   perturbation: {name: "identity" | "diag_speeds" | "affine",
//                  speeds[n] | A[n][n], B[n][d], c[n]},
//   terminal_cost: {weight, target[n]},
//   running_cost: [{name, weight, slope[], offset[], target[]}, ...] with
//                 name one of control_quadratic, velocity_quadratic,
//                 state_quadratic, u_rate_quadratic, control_rate_quadratic,
//                 control_rate_abs,
//   u: {value[n], slope[n]} (fixed path, or the seed when u_decision),
//   u_decision, terminal_on_boundary, M, K, init_scale,
//   controls: {value[d], slope[d]} (controls used by `simulate`).
//
// Crowd keys: n, R, T, speeds[n], x0[n], alpha, a_bar[n] (controls used by
// `simulate`).
//
// CSV trajectories have the header t,x_1..x_n,u_1..u_n,a_1..a_d,eta_1..eta_m
// and one row per node of a uniform mesh. The eta entries of node j > 0 are
// the contact multipliers of the interval ending at node j; node 0 holds 0.

#ifndef SWEEP_CONFIG_HPP_
#define SWEEP_CONFIG_HPP_

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <json.hpp>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sweep/common.hpp"
#include "sweep/crowd.hpp"
#include "sweep/geometry.hpp"
#include "sweep/problem.hpp"

namespace sweep {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

struct ProblemConfig {
  enum class Kind { kSweeping, kCrowd };
  Kind kind = Kind::kSweeping;
  SweepingProblem problem;  // for crowd configs: the embedded problem
  LinearPath controls;      // controls used by `simulate`
  std::optional<CrowdConfig> crowd;
};

namespace internal {

inline void RequireKeys(const Json& j, const std::string& where,
                        const std::set<std::string>& allowed,
                        const std::set<std::string>& required) {
  if (!j.is_object()) {
    throw Error(ErrorCode::kConfigError, where + " must be an object");
  }
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) {
      throw Error(ErrorCode::kConfigError,
                  "unknown key '" + item.key() + "' in " + where);
    }
  }
  for (const auto& key : required) {
    if (!j.contains(key)) {
      throw Error(ErrorCode::kConfigError,
                  "missing key '" + key + "' in " + where);
    }
  }
}

inline double GetNumber(const Json& j, const std::string& key) {
  const Json& v = j.at(key);
  if (!v.is_number()) {
    throw Error(ErrorCode::kConfigError, "key '" + key + "' must be a number");
  }
  const double x = v.get<double>();
  if (!std::isfinite(x)) {
    throw Error(ErrorCode::kConfigError, "key '" + key + "' is not finite");
  }
  return x;
}

inline int GetInt(const Json& j, const std::string& key) {
  const Json& v = j.at(key);
  if (!v.is_number_integer()) {
    throw Error(ErrorCode::kConfigError,
                "key '" + key + "' must be an integer");
  }
  return v.get<int>();
}

inline bool GetBool(const Json& j, const std::string& key) {
  const Json& v = j.at(key);
  if (!v.is_boolean()) {
    throw Error(ErrorCode::kConfigError, "key '" + key + "' must be a boolean");
  }
  return v.get<bool>();
}

inline Vec GetVec(const Json& j, const std::string& key,
                  std::optional<int> size = std::nullopt) {
  const Json& v = j.at(key);
  if (!v.is_array()) {
    throw Error(ErrorCode::kConfigError, "key '" + key + "' must be an array");
  }
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) {
      throw Error(ErrorCode::kConfigError,
                  "key '" + key + "' must hold numbers");
    }
    out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
  }
  if (size && out.size() != *size) {
    throw Error(
        ErrorCode::kConfigError,
        "key '" + key + "' must have " + std::to_string(*size) + " entries");
  }
  return out;
}

inline Mat GetMat(const Json& j, const std::string& key, int rows, int cols) {
  const Json& v = j.at(key);
  if (!v.is_array() || static_cast<int>(v.size()) != rows) {
    throw Error(ErrorCode::kConfigError, "key '" + key + "' must have " +
                                             std::to_string(rows) + " rows");
  }
  Mat out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (!v[r].is_array() || static_cast<int>(v[r].size()) != cols) {
      throw Error(ErrorCode::kConfigError,
                  "row " + std::to_string(r) + " of '" + key + "' must have " +
                      std::to_string(cols) + " entries");
    }
    for (int c = 0; c < cols; ++c) {
      if (!v[r][c].is_number()) {
        throw Error(ErrorCode::kConfigError,
                    "key '" + key + "' must hold numbers");
      }
      out(r, c) = v[r][c].get<double>();
    }
  }
  return out;
}

inline LinearPath GetPath(const Json& j, const std::string& key, int size) {
  const Json& p = j.at(key);
  RequireKeys(p, key, {"value", "slope"}, {"value"});
  LinearPath path;
  path.value = GetVec(p, "value", size);
  path.slope =
      p.contains("slope") ? GetVec(p, "slope", size) : Vec(Vec::Zero(size));
  return path;
}

inline RunningTerm::Kind RunningKindFromName(const std::string& name) {
  using K = RunningTerm::Kind;
  for (K k :
       {K::kControlQuadratic, K::kVelocityQuadratic, K::kStateQuadratic,
        K::kURateQuadratic, K::kControlRateQuadratic, K::kControlRateAbs}) {
    if (name == RunningTermName(k)) return k;
  }
  throw Error(ErrorCode::kConfigError, "unknown running cost '" + name + "'");
}

inline ProblemConfig ParseSweeping(const Json& j) {
  RequireKeys(
      j, "config",
      {"schema_version", "kind", "n", "d", "T", "x0", "generators", "r", "tau",
       "perturbation", "terminal_cost", "running_cost", "u", "u_decision",
       "terminal_on_boundary", "M", "K", "init_scale", "controls"},
      {"schema_version", "kind", "n", "d", "T", "x0", "generators", "r", "u"});
  ProblemConfig cfg;
  cfg.kind = ProblemConfig::Kind::kSweeping;
  SweepingProblem& p = cfg.problem;
  p.n = GetInt(j, "n");
  p.d = GetInt(j, "d");
  if (p.n <= 0 || p.d <= 0) {
    throw Error(ErrorCode::kConfigError, "n and d must be positive");
  }
  p.T = GetNumber(j, "T");
  p.x0 = GetVec(j, "x0", p.n);
  const Json& g = j.at("generators");
  if (!g.is_array()) {
    throw Error(ErrorCode::kConfigError, "key 'generators' must be an array");
  }
  p.C = Polyhedron(GetMat(j, "generators", static_cast<int>(g.size()), p.n));
  p.r = GetNumber(j, "r");
  if (j.contains("tau")) p.tau = GetNumber(j, "tau");
  if (j.contains("perturbation")) {
    const Json& f = j.at("perturbation");
    RequireKeys(f, "perturbation", {"name", "speeds", "A", "B", "c"}, {"name"});
    const std::string name = f.at("name").get<std::string>();
    if (name == "identity") {
      RequireKeys(f, "perturbation", {"name"}, {"name"});
      p.f = Perturbation::Identity();
    } else if (name == "diag_speeds") {
      RequireKeys(f, "perturbation", {"name", "speeds"}, {"name", "speeds"});
      p.f = Perturbation::DiagSpeeds(GetVec(f, "speeds", p.n));
    } else if (name == "affine") {
      RequireKeys(f, "perturbation", {"name", "A", "B", "c"},
                  {"name", "A", "B", "c"});
      p.f = Perturbation::Affine(GetMat(f, "A", p.n, p.n),
                                 GetMat(f, "B", p.n, p.d), GetVec(f, "c", p.n));
    } else {
      throw Error(ErrorCode::kConfigError,
                  "unknown perturbation '" + name + "'");
    }
  }
  if (j.contains("terminal_cost")) {
    const Json& t = j.at("terminal_cost");
    RequireKeys(t, "terminal_cost", {"weight", "target"}, {"weight"});
    p.phi.weight = GetNumber(t, "weight");
    p.phi.target =
        t.contains("target") ? GetVec(t, "target", p.n) : Vec(Vec::Zero(p.n));
  }
  if (j.contains("running_cost")) {
    const Json& list = j.at("running_cost");
    if (!list.is_array()) {
      throw Error(ErrorCode::kConfigError,
                  "key 'running_cost' must be an array");
    }
    for (const Json& term : list) {
      RequireKeys(term, "running_cost",
                  {"name", "weight", "slope", "offset", "target"}, {"name"});
      RunningTerm rt;
      rt.kind = RunningKindFromName(term.at("name").get<std::string>());
      if (term.contains("weight")) rt.weight = GetNumber(term, "weight");
      const bool on_state = rt.kind == RunningTerm::Kind::kStateQuadratic;
      const int shift_size = on_state ? p.n : p.d;
      if (term.contains("slope")) rt.slope = GetVec(term, "slope", shift_size);
      if (term.contains("offset")) {
        rt.offset = GetVec(term, "offset", shift_size);
      }
      if (term.contains("target")) rt.target = GetVec(term, "target", p.n);
      p.ell.terms.push_back(rt);
    }
  }
  p.u_path = GetPath(j, "u", p.n);
  if (j.contains("u_decision")) p.u_decision = GetBool(j, "u_decision");
  if (j.contains("terminal_on_boundary")) {
    p.terminal_on_boundary = GetBool(j, "terminal_on_boundary");
  }
  if (j.contains("M")) p.M = GetNumber(j, "M");
  if (j.contains("K")) p.K = GetNumber(j, "K");
  if (j.contains("init_scale")) p.init_scale = GetNumber(j, "init_scale");
  cfg.controls = j.contains("controls") ? GetPath(j, "controls", p.d)
                                        : LinearPath::Constant(Vec::Zero(p.d));
  p.Validate();
  return cfg;
}

inline ProblemConfig ParseCrowd(const Json& j) {
  RequireKeys(j, "config",
              {"schema_version", "kind", "n", "R", "T", "speeds", "x0", "alpha",
               "a_bar"},
              {"schema_version", "kind", "n", "R", "T", "speeds", "x0"});
  CrowdConfig c;
  c.n = GetInt(j, "n");
  if (c.n <= 0) throw Error(ErrorCode::kConfigError, "n must be positive");
  c.R = GetNumber(j, "R");
  c.T = GetNumber(j, "T");
  c.speeds = GetVec(j, "speeds", c.n);
  c.x0 = GetVec(j, "x0", c.n);
  if (j.contains("alpha")) c.alpha = GetNumber(j, "alpha");
  c.Validate();
  ProblemConfig cfg;
  cfg.kind = ProblemConfig::Kind::kCrowd;
  cfg.crowd = c;
  cfg.problem = crowd_problem(c);
  cfg.controls = LinearPath::Constant(
      j.contains("a_bar") ? GetVec(j, "a_bar", c.n) : Vec(Vec::Zero(c.n)));
  return cfg;
}

}  // namespace internal

inline ProblemConfig ParseConfig(const Json& j) {
  if (!j.is_object()) {
    throw Error(ErrorCode::kConfigError, "config must be a JSON object");
  }
  if (!j.contains("schema_version") ||
      !j.at("schema_version").is_number_integer() ||
      j.at("schema_version").get<int>() != kSchemaVersion) {
    throw Error(ErrorCode::kConfigError, "key 'schema_version' must be " +
                                             std::to_string(kSchemaVersion));
  }
  if (!j.contains("kind") || !j.at("kind").is_string()) {
    throw Error(ErrorCode::kConfigError, "missing key 'kind'");
  }
  const std::string kind = j.at("kind").get<std::string>();
  try {
    if (kind == "sweeping") return internal::ParseSweeping(j);
    if (kind == "crowd") return internal::ParseCrowd(j);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kConfigError, e.what());
  }
  throw Error(ErrorCode::kConfigError, "unknown kind '" + kind + "'");
}

inline Json ReadJsonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfigError, "cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kConfigError,
                "malformed JSON in " + path + ": " + e.what());
  }
}

inline ProblemConfig LoadConfig(const std::string& path) {
  return ParseConfig(ReadJsonFile(path));
}

// ---------------------------------------------------------------------------
// CSV trajectories.

inline void WriteTrajectoryCsv(std::ostream& out, const DiscreteTrajectory& z,
                               const Mat& eta) {
  const int n = static_cast<int>(z.x.cols());
  const int d = static_cast<int>(z.a.cols());
  const int m = static_cast<int>(eta.cols());
  out << "t";
  for (int i = 1; i <= n; ++i) out << ",x_" << i;
  for (int i = 1; i <= n; ++i) out << ",u_" << i;
  for (int i = 1; i <= d; ++i) out << ",a_" << i;
  for (int i = 1; i <= m; ++i) out << ",eta_" << i;
  out << "\n" << std::setprecision(17);
  for (int j = 0; j <= z.k(); ++j) {
    out << z.mesh.t(j);
    for (int i = 0; i < n; ++i) out << "," << z.x(j, i);
    for (int i = 0; i < n; ++i) out << "," << z.u(j, i);
    for (int i = 0; i < d; ++i) out << "," << z.a(j, i);
    for (int i = 0; i < m; ++i) {
      out << "," << (j == 0 || eta.rows() < j ? 0.0 : eta(j - 1, i));
    }
    out << "\n";
  }
}

struct CsvTrajectory {
  DiscreteTrajectory traj;
  Mat eta;  // k x m, interval multipliers
};

inline CsvTrajectory ReadTrajectoryCsv(std::istream& in, int n, int d, int m) {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kConfigError, "solution CSV: " + msg);
  };
  std::string line;
  if (!std::getline(in, line)) fail("empty file");
  std::vector<std::string> expected{"t"};
  for (int i = 1; i <= n; ++i) expected.push_back("x_" + std::to_string(i));
  for (int i = 1; i <= n; ++i) expected.push_back("u_" + std::to_string(i));
  for (int i = 1; i <= d; ++i) expected.push_back("a_" + std::to_string(i));
  for (int i = 1; i <= m; ++i) expected.push_back("eta_" + std::to_string(i));
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) {
        cell.pop_back();
      }
      header.push_back(cell);
    }
  }
  // The eta columns are optional on input.
  const size_t base = 1 + 2 * n + d;
  if (header.size() != expected.size() && header.size() != base) {
    fail("expected " + std::to_string(expected.size()) + " columns, got " +
         std::to_string(header.size()));
  }
  for (size_t c = 0; c < header.size(); ++c) {
    if (header[c] != expected[c]) {
      fail("column " + std::to_string(c + 1) + " is '" + header[c] +
           "', expected '" + expected[c] + "'");
    }
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        fail("non-numeric entry '" + cell + "' on row " +
             std::to_string(rows.size() + 1));
      }
    }
    if (row.size() != header.size()) {
      fail("row " + std::to_string(rows.size() + 1) + " has " +
           std::to_string(row.size()) + " entries");
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) fail("need at least two rows");
  const int k = static_cast<int>(rows.size()) - 1;
  const double T = rows.back()[0];
  if (rows.front()[0] != 0.0 || !(T > 0.0)) fail("time must run from 0 to T");
  CsvTrajectory out;
  out.traj.mesh = Mesh(k, T);
  out.traj.x = Mat(k + 1, n);
  out.traj.u = Mat(k + 1, n);
  out.traj.a = Mat(k + 1, d);
  out.eta = Mat::Zero(k, m);
  for (int j = 0; j <= k; ++j) {
    const auto& r = rows[j];
    if (std::abs(r[0] - out.traj.mesh.t(j)) > 1e-9 * (1.0 + T)) {
      fail("nodes must be uniform (row " + std::to_string(j + 1) + ")");
    }
    for (int i = 0; i < n; ++i) out.traj.x(j, i) = r[1 + i];
    for (int i = 0; i < n; ++i) out.traj.u(j, i) = r[1 + n + i];
    for (int i = 0; i < d; ++i) out.traj.a(j, i) = r[1 + 2 * n + i];
    if (header.size() == expected.size() && j > 0) {
      for (int i = 0; i < m; ++i) out.eta(j - 1, i) = r[base + i];
    }
  }
  return out;
}

inline CsvTrajectory ReadTrajectoryCsvFile(const std::string& path, int n,
                                           int d, int m) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfigError, "cannot open " + path);
  return ReadTrajectoryCsv(in, n, d, m);
}

// Long-format plot data: series,t,component,value.
inline void WritePlotData(std::ostream& out, const DiscreteTrajectory& z) {
  out << "series,t,component,value\n" << std::setprecision(17);
  auto emit = [&](const char* name, const Mat& arr) {
    for (int j = 0; j <= z.k(); ++j) {
      for (Eigen::Index i = 0; i < arr.cols(); ++i) {
        out << name << "," << z.mesh.t(j) << "," << i + 1 << "," << arr(j, i)
            << "\n";
      }
    }
  };
  emit("x", z.x);
  emit("u", z.u);
  emit("a", z.a);
}

}  // namespace sweep

#endif  // SWEEP_CONFIG_HPP_
