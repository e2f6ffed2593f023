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

// Commands behind the `sweepctl` front end. Each command reads a JSON
// configuration, writes its artifacts and returns a process exit code:
// 0 success / check passed, 1 check failed, 2 usage or configuration error,
// 3 numerical failure.

#ifndef SWEEP_CLI_HPP_
#define SWEEP_CLI_HPP_

#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "sweep/certificates.hpp"
#include "sweep/config.hpp"
#include "sweep/crowd.hpp"
#include "sweep/dynamics.hpp"
#include "sweep/optimizer.hpp"
#include "sweep/transcription.hpp"

namespace sweep {

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitUsage = 2,
  kExitNumerical = 3,
};

struct CommandOptions {
  std::string config;
  std::string solution;   // check: candidate CSV
  std::string out;        // primary artifact; empty writes to stdout
  std::string report;     // JSON summary / report; empty writes to stdout
  std::string plot_data;  // long-format CSV for plotting; empty disables
  int grid = 100;
  std::optional<double> tau;
  int multistart = 8;
  std::uint64_t seed = 0;
  double tol = 1e-6;
  std::string sign;  // adjoint sign convention; empty uses the default
};

namespace internal {

inline int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfigError:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kInfeasibleStart:
      return kExitUsage;
    default:
      return kExitNumerical;
  }
}

// Runs `body`, mapping library errors onto exit codes.
inline int Guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return ExitCodeFor(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

// Writes through `fn` to `path`, or to `fallback` when the path is empty.
inline void WriteTo(const std::string& path, std::ostream& fallback,
                    const std::function<void(std::ostream&)>& fn) {
  if (path.empty()) {
    fn(fallback);
    return;
  }
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::kConfigError, "cannot write " + path);
  fn(f);
}

inline AdjointSign ParseSign(const std::string& s, AdjointSign fallback) {
  if (s.empty()) return fallback;
  if (s == "lagrangian") return AdjointSign::kLagrangian;
  if (s == "published") return AdjointSign::kPublished;
  throw Error(ErrorCode::kConfigError,
              "sign must be 'lagrangian' or 'published'");
}

inline void RequireGrid(int grid) {
  if (grid <= 0) throw Error(ErrorCode::kConfigError, "grid must be positive");
}

inline Json VecJson(const Vec& v) { return Json(ToStd(v)); }

}  // namespace internal

// Simulates the catching-up scheme for the configured control path.
inline int cmd_simulate(const CommandOptions& o, std::ostream& out,
                        std::ostream& err) {
  return internal::Guarded(err, [&]() {
    internal::RequireGrid(o.grid);
    const ProblemConfig cfg = LoadConfig(o.config);
    const SweepingProblem& p = cfg.problem;
    const Mesh mesh(o.grid, p.T);
    Mat u(o.grid + 1, p.n), a(o.grid + 1, p.d);
    for (int j = 0; j <= o.grid; ++j) {
      u.row(j) = p.u_path.Eval(mesh.t(j)).transpose();
      a.row(j) = cfg.controls.Eval(mesh.t(j)).transpose();
    }
    const CatchingUpRecord rec = CatchingUpSequences(p, mesh, u, a);
    const Mat eta = rec.multipliers / rec.traj.mesh.h();
    internal::WriteTo(o.out, out, [&](std::ostream& s) {
      WriteTrajectoryCsv(s, rec.traj, eta);
    });
    if (!o.plot_data.empty()) {
      internal::WriteTo(o.plot_data, out,
                        [&](std::ostream& s) { WritePlotData(s, rec.traj); });
    }
    return static_cast<int>(kExitOk);
  });
}

// Solves the discrete approximation and reports the solution together with
// its discrete certificate.
inline int cmd_optimize(const CommandOptions& o, std::ostream& out,
                        std::ostream& err) {
  return internal::Guarded(err, [&]() {
    internal::RequireGrid(o.grid);
    if (o.multistart <= 0) {
      throw Error(ErrorCode::kConfigError, "multistart must be positive");
    }
    const AdjointSign sign =
        internal::ParseSign(o.sign, AdjointSign::kLagrangian);
    ProblemConfig cfg = LoadConfig(o.config);
    if (o.tau) cfg.problem.tau = *o.tau;
    cfg.problem.Validate();
    const DiscreteProblem dp = make_discrete_problem(cfg.problem, o.grid);
    SolveOptions so;
    so.multistart = o.multistart;
    so.seed = o.seed;
    const DiscreteSolution sol = solve_discrete(dp, so);
    Mat eta = Mat::Zero(o.grid, cfg.problem.C.size());
    try {
      eta = eta_from_trajectory(sol.z, cfg.problem);
    } catch (const Error&) {
      // Left at zero; the certificate report carries the diagnosis.
    }
    Json summary;
    summary["schema_version"] = kSchemaVersion;
    summary["command"] = "optimize";
    summary["grid"] = o.grid;
    summary["tau"] = cfg.problem.tau;
    summary["multistart"] = o.multistart;
    summary["seed"] = o.seed;
    summary["cost"] = sol.cost;
    summary["status"] = SolveStatusName(sol.status);
    summary["stationarity"] = sol.stationarity;
    summary["max_violation"] = sol.max_violation;
    summary["iterations"] = sol.iterations;
    summary["start_index"] = sol.start_index;
    Json cert;
    cert["sign"] = AdjointSignName(sign);
    try {
      CertificateOptions co;
      co.sign = sign;
      const DiscreteCertificate c = build_discrete_certificate(dp, sol, co);
      const CheckReport rep = check_discrete(dp, sol, c);
      cert["report"] = rep.ToJson();
      cert["lambda"] = c.lambda;
    } catch (const Error& e) {
      cert["report"] = {{"verdict", "fail"}, {"error", e.what()}};
    }
    summary["certificate"] = cert;
    internal::WriteTo(o.out, out, [&](std::ostream& s) {
      WriteTrajectoryCsv(s, sol.z, eta);
    });
    internal::WriteTo(o.report, out, [&](std::ostream& s) {
      s << std::setprecision(17) << summary.dump(2) << "\n";
    });
    if (!o.plot_data.empty()) {
      internal::WriteTo(o.plot_data, out,
                        [&](std::ostream& s) { WritePlotData(s, sol.z); });
    }
    if (sol.max_violation > 1e-6) {
      err << "error: solver ended infeasible (violation " << sol.max_violation
          << ")\n";
      return static_cast<int>(kExitNumerical);
    }
    return static_cast<int>(kExitOk);
  });
}

// Fits a continuous-time certificate to a candidate trajectory and checks
// the optimality conditions.
inline int cmd_check(const CommandOptions& o, std::ostream& out,
                     std::ostream& err) {
  return internal::Guarded(err, [&]() {
    if (o.solution.empty()) {
      throw Error(ErrorCode::kConfigError, "check needs --solution");
    }
    if (!(o.tol > 0.0)) {
      throw Error(ErrorCode::kConfigError, "tol must be positive");
    }
    const AdjointSign sign =
        internal::ParseSign(o.sign, AdjointSign::kLagrangian);
    const ProblemConfig cfg = LoadConfig(o.config);
    const SweepingProblem& p = cfg.problem;
    CsvTrajectory cand =
        ReadTrajectoryCsvFile(o.solution, p.n, p.d, p.C.size());
    // With u fixed the configured path is authoritative; a candidate file
    // may be shared between configurations that differ only in u.
    bool u_replaced = false;
    if (!p.u_decision) {
      for (int j = 0; j <= cand.traj.k(); ++j) {
        const Vec u = p.u_path.Eval(cand.traj.mesh.t(j));
        if ((cand.traj.U(j) - u).norm() > 1e-12 * (1.0 + u.norm())) {
          u_replaced = true;
        }
        cand.traj.u.row(j) = u.transpose();
      }
    }
    if (std::abs(cand.traj.mesh.T() - p.T) > 1e-9 * (1.0 + p.T)) {
      throw Error(ErrorCode::kConfigError,
                  "solution horizon does not match the config");
    }
    ContinuousOptions co;
    co.sign = sign;
    const ContinuousCertificate cert =
        fit_continuous_certificate(p, cand.traj, co);
    const CheckReport rep = check_continuous(p, cand.traj, cert, o.tol);
    Json j = rep.ToJson();
    j["schema_version"] = kSchemaVersion;
    j["command"] = "check";
    j["tol"] = o.tol;
    j["sign"] = AdjointSignName(sign);
    j["lambda"] = cert.lambda;
    j["failed"] = rep.Failed();
    j["notes"] = cert.notes;
    j["u_column_replaced"] = u_replaced;
    internal::WriteTo(o.report, out, [&](std::ostream& s) {
      s << std::setprecision(17) << j.dump(2) << "\n";
    });
    return static_cast<int>(rep.verdict ? kExitOk : kExitCheckFailed);
  });
}

inline Json CrowdSolutionJson(const CrowdConfig& c, const CrowdSolution& s) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = "crowd";
  j["a_bar"] = internal::VecJson(s.a_bar);
  j["cost"] = s.cost;
  Json times = Json::array();
  for (const auto& t : s.trajectory.contact_times) {
    times.push_back(t ? Json(*t) : Json(nullptr));
  }
  j["contact_times"] = times;
  Json segs = Json::array();
  for (const auto& seg : s.trajectory.segments) {
    segs.push_back({{"t0", seg.t0},
                    {"t1", seg.t1},
                    {"x0", internal::VecJson(seg.x_start)},
                    {"slopes", internal::VecJson(seg.slopes)},
                    {"eta", internal::VecJson(seg.eta)}});
  }
  j["segments"] = segs;
  j["x_final"] = internal::VecJson(s.trajectory.x_final);
  std::vector<int> pattern;
  for (size_t i = 0; i < s.pattern.size(); ++i) {
    if (s.pattern[i]) pattern.push_back(static_cast<int>(i) + 1);
  }
  j["pattern"] = pattern;
  Json branches = Json::array();
  for (const CrowdBranch& b : s.branches) {
    Json bj{{"label", b.Label()},
            {"feasible", b.feasible},
            {"status", b.feasible ? "feasible" : "pruned"},
            {"reason", b.reason},
            {"a_bar", internal::VecJson(b.a_bar)}};
    bj["cost"] = std::isfinite(b.cost) ? Json(b.cost) : Json(nullptr);
    branches.push_back(bj);
  }
  j["branches"] = branches;
  j["refined"] = s.refined;
  j["flags"] = s.flags;
  const CrowdCertificateSummary& cs = s.certificate;
  j["certificate_summary"] = {
      {"verdict", cs.verdict ? "pass" : "fail"},
      {"sign", AdjointSignName(cs.sign)},
      {"lambda", cs.lambda},
      {"gamma_from_first_contact", internal::VecJson(cs.gamma_total)},
      {"gamma_mass_before_first_contact", cs.gamma_before_contact},
      {"failed", cs.failed}};
  j["alpha"] = CrowdAlpha(c);
  return j;
}

// Solves the corridor crowd problem by contact-pattern enumeration.
inline int cmd_crowd(const CommandOptions& o, std::ostream& out,
                     std::ostream& err) {
  return internal::Guarded(err, [&]() {
    const ProblemConfig cfg = LoadConfig(o.config);
    if (cfg.kind != ProblemConfig::Kind::kCrowd) {
      throw Error(ErrorCode::kConfigError, "crowd needs a crowd config");
    }
    CrowdSolveOptions so;
    so.certificate_sign = internal::ParseSign(o.sign, AdjointSign::kPublished);
    const CrowdSolution s = solve_crowd(*cfg.crowd, so);
    const Json j = CrowdSolutionJson(*cfg.crowd, s);
    internal::WriteTo(o.out, out, [&](std::ostream& f) {
      f << std::setprecision(17) << j.dump(2) << "\n";
    });
    if (!o.plot_data.empty()) {
      internal::WriteTo(o.plot_data, out, [&](std::ostream& f) {
        f << "series,t,component,value\n" << std::setprecision(17);
        auto emit = [&](double t) {
          const Vec x = s.trajectory.Position(t);
          for (int i = 0; i < x.size(); ++i) {
            f << "x," << t << "," << i + 1 << "," << x(i) << "\n";
          }
        };
        for (const auto& seg : s.trajectory.segments) emit(seg.t0);
        emit(cfg.crowd->T);
      });
    }
    return static_cast<int>(kExitOk);
  });
}

}  // namespace sweep

#endif  // SWEEP_CLI_HPP_
