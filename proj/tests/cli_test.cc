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

#include "sweep/cli.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "gtest/gtest.h"

namespace sweep {
namespace {

namespace fs = std::filesystem;

const std::string kConfigs = std::string(SWEEP_SOURCE_DIR) + "/configs/";

std::string Temp(const std::string& name) {
  const fs::path dir = fs::path(::testing::TempDir()) / "sweepctl_test";
  fs::create_directories(dir);
  return (dir / name).string();
}

std::string Slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const std::string& path, const std::string& text) {
  std::ofstream(path) << text;
}

// Runs the sweepctl binary; returns its exit code and captures stderr.
int Sweepctl(const std::string& args, std::string* err = nullptr) {
  const std::string err_path = Temp("stderr.txt");
  const std::string cmd =
      std::string(SWEEPCTL_PATH) + " " + args + " > /dev/null 2> " + err_path;
  const int status = std::system(cmd.c_str());
  if (err) *err = Slurp(err_path);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Json ReadJson(const std::string& path) { return ReadJsonFile(path); }

Json ScalarConfig() { return ReadJson(kConfigs + "scalar_contact.json"); }

TEST(ConfigTest, EveryShippedConfigValidates) {
  int count = 0;
  for (const auto& entry : fs::directory_iterator(kConfigs)) {
    if (entry.path().extension() != ".json") continue;
    EXPECT_NO_THROW(LoadConfig(entry.path().string())) << entry.path();
    ++count;
  }
  EXPECT_GE(count, 7);
}

TEST(ConfigTest, UnknownKeyIsNamed) {
  Json j = ScalarConfig();
  j["horizon"] = 2.0;
  try {
    ParseConfig(j);
    FAIL() << "unknown key accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfigError);
    EXPECT_NE(std::string(e.what()).find("'horizon'"), std::string::npos);
  }
  Json nested = ScalarConfig();
  nested["terminal_cost"]["scale"] = 1.0;
  EXPECT_THROW(ParseConfig(nested), Error);
}

TEST(ConfigTest, SchemaVersionAndKindAreRequired) {
  Json j = ScalarConfig();
  j["schema_version"] = 2;
  EXPECT_THROW(ParseConfig(j), Error);
  j = ScalarConfig();
  j["kind"] = "maze";
  EXPECT_THROW(ParseConfig(j), Error);
  j = ScalarConfig();
  j.erase("x0");
  EXPECT_THROW(ParseConfig(j), Error);
}

TEST(ConfigTest, CrowdConfigEmbedsTheChainProblem) {
  const ProblemConfig c = LoadConfig(kConfigs + "crowd_three.json");
  ASSERT_EQ(c.kind, ProblemConfig::Kind::kCrowd);
  ASSERT_TRUE(c.crowd.has_value());
  EXPECT_EQ(c.problem.n, 3);
  EXPECT_EQ(c.problem.C.size(), 2);
  EXPECT_FALSE(c.problem.u_decision);
}

TEST(CsvTest, RoundTripIsExact) {
  DiscreteTrajectory z;
  z.mesh = Mesh(3, 0.7);
  z.x = Mat::Random(4, 2);
  z.u = Mat::Random(4, 2);
  z.a = Mat::Random(4, 1);
  const Mat eta = Mat::Random(3, 2).cwiseAbs();
  std::stringstream ss;
  WriteTrajectoryCsv(ss, z, eta);
  const CsvTrajectory back = ReadTrajectoryCsv(ss, 2, 1, 2);
  EXPECT_EQ(back.traj.x, z.x);
  EXPECT_EQ(back.traj.u, z.u);
  EXPECT_EQ(back.traj.a, z.a);
  EXPECT_EQ(back.eta, eta);
  EXPECT_EQ(back.traj.mesh.T(), 0.7);
}

TEST(CsvTest, BadFilesAreConfigErrors) {
  std::stringstream wrong_header("t,x_1,u_1,b_1\n0,0,1,0\n1,1,1,0\n");
  EXPECT_THROW(ReadTrajectoryCsv(wrong_header, 1, 1, 1), Error);
  std::stringstream short_row("t,x_1,u_1,a_1\n0,0,1,0\n1,1,1\n");
  EXPECT_THROW(ReadTrajectoryCsv(short_row, 1, 1, 1), Error);
  std::stringstream uneven("t,x_1,u_1,a_1\n0,0,1,0\n0.3,0,1,0\n1,1,1,0\n");
  EXPECT_THROW(ReadTrajectoryCsv(uneven, 1, 1, 1), Error);
}

TEST(SimulateCommandTest, ScalarContactFollowsHalfSlope) {
  const std::string out = Temp("sim41.csv");
  ASSERT_EQ(Sweepctl("simulate --config " + kConfigs +
                     "scalar_contact.json --grid 100 --out " + out),
            0);
  const CsvTrajectory t = ReadTrajectoryCsvFile(out, 1, 1, 1);
  ASSERT_EQ(t.traj.k(), 100);
  for (int j = 0; j <= 100; ++j) {
    EXPECT_NEAR(t.traj.x(j, 0), 0.5 * t.traj.mesh.t(j), 1e-12);
  }
}

TEST(SimulateCommandTest, ZeroPerturbationKeepsTheState) {
  Json j = ScalarConfig();
  j["controls"] = {{"value", {0.0}}};
  j["x0"] = {-0.3};
  const std::string cfg = Temp("rest.json");
  WriteFile(cfg, j.dump());
  const std::string out = Temp("rest.csv");
  ASSERT_EQ(Sweepctl("simulate --config " + cfg + " --grid 20 --out " + out),
            0);
  const CsvTrajectory t = ReadTrajectoryCsvFile(out, 1, 1, 1);
  for (int j2 = 0; j2 <= 20; ++j2) EXPECT_EQ(t.traj.x(j2, 0), -0.3);
}

TEST(SimulateCommandTest, MalformedConfigExitsWithUsageError) {
  Json j = ScalarConfig();
  j["colour"] = "red";
  const std::string cfg = Temp("bad.json");
  WriteFile(cfg, j.dump());
  std::string err;
  EXPECT_EQ(Sweepctl("simulate --config " + cfg, &err), 2);
  EXPECT_NE(err.find("colour"), std::string::npos) << err;
  WriteFile(cfg, "{ not json");
  EXPECT_EQ(Sweepctl("simulate --config " + cfg), 2);
  EXPECT_EQ(Sweepctl("simulate"), 2);
  EXPECT_EQ(Sweepctl("frobnicate --config " + cfg), 2);
}

TEST(SimulateCommandTest, PlotDataIsLongFormat) {
  const std::string plot = Temp("plot.csv");
  ASSERT_EQ(Sweepctl("simulate --config " + kConfigs +
                     "planar_boundary.json --grid 4 --out " + Temp("p.csv") +
                     " --emit-plot-data " + plot),
            0);
  std::ifstream in(plot);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "series,t,component,value");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 3 * 5 * 2);  // x, u, a at 5 nodes, 2 components
}

TEST(OptimizeCommandTest, ScalarContactCost) {
  const std::string out = Temp("opt41.csv"), rep = Temp("opt41.json");
  ASSERT_EQ(Sweepctl("optimize --config " + kConfigs +
                     "scalar_contact.json --grid 100 "
                     "--multistart 2 --out " +
                     out + " --report " + rep),
            0);
  const Json j = ReadJson(rep);
  EXPECT_NEAR(j["cost"].get<double>(), 0.25, 5e-3);
  EXPECT_EQ(j["status"], "converged");
  EXPECT_EQ(j["certificate"]["report"]["verdict"], "pass");
}

TEST(OptimizeCommandTest, PlanarBoundaryCost) {
  const std::string out = Temp("opt43.csv"), rep = Temp("opt43.json");
  ASSERT_EQ(Sweepctl("optimize --config " + kConfigs +
                     "planar_boundary.json --grid 50 "
                     "--multistart 4 --seed 3 --out " +
                     out + " --report " + rep),
            0);
  EXPECT_NEAR(ReadJson(rep)["cost"].get<double>(), 1.0, 1e-2);
}

TEST(OptimizeCommandTest, DeterministicForFixedSeed) {
  std::string files[2];
  for (int r = 0; r < 2; ++r) {
    const std::string out = Temp("det" + std::to_string(r) + ".csv");
    const std::string rep = Temp("det" + std::to_string(r) + ".json");
    ASSERT_EQ(Sweepctl("optimize --config " + kConfigs +
                       "planar_boundary.json --grid 20 "
                       "--multistart 3 --seed 11 --out " +
                       out + " --report " + rep),
              0);
    files[r] = Slurp(out) + Slurp(rep);
  }
  EXPECT_EQ(files[0], files[1]);
}

TEST(OptimizeCommandTest, InfeasibleStartExitsWithUsageError) {
  Json j = ScalarConfig();
  j["x0"] = {1.0};
  const std::string cfg = Temp("infeasible.json");
  WriteFile(cfg, j.dump());
  std::string err;
  EXPECT_EQ(Sweepctl("optimize --config " + cfg, &err), 2);
  EXPECT_NE(err.find("InfeasibleStart"), std::string::npos) << err;
}

TEST(CheckCommandTest, KinkedCostDichotomy) {
  const std::string cand = kConfigs + "tracking_candidate.csv";
  const std::string r1 = Temp("r1.json"), r2 = Temp("r2.json");
  EXPECT_EQ(Sweepctl("check --config " + kConfigs +
                     "tracking_smooth.json --solution " + cand +
                     " --tol 1e-8 --report " + r1),
            0);
  EXPECT_EQ(ReadJson(r1)["verdict"], "pass");
  EXPECT_EQ(Sweepctl("check --config " + kConfigs +
                     "tracking_kinked.json --solution " + cand +
                     " --tol 1e-8 --report " + r2),
            1);
  const Json j = ReadJson(r2);
  EXPECT_EQ(j["verdict"], "fail");
  const auto failed = j["failed"].get<std::vector<std::string>>();
  EXPECT_NE(std::find(failed.begin(), failed.end(), "nontriviality"),
            failed.end());
  EXPECT_EQ(j["lambda"].get<double>(), 0.0);
}

TEST(CheckCommandTest, TruncatedCsvExitsWithUsageError) {
  const std::string text = Slurp(kConfigs + "tracking_candidate.csv");
  const std::string cand = Temp("truncated.csv");
  WriteFile(cand, text.substr(0, text.size() / 2 + 3));
  EXPECT_EQ(Sweepctl("check --config " + kConfigs +
                     "tracking_smooth.json --solution " + cand),
            2);
}

TEST(CheckCommandTest, SimulationOutputRoundTrips) {
  for (const char* name :
       {"scalar_contact.json", "planar_boundary.json", "crowd_two.json"}) {
    const std::string out = Temp(std::string("rt_") + name + ".csv");
    ASSERT_EQ(Sweepctl(std::string("simulate --config ") + kConfigs + name +
                       " --grid 40 --out " + out),
              0);
    const int code =
        Sweepctl(std::string("check --config ") + kConfigs + name +
                 " --solution " + out + " --report " + Temp("rt.json"));
    EXPECT_TRUE(code == 0 || code == 1) << name << " exit " << code;
  }
}

TEST(CrowdCommandTest, TwoParticipantSolution) {
  const std::string out = Temp("c51.json");
  ASSERT_EQ(
      Sweepctl("crowd --config " + kConfigs + "crowd_two.json --out " + out),
      0);
  const Json j = ReadJson(out);
  EXPECT_NEAR(j["a_bar"][1].get<double>(), -1.1912, 1e-3);
  EXPECT_EQ(j["certificate_summary"]["verdict"], "pass");
}

TEST(CrowdCommandTest, ThreeParticipantContactTime) {
  const std::string out = Temp("c52.json");
  ASSERT_EQ(
      Sweepctl("crowd --config " + kConfigs + "crowd_three.json --out " + out),
      0);
  const Json j = ReadJson(out);
  EXPECT_NEAR(j["contact_times"][0].get<double>(), 0.403, 1e-3);
  int pruned = 0;
  for (const auto& b : j["branches"]) pruned += b["status"] == "pruned";
  EXPECT_GT(pruned, 0);
}

// A single participant: min (x0 - T s a)^2 / 2 + T a^2 / 2 gives
// a = s x0 / (1 + T s^2).
TEST(CrowdCommandTest, SingleParticipantClosedForm) {
  const Json j = {{"schema_version", 1},
                  {"kind", "crowd"},
                  {"n", 1},
                  {"R", 0.5},
                  {"T", 2.0},
                  {"speeds", {1.5}},
                  {"x0", {-7.0}}};
  const std::string cfg = Temp("single.json"), out = Temp("single_out.json");
  WriteFile(cfg, j.dump());
  ASSERT_EQ(Sweepctl("crowd --config " + cfg + " --out " + out), 0);
  const double oracle = 1.5 * -7.0 / (1.0 + 2.0 * 1.5 * 1.5);
  EXPECT_NEAR(ReadJson(out)["a_bar"][0].get<double>(), oracle, 1e-9);
}

TEST(CrowdCommandTest, SweepingConfigIsRejected) {
  EXPECT_EQ(Sweepctl("crowd --config " + kConfigs + "scalar_contact.json"), 2);
}

}  // namespace
}  // namespace sweep
