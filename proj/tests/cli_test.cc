// Copyright 2026 The demoselect Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Runs the demoselect binary as a subprocess and checks files and exit codes.

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "gtest/gtest.h"
#include "test_util.hpp"

namespace demoselect {
namespace {

using nlohmann::json;

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult RunCli(const std::string& args) {
  const std::string cmd = std::string(DEMOSELECT_CLI_PATH) + " " + args + " 2>&1";
  RunResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string Slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

json LoadJson(const std::filesystem::path& p) { return json::parse(Slurp(p)); }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    land_ = dir_ / "land";
    const auto r = RunCli("gen --out " + land_.string() + " --seed 4 --demo-columns");
    ASSERT_EQ(r.code, 0) << r.out;
  }
  std::string Path(const std::string& name) const { return (dir_ / name).string(); }

  testing::TempDir dir_;
  std::filesystem::path land_;
};

TEST(CliHelpTest, EverySubcommandHasHelp) {
  for (const char* sub : {"", "gen", "select", "compare", "analyze", "audit"}) {
    const auto r = RunCli(std::string(sub) + " --help");
    EXPECT_EQ(r.code, 0) << sub;
    EXPECT_NE(r.out.find("--"), std::string::npos) << sub;
  }
  const auto v = RunCli("--version");
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find("1.0.0"), std::string::npos);
}

TEST(CliHelpTest, UsageErrorsExitOne) {
  EXPECT_EQ(RunCli("").code, 1);
  EXPECT_EQ(RunCli("frobnicate").code, 1);
  EXPECT_EQ(RunCli("select --oracle synthetic").code, 1);
  EXPECT_EQ(RunCli("select --oracle synthetic --strategy topk").code, 1);
  EXPECT_EQ(RunCli("select --oracle bogus --strategy greedy").code, 1);
  EXPECT_EQ(RunCli("gen").code, 1);
}

TEST_F(CliTest, GenWritesEveryArtifact) {
  for (const char* f : {"matrix.csv", "subsets.jsonl", "manifest.json", "features.csv",
                        "landscape.json"}) {
    EXPECT_TRUE(std::filesystem::exists(land_ / f)) << f;
  }
  std::ifstream table(land_ / "subsets.jsonl");
  std::string line;
  size_t lines = 0;
  while (std::getline(table, line)) lines += !line.empty();
  // Query columns see every subset; a demo column only sees subsets without that demo.
  EXPECT_EQ(lines, 63u * 10u + 31u * 6u);
  const auto manifest = LoadJson(land_ / "manifest.json");
  EXPECT_EQ(manifest["samples"].size(), 16u);
}

TEST_F(CliTest, GreedyAndTopOneAgreeOnFirstPick) {
  const std::string base = "select --oracle table --table " + (land_ / "subsets.jsonl").string() +
                           " --manifest " + (land_ / "manifest.json").string();
  auto r = RunCli(base + " --strategy greedy --out " + Path("g.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto g = LoadJson(Path("g.json"));
  // The generated landscape is modular, so greedy keeps every demo.
  EXPECT_EQ(g["chosen"].size(), 6u);

  r = RunCli(base + " --strategy topk --k 1 --out " + Path("t.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto t = LoadJson(Path("t.json"));
  json first;
  for (const auto& step : g["trace"]) {
    if (step["kind"] == "accepted") {
      first = step["candidate"];
      break;
    }
  }
  EXPECT_EQ(t["chosen"][0], first);
  EXPECT_NE(r.out.find("set evaluations  6"), std::string::npos) << r.out;
}

TEST_F(CliTest, MatrixOracleRejectsMultiDemoStrategies) {
  const auto r = RunCli("select --oracle matrix --matrix " + (land_ / "matrix.csv").string() +
                     " --manifest " + (land_ / "manifest.json").string() +
                     " --strategy greedy --out " + Path("m.json"));
  EXPECT_EQ(r.code, 3) << r.out;
  EXPECT_NE(r.out.find("CardinalityUnsupported"), std::string::npos) << r.out;
}

TEST_F(CliTest, MissingInputExitsTwo) {
  const auto r = RunCli("select --oracle table --table " + Path("nope.jsonl") +
                     " --strategy greedy --out " + Path("x.json"));
  EXPECT_EQ(r.code, 2) << r.out;
}

TEST_F(CliTest, ExternalOracleRoundTrip) {
  const auto r = RunCli("select --oracle external --command '" + std::string(MOCK_EVALUATOR_PATH) +
                     " higher' --n-demos 4 --candidates 0,1,2,3 --queries 10,11 --strategy "
                     "greedy --out " + Path("e.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto e = LoadJson(Path("e.json"));
  EXPECT_FALSE(e["chosen"].empty());
  EXPECT_GT(e["oracle_calls"].get<int>(), 0);

  const auto bad = RunCli("select --oracle external --command '" + std::string(MOCK_EVALUATOR_PATH) +
                       " bad_hello' --candidates 0,1 --queries 5 --strategy greedy --out " +
                       Path("b.json"));
  EXPECT_EQ(bad.code, 3) << bad.out;
}

TEST_F(CliTest, CompareIsDeterministicAndAuditPasses) {
  const json config = {{"oracle", {{"backend", "table"}, {"path", "land/subsets.jsonl"}}},
                       {"manifest", "land/manifest.json"},
                       {"n_prime", 4},
                       {"seeds", {0, 1, 2}},
                       {"output_dir", "out"},
                       {"strategies",
                        {{{"name", "random"}},
                         {{"name", "topk"}, {"k", 2}},
                         {{"name", "greedy"}},
                         {{"name", "exhaustive"}}}}};
  std::ofstream(dir_ / "cfg.json") << config.dump();

  auto r = RunCli("compare --config " + Path("cfg.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("greedy"), std::string::npos);
  const std::string first = Slurp(dir_ / "out/report.json");
  r = RunCli("compare --config " + Path("cfg.json") + " --out " + Path("again"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(first, Slurp(dir_ / "again/report.json"));

  r = RunCli("audit --config " + Path("cfg.json"));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(std::filesystem::exists(dir_ / "out/audit.json"));

  auto report = json::parse(first);
  report["rows"][1]["set_evaluations"] = 100000;
  std::ofstream(dir_ / "tampered.json") << report.dump();
  r = RunCli("audit --report " + Path("tampered.json"));
  EXPECT_EQ(r.code, 3) << r.out;

  r = RunCli("analyze --config " + Path("cfg.json"));
  EXPECT_EQ(r.code, 0) << r.out;

  EXPECT_EQ(RunCli("audit --config " + Path("cfg.json") + " --report x").code, 1);
}

}  // namespace
}  // namespace demoselect
