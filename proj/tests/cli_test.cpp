// Copyright 2026 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "chanprune/matrix_io.hpp"

namespace {

namespace fs = std::filesystem;

struct Run {
  int status = -1;
  std::string output;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(CHANPRUNE_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("chanprune_cli_" +
            std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(CliTest, VerifyExitCodes) {
  const auto ok = run("verify --seed 3");
  EXPECT_EQ(ok.status, 0) << ok.output;
  EXPECT_NE(ok.output.find("PASS symmetry"), std::string::npos);
  const auto bad = run("verify --inject-fault symmetry");
  EXPECT_EQ(bad.status, 5) << bad.output;
  EXPECT_NE(bad.output.find("FAIL symmetry"), std::string::npos);
}

TEST_F(CliTest, SweepWritesDeterministicCsv) {
  const std::string args = "sweep --seeds 3 --lambda 0.5,0.6 --selector mies,think --protect "
                           "--protect-bounds 0.02,0.2 --set d=16 --set L=20 --set L_obs=8 ";
  ASSERT_EQ(run(args + "--out " + path("a.csv")).status, 0);
  ASSERT_EQ(run(args + "--threads 3 --out " + path("b.csv")).status, 0);
  const auto a = slurp(path("a.csv"));
  EXPECT_EQ(a, slurp(path("b.csv")));
  EXPECT_NE(a.find("# protect_bounds=0.02"), std::string::npos);
  EXPECT_NE(a.find("# protect=true"), std::string::npos);
}

TEST_F(CliTest, ConfigFileWithFlagOverrides) {
  std::ofstream(path("run.cfg")) << "d=8\nL=10\nL_obs=4\nL_future=4\nlambda=0.25\nselector=oracle\n";
  const auto r = run("sweep --config " + path("run.cfg") + " --lambda 0.5");
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_NE(r.output.find("# d=8"), std::string::npos);
  EXPECT_NE(r.output.find("# lambda=0.5\n"), std::string::npos);
  EXPECT_NE(r.output.find(",ORACLE,0.5,"), std::string::npos);
}

TEST_F(CliTest, GenerateThenPruneFromFiles) {
  ASSERT_EQ(run("generate --seed 4 --set d=12 --set L=16 --set L_obs=6 --out " + path("gen")).status, 0);
  const auto q = path("gen/seed4_q_obs.grcm");
  const auto k = path("gen/seed4_k.grcm");
  EXPECT_EQ(chanprune::load_matrix(k).cols(), 12u);
  const auto r = run("prune --set mode=from-files --set q_path=" + q + " --set k_path=" + k +
                     " --selector MIES,THINK --lambda 0.5");
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_NE(r.output.find("MIES lambda=0.5 n_prune=6"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("THINK lambda=0.5 n_prune=6"), std::string::npos) << r.output;
}

TEST_F(CliTest, DistinctExitCodesPerFailureClass) {
  EXPECT_EQ(run("sweep --lambda 1.5").status, 2);
  EXPECT_EQ(run("sweep --selector nonsense").status, 2);
  EXPECT_EQ(run("frobnicate").status, 2);
  EXPECT_EQ(run("sweep --config " + path("missing.cfg")).status, 3);
  std::ofstream(path("bad.csv")) << "1,2\n3,oops\n";
  EXPECT_EQ(run("prune --set mode=from-files --set q_path=" + path("bad.csv") +
                " --set k_path=" + path("bad.csv"))
                .status,
            4);
  EXPECT_EQ(run("prune --set d=40 --selector oracle --lambda 0.5").status, 6);
}

}  // namespace
