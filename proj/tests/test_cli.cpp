// Copyright 2026 The tetshift Authors.
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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"
#include "tetshift/decomp.hpp"
#include "tetshift/mesh_io.hpp"

namespace tetshift {
namespace {

namespace fs = std::filesystem;

// Runs the CLI with `args`, capturing stdout and stderr into files under
// `dir`. Returns the exit status.
int cli(const fs::path& dir, const std::string& args) {
  std::string cmd = std::string(TETSHIFT_CLI) + " " + args + " > " + (dir / "stdout.txt").string() +
                    " 2> " + (dir / "stderr.txt").string();
  int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string l;
  std::getline(in, l);
  return l;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::path(::testing::TempDir()) /
           ("tetshift_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(Cli, CubeWritesAReadableMesh) {
  ASSERT_EQ(cli(dir_, "cube --n 3 --jitter 0.1 --seed 2 --output " + path("c.mesh")), 0);
  auto m = read_mesh_file(path("c.mesh"));
  EXPECT_EQ(m.tets.size(), 162u);
  EXPECT_NEAR(m.total_volume(), 1.0, 1e-12);
}

TEST_F(Cli, AdaptConvergedExitsZero) {
  write_mesh_file(path("tet.mesh"), testing::regular_tet(0.5), false);
  EXPECT_EQ(cli(dir_, "adapt " + path("tet.mesh") + " --metric uniform:0.5 --output-dir " + path("out")), 0);
  EXPECT_NE(slurp(dir_ / "stdout.txt").find("(converged)"), std::string::npos);
  EXPECT_EQ(read_mesh_file(path("out/adapted.mesh")).tets.size(), 1u);
}

TEST_F(Cli, AdaptStoppedExitsTwoAndWritesArtifacts) {
  ASSERT_EQ(cli(dir_, "cube --n 4 --jitter 0.15 --seed 3 --output " + path("c.mesh")), 0);
  std::string args = "adapt " + path("c.mesh") +
                     " --metric uniform:0.25 --complexity 150 --subdomains 2 --iterations 2 --seed 5"
                     " --layers-fresh 1 --layers-adapted 1 --audit --check --contexts 2";
  ASSERT_EQ(cli(dir_, args + " --output-dir " + path("a")), 2) << slurp(dir_ / "stderr.txt");
  for (const char* f : {"adapted.mesh", "quality.csv", "phases.csv", "convergence.csv", "audit.log"})
    EXPECT_TRUE(fs::exists(dir_ / "a" / f)) << f;
  EXPECT_EQ(first_line(dir_ / "a/quality.csv"), "histogram,bin,lo,hi,count");
  EXPECT_EQ(first_line(dir_ / "a/phases.csv"), "context,phase,seconds,fraction");
  EXPECT_EQ(first_line(dir_ / "a/audit.log"), "phase,context,event,detail");
  EXPECT_EQ(first_line(dir_ / "a/convergence.csv").rfind("iteration,tets,", 0), 0u);
  auto out = read_mesh_file(path("a/adapted.mesh"));
  EXPECT_NEAR(out.total_volume(), 1.0, 1e-9);

  // Same seed, same artifacts; timings are the only thing allowed to move.
  ASSERT_EQ(cli(dir_, args + " --output-dir " + path("b")), 2);
  for (const char* f : {"adapted.mesh", "quality.csv", "convergence.csv", "audit.log"})
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
}

TEST_F(Cli, BadInputExitsNonZero) {
  ASSERT_EQ(cli(dir_, "cube --n 2 --output " + path("c.mesh")), 0);
  EXPECT_EQ(cli(dir_, "adapt " + path("c.mesh") + " --metric nonsense:1 --output-dir " + path("o")), 1);
  EXPECT_NE(slurp(dir_ / "stderr.txt").find("error"), std::string::npos);
  EXPECT_EQ(cli(dir_, "adapt " + path("c.mesh") + " --metric uniform:0.3 --subdomains 5 --splits 2,2,2"
                      " --output-dir " + path("o")), 1);
  std::ofstream(path("broken.mesh")) << "3 1 0\n0 0 0\n";
  EXPECT_EQ(cli(dir_, "quality " + path("broken.mesh") + " --metric uniform:1"), 1);
  EXPECT_NE(cli(dir_, "quality " + path("missing.mesh")), 0);
  EXPECT_NE(cli(dir_, "frobnicate"), 0);
}

TEST_F(Cli, DecomposeWritesSubdomainsAndGraph) {
  ASSERT_EQ(cli(dir_, "cube --n 4 --output " + path("c.mesh")), 0);
  ASSERT_EQ(cli(dir_, "decompose " + path("c.mesh") + " --subdomains 4 --splits 2,2,1 --output-dir " + path("d")), 0);
  auto mesh = read_mesh_file(path("c.mesh"));
  auto subs = decompose(mesh, DecompositionPlan::parse(4, "xyz", "2,2,1"));
  std::size_t tets = 0;
  for (const auto& s : subs) {
    auto m = read_mesh_file((dir_ / "d" / ("subdomain_" + std::to_string(s.id) + ".mesh")).string());
    EXPECT_EQ(m.tets.size(), s.mesh.tets.size());
    tets += m.tets.size();
  }
  EXPECT_EQ(tets, mesh.tets.size());
  std::ostringstream expect;
  expect << "a,b\n";
  auto g = build_neighbor_graph(subs);
  for (int a = 0; a < static_cast<int>(g.size()); ++a)
    for (int b : g[a])
      if (a < b) expect << a << "," << b << "\n";
  EXPECT_EQ(slurp(dir_ / "d/neighbors.csv"), expect.str());
}

TEST_F(Cli, QualityComparesAgainstAReference) {
  ASSERT_EQ(cli(dir_, "cube --n 3 --output " + path("a.mesh")), 0);
  ASSERT_EQ(cli(dir_, "cube --n 3 --jitter 0.2 --output " + path("b.mesh")), 0);
  ASSERT_EQ(cli(dir_, "quality " + path("a.mesh") + " --metric uniform:0.3 --csv " + path("q.csv")), 0);
  EXPECT_NE(slurp(dir_ / "stdout.txt").find("unit-band fraction"), std::string::npos);
  EXPECT_EQ(first_line(dir_ / "q.csv"), "histogram,bin,lo,hi,count");
  ASSERT_EQ(cli(dir_, "quality " + path("a.mesh") + " --metric uniform:0.3 --reference " + path("b.mesh")), 0);
  EXPECT_NE(slurp(dir_ / "stdout.txt").find("histogram,bin,lo,hi,fraction_a,fraction_b,abs_diff"),
            std::string::npos);
  // A mesh compared with itself differs nowhere.
  ASSERT_EQ(cli(dir_, "quality " + path("a.mesh") + " --metric uniform:0.3 --reference " + path("a.mesh")), 0);
  std::istringstream rows(slurp(dir_ / "stdout.txt"));
  bool inTable = false;
  for (std::string l; std::getline(rows, l);) {
    if (l.rfind("histogram,", 0) == 0) {
      inTable = true;
      continue;
    }
    if (inTable) {
      EXPECT_EQ(l.substr(l.rfind(',') + 1), "0") << l;
    }
  }
  EXPECT_TRUE(inTable);
}

}  // namespace
}  // namespace tetshift
