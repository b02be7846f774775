// Copyright 2026 The qtraj Authors
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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "qtraj/io.h"

namespace qtraj {
namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("qtraj_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Runs the binary inside the test directory; returns its exit status.
  int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = "cd '" + dir_.string() + "' && " + env + " '" + QTRAJ_CLI_PATH + "' " + args +
                            " > stdout.txt 2> stderr.txt";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string file(const std::string& name) const { return read_file(dir_ / name); }
  fs::path path(const std::string& name) const { return dir_ / name; }

  fs::path dir_;
};

TEST_F(Cli, SingleUnmeasuredTrajectoryStaysPut) {
  ASSERT_EQ(run("simulate --seed=1 --n_traj=1 --n_steps=10 --g=0 --x0=0.3 --output=sim.ens"), 0) << file("stderr.txt");
  const auto e = read_ensemble(path("sim.ens")).ensemble;
  ASSERT_EQ(e.values.size(), 11u);
  for (double v : e.values) EXPECT_EQ(v, e.values.front());
  EXPECT_NEAR(e.values.front(), 0.3, 1e-15);
  EXPECT_TRUE(fs::exists(path("sim.ens.manifest")));
  EXPECT_TRUE(fs::exists(path("sim.ens.slice0.hist")));
}

TEST_F(Cli, ManifestReproducesTheRun) {
  ASSERT_EQ(run("simulate --seed=9 --n_traj=500 --n_steps=20 --g=0.05 --T1_us=30 --slices_us=2,10 --output=a.ens"),
            0);
  ASSERT_EQ(run("simulate --config=a.ens.manifest --output=b.ens"), 0) << file("stderr.txt");
  EXPECT_EQ(file("a.ens"), file("b.ens"));
  EXPECT_EQ(file("a.ens.slice1.hist"), file("b.ens.slice1.hist"));
  auto ma = file("a.ens.manifest"), mb = file("b.ens.manifest");
  ma.replace(ma.find("'a.ens'"), 7, "'b.ens'");
  EXPECT_EQ(ma, mb);
}

TEST_F(Cli, ThreadCountDoesNotChangeOutput) {
  const std::string args = "simulate --seed=4 --n_traj=3000 --n_steps=10 --g=0.1 --output=";
  ASSERT_EQ(run(args + "one.ens", "QTRAJ_THREADS=1"), 0);
  ASSERT_EQ(run(args + "four.ens", "QTRAJ_THREADS=4"), 0);
  EXPECT_EQ(file("one.ens"), file("four.ens"));
}

TEST_F(Cli, GenerateReconstructFitRoundTrip) {
  ASSERT_EQ(run("generate --seed=3 --n_traj=100000 --n_steps=160 --dt_us=0.5 --I0=128.443 --I1=127.856 "
                "--sigma=5.56 --x0=0.305 --output=rec.bin"),
            0)
      << file("stderr.txt");
  ASSERT_EQ(run("reconstruct --input=rec.bin --output=rec.ens --slices_us=20,40,80"), 0) << file("stderr.txt");
  EXPECT_EQ(read_ensemble(path("rec.ens")).ensemble.values, read_ensemble(path("rec.bin.latent")).ensemble.values);
  ASSERT_EQ(run("fit --input=rec.ens --x0=0.305 --slices_us=20,40,80 --model=analytic --output=fit.json"), 0)
      << file("stderr.txt");
  const auto fits = decode_fit_report(file("fit.json"));
  ASSERT_EQ(fits.size(), 3u);
  const double kappa = 0.0027865486387869;
  const double steps[] = {40.0, 80.0, 160.0};
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_NEAR(fits[j].tau_best, steps[j] * kappa, fits[j].tau_error) << j;
    EXPECT_LT(fits[j].chi2_min, 300.0);
    EXPECT_FALSE(fits[j].minimum_at_edge);
  }
}

TEST_F(Cli, TextRecordsReconstructLikeBinary) {
  const std::string common = "--seed=8 --n_traj=50 --n_steps=12 --sigma=3 --T1_us=20 --x0=0.6";
  ASSERT_EQ(run("generate " + common + " --output=r.bin"), 0);
  ASSERT_EQ(run("generate " + common + " --text=true --output=r.csv"), 0);
  EXPECT_EQ(file("r.csv").front(), '#');
  ASSERT_EQ(run("reconstruct --input=r.bin --output=b.ens"), 0);
  ASSERT_EQ(run("reconstruct --input=r.csv --output=t.ens"), 0) << file("stderr.txt");
  EXPECT_EQ(file("b.ens"), file("t.ens"));
}

TEST_F(Cli, ReportWritesAlignedTables) {
  ASSERT_EQ(run("simulate --seed=2 --n_traj=20000 --n_steps=80 --g=0.02 --x0=0.5 --slices_us=10,20,40 "
                "--output=s.ens"),
            0);
  ASSERT_EQ(run("fit --input=s.ens --x0=0.5 --slices_us=10,20,40 --model=analytic --output=f.json"), 0);
  ASSERT_EQ(run("report --input=s.ens --fit_report=f.json --x0=0.5 --slices_us=10,20,40 --output=rep"), 0)
      << file("stderr.txt");
  for (int k = 0; k < 3; ++k) {
    std::istringstream in(file("rep.slice" + std::to_string(k) + ".txt"));
    std::string line, header;
    int rows = 0;
    std::vector<std::size_t> starts;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      if (header.empty()) {
        header = line;
        for (std::size_t i = 0; i < line.size(); ++i) {
          if (line[i] != ' ' && (i == 0 || line[i - 1] == ' ')) starts.push_back(i);
        }
        continue;
      }
      ++rows;
      std::istringstream fields(line);
      std::string f;
      int n = 0;
      while (fields >> f) ++n;
      EXPECT_EQ(n, 5) << line;
      for (std::size_t c : starts) {
        ASSERT_LT(c, line.size()) << line;
        EXPECT_NE(line[c], ' ') << line;
        if (c > 0) EXPECT_EQ(line[c - 1], ' ') << line;
      }
    }
    EXPECT_EQ(header.substr(0, 10), "bin_center");
    EXPECT_NE(header.find("best_fit"), std::string::npos);
    EXPECT_NE(header.find("no_relaxation"), std::string::npos);
    EXPECT_EQ(starts.size(), 5u);
    EXPECT_EQ(rows, 100);
  }
}

TEST_F(Cli, SolveFpWritesNormalisedHistograms) {
  ASSERT_EQ(run("solve-fp --x0=0.305 --g=0.03 --T1_us=45 --slices_us=5,20 --fp_cells=1024 --output=fp"), 0)
      << file("stderr.txt");
  for (int k = 0; k < 2; ++k) {
    const auto s = read_snapshot(path("fp.slice" + std::to_string(k) + ".hist"));
    EXPECT_NEAR(s.total_mass(), 1.0, 1e-9);
  }
  EXPECT_EQ(read_snapshot(path("fp.slice1.hist")).t, 20.0);
}

TEST_F(Cli, CalibrateRecoversCentresAndT1) {
  const std::string cal = "--I0=128.443 --I1=127.856 --sigma=1 --dt_us=0.5";
  ASSERT_EQ(run("generate --seed=5 --n_traj=2000 --n_steps=20 --x0=1 " + cal + " --output=g.bin"), 0);
  ASSERT_EQ(run("generate --seed=6 --n_traj=20000 --n_steps=200 --x0=0 --T1_us=45 " + cal + " --output=e.bin"), 0);
  ASSERT_EQ(run("calibrate --ground=g.bin --excited=e.bin --output=cal.json"), 0) << file("stderr.txt");
  const auto j = nlohmann::json::parse(file("cal.json"));
  EXPECT_NEAR(j["I0"].get<double>(), 128.443, 4.0 * j["I0_err"].get<double>());
  EXPECT_NEAR(j["I1"].get<double>(), 127.856, 4.0 * j["I1_err"].get<double>() + 0.01);
  EXPECT_NEAR(j["sigma"].get<double>(), 1.0, 4.0 * j["sigma_err"].get<double>());
  EXPECT_NEAR(j["T1_us"].get<double>(), 45.0, 4.0 * j["T1_err_us"].get<double>());
}

TEST_F(Cli, UsageErrorsExitWithTwo) {
  EXPECT_EQ(run("bogus"), 2);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("simulate --seed=1 --n_traj=abc --output=x"), 2);
  EXPECT_EQ(run("simulate --seed=1 --nope=1 --output=x"), 2);
  EXPECT_EQ(run("simulate --n_traj=5 --output=x"), 2);
  EXPECT_NE(file("stderr.txt").find("seed"), std::string::npos);
  EXPECT_EQ(run("generate --output=x"), 2);
  EXPECT_EQ(run("simulate --seed=1 --x0=1.5 --output=x"), 2);
  EXPECT_EQ(run("simulate --seed=1"), 2);
  EXPECT_EQ(run("simulate --help"), 0);
  EXPECT_NE(file("stdout.txt").find("--n_traj"), std::string::npos);
}

TEST_F(Cli, BadInputFilesFail) {
  EXPECT_EQ(run("reconstruct --input=missing.bin --output=x"), 1);
  std::ofstream(path("junk.bin")) << "QTRJREC1 not really";
  EXPECT_EQ(run("reconstruct --input=junk.bin --output=x"), 1);
  EXPECT_NE(file("stderr.txt").find("junk.bin"), std::string::npos);
}

TEST_F(Cli, ConfigFileAndOverrides) {
  std::ofstream(path("run.cfg")) << "# comment\nseed = 11\nn_traj = 40\nn_steps = 5\ng = 0.2\noutput = 'c.ens'\n";
  ASSERT_EQ(run("simulate --config=run.cfg --n_traj=7"), 0) << file("stderr.txt");
  const auto e = read_ensemble(path("c.ens"));
  EXPECT_EQ(e.ensemble.n_traj, 7u);
  EXPECT_EQ(e.master_seed, 11u);
  std::ofstream(path("bad.cfg")) << "seed = 11\nthis line is wrong\n";
  EXPECT_EQ(run("simulate --config=bad.cfg --output=d.ens"), 2);
  EXPECT_NE(file("stderr.txt").find("this line is wrong"), std::string::npos) << file("stderr.txt");
}

}  // namespace
}  // namespace qtraj
