#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "support.hpp"

using namespace testing_support;

namespace {

int run_cli(const std::string& args, const fs::path& err) {
  const std::string cmd = std::string(DOSEDID_CLI) + " " + args + " > /dev/null 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string first_data_line(const fs::path& p) {
  std::istringstream in(read_file(p));
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') return line;
  return {};
}

struct CliRun {
  TempDir dir;
  CliRun() {
    write_file(dir / "sim.json", R"({"dgp": {"n1": 60, "n0": 50, "periods": 5}, "seed": 3, "output": "sim"})");
    write_file(dir / "est.json", R"({
      "input": {"units": "sim/units.csv", "adjacency": "sim/adjacency.csv", "zips": "sim/zips.csv"},
      "driver": "competition",
      "grid": {"points": 12},
      "bootstrap": {"enabled": true, "replicates": 4, "dump_replicates": true},
      "placebo": {"enabled": true},
      "seed": 5,
      "output": "out"
    })");
  }
};

}  // namespace

TEST(Cli, SimulateThenEstimate) {
  CliRun run;
  ASSERT_EQ(run_cli("simulate --config " + (run.dir / "sim.json").string(), run.dir / "err"), 0)
      << read_file(run.dir / "err");
  for (const char* f : {"units.csv", "adjacency.csv", "zips.csv", "truth.csv"})
    EXPECT_TRUE(fs::exists(run.dir / "sim" / f)) << f;
  ASSERT_EQ(run_cli("estimate --config " + (run.dir / "est.json").string(), run.dir / "err"), 0)
      << read_file(run.dir / "err");
  const auto out = run.dir / "out";
  for (const char* f : {"estimates.csv", "curve_competition.csv", "naive_curve.csv", "diagnostics.csv",
                        "replicates.csv", "placebo_competition.csv"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  EXPECT_EQ(first_data_line(out / "estimates.csv"),
            "scope,period,att,att_se,att_lower,att_upper,adutt,adutt_se,adutt_lower,adutt_upper,reda,reda_se,"
            "reda_lower,reda_upper");
  const auto est = read_file(out / "estimates.csv");
  EXPECT_NE(est.find("# seed: 5"), std::string::npos);
  EXPECT_NE(est.find("# config_hash: "), std::string::npos);
  EXPECT_EQ(first_data_line(out / "curve_competition.csv"), "label,slice,competition,value,se,lower,upper");
}

TEST(Cli, RerunIsByteIdentical) {
  CliRun run;
  ASSERT_EQ(run_cli("simulate --config " + (run.dir / "sim.json").string(), run.dir / "err"), 0);
  ASSERT_EQ(run_cli("estimate --config " + (run.dir / "est.json").string(), run.dir / "err"), 0);
  const auto first = read_file(run.dir / "out" / "estimates.csv");
  const auto curve = read_file(run.dir / "out" / "curve_competition.csv");
  ASSERT_EQ(run_cli("estimate --threads 2 --config " + (run.dir / "est.json").string(), run.dir / "err"), 0);
  EXPECT_EQ(read_file(run.dir / "out" / "estimates.csv"), first);
  EXPECT_EQ(read_file(run.dir / "out" / "curve_competition.csv"), curve);
}

TEST(Cli, UnknownLearnerFailsWithOneLine) {
  CliRun run;
  ASSERT_EQ(run_cli("simulate --config " + (run.dir / "sim.json").string(), run.dir / "err"), 0);
  write_file(run.dir / "bad.json", R"({
    "input": {"units": "sim/units.csv", "adjacency": "sim/adjacency.csv", "zips": "sim/zips.csv"},
    "learners": {"propensity": "random_forest"}
  })");
  EXPECT_EQ(run_cli("estimate --config " + (run.dir / "bad.json").string(), run.dir / "err"), 1);
  const auto err = read_file(run.dir / "err");
  EXPECT_EQ(err.rfind("error: module=", 0), 0u) << err;
  EXPECT_NE(err.find("kind=UnknownLearner"), std::string::npos) << err;
  EXPECT_NE(err.find("learners.propensity"), std::string::npos) << err;
  EXPECT_EQ(std::count(err.begin(), err.end(), '\n'), 1);
}

TEST(Cli, UnknownConfigKeyRejected) {
  CliRun run;
  write_file(run.dir / "bad.json", R"({"dgp": {"n1": 60, "bogus": 1}})");
  EXPECT_EQ(run_cli("simulate --config " + (run.dir / "bad.json").string(), run.dir / "err"), 1);
  EXPECT_NE(read_file(run.dir / "err").find("bogus"), std::string::npos);
  EXPECT_EQ(run_cli("estimate --config " + (run.dir / "missing.json").string(), run.dir / "err"), 1);
}

TEST(Cli, RobustnessWritesTable) {
  CliRun run;
  write_file(run.dir / "rob.json",
             R"({"dgp": {"n1": 80, "n0": 80}, "reps": 3, "rows": [0, 9], "output": "rob"})");
  ASSERT_EQ(run_cli("robustness --config " + (run.dir / "rob.json").string(), run.dir / "err"), 0)
      << read_file(run.dir / "err");
  const auto table = read_file(run.dir / "rob" / "robustness.csv");
  EXPECT_NE(table.find("att_bias"), std::string::npos);
}
