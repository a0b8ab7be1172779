#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

const fs::path& dir() {
  static const fs::path d = [] {
    auto p = fs::temp_directory_path() / "mltcn_test_cli";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return d;
}

std::string at(const std::string& name) { return (dir() / name).string(); }

// Runs the CLI with `args`; returns the exit status and captures stdout.
int run(const std::string& args, std::string* out = nullptr) {
  const std::string capture = at("stdout.txt");
  const std::string cmd = std::string(MLTCN_CLI_PATH) + " " + args + " > " + capture + " 2> " + at("stderr.txt");
  const int status = std::system(cmd.c_str());
  if (out) {
    std::ifstream in(capture);
    std::ostringstream s;
    s << in.rdbuf();
    *out = s.str();
  }
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Cli, SimulateIsDeterministic) {
  ASSERT_EQ(run("simulate --n 40 --m 6 --seed 9 --out " + at("a.csv")), 0);
  ASSERT_EQ(run("simulate --n 40 --m 6 --seed 9 --out " + at("b.csv")), 0);
  ASSERT_EQ(run("simulate --n 40 --m 6 --seed 10 --out " + at("c.csv")), 0);
  EXPECT_FALSE(slurp(at("a.csv")).empty());
  EXPECT_EQ(slurp(at("a.csv")), slurp(at("b.csv")));
  EXPECT_EQ(slurp(at("a.json")), slurp(at("b.json")));
  EXPECT_NE(slurp(at("a.csv")), slurp(at("c.csv")));
}

TEST(Cli, RejectsOutOfDomainArguments) {
  EXPECT_NE(run("simulate --n 10 --tau 1.2 --out " + at("bad.csv")), 0);
  EXPECT_NE(run("simulate --n 10 --eta 0.5 --out " + at("bad.csv")), 0);
  EXPECT_NE(run("fit --data /nonexistent.csv --out " + at("x.json")), 0);
  EXPECT_NE(run("frobnicate"), 0);
}

TEST(Cli, FitExitCodes) {
  ASSERT_EQ(run("simulate --n 60 --m 6 --g 1 --seed 3 --out " + at("one.csv")), 0);
  std::string out;
  EXPECT_EQ(run("fit --data " + at("one.csv") + " --g 1 --d 1 --restarts 2 --out " + at("one_fit.json"), &out), 0);
  EXPECT_NE(out.find("converged=yes"), std::string::npos) << out;
  EXPECT_TRUE(fs::exists(at("one_fit.json")));
  // One iteration cannot pass the convergence check.
  EXPECT_EQ(run("fit --data " + at("one.csv") + " --g 1 --d 1 --restarts 1 --max-iter 1 --out " + at("cap.json")), 2);
  // Two components from two rows: every restart fails.
  std::ofstream(at("tiny.csv")) << "a,b\n1,0\n0,1\n";
  EXPECT_EQ(run("fit --data " + at("tiny.csv") + " --g 2 --d 1 --out " + at("tiny.json")), 1);
}

TEST(Cli, SelectWritesTables) {
  ASSERT_EQ(run("simulate --n 60 --m 6 --seed 4 --out " + at("sel.csv")), 0);
  std::string out;
  ASSERT_EQ(run("select --data " + at("sel.csv") + " --g-range 2:2 --d-range 1:1 --restarts 1 --out " +
                    at("grid.json"),
                &out),
            0);
  EXPECT_NE(out.find("best G=2 D=1"), std::string::npos) << out;
  EXPECT_TRUE(fs::exists(at("grid.csv")));
  EXPECT_TRUE(fs::exists(at("grid.series.csv")));
  EXPECT_NE(run("select --data " + at("sel.csv") + " --g-range 3:1 --out " + at("g2.json")), 0);
}

TEST(Cli, EncodeVotes) {
  std::ofstream(at("raw.csv")) << "party,i1,i2\nd,y,?\nr,n,y\n";
  ASSERT_EQ(run("encode --raw " + at("raw.csv") + " --out " + at("enc.csv")), 0);
  EXPECT_EQ(slurp(at("enc.csv")), "party,1A,1B,2A,2B\nd,1,1,0,0\nr,1,0,1,1\n");
}

TEST(Cli, EvaluateSingleGroupAgainstTruth) {
  ASSERT_EQ(run("simulate --n 50 --m 5 --g 1 --seed 5 --out " + at("ev.csv")), 0);
  ASSERT_EQ(run("fit --data " + at("ev.csv") + " --g 1 --d 1 --restarts 1 --out " + at("ev_fit.json")), 0);
  std::string out;
  ASSERT_EQ(run("evaluate --fit " + at("ev_fit.json") + " --labels " + at("ev.json") + " --data " + at("ev.csv") +
                    " --out " + at("report.json"),
                &out),
            0);
  EXPECT_NE(out.find("ari=1 "), std::string::npos) << out;
  EXPECT_NE(out.find("misclassified=0"), std::string::npos) << out;
  EXPECT_TRUE(fs::exists(at("report.csv")));
  EXPECT_TRUE(fs::exists(at("report.profiles.csv")));
}
