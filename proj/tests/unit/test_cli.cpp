#include <gtest/gtest.h>

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace {

namespace fs = std::filesystem;

struct Run {
  int exit_code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string command = std::string(VIBOUND_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(command.c_str(), "r");
  if (!pipe) return r;
  char buffer[4096];
  std::size_t n;
  while ((n = std::fread(buffer, 1, sizeof buffer, pipe)) > 0) r.out.append(buffer, n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("vibound_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(CliTest, FitWritesResultAndTrace) {
  const auto r = run("--no-timestamp fit --model conjugate --family fr-gaussian --iterations 500 --out " +
                     path("fit.json"));
  ASSERT_EQ(r.exit_code, 0);
  const auto doc = nlohmann::json::parse(slurp(path("fit.json")));
  EXPECT_EQ(doc.at("kind"), "fit_result");
  EXPECT_EQ(doc.at("body").at("fit").at("iterations"), 500);
  const std::string trace = slurp(path("fit.trace.csv"));
  EXPECT_EQ(std::count(trace.begin(), trace.end(), '\n'), 501);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run("fit --model conjugate --bogus 1 --out " + path("x.json")).exit_code, 2);
  EXPECT_EQ(run("fit --model nonexistent --out " + path("x.json")).exit_code, 2);
  EXPECT_EQ(run("fit --model conjugate --family banana --out " + path("x.json")).exit_code, 2);
  EXPECT_EQ(run("oracle w1d normal 0 1").exit_code, 2);
  EXPECT_EQ(run("oracle divergence renyi --alpha 1 normal 0 1 normal 0 1").exit_code, 2);
}

TEST_F(CliTest, OracleValues) {
  auto r = run("oracle w1d normal 0 1 normal 1 1 --p 2");
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_NEAR(std::stod(r.out), 1.0, 1e-7);
  r = run("oracle w1d normal 0 1 normal 0 1");
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_NEAR(std::stod(r.out), 0.0, 1e-12);
  r = run("oracle divergence kl weibull 0.1 weibull 0.05");
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_NEAR(std::stod(r.out), 0.29069, 1e-4);
  r = run("oracle divergence kl weibull 0.05 weibull 0.1");
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_NEAR(std::stod(r.out), 0.88407, 1e-4);
  r = run("oracle wgauss --mean1 0,0 --cov1 \"1,0;0,1\" --mean2 0,0 --cov2 \"1,0;0,1\"");
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_NEAR(std::stod(r.out), 0.0, 1e-7);
}

TEST_F(CliTest, ConjugateWorkflowUsesApproximationDirectly) {
  const auto r = run("--no-timestamp workflow --model conjugate --config " + std::string(VIBOUND_SOURCE_DIR) +
                     "/configs/conjugate.json --out " + path("wf.json"));
  EXPECT_EQ(r.exit_code, 0);
  const auto doc = nlohmann::json::parse(slurp(path("wf.json")));
  EXPECT_EQ(doc.at("kind"), "workflow_report");
  EXPECT_TRUE(fs::exists(path("wf.txt")));
}

TEST_F(CliTest, RerunsAreByteIdentical) {
  const std::string base = "--no-timestamp fit --model conjugate --iterations 300 --seed 5 --out ";
  ASSERT_EQ(run(base + path("a.json")).exit_code, 0);
  ASSERT_EQ(run(base + path("b.json")).exit_code, 0);
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
  EXPECT_EQ(slurp(path("a.trace.csv")), slurp(path("b.trace.csv")));
}

}  // namespace
