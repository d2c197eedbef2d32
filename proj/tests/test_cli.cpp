#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "support.hpp"

using namespace mmapf;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

CliRun run(const std::string& args) {
  const std::string cmd = quote(MMAPF_CLI) + " " + args + " 2>/dev/null";
  CliRun r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string data(const std::string& file) { return quote(std::string(MMAPF_DATA_DIR) + "/" + file); }

}  // namespace

TEST(Cli, SolveScenario1) {
  const CliRun r = run("solve " + data("scenario1.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  const json j = json::parse(r.out);
  const Plan p = plan_from_json(j.contains("plan") ? j["plan"] : j);
  EXPECT_EQ(p.makespan(), 4);
}

TEST(Cli, SolveExitCodes) {
  EXPECT_EQ(run("solve " + data("scenario6.json")).code, 10);
  EXPECT_EQ(run("solve /nonexistent/instance.json").code, 2);
  EXPECT_EQ(run("solve " + data("scenario1.json") + " --objective energy").code, 2);
}

TEST(Cli, ValidateReportsNonSolutions) {
  EXPECT_EQ(run("validate " + data("scenario1.json") + " " + data("scenario1_plan.json")).code, 0);
  // The scenario-1 plan is wrong for the scenario-3 instance.
  EXPECT_NE(run("validate " + data("scenario3.json") + " " + data("scenario1_plan.json")).code, 0);
}

TEST(Cli, ExplainSessionAcrossInvocations) {
  const auto session = std::filesystem::temp_directory_path() / ("mmapf-cli-" + std::to_string(::getpid()) + ".json");
  std::filesystem::remove(session);
  const std::string base = "explain " + data("scenario1.json") + " " + data("scenario1_plan.json") + " ";
  const CliRun a = run(base + quote(R"({"kind":"QW1","agent":2,"x":8})") + " --session " + quote(session.string()));
  ASSERT_EQ(a.code, 0) << a.out;
  EXPECT_EQ(json::parse(a.out)["kind"], "alternative");
  const CliRun b = run(base + quote(R"({"kind":"QW1","agent":1,"x":11})") + " --session " + quote(session.string()));
  ASSERT_EQ(b.code, 0) << b.out;
  EXPECT_EQ(json::parse(b.out)["kind"], "counterfactual");
  std::filesystem::remove(session);

  EXPECT_EQ(run(base + quote(R"({"kind":"QW1","agent":1,"x":11})")).code, 3);
  EXPECT_EQ(run(base + quote(R"({"kind":"QW1"})")).code, 2);
}

TEST(Cli, BenchPrintsZeroWaitRowsForM1) {
  const CliRun r = run("bench " + data("m1.json") + " " + data("m1_plan.json") + " --kinds QW1,QW2,QC1 --format text");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("QW1"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("QC1"), std::string::npos) << r.out;
}
