#include <gtest/gtest.h>

#include "shpar/harness.hpp"
#include "test_util.hpp"

using namespace shpar;
using namespace shpar::test;

namespace {

std::string shpar_bin() { return kBinDir + "/shpar"; }

ProcessResult shpar_run(std::vector<std::string> args, const ScratchDir& dir) {
  args.insert(args.begin(), shpar_bin());
  ProcessOptions po;
  po.cwd = dir.path().string();
  po.env = {{"LC_ALL", "C"}, {"SHPAR_RUNTIME", kRuntimeDir}, {"SHPAR_ANNOTATIONS", kAnnotationDir}};
  return run_process(args, po);
}

}  // namespace

TEST(Cli, ExitStatusIsTheScripts) {
  ScratchDir dir("cli-status");
  dir.write("in.txt", "b\na\n");
  for (int k : {0, 1, 2}) {
    dir.write("s.sh", "cat in.txt | sort > /dev/null\nexit " + std::to_string(k) + "\n");
    for (const char* w : {"1", "4"}) {
      auto r = shpar_run({"-w", w, "s.sh"}, dir);
      EXPECT_EQ(r.status, k) << "w=" << w;
    }
  }
  dir.write("last.sh", "cat in.txt | grep nomatch\n");
  EXPECT_EQ(shpar_run({"-w", "2", "last.sh"}, dir).status, 1);
}

TEST(Cli, NoOptimizeMatchesTheShell) {
  harness::HarnessOptions o;
  o.size_bytes = 64 << 10;
  for (const auto& c : harness::corpus()) {
    harness::Workspace ws(c, o);
    ScratchDir dir("cli-noopt");
    std::string script = dir.write("case.sh", c.script);
    ProcessOptions po;
    po.cwd = ws.data().string();
    po.env = {{"LC_ALL", "C"}, {"SHPAR_RUNTIME", kRuntimeDir}, {"SHPAR_ANNOTATIONS", kAnnotationDir}};
    auto seq = run_process({"bash", script}, po);
    auto par = run_process({shpar_bin(), "--no_optimize", "-w", "4", script}, po);
    EXPECT_EQ(par.status, seq.status) << c.name;
    EXPECT_EQ(par.out, seq.out) << c.name;
  }
}

TEST(Cli, AwkStaysSequentialAndAssertFails) {
  ScratchDir dir("cli-awk");
  dir.write("in.txt", "3 c\n1 a\n2 b\n");
  dir.write("awk.sh", "cat in.txt | awk '{print $2}' | sort\n");
  auto seq = bash("cat in.txt | awk '{print $2}' | sort", dir.path().string());
  auto r = shpar_run({"-w", "4", "awk.sh"}, dir);
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out, seq.out);
  auto p = shpar_run({"-w", "4", "--dry_run_compiler", "-p", "awk.sh"}, dir);
  EXPECT_EQ(p.out.find("_shpar_region_"), std::string::npos);
  auto a = shpar_run({"-w", "4", "--assert_compiler_success", "awk.sh"}, dir);
  EXPECT_EQ(a.status, kAssertFailureStatus);
  EXPECT_EQ(a.out, "");
}

TEST(Cli, DryRunPrintsTheScript) {
  ScratchDir dir("cli-dry");
  dir.write("in.txt", "b\na\n");
  dir.write("s.sh", "cat in.txt | sort > sorted.txt\n");
  auto r = shpar_run({"-w", "2", "--dry_run_compiler", "-p", "s.sh"}, dir);
  EXPECT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("_shpar_region_0"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir.path() / "sorted.txt"));
  auto ok = shpar_run({"-w", "2", "--assert_compiler_success", "s.sh"}, dir);
  EXPECT_EQ(ok.status, 0);
  EXPECT_EQ(runtime::read_file(dir.file("sorted.txt")), "a\nb\n");
}

TEST(Cli, CommandStringAndArguments) {
  ScratchDir dir("cli-c");
  dir.write("in.txt", "x\ny\n");
  auto r = shpar_run({"-c", "cat \"$1\" | tac; echo $0", "myname", "in.txt"}, dir);
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out, "y\nx\nmyname\n");
  dir.write("args.sh", "echo \"$#:$1:$2\"\n");
  EXPECT_EQ(shpar_run({"args.sh", "a b", "c"}, dir).out, "2:a b:c\n");
}

TEST(Cli, ConfigFileSetsWidth) {
  ScratchDir dir("cli-config");
  dir.write("in.txt", "b\na\n");
  dir.write("s.sh", "cat in.txt | sort\n");
  dir.write("cfg.json", "{\"width\": 3}");
  auto r = shpar_run({"--config_path", "cfg.json", "-d", "1", "--log_file", "log.txt", "s.sh"}, dir);
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out, "a\nb\n");
  EXPECT_NE(runtime::read_file(dir.file("log.txt")).find("width: 3"), std::string::npos);
  dir.write("bad.json", "[1,2]");
  EXPECT_EQ(shpar_run({"--config_path", "bad.json", "s.sh"}, dir).status, 2);
}

TEST(Cli, DebugLevelTwoDumpsGraphs) {
  ScratchDir dir("cli-debug");
  dir.write("in.txt", "b\na\n");
  dir.write("s.sh", "cat in.txt | sort\n");
  auto r = shpar_run({"-w", "2", "-d", "2", "--log_file", "log.txt", "s.sh"}, dir);
  EXPECT_EQ(r.status, 0);
  auto log = runtime::read_file(dir.file("log.txt"));
  EXPECT_NE(log.find("region 0 graph: {"), std::string::npos);
  EXPECT_NE(log.find("region 0 expanded: {"), std::string::npos);
}

TEST(Cli, VersionAndErrors) {
  ScratchDir dir("cli-misc");
  auto v = shpar_run({"--version"}, dir);
  EXPECT_EQ(v.status, 0);
  EXPECT_NE(v.out.find(kVersion), std::string::npos);
  EXPECT_EQ(shpar_run({"missing.sh"}, dir).status, 2);
  EXPECT_EQ(shpar_run({}, dir).status, 2);
}
