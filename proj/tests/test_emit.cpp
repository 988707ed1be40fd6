#include <gtest/gtest.h>
#include <sys/wait.h>

#include <random>
#include <thread>

#include "oracles.hpp"
#include "shpar/harness.hpp"

using namespace shpar;
using namespace shpar::test;

namespace {

EmitOptions options(Termination t = Termination::CleanUpGraph) {
  EmitOptions o;
  o.runtime_dir = kRuntimeDir;
  o.termination = t;
  return o;
}

Dfg expanded(const std::string& script, int width) {
  auto a = find_dataflow_regions(parse_script(script), annotations());
  auto rc = region_to_dfg(a.regions.at(0), annotations());
  if (!rc.dfg) throw Error("demoted: " + rc.demote_reason);
  ExpandOptions eo;
  eo.width = width;
  return expand(*rc.dfg, eo).first;
}

pid_t spawn_bash(const std::string& path, const std::string& cwd, const std::map<std::string, std::string>& env) {
  auto envv = merged_environment(env);
  pid_t pid = ::fork();
  if (pid == 0) {
    if (::chdir(cwd.c_str()) != 0) _exit(126);
    std::vector<char*> e;
    for (auto& s : envv) e.push_back(s.data());
    e.push_back(nullptr);
    const char* argv[] = {"bash", path.c_str(), nullptr};
    ::execve("/bin/bash", const_cast<char**>(argv), e.data());
    _exit(127);
  }
  return pid;
}

}  // namespace

TEST(Emit, ZombieProducerTerminatesWithCleanup) {
  ScriptRun detail;
  auto r = zombie_producer_terminates(Termination::CleanUpGraph, &detail);
  EXPECT_TRUE(r.ok) << r.detail;
  EXPECT_LT(detail.seconds, 10.0);
}

TEST(Emit, ZombieProducerTerminatesWithDrain) {
  auto r = zombie_producer_terminates(Termination::DrainStream);
  EXPECT_TRUE(r.ok) << r.detail;
}

TEST(Emit, WaitSetIsExactlyTheOutputProducers) {
  for (const auto& c : harness::corpus()) {
    Compilation comp = harness::compile_case(c, 4, {});
    for (const auto& reg : comp.regions) {
      if (!reg.expanded) continue;
      const Dfg& g = *reg.expanded;
      EmitPlan plan = plan_emission(g, options());
      std::set<NodeId> want, got;
      for (EdgeId e : g.output_edges()) want.insert(*g.edge(e).producer);
      for (std::size_t i : plan.wait_set) got.insert(plan.processes.at(i).node.value());
      EXPECT_EQ(got, want) << c.name;
      std::string text = render_region(plan, options());
      EXPECT_NE(text.find("wait \"${_sp_outs[@]}\""), std::string::npos);
      if (g.status_output) {
        EXPECT_EQ(plan.processes.at(plan.wait_set.back()).node, g.edge(*g.status_output).producer);
      }
    }
  }
}

TEST(Emit, EveryInternalEdgeIsAFifo) {
  Dfg g = expanded("cat in.txt | tr a-z A-Z | sort | uniq -c", 3);
  EmitPlan plan = plan_emission(g, options());
  std::size_t internal = 0, readers = 0;
  for (const auto& [id, e] : g.edges()) {
    internal += e.is_internal() || (e.is_graph_input() && e.partition);
    readers += e.is_graph_input() && e.partition;
  }
  EXPECT_EQ(plan.fifos.size(), internal);
  EXPECT_EQ(plan.processes.size(), g.node_count() + readers);
}

TEST(Emit, ScriptsProduceSequentialOutput) {
  ScratchDir dir("emit");
  std::mt19937_64 rng(77);
  std::string data;
  for (int i = 0; i < 300; ++i) data += random_lines(rng, 30, false);
  dir.write("in.txt", data);
  for (const char* script : {"cat in.txt | tr a-z A-Z | sort | uniq -c | sort -rn",
                             "grep -v x in.txt | cut -d' ' -f1 | sort -u | wc -l", "tac in.txt | head -n 5",
                             "cat in.txt in.txt | grep a | tac"}) {
    auto seq = bash(script, dir.path().string());
    for (Termination t : {Termination::CleanUpGraph, Termination::DrainStream}) {
      for (int w : {1, 2, 4}) {
        ScriptRun r = run_marked(emit_script(expanded(script, w), options(t)), dir, 60);
        EXPECT_EQ(r.status, 0) << script << " w=" << w;
        EXPECT_EQ(r.out, seq.out) << script << " w=" << w;
        EXPECT_TRUE(r.leftovers.empty()) << script;
        EXPECT_EQ(r.temp_entries, 0u) << script;
      }
    }
  }
}

TEST(Emit, UnterminatedFileBeforeASeamFallsBack) {
  ScratchDir dir("seam");
  dir.write("b", "z zz\nlast\n");
  for (const char* a : {"x y", "x y\n", ""}) {
    dir.write("a", a);
    for (const char* script : {"cat a b | wc -w", "cat a b a | tr a-z A-Z", "cat b a | grep z"}) {
      auto seq = bash(script, dir.path().string());
      std::string text = emit_script(expanded(script, 3), options());
      EXPECT_NE(text.find("if ! _shpar_lines_end "), std::string::npos) << script;
      ScriptRun r = run_marked(text, dir, 30);
      EXPECT_EQ(r.out, seq.out) << script << " with a=[" << a << "]";
      EXPECT_EQ(r.status, seq.status) << script;
    }
  }
}

TEST(Emit, SigintAtRandomPointsLeavesNothingBehind) {
  ScratchDir dir("sigint");
  std::string big;
  for (int i = 0; i < 300000; ++i) big += "word" + std::to_string(i % 997) + " line " + std::to_string(i) + "\n";
  dir.write("in.txt", big);
  std::string script = emit_script(expanded("cat in.txt | tr a-z A-Z | sort | uniq -c | sort -rn", 4), options());
  std::string path = dir.write("run.sh", script + "\n");
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> delay_ms(20, 600);
  for (int trial = 0; trial < 8; ++trial) {
    ScratchDir tmp("sigtmp");
    std::string mark = tmp.path().filename().string();
    pid_t pid = spawn_bash(path, dir.path().string(),
                           {{"TMPDIR", tmp.path().string()}, {"SHPAR_TEST_MARK", mark}, {"LC_ALL", "C"}});
    ASSERT_GT(pid, 0);
    std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms(rng)));
    ::kill(pid, SIGINT);
    int st = 0;
    ::waitpid(pid, &st, 0);
    std::this_thread::sleep_for(std::chrono::milliseconds(300));
    EXPECT_EQ(count_entries(tmp.path()), 0u) << "trial " << trial;
    auto left = processes_marked("SHPAR_TEST_MARK", mark);
    std::string which;
    for (int p : left) {
      auto cmd = runtime::read_file("/proc/" + std::to_string(p) + "/cmdline");
      std::replace(cmd.begin(), cmd.end(), '\0', ' ');
      which += " [" + cmd + "]";
    }
    EXPECT_TRUE(left.empty()) << "trial " << trial << ":" << which;
    for (int p : left) ::kill(p, SIGKILL);
  }
}

TEST(Emit, RegionStatusFollowsTheLastCommand) {
  ScratchDir dir("status");
  dir.write("in.txt", "alpha\nbeta\n");
  for (auto [script, want] : std::vector<std::pair<std::string, int>>{
           {"grep alpha in.txt", 0}, {"grep nomatch in.txt", 1}, {"cat in.txt | grep -q nomatch", 1},
           {"grep beta in.txt | tr a-z A-Z", 0}, {"cat in.txt | grep nomatch", 1}}) {
    for (int w : {1, 2, 4}) {
      ScriptRun r = run_marked(emit_script(expanded(script, w), options()) + "echo $?\n", dir, 30);
      auto tail = r.out.substr(r.out.rfind('\n', r.out.size() - 2) + 1);
      EXPECT_EQ(tail, std::to_string(want) + "\n") << script << " w=" << w;
    }
  }
}

TEST(Emit, ProgramKeepsOtherTextVerbatim) {
  std::string src = "#!/bin/bash\n# a comment   with  spaces\nX=in.txt\ncat $X | sort   # trailing\necho  'done'\n";
  AnnotationDb db = load_annotations(kAnnotationDir);
  CompileOptions co;
  co.width = 2;
  co.emit = options();
  Compilation c = compile(src, db, co);
  ASSERT_EQ(c.compiled_count(), 1u);
  EXPECT_EQ(c.script.rfind("#!/bin/bash\n", 0), 0u);
  auto body = c.script.substr(c.script.find("# end shpar support\n") + 20);
  EXPECT_EQ(body, "# a comment   with  spaces\nX=in.txt\n_shpar_region_0   # trailing\necho  'done'\n");
}

TEST(Emit, NoRegionsMeansUnchangedSource) {
  std::string src = "echo hi\nx=1\n";
  CompileOptions co;
  co.emit = options();
  EXPECT_EQ(compile(src, annotations(), co).script, src);
}

TEST(Emit, BackgroundRegionsRunConcurrently) {
  ScratchDir dir("bg");
  dir.write("a", "3\n1\n2\n");
  std::string src = "sort a > a.out &\nwait\ncat a.out\n";
  CompileOptions co;
  co.width = 2;
  co.emit = options();
  Compilation c = compile(src, annotations(), co);
  ASSERT_EQ(c.compiled_count(), 1u);
  ScriptRun r = run_marked(c.script, dir, 30);
  EXPECT_EQ(r.out, "1\n2\n3\n");
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.temp_entries, 0u);
}

TEST(Emit, Quoting) {
  EXPECT_EQ(detail::sh_quote("plain-word_1.txt"), "plain-word_1.txt");
  EXPECT_EQ(detail::sh_quote("a b"), "'a b'");
  EXPECT_EQ(detail::sh_quote("it's"), "'it'\\''s'");
  EXPECT_EQ(detail::sh_quote(""), "''");
}
