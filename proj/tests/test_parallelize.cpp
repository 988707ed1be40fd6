#include <gtest/gtest.h>

#include <random>

#include "shpar/driver.hpp"
#include "shpar/harness.hpp"
#include "shpar/interpret.hpp"
#include "shpar/parallelize.hpp"
#include "test_util.hpp"

using namespace shpar;
using shpar::test::annotations;

namespace {

const std::vector<std::string> kStages = {
    "tr a-z A-Z", "grep -v x",  "grep a",   "cut -d' ' -f1", "tr -s ' '", "sed s/e/E/g", "cat",
    "sort",       "sort -r",    "sort -rn", "sort -u",       "uniq",      "uniq -c",     "wc -l",
    "wc",         "tac",        "head -n 3", "tail -n 2",    "sort -n",   "grep -c a",  "tr -cs a-z '\\n'",
};

std::optional<Dfg> graph_of(const std::string& script) {
  auto a = find_dataflow_regions(parse_script(script), annotations());
  if (a.regions.empty()) return std::nullopt;
  return region_to_dfg(a.regions[0], annotations()).dfg;
}

std::string random_script(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> src(0, 3), len(1, 5);
  std::uniform_int_distribution<std::size_t> pick(0, kStages.size() - 1);
  std::string s;
  switch (src(rng)) {
    case 0: s = "cat in1.txt"; break;
    case 1: s = "cat in1.txt in2.txt"; break;
    case 2: s = "cat in1.txt in2.txt in1.txt"; break;
    default: s = kStages[pick(rng)] + " < in1.txt"; break;
  }
  int n = len(rng);
  for (int i = 0; i < n; ++i) s += " | " + kStages[pick(rng)];
  return s;
}

ExpandOptions opts(int w) {
  ExpandOptions o;
  o.width = w;
  return o;
}

}  // namespace

TEST(Width, Heuristic) {
  EXPECT_EQ(default_width(1), 1);
  EXPECT_EQ(default_width(0), 1);
  EXPECT_EQ(default_width(2), 2);
  EXPECT_EQ(default_width(16), 2);
  EXPECT_EQ(default_width(64), 8);
  EXPECT_EQ(default_width(128), 16);
  WidthConfig wc;
  wc.cpu_count = 64;
  EXPECT_EQ(wc.effective(), 8);
  wc.requested = 3;
  EXPECT_EQ(wc.effective(), 3);
}

TEST(Expand, SortCaseCensusAtWidthEight) {
  const auto* c = harness::find_case(harness::corpus(), "sort");
  ASSERT_NE(c, nullptr);
  Compilation comp = harness::compile_case(*c, 8, {});
  ASSERT_EQ(comp.compiled_count(), 1u);
  const Dfg& g = *comp.regions.front().expanded;
  auto census = node_census(g);
  EXPECT_EQ(census["tr"], 8u);
  EXPECT_EQ(census["sort"], 8u);
  EXPECT_EQ(census["agg"], 7u);
  EXPECT_EQ(census["eager"], 14u);
  EXPECT_EQ(g.node_count(), 37u);
}

TEST(Expand, StatelessChainKeepsOneCatAtTheEnd) {
  auto g = graph_of("cat in1.txt | tr a-z A-Z | grep A");
  ASSERT_TRUE(g);
  auto [x, report] = expand(*g, opts(4));
  EXPECT_TRUE(validate(x).ok());
  auto census = node_census(x);
  EXPECT_EQ(census["tr"], 4u);
  EXPECT_EQ(census["grep"], 4u);
  EXPECT_EQ(census["cat"], 1u);
}

TEST(Expand, NonParallelizableNodesStayAlone) {
  auto g = graph_of("cat in1.txt | head -n 3");
  ASSERT_TRUE(g);
  auto [x, report] = expand(*g, opts(4));
  EXPECT_EQ(node_census(x)["head"], 1u);
}

TEST(Expand, NoEagerOption) {
  auto g = graph_of("cat in1.txt | sort");
  ASSERT_TRUE(g);
  ExpandOptions o = opts(4);
  o.eager = false;
  auto [x, report] = expand(*g, o);
  EXPECT_EQ(node_census(x).count("eager"), 0u);
  EXPECT_EQ(node_census(x)["sort"], 4u);
}

// Random pipelines over built-in commands: the expanded graph computes the same
// outputs, stays within the width, and reaches a fixpoint.
TEST(Expand, RandomGraphsPreserveSemantics) {
  ::setenv("LC_ALL", "C", 1);
  std::mt19937_64 rng(20210426);
  int graphs = 0;
  while (graphs < 200) {
    std::string script = random_script(rng);
    auto g = graph_of(script);
    ASSERT_TRUE(g) << script;
    ++graphs;
    InterpretInputs in;
    in.files["in1.txt"] = test::random_lines(rng, 60);
    in.files["in2.txt"] = test::random_lines(rng, 60);
    auto expected = interpret(*g, in);
    for (int w = 1; w <= 4; ++w) {
      auto [x, report] = expand(*g, opts(w));
      auto v = validate(x);
      ASSERT_TRUE(v.ok()) << script << " w=" << w << ": " << v.errors.front();
      auto got = interpret(x, in);
      ASSERT_EQ(got, expected) << script << " w=" << w;

      for (const auto& [id, n] : x.nodes()) {
        if (n.kind == DfgNodeKind::Cat) EXPECT_LE(n.inputs.size(), static_cast<std::size_t>(w)) << script;
        if (n.kind == DfgNodeKind::Split) EXPECT_LE(n.outputs.size(), static_cast<std::size_t>(w)) << script;
        EXPECT_TRUE(report.provenance.count(id)) << script << " node " << id;
      }
      EXPECT_EQ(report.provenance.size(), x.node_count());
      auto [again, r2] = expand(x, opts(w));
      EXPECT_EQ(again.node_count(), x.node_count()) << script << " w=" << w;
    }
  }
}

TEST(Expand, SqueezingTrMergesItsSeams) {
  auto g = graph_of("cat in1.txt | tr -cs A-Za-z '\\n'");
  ASSERT_TRUE(g);
  InterpretInputs in;
  in.files["in1.txt"] = "one two\n, three\n\n\n... four\n-five-\nsix\n";
  auto expected = interpret(*g, in);
  for (int w : {2, 3, 6}) {
    auto [x, report] = expand(*g, opts(w));
    EXPECT_EQ(node_census(x)["agg"], 1u);
    EXPECT_EQ(interpret(x, in), expected) << "w=" << w;
  }
  auto plain = graph_of("cat in1.txt | tr -s ' '");
  auto [y, r2] = expand(*plain, opts(3));
  EXPECT_EQ(node_census(y).count("agg"), 0u);
}

TEST(Expand, RecordsFilesThatPrecedeACopyBoundary) {
  auto g = graph_of("cat in1.txt in2.txt | wc -l");
  ASSERT_TRUE(g);
  auto [x, report] = expand(*g, opts(2));
  ASSERT_EQ(x.newline_terminated.size(), 1u);
  EXPECT_EQ(x.newline_terminated.begin()->first, "in1.txt");
  ASSERT_TRUE(x.sequential);
  EXPECT_EQ(x.sequential->node_count(), g->node_count());

  InterpretInputs in;
  in.files["in1.txt"] = "a b";
  in.files["in2.txt"] = "c\n";
  EXPECT_EQ(interpret(x, in), interpret(*g, in));

  auto single = graph_of("cat in1.txt | wc -l");
  auto [y, r2] = expand(*single, opts(4));
  EXPECT_TRUE(y.newline_terminated.empty());
  EXPECT_FALSE(y.sequential);
}

TEST(Expand, CatIntoWcKeepsPipePadding) {
  InterpretInputs in;
  in.files["in1.txt"] = "1 word\n2 word\n3 word\n4 word\n5 word\n";
  for (const char* script : {"cat in1.txt | wc", "cat in1.txt | wc | tr a-z A-Z | head -n 3 | cat | cat",
                             "cat in1.txt | wc -l -w"}) {
    auto g = graph_of(script);
    ASSERT_TRUE(g) << script;
    auto want = interpret(*g, in);
    for (int w : {2, 3}) {
      auto [x, report] = expand(*g, opts(w));
      EXPECT_EQ(interpret(x, in), want) << script << " w=" << w;
    }
  }
}

TEST(Expand, WidthOneIsIdentityOnCommands) {
  auto g = graph_of("cat in1.txt | sort | uniq -c");
  ASSERT_TRUE(g);
  auto [x, report] = expand(*g, opts(1));
  EXPECT_EQ(node_census(x)["sort"], 1u);
  EXPECT_EQ(node_census(x).count("agg"), 0u);
}

TEST(Expand, ReportText) {
  auto g = graph_of("cat in1.txt | sort");
  ASSERT_TRUE(g);
  auto [x, report] = expand(*g, opts(2));
  EXPECT_EQ(report.nodes_after, x.node_count());
  EXPECT_FALSE(report.applied.empty());
  EXPECT_NE(report.text().find("applied"), std::string::npos);
}
