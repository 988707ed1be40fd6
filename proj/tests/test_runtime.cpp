#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "shpar/runtime/eager.hpp"
#include "shpar/runtime/split.hpp"

using namespace shpar;
using namespace shpar::test;

namespace {

std::string tool(const std::string& name) { return kRuntimeDir + "/" + name; }

std::string concat(const std::vector<std::string>& parts) {
  std::string s;
  for (const auto& p : parts) s += p;
  return s;
}

std::vector<std::string> edge_inputs() {
  std::string binary("a\0b\nc\xff\n\n", 8);
  return {"", "\n", "x", "x\n", "a\nb", "a\nb\n", "\n\n\n", binary, std::string(10000, 'z') + "\nshort\n"};
}

}  // namespace

class AggregatorLaw : public ::testing::TestWithParam<std::string> {};

TEST_P(AggregatorLaw, HoldsOnRandomPartitions) {
  auto r = aggregator_law(GetParam(), 100, 1234);
  EXPECT_TRUE(r.ok) << r.detail;
}

INSTANTIATE_TEST_SUITE_P(Commands, AggregatorLaw,
                         ::testing::Values("wc", "wc -l", "sort", "sort -rn", "sort -u", "uniq", "uniq -c", "tac"),
                         [](const auto& info) {
                           std::string s = info.param;
                           for (char& c : s) {
                             if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
                           }
                           return s;
                         });

TEST(Aggregators, WcFormatting) {
  EXPECT_EQ(runtime::agg_wc({"3\n", "4\n"}), "7\n");
  EXPECT_EQ(runtime::agg_wc({"      1       2      10\n", "      2       2       6\n"}), "      3       4      16\n");
  EXPECT_THROW(runtime::agg_wc({"3\n", ""}), Error);
  EXPECT_THROW(runtime::agg_wc({"3 x\n"}), Error);
}

TEST(Aggregators, UniqMergesAtSeams) {
  EXPECT_EQ(runtime::agg_uniq({"a\nb\n", "b\nc\n"}, false), "a\nb\nc\n");
  EXPECT_EQ(runtime::agg_uniq({"      2 a\n      1 b\n", "      3 b\n"}, true), "      2 a\n      4 b\n");
  EXPECT_EQ(runtime::agg_uniq({"a\n", "", "a\n"}, false), "a\n");
}

TEST(Aggregators, MergeHonoursKeysAndOrder) {
  auto o = runtime::parse_sort_flags({"-t", ",", "-k2,2n"});
  ASSERT_TRUE(o);
  EXPECT_EQ(runtime::merge_sorted({"x,1\nz,5\n", "y,3\n"}, *o), "x,1\ny,3\nz,5\n");
  auto r = runtime::parse_sort_flags({"-r"});
  EXPECT_EQ(runtime::merge_sorted({"c\na\n", "b\n"}, *r), "c\nb\na\n");
  EXPECT_FALSE(runtime::parse_sort_flags({"--random-sort"}));
}

TEST(Aggregators, SqueezeCollapsesRunsAcrossSeams) {
  EXPECT_EQ(runtime::agg_squeeze({"a\n", "\nb\n"}, '\n'), "a\nb\n");
  EXPECT_EQ(runtime::agg_squeeze({"a\n", "\n", "", "\nb\n"}, '\n'), "a\nb\n");
  EXPECT_EQ(runtime::agg_squeeze({"\na\n", "b\n"}, '\n'), "\na\nb\n");
  EXPECT_EQ(runtime::agg_squeeze({"a x", "  b"}, ' '), "a x  b");
  EXPECT_EQ(runtime::agg_squeeze({"a ", "  b"}, ' '), "a b");
}

TEST(Aggregators, SqueezeMatchesASinglePass) {
  ScratchDir dir("squeeze");
  std::mt19937_64 rng(12);
  std::vector<std::string> argv = {"tr", "-cs", "a-z", "\n"};
  for (int t = 0; t < 100; ++t) {
    std::string input = random_lines(rng, 40);
    auto whole = run_on(argv, input, dir);
    for (std::size_t n : {2, 3, 8}) {
      std::vector<std::string> mapped;
      for (const auto& p : random_line_partition(rng, input, n)) mapped.push_back(run_on(argv, p, dir).out);
      ASSERT_EQ(runtime::agg_squeeze(mapped, '\n'), whole.out) << "trial " << t << " n=" << n;
    }
  }
}

TEST(Aggregators, ToolsMatchLibrary) {
  ScratchDir dir("aggtool");
  auto a = dir.write("a", "1 apple\n3 cherry\n");
  auto b = dir.write("b", "2 banana\n4 date\n");
  auto r = bash("\"" + tool("agg-merge") + "\" -n " + a + " " + b);
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out, "1 apple\n2 banana\n3 cherry\n4 date\n");
  auto t = bash("\"" + tool("agg-tac") + "\" " + a + " " + b);
  EXPECT_EQ(t.out, "2 banana\n4 date\n1 apple\n3 cherry\n");
  dir.write("w1", "      1       2      10\n");
  dir.write("w2", "      1       2      10\n");
  auto w = bash("\"" + tool("agg-wc") + "\" w1 w2", dir.path().string());
  EXPECT_EQ(w.out, "      2       4      20\n");
  dir.write("u1", "      1 a\n");
  dir.write("u2", "      1 a\n      1 b\n");
  auto u = bash("\"" + tool("agg-uniq") + "\" -c u1 u2", dir.path().string());
  EXPECT_EQ(u.out, "      2 a\n      1 b\n");
  dir.write("s1", "x\n");
  dir.write("s2", "\n\ny\n");
  auto q = bash("\"" + tool("agg-squeeze") + "\" 10 s1 s2", dir.path().string());
  EXPECT_EQ(q.out, "x\ny\n");
}

TEST(Aggregators, MergeAgreesWithSortMerge) {
  ScratchDir dir("aggloc");
  dir.write("a", "a\nc\n");
  dir.write("b", "B\n");
  auto r = bash("LC_ALL=C \"" + tool("agg-merge") + "\" a b", dir.path().string());
  EXPECT_EQ(r.out, "B\na\nc\n");
  auto s = bash("LC_ALL=C sort -m a b", dir.path().string());
  EXPECT_EQ(r.out, s.out);
}

TEST(Split, ConcatenationIdentityInMemory) {
  std::mt19937_64 rng(3);
  auto inputs = edge_inputs();
  for (int i = 0; i < 200; ++i) inputs.push_back(random_lines(rng, 50));
  for (const auto& data : inputs) {
    for (std::size_t n : {1, 2, 3, 8, 17}) {
      EXPECT_EQ(concat(runtime::split_content(data, n)), data);
      std::vector<std::string> ranges;
      for (std::size_t i = 0; i < n; ++i) ranges.push_back(runtime::split_range(data, n, i));
      EXPECT_EQ(concat(ranges), data);
      // a chunk may end mid-line only when everything after it is empty
      for (std::size_t i = 0; i + 1 < n; ++i) {
        if (ranges[i].empty() || ranges[i].back() == '\n') continue;
        for (std::size_t j = i + 1; j < n; ++j) EXPECT_TRUE(ranges[j].empty());
      }
    }
  }
}

TEST(Split, ChunkPlanGivesExtrasFirst) {
  EXPECT_EQ(runtime::chunk_plan(10, 3), (std::vector<std::size_t>{4, 3, 3}));
  EXPECT_EQ(runtime::chunk_plan(2, 4), (std::vector<std::size_t>{1, 1, 0, 0}));
  EXPECT_THROW(runtime::chunk_plan(1, 0), Error);
}

TEST(Split, ToolsConcatenateBack) {
  ScratchDir dir("split");
  std::mt19937_64 rng(4);
  auto inputs = edge_inputs();
  for (int i = 0; i < 20; ++i) inputs.push_back(random_lines(rng, 400));
  for (const auto& data : inputs) {
    dir.write("in", data);
    for (int n : {1, 3, 8}) {
      std::string outs, ranges;
      for (int i = 0; i < n; ++i) {
        outs += " o" + std::to_string(i);
        ranges += "\"" + tool("split") + "\" --ranges in " + std::to_string(n) + " " + std::to_string(i) + "; ";
      }
      auto r = bash("\"" + tool("split") + "\" " + std::to_string(n) + outs + " < in && cat" + outs,
                    dir.path().string());
      ASSERT_EQ(r.status, 0);
      EXPECT_EQ(r.out, data);
      auto q = bash(ranges, dir.path().string());
      EXPECT_EQ(q.out, data);
    }
  }
}

TEST(Split, FailedOpenRemovesCreatedOutputs) {
  ScratchDir dir("splitfail");
  dir.write("in", "a\nb\n");
  auto r = bash("\"" + tool("split") + "\" 2 made missing/dir/o < in", dir.path().string());
  EXPECT_NE(r.status, 0);
  EXPECT_FALSE(fs::exists(dir.path() / "made"));
}

TEST(Eager, PassesBytesThroughInMemory) {
  ScratchDir dir("eagerpass");
  std::mt19937_64 rng(8);
  std::string data;
  for (int i = 0; i < 2000; ++i) data += random_lines(rng, 20, false);
  dir.write("in", data);
  auto r = bash("\"" + tool("eager") + "\" --buffer 4096 < in", dir.path().string());
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out, data);
}

TEST(Eager, SpillsBeyondItsBuffer) {
  ScratchDir dir("eagerspill");
  std::string data(3 << 20, 'q');
  dir.write("in", data);
  int in = ::open(dir.file("in").c_str(), O_RDONLY);
  ASSERT_GE(in, 0);
  std::string out_path = dir.file("out");
  runtime::EagerRelay relay(64 << 10);
  auto stats = relay.run(in, [&] { return ::open(out_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644); });
  ::close(in);
  EXPECT_EQ(runtime::read_file(out_path), data);
  (void)stats;
}

TEST(Eager, ProducerFinishesWhileConsumerSleeps) {
  auto r = eager_liveness(20u << 20, 2);
  EXPECT_TRUE(r.checksum_equal);
  EXPECT_TRUE(r.producer_first) << "producer done at " << r.producer_done << "s, consumer read at "
                                << r.consumer_start << "s";
}

TEST(Eager, ConsumerGoneEndsQuietly) {
  ScratchDir dir("eagergone");
  auto r = bash("yes | head -c 50000000 | \"" + tool("eager") + "\" | head -n 1; echo \"${PIPESTATUS[2]}\"",
                dir.path().string());
  EXPECT_EQ(r.out, "y\n0\n");
}

TEST(Eager, DrainReadsUntilTheWriterDies) {
  ScratchDir dir("drain");
  auto r = bash("mkfifo f; seq 1 100000 > f & w=$!; \"" + tool("eager") + "\" --drain f --pid $w; wait $w; echo $?",
                dir.path().string());
  EXPECT_EQ(r.out, "0\n");
}
