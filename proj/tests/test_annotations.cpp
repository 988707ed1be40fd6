#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "shpar/annotations.hpp"
#include "test_util.hpp"

using namespace shpar;
using shpar::test::annotations;

namespace {

std::vector<std::string> paths(const CommandInstance& c, const std::vector<StreamRef>& refs) {
  std::vector<std::string> out;
  for (const auto& r : refs) {
    switch (r.kind) {
      case StreamRef::Kind::Stdin: out.push_back("<stdin>"); break;
      case StreamRef::Kind::Stdout: out.push_back("<stdout>"); break;
      case StreamRef::Kind::Arg: out.push_back(r.path); break;
    }
  }
  (void)c;
  return out;
}

void collect_flags(const Predicate& p, std::set<std::string>& flags, std::set<std::string>& values) {
  if (p.op == Predicate::Op::Exists && !p.strings.empty()) flags.insert(p.strings[0]);
  if (p.op == Predicate::Op::ValOptEq && p.strings.size() == 2) {
    flags.insert(p.strings[0]);
    values.insert(p.strings[1]);
  }
  for (const auto& s : p.subs) collect_flags(s, flags, values);
}

struct ArgSampler {
  std::vector<std::string> flags;
  std::vector<std::string> values;
  std::vector<std::string> operands = {"f1", "f2", "-", "in.txt", "x"};

  explicit ArgSampler(const AnnotationRecord& r) {
    std::set<std::string> f, v = {"1", ",", "\n", " "};
    for (const auto& c : r.cases) collect_flags(c.predicate, f, v);
    for (const auto& x : r.value_flags) f.insert(x);
    for (const auto& [s, l] : r.short_long) {
      f.insert(s);
      f.insert(l);
    }
    flags.assign(f.begin(), f.end());
    values.assign(v.begin(), v.end());
  }

  std::vector<std::string> sample(std::mt19937_64& rng) const {
    std::vector<std::string> args;
    std::uniform_int_distribution<int> n(0, 5), kind(0, 3);
    int k = n(rng);
    for (int i = 0; i < k; ++i) {
      int t = kind(rng);
      if (t <= 1 && !flags.empty()) {
        const auto& f = flags[std::uniform_int_distribution<std::size_t>(0, flags.size() - 1)(rng)];
        args.push_back(f);
        if (t == 1) args.push_back(values[std::uniform_int_distribution<std::size_t>(0, values.size() - 1)(rng)]);
      } else {
        args.push_back(operands[std::uniform_int_distribution<std::size_t>(0, operands.size() - 1)(rng)]);
      }
    }
    return args;
  }
};

bool same(const CommandInstance& a, const CommandInstance& b) {
  return a.cls == b.cls && a.inputs == b.inputs && a.outputs == b.outputs && a.config == b.config;
}

}  // namespace

TEST(Load, CutRecordShape) {
  const AnnotationRecord* cut = annotations().find("cut");
  ASSERT_NE(cut, nullptr);
  EXPECT_EQ(cut->cases.size(), 2u);
  EXPECT_TRUE(cut->stdin_hyphen);
  EXPECT_TRUE(cut->empty_args_stdin);
  EXPECT_GE(cut->short_long.size(), 2u);
  EXPECT_EQ(cut->cases[1].predicate.op, Predicate::Op::Default);
}

TEST(Load, ChmodIsOneDefaultCase) {
  const AnnotationRecord* chmod = annotations().find("chmod");
  ASSERT_NE(chmod, nullptr);
  ASSERT_EQ(chmod->cases.size(), 1u);
  EXPECT_EQ(chmod->cases[0].predicate.op, Predicate::Op::Default);
  EXPECT_EQ(chmod->cases[0].cls, ParClass::SideEffectful);
}

TEST(Load, StarterSetCoversCorpusCommands) {
  for (const char* c : {"cat", "tr", "grep", "cut", "sort", "wc", "uniq", "head", "tail", "tac", "comm", "chmod",
                        "curl"}) {
    EXPECT_NE(annotations().find(c), nullptr) << c;
  }
}

TEST(Load, EmptyDirectoryGivesEmptyDbAndEverythingIsSideEffectful) {
  test::ScratchDir dir("ann");
  AnnotationDb db = load_annotations(dir.path());
  EXPECT_TRUE(db.empty());
  EXPECT_EQ(classify("cut", {"-d,", "-f1"}, db).cls, ParClass::SideEffectful);
  EXPECT_EQ(classify("sort", {}, db).cls, ParClass::SideEffectful);
}

TEST(Load, Errors) {
  {
    test::ScratchDir dir("ann");
    dir.write("a.json", R"({"command":"x","cases":[{"predicate":"default","class":"stateless"}]})");
    dir.write("b.json", R"({"command":"x","cases":[{"predicate":"default","class":"pure"}]})");
    EXPECT_THROW(load_annotations(dir.path()), AnnotationError);
  }
  {
    test::ScratchDir dir("ann");
    dir.write("a.json", R"({"command":"x","cases":[{"predicate":{"operator":"frobnicate","operands":[]},
                         "class":"stateless"}]})");
    try {
      load_annotations(dir.path());
      FAIL() << "expected an error";
    } catch (const AnnotationError& e) {
      EXPECT_NE(std::string(e.what()).find("frobnicate"), std::string::npos);
      EXPECT_NE(std::string(e.what()).find("a.json"), std::string::npos);
    }
  }
  {
    test::ScratchDir dir("ann");
    dir.write("a.json", R"({"command":"x","cases":[{"predicate":"default","class":"stateless"},
                         {"predicate":{"operator":"exists","operands":["-a"]},"class":"stateless"}]})");
    EXPECT_THROW(load_annotations(dir.path()), AnnotationError);
  }
  {
    test::ScratchDir dir("ann");
    dir.write("a.json", R"({"command":"x","cases":[{"predicate":"default","class":"weird"}]})");
    EXPECT_THROW(load_annotations(dir.path()), AnnotationError);
  }
  {
    test::ScratchDir dir("ann");
    dir.write("a.json", R"({"command":"x","cases":[{"predicate":"default","class":"stateless",
                         "inputs":["argz[0]"]}]})");
    EXPECT_THROW(load_annotations(dir.path()), AnnotationError);
  }
}

TEST(IoSpecs, Parse) {
  EXPECT_EQ(parse_io_spec("stdin")->kind, IoSpec::Kind::Stdin);
  EXPECT_EQ(parse_io_spec("stdout")->kind, IoSpec::Kind::Stdout);
  auto all = parse_io_spec("args[:]");
  ASSERT_TRUE(all);
  EXPECT_EQ(all->begin, 0);
  EXPECT_FALSE(all->end);
  auto one = parse_io_spec("args[2]");
  EXPECT_EQ(one->begin, 2);
  EXPECT_EQ(one->end, 3);
  auto slice = parse_io_spec("args[1:3]");
  EXPECT_EQ(slice->begin, 1);
  EXPECT_EQ(slice->end, 3);
  EXPECT_FALSE(parse_io_spec("args[x]"));
  EXPECT_FALSE(parse_io_spec("stderr"));
}

TEST(Predicates, Examples) {
  EXPECT_TRUE(evaluate_predicate(Predicate::exists("-z"), std::vector<std::string>{"-z", "f"}));
  EXPECT_FALSE(evaluate_predicate(Predicate::exists("-z"), std::vector<std::string>{}));
  EXPECT_TRUE(evaluate_predicate(Predicate::val_opt_eq("-d", "\n"), std::vector<std::string>{"-d", "\n"}));
  EXPECT_FALSE(evaluate_predicate(Predicate::val_opt_eq("-d", "\n"), std::vector<std::string>{"-d", ","}));
  EXPECT_TRUE(evaluate_predicate(Predicate::always(), std::vector<std::string>{"anything"}));
  auto p = Predicate::all_of({Predicate::exists("-a"), Predicate::negation(Predicate::exists("-b"))});
  EXPECT_TRUE(evaluate_predicate(p, std::vector<std::string>{"-a"}));
  EXPECT_FALSE(evaluate_predicate(p, std::vector<std::string>{"-a", "-b"}));
  EXPECT_TRUE(evaluate_predicate(Predicate::any_of({Predicate::exists("-q"), Predicate::exists("-a")}),
                                 std::vector<std::string>{"-a"}));
}

TEST(Predicates, LongFormsNormalize) {
  const AnnotationRecord* cut = annotations().find("cut");
  ASSERT_NE(cut, nullptr);
  auto pred = Predicate::val_opt_eq("-d", ",");
  EXPECT_TRUE(evaluate_predicate(pred, parse_args({"--delimiter=,", "-f1"}, cut)));
  EXPECT_TRUE(evaluate_predicate(pred, parse_args({"--delimiter", ",", "-f1"}, cut)));
  EXPECT_TRUE(evaluate_predicate(pred, parse_args({"-d,", "-f1"}, cut)));
  EXPECT_TRUE(evaluate_predicate(Predicate::exists("-z"), parse_args({"--zero-terminated"}, cut)));
  EXPECT_FALSE(evaluate_predicate(Predicate::exists("-z"), parse_args({"--", "-z"}, cut)));
}

TEST(Predicates, EvaluationIsPure) {
  std::mt19937_64 rng(42);
  for (const auto& [name, rec] : annotations().records()) {
    ArgSampler s(rec);
    for (int i = 0; i < 10000 / static_cast<int>(annotations().size()) + 1; ++i) {
      auto args = s.sample(rng);
      auto parsed = parse_args(args, &rec);
      for (const auto& c : rec.cases) {
        bool a = evaluate_predicate(c.predicate, parsed);
        bool b = evaluate_predicate(c.predicate, parse_args(args, &rec));
        ASSERT_EQ(a, b) << name;
      }
      ASSERT_TRUE(same(classify(name, args, annotations()), classify(name, args, annotations()))) << name;
    }
  }
}

TEST(Classify, TripleTable) {
  auto z = classify("cut", {"-z", "f"}, annotations());
  EXPECT_EQ(z.cls, ParClass::NonParallelizablePure);
  EXPECT_EQ(paths(z, z.inputs), (std::vector<std::string>{"f"}));
  EXPECT_EQ(paths(z, z.outputs), (std::vector<std::string>{"<stdout>"}));

  auto d = classify("cut", {"-d", ",", "-f", "1"}, annotations());
  EXPECT_EQ(d.cls, ParClass::Stateless);
  EXPECT_EQ(paths(d, d.inputs), (std::vector<std::string>{"<stdin>"}));
  EXPECT_EQ(paths(d, d.outputs), (std::vector<std::string>{"<stdout>"}));

  EXPECT_EQ(classify("chmod", {"+x", "f"}, annotations()).cls, ParClass::SideEffectful);

  auto g = classify("grep", {"foo", "f1", "-", "f2"}, annotations());
  EXPECT_EQ(paths(g, g.inputs), (std::vector<std::string>{"f1", "<stdin>", "f2"}));
}

TEST(Classify, UnknownCommandIsSideEffectfulWithoutStreams) {
  auto c = classify("frobnicate", {"a", "b"}, annotations());
  EXPECT_EQ(c.cls, ParClass::SideEffectful);
  EXPECT_TRUE(c.inputs.empty());
  EXPECT_TRUE(c.outputs.empty());
}

TEST(Classify, GrepPatternFileIsConfiguration) {
  auto g = classify("grep", {"-vxF", "-f", "dict.txt", "in.txt"}, annotations());
  EXPECT_EQ(g.cls, ParClass::Stateless);
  EXPECT_EQ(paths(g, g.inputs), (std::vector<std::string>{"in.txt"}));
  EXPECT_EQ(paths(g, g.config), (std::vector<std::string>{"dict.txt"}));
}

TEST(Classify, SedAndXargsHooks) {
  EXPECT_EQ(classify("sed", {"s/a/b/g"}, annotations()).cls, ParClass::Stateless);
  EXPECT_EQ(classify("sed", {"-i", "s/a/b/"}, annotations()).cls, ParClass::SideEffectful);
  EXPECT_EQ(classify("sed", {"1d"}, annotations()).cls, ParClass::SideEffectful);
  EXPECT_EQ(classify("xargs", {"-n", "1", "wc", "-l"}, annotations()).cls, ParClass::Stateless);
  EXPECT_EQ(classify("xargs", {"rm"}, annotations()).cls, ParClass::SideEffectful);
}

TEST(Classify, CaseOrderOfExclusiveCasesDoesNotMatter) {
  std::mt19937_64 rng(5);
  for (const auto& [name, rec] : annotations().records()) {
    ArgSampler s(rec);
    std::vector<std::vector<std::string>> samples;
    for (int i = 0; i < 400; ++i) samples.push_back(s.sample(rng));
    for (std::size_t i = 0; i + 1 < rec.cases.size(); ++i) {
      const auto& a = rec.cases[i];
      const auto& b = rec.cases[i + 1];
      if (b.predicate.op == Predicate::Op::Default) continue;
      bool overlap = false;
      for (const auto& args : samples) {
        auto p = parse_args(args, &rec);
        if (evaluate_predicate(a.predicate, p) && evaluate_predicate(b.predicate, p)) overlap = true;
      }
      if (overlap) continue;
      AnnotationRecord swapped = rec;
      std::swap(swapped.cases[i], swapped.cases[i + 1]);
      for (const auto& args : samples) {
        auto x = classify_with_record(name, args, rec);
        auto y = classify_with_record(name, args, swapped);
        EXPECT_TRUE(same(x, y)) << name << " cases " << i;
      }
    }
  }
}

TEST(Classify, RemovingARecordOnlyMovesTowardSideEffectful) {
  std::mt19937_64 rng(9);
  std::vector<std::pair<std::string, std::vector<std::string>>> invocations;
  for (const auto& [name, rec] : annotations().records()) {
    ArgSampler s(rec);
    for (int i = 0; i < 30; ++i) invocations.push_back({name, s.sample(rng)});
  }
  invocations.push_back({"xargs", {"-n", "1", "wc", "-l"}});
  invocations.push_back({"xargs", {"grep", "x"}});
  for (const auto& [removed, rec] : annotations().records()) {
    AnnotationDb smaller = annotations();
    smaller.erase(removed);
    for (const auto& [name, args] : invocations) {
      auto before = classify(name, args, annotations());
      auto after = classify(name, args, smaller);
      if (after.cls != ParClass::SideEffectful) EXPECT_TRUE(same(before, after)) << removed << " / " << name;
    }
  }
}

TEST(Aggregators, Registry) {
  auto reg = default_aggregators();
  auto wc = aggregator_for(classify("wc", {"-l"}, annotations()), reg);
  ASSERT_TRUE(wc);
  EXPECT_EQ(wc->map_program, "wc");
  EXPECT_EQ(wc->aggregate_program, "agg-wc");

  auto sort = aggregator_for(classify("sort", {"-rn"}, annotations()), reg);
  ASSERT_TRUE(sort);
  EXPECT_EQ(sort->aggregate_program, "agg-merge");
  EXPECT_EQ(sort->aggregate_args, (std::vector<std::string>{"-rn"}));

  CommandInstance sha;
  sha.name = "sha1sum";
  sha.cls = ParClass::ParallelizablePure;
  EXPECT_FALSE(aggregator_for(sha, reg));
  EXPECT_FALSE(aggregator_for(classify("cat", {}, annotations()), reg));
}

TEST(Classes, WireNames) {
  EXPECT_EQ(class_from_wire("stateless"), ParClass::Stateless);
  EXPECT_EQ(class_from_wire("pure"), ParClass::ParallelizablePure);
  EXPECT_EQ(class_from_wire("n-pure"), ParClass::NonParallelizablePure);
  EXPECT_EQ(class_from_wire("side-effectful"), ParClass::SideEffectful);
  EXPECT_FALSE(class_from_wire("S"));
  EXPECT_LT(ParClass::Stateless, ParClass::ParallelizablePure);
  EXPECT_LT(ParClass::NonParallelizablePure, ParClass::SideEffectful);
}
