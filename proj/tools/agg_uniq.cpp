#include <cstdio>

#include "tool_common.hpp"

int main(int argc, char** argv) {
  using namespace shpar;
  if (tool::wants_help(argc, argv)) {
    std::puts("usage: agg-uniq [-c] F1..FN\n"
              "Concatenates per-chunk `uniq` (or `uniq -c`) outputs, merging repeats at chunk seams.");
    return 0;
  }
  tool::exit_on_sigpipe();
  return tool::guarded("agg-uniq", [&] {
    bool counts = false;
    std::vector<std::string> files;
    for (int i = 1; i < argc; ++i) {
      std::string a = argv[i];
      if (a == "-c" && files.empty()) counts = true;
      else files.push_back(a);
    }
    if (files.empty()) files.push_back("-");
    tool::Inputs in(files);
    runtime::FdSink out(1);
    runtime::agg_uniq(in.ptrs, counts, out);
    out.flush();
    return 0;
  });
}
