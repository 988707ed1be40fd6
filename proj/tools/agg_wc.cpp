#include <cstdio>

#include "tool_common.hpp"

int main(int argc, char** argv) {
  using namespace shpar;
  if (tool::wants_help(argc, argv)) {
    std::puts("usage: agg-wc F1..FN\n"
              "Sums the columns of per-chunk `wc` outputs in input order.");
    return 0;
  }
  tool::exit_on_sigpipe();
  return tool::guarded("agg-wc", [&] {
    std::vector<std::string> files(argv + 1, argv + argc);
    if (files.empty()) files.push_back("-");
    tool::Inputs in(files);
    runtime::FdSink out(1);
    runtime::agg_wc(in.ptrs, out);
    out.flush();
    return 0;
  });
}
