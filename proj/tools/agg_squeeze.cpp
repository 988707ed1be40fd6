#include <cstdio>
#include <string>

#include "tool_common.hpp"

int main(int argc, char** argv) {
  using namespace shpar;
  if (tool::wants_help(argc, argv) || argc < 2) {
    std::puts("usage: agg-squeeze BYTE F1..FN\n"
              "Concatenates per-chunk `tr -s` outputs; a run of BYTE (a decimal code)\n"
              "that spans a seam is collapsed to one.");
    return argc < 2 ? 2 : 0;
  }
  tool::exit_on_sigpipe();
  return tool::guarded("agg-squeeze", [&] {
    int code = std::stoi(argv[1]);
    if (code < 0 || code > 255) throw Error("byte code out of range");
    std::vector<std::string> files(argv + 2, argv + argc);
    if (files.empty()) files.push_back("-");
    tool::Inputs in(files);
    runtime::FdSink out(1);
    runtime::agg_squeeze(in.ptrs, static_cast<char>(code), out);
    out.flush();
    return 0;
  });
}
