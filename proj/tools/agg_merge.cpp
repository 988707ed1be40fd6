#include <cstdio>
#include <unistd.h>

#include "tool_common.hpp"

namespace {

// Leading sort flags (with their values) vs. input files.
void split_args(int argc, char** argv, std::vector<std::string>& flags, std::vector<std::string>& files) {
  int i = 1;
  for (; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "--") {
      ++i;
      break;
    }
    if (a.size() < 2 || a[0] != '-') break;
    flags.push_back(a);
    if (a.rfind("--", 0) == 0) {
      bool valued = a == "--key" || a == "--field-separator" || a == "--buffer-size" ||
                    a == "--temporary-directory" || a == "--parallel";
      if (valued && i + 1 < argc) flags.push_back(argv[++i]);
      continue;
    }
    for (std::size_t k = 1; k < a.size(); ++k) {
      char c = a[k];
      if (c == 'k' || c == 't' || c == 'S' || c == 'T') {
        if (k + 1 == a.size() && i + 1 < argc) flags.push_back(argv[++i]);
        break;
      }
    }
  }
  for (; i < argc; ++i) files.push_back(argv[i]);
}

}  // namespace

int main(int argc, char** argv) {
  using namespace shpar;
  if (tool::wants_help(argc, argv)) {
    std::puts("usage: agg-merge [sort flags] F1..FN\n"
              "Merges individually sorted inputs under the given sort flags; falls back to `sort -m`\n"
              "for flags or locales the built-in merger does not handle.");
    return 0;
  }
  std::vector<std::string> flags, files;
  split_args(argc, argv, flags, files);
  auto opts = runtime::parse_sort_flags(flags);
  if (!opts || !runtime::c_collation()) {
    std::vector<std::string> args = {"sort", "-m"};
    args.insert(args.end(), flags.begin(), flags.end());
    args.push_back("--");
    args.insert(args.end(), files.begin(), files.end());
    std::vector<char*> cargs;
    for (auto& a : args) cargs.push_back(a.data());
    cargs.push_back(nullptr);
    ::execvp("sort", cargs.data());
    std::perror("agg-merge: sort");
    return 127;
  }
  tool::exit_on_sigpipe();
  return tool::guarded("agg-merge", [&] {
    if (files.empty()) files.push_back("-");
    tool::Inputs in(files);
    runtime::FdSink out(1);
    runtime::merge_sorted(in.ptrs, *opts, out);
    out.flush();
    return 0;
  });
}
