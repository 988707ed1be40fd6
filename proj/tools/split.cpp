#include <CLI11.hpp>
#include <cstdio>
#include <sys/stat.h>

#include "shpar/runtime/split.hpp"
#include "tool_common.hpp"

int main(int argc, char** argv) {
  using namespace shpar;
  CLI::App app{"split: divide stdin into N contiguous line chunks written to OUT1..OUTN\n"
               "(first total%N chunks get one extra line), or with --ranges stream the\n"
               "I-th line-aligned byte range of FILE to stdout."};
  std::vector<std::string> ranges;
  std::vector<std::string> positional;
  app.add_option("--ranges", ranges, "FILE N I")->expected(3);
  app.add_option("args", positional, "N OUT1..OUTN");
  CLI11_PARSE(app, argc, argv);
  tool::exit_on_sigpipe();
  return tool::guarded("split", [&] {
    if (!ranges.empty()) {
      std::size_t n = std::stoul(ranges[1]);
      std::size_t i = std::stoul(ranges[2]);
      runtime::split_file_range(ranges[0], n, i, 1);
      return 0;
    }
    if (positional.empty()) throw Error("missing fanout N");
    std::size_t n = std::stoul(positional[0]);
    if (n == 0 || positional.size() != n + 1) throw Error("expected N followed by N output paths");
    std::vector<int> fds;
    std::vector<std::string> created;
    for (std::size_t k = 1; k <= n; ++k) {
      const std::string& p = positional[k];
      struct stat st {};
      bool existed = ::stat(p.c_str(), &st) == 0;
      int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
      if (fd < 0) {
        int err = errno;
        for (int f : fds) ::close(f);
        for (const auto& c : created) ::unlink(c.c_str());
        throw Error(p + ": " + std::strerror(err));
      }
      if (!existed) created.push_back(p);
      fds.push_back(fd);
    }
    std::string data = runtime::read_fd(0);
    auto lines = runtime::split_lines(data);
    auto plan = runtime::chunk_plan(lines.size(), n);
    auto offset = [&](std::size_t line) {
      return line < lines.size() ? static_cast<std::size_t>(lines[line].data() - data.data()) : data.size();
    };
    std::size_t at = 0;
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t begin = offset(at);
      at += plan[k];
      runtime::write_all(fds[k], std::string_view(data).substr(begin, offset(at) - begin));
      ::close(fds[k]);
    }
    return 0;
  });
}
