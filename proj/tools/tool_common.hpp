#pragma once

#include <cerrno>
#include <csignal>
#include <cstdio>
#include <cstring>
#include <fcntl.h>
#include <memory>
#include <string>
#include <unistd.h>
#include <vector>

#include "shpar/error.hpp"
#include "shpar/runtime/aggregators.hpp"

namespace shpar::tool {

// A vanished reader is a normal way for a stream to end.
inline void exit_on_sigpipe() {
  struct sigaction sa {};
  sa.sa_handler = [](int) { ::_exit(0); };
  sigemptyset(&sa.sa_mask);
  ::sigaction(SIGPIPE, &sa, nullptr);
}

inline bool wants_help(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "--") break;
    if (a == "--help" || a == "-h") return true;
  }
  return false;
}

// Opens every input up front, in order, so FIFO writers are never left waiting.
struct Inputs {
  std::vector<int> fds;
  std::vector<std::unique_ptr<runtime::FdLineSource>> sources;
  std::vector<runtime::LineSource*> ptrs;

  explicit Inputs(const std::vector<std::string>& paths) {
    for (const auto& p : paths) {
      int fd = p == "-" ? ::dup(0) : ::open(p.c_str(), O_RDONLY | O_CLOEXEC);
      if (fd < 0) throw Error(p + ": " + std::strerror(errno));
      fds.push_back(fd);
      sources.push_back(std::make_unique<runtime::FdLineSource>(fd));
      ptrs.push_back(sources.back().get());
    }
  }
  ~Inputs() {
    for (int fd : fds) ::close(fd);
  }
};

// Runs `body`, mapping failures to a message and status 1.
template <class F>
int guarded(const char* prog, F&& body) {
  try {
    return body();
  } catch (const runtime::BrokenPipe&) {
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s: %s\n", prog, e.what());
    return 1;
  }
}

}  // namespace shpar::tool
