#include <CLI11.hpp>
#include <cstdio>

#include "shpar/runtime/eager.hpp"
#include "tool_common.hpp"

int main(int argc, char** argv) {
  using namespace shpar;
  CLI::App app{"eager: relay stdin to OUTPUT (default stdout), reading as fast as the producer\n"
               "writes. Memory holds up to --buffer bytes; the rest spills to a temp file."};
  std::size_t buffer = runtime::kDefaultEagerBuffer;
  std::string drain;
  long pid = 0;
  std::string output;
  app.add_option("--buffer", buffer, "in-memory cap in bytes");
  auto* d = app.add_option("--drain", drain, "discard everything readable from this FIFO");
  app.add_option("--pid", pid, "with --drain: stop once this writer has exited")->needs(d);
  app.add_option("output", output, "output path, opened by the relay itself");
  CLI11_PARSE(app, argc, argv);
  tool::exit_on_sigpipe();
  return tool::guarded("eager", [&] {
    if (!drain.empty()) {
      if (pid > 0) runtime::drain_fifo(drain, static_cast<pid_t>(pid));
      else runtime::drain_path(drain);
      return 0;
    }
    runtime::EagerRelay relay(buffer);
    auto stats = relay.run(0, [&] {
      if (output.empty()) return 1;
      int fd = ::open(output.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
      if (fd < 0) throw Error(output + ": " + std::strerror(errno));
      return fd;
    });
    // the reader thread may still be blocked on input
    if (stats.consumer_gone) ::_exit(0);
    return 0;
  });
}
