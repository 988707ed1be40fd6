#pragma once

#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <map>
#include <optional>
#include <spawn.h>
#include <string>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>
#include <vector>

#include "shpar/error.hpp"

extern char** environ;

namespace shpar {

struct ProcessOptions {
  std::optional<std::string> stdin_path;   // default: /dev/null
  std::optional<std::string> stdin_data;   // fed through a pipe; wins over stdin_path
  std::optional<std::string> stdout_path;  // default: captured
  std::optional<std::string> stderr_path;  // default: inherited
  std::map<std::string, std::string> env;  // overrides
  std::optional<std::string> cwd;
};

struct ProcessResult {
  int status = 0;  // exit code, or 128+signal
  bool signaled = false;
  std::string out;
};

inline std::vector<std::string> merged_environment(const std::map<std::string, std::string>& overrides) {
  std::vector<std::string> env;
  for (char** e = environ; e && *e; ++e) {
    std::string s(*e);
    std::string key = s.substr(0, s.find('='));
    if (!overrides.count(key)) env.push_back(std::move(s));
  }
  for (const auto& [k, v] : overrides) env.push_back(k + "=" + v);
  return env;
}

// Runs argv[0] (PATH lookup) with SIGPIPE and SIGINT at their defaults.
inline ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& opts = {}) {
  if (argv.empty()) throw Error("run_process: empty argv");
  int pipefd[2] = {-1, -1};
  bool capture = !opts.stdout_path;
  if (capture && ::pipe2(pipefd, O_CLOEXEC) != 0) throw Error(std::string("pipe: ") + std::strerror(errno));

  int infd[2] = {-1, -1};
  if (opts.stdin_data && ::pipe2(infd, O_CLOEXEC) != 0) {
    if (capture) {
      ::close(pipefd[0]);
      ::close(pipefd[1]);
    }
    throw Error(std::string("pipe: ") + std::strerror(errno));
  }

  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  if (opts.stdin_data) {
    posix_spawn_file_actions_adddup2(&fa, infd[0], 0);
  } else {
    posix_spawn_file_actions_addopen(&fa, 0, opts.stdin_path ? opts.stdin_path->c_str() : "/dev/null", O_RDONLY, 0);
  }
  if (capture) {
    posix_spawn_file_actions_adddup2(&fa, pipefd[1], 1);
  } else {
    posix_spawn_file_actions_addopen(&fa, 1, opts.stdout_path->c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  }
  if (opts.stderr_path) {
    posix_spawn_file_actions_addopen(&fa, 2, opts.stderr_path->c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  }
  if (opts.cwd) posix_spawn_file_actions_addchdir_np(&fa, opts.cwd->c_str());

  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  sigset_t def, mask;
  sigemptyset(&def);
  sigaddset(&def, SIGPIPE);
  sigaddset(&def, SIGINT);
  sigaddset(&def, SIGTERM);
  sigemptyset(&mask);
  posix_spawnattr_setsigdefault(&attr, &def);
  posix_spawnattr_setsigmask(&attr, &mask);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETSIGDEF | POSIX_SPAWN_SETSIGMASK);

  std::vector<char*> cargv;
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);
  std::vector<std::string> envs = merged_environment(opts.env);
  std::vector<char*> cenv;
  for (auto& e : envs) cenv.push_back(e.data());
  cenv.push_back(nullptr);

  pid_t pid = -1;
  int rc = posix_spawnp(&pid, cargv[0], &fa, &attr, cargv.data(), cenv.data());
  posix_spawn_file_actions_destroy(&fa);
  posix_spawnattr_destroy(&attr);
  if (capture) ::close(pipefd[1]);
  if (opts.stdin_data) ::close(infd[0]);
  if (rc != 0) {
    if (capture) ::close(pipefd[0]);
    if (opts.stdin_data) ::close(infd[1]);
    throw Error(argv[0] + ": " + std::strerror(rc));
  }
  // A child that stops reading early must not take us down with SIGPIPE, so
  // the writer blocks it and swallows any pending one before exiting.
  std::thread feeder;
  if (opts.stdin_data) {
    feeder = std::thread([fd = infd[1], &data = *opts.stdin_data] {
      sigset_t pipe_only;
      sigemptyset(&pipe_only);
      sigaddset(&pipe_only, SIGPIPE);
      pthread_sigmask(SIG_BLOCK, &pipe_only, nullptr);
      std::size_t off = 0;
      while (off < data.size()) {
        ssize_t n = ::write(fd, data.data() + off, data.size() - off);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        off += static_cast<std::size_t>(n);
      }
      ::close(fd);
      timespec zero{0, 0};
      sigtimedwait(&pipe_only, nullptr, &zero);
    });
  }
  ProcessResult res;
  if (capture) {
    char buf[1 << 16];
    for (;;) {
      ssize_t n = ::read(pipefd[0], buf, sizeof buf);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) break;
      res.out.append(buf, static_cast<std::size_t>(n));
    }
    ::close(pipefd[0]);
  }
  if (feeder.joinable()) feeder.join();
  int st = 0;
  while (::waitpid(pid, &st, 0) < 0) {
    if (errno != EINTR) throw Error(std::string("waitpid: ") + std::strerror(errno));
  }
  if (WIFEXITED(st)) {
    res.status = WEXITSTATUS(st);
  } else if (WIFSIGNALED(st)) {
    res.signaled = true;
    res.status = 128 + WTERMSIG(st);
  }
  return res;
}

}  // namespace shpar
