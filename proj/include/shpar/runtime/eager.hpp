#pragma once

#include <cerrno>
#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <deque>
#include <fcntl.h>
#include <fstream>
#include <poll.h>
#include <signal.h>
#include <mutex>
#include <string>
#include <thread>
#include <unistd.h>

#include "shpar/error.hpp"
#include "shpar/runtime/io.hpp"

namespace shpar::runtime {

inline constexpr std::size_t kDefaultEagerBuffer = std::size_t{64} << 20;

struct EagerStats {
  std::size_t bytes_in = 0;
  std::size_t bytes_out = 0;
  std::size_t bytes_spilled = 0;
  bool consumer_gone = false;
};

// Relay that reads its input as fast as the producer writes it. Up to `cap`
// bytes are held in memory; beyond that data goes to an unlinked temp file.
// Segments leave in arrival order either way.
class EagerRelay {
 public:
  explicit EagerRelay(std::size_t cap = kDefaultEagerBuffer) : cap_(cap) {}

  ~EagerRelay() {
    if (spill_fd_ >= 0) ::close(spill_fd_);
  }

  // `open_out` runs on the writer thread, so a blocking FIFO open does not
  // hold up the reader.
  template <class OpenOut>
  EagerStats run(int in_fd, OpenOut&& open_out) {
    std::thread reader([&] { fill(in_fd); });
    int out_fd = -1;
    try {
      out_fd = open_out();
    } catch (...) {
      {
        std::lock_guard lk(mu_);
        abort_ = true;
      }
      reader.detach();
      throw;
    }
    drain(out_fd);
    if (stats_.consumer_gone) {
      // nobody will read the rest
      reader.detach();
      return stats_;
    }
    reader.join();
    if (!read_error_.empty()) throw Error(read_error_);
    return stats_;
  }

 private:
  struct Segment {
    std::string data;  // in-memory bytes; empty for spilled segments
    off_t offset = 0;
    std::size_t length = 0;
    bool spilled = false;
  };

  void fill(int in_fd) {
    std::string chunk;
    for (;;) {
      chunk.resize(1 << 16);
      ssize_t n = ::read(in_fd, chunk.data(), chunk.size());
      if (n < 0 && errno == EINTR) continue;
      std::unique_lock lk(mu_);
      if (n < 0) {
        read_error_ = std::string("eager: read: ") + std::strerror(errno);
        eof_ = true;
        cv_.notify_all();
        return;
      }
      if (n == 0 || abort_ || stats_.consumer_gone) {
        eof_ = true;
        cv_.notify_all();
        return;
      }
      chunk.resize(static_cast<std::size_t>(n));
      stats_.bytes_in += chunk.size();
      Segment seg;
      if (mem_bytes_ + chunk.size() > cap_) {
        lk.unlock();
        seg = spill(chunk);
        lk.lock();
        if (seg.length == 0) {
          eof_ = true;
          cv_.notify_all();
          return;
        }
      } else {
        mem_bytes_ += chunk.size();
        seg.data.swap(chunk);
        seg.length = seg.data.size();
      }
      queue_.push_back(std::move(seg));
      cv_.notify_all();
    }
  }

  Segment spill(const std::string& chunk) {
    Segment seg;
    if (spill_fd_ < 0) {
      const char* tmp = std::getenv("TMPDIR");
      std::string path = std::string(tmp && *tmp ? tmp : "/tmp") + "/shpar-eager-XXXXXX";
      spill_fd_ = ::mkstemp(path.data());
      if (spill_fd_ < 0) {
        std::lock_guard lk(mu_);
        read_error_ = std::string("eager: spill file: ") + std::strerror(errno);
        return seg;
      }
      ::unlink(path.c_str());
    }
    std::size_t done = 0;
    while (done < chunk.size()) {
      ssize_t n = ::pwrite(spill_fd_, chunk.data() + done, chunk.size() - done, spill_end_ + static_cast<off_t>(done));
      if (n < 0 && errno == EINTR) continue;
      if (n < 0) {
        std::lock_guard lk(mu_);
        read_error_ = std::string("eager: spill write: ") + std::strerror(errno);
        return seg;
      }
      done += static_cast<std::size_t>(n);
    }
    seg.spilled = true;
    seg.offset = spill_end_;
    seg.length = chunk.size();
    spill_end_ += static_cast<off_t>(chunk.size());
    std::lock_guard lk(mu_);
    stats_.bytes_spilled += chunk.size();
    return seg;
  }

  void drain(int out_fd) {
    std::string buf;
    for (;;) {
      Segment seg;
      {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return !queue_.empty() || eof_; });
        if (queue_.empty()) return;
        seg = std::move(queue_.front());
        queue_.pop_front();
        if (!seg.spilled) mem_bytes_ -= seg.length;
      }
      std::string_view data;
      if (seg.spilled) {
        buf.resize(seg.length);
        std::size_t got = 0;
        while (got < seg.length) {
          ssize_t n = ::pread(spill_fd_, buf.data() + got, seg.length - got, seg.offset + static_cast<off_t>(got));
          if (n < 0 && errno == EINTR) continue;
          if (n <= 0) throw Error("eager: spill read failed");
          got += static_cast<std::size_t>(n);
        }
        data = buf;
      } else {
        data = seg.data;
      }
      if (!write_all(out_fd, data)) {
        std::lock_guard lk(mu_);
        stats_.consumer_gone = true;
        return;
      }
      std::lock_guard lk(mu_);
      stats_.bytes_out += data.size();
    }
  }

  std::size_t cap_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Segment> queue_;
  std::size_t mem_bytes_ = 0;
  bool eof_ = false;
  bool abort_ = false;
  std::string read_error_;
  int spill_fd_ = -1;
  off_t spill_end_ = 0;
  EagerStats stats_;
};

// Reads a stream to exhaustion, discarding it.
inline std::size_t drain_path(const std::string& path) {
  int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd < 0) throw Error(path + ": " + std::strerror(errno));
  char buf[1 << 16];
  std::size_t total = 0;
  for (;;) {
    ssize_t n = ::read(fd, buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    total += static_cast<std::size_t>(n);
  }
  ::close(fd);
  return total;
}

namespace detail {

inline bool process_alive(pid_t pid) {
  if (::kill(pid, 0) != 0) return errno == EPERM;
  // an unreaped child counts as gone
  std::ifstream stat("/proc/" + std::to_string(pid) + "/stat");
  std::string line;
  if (!std::getline(stat, line)) return true;
  auto rp = line.rfind(')');
  return rp == std::string::npos || rp + 2 >= line.size() || line[rp + 2] != 'Z';
}

}  // namespace detail

// Drains a FIFO whose writer is process `writer`: the read end stays open,
// so a writer that has not opened its end yet is not left blocked, and
// reading stops once the writer has exited and the pipe is empty.
inline std::size_t drain_fifo(const std::string& path, pid_t writer) {
  int fd = ::open(path.c_str(), O_RDONLY | O_NONBLOCK | O_CLOEXEC);
  if (fd < 0) throw Error(path + ": " + std::strerror(errno));
  char buf[1 << 16];
  std::size_t total = 0;
  for (;;) {
    ssize_t n = ::read(fd, buf, sizeof buf);
    if (n > 0) {
      total += static_cast<std::size_t>(n);
      continue;
    }
    if (n < 0 && errno == EINTR) continue;
    if (n < 0 && errno != EAGAIN) break;
    if (!detail::process_alive(writer)) {
      // one last look for bytes written just before exit
      while ((n = ::read(fd, buf, sizeof buf)) > 0) total += static_cast<std::size_t>(n);
      break;
    }
    if (n == 0) {
      ::usleep(10000);  // no writer attached right now
    } else {
      struct pollfd p {fd, POLLIN, 0};
      ::poll(&p, 1, 20);
    }
  }
  ::close(fd);
  return total;
}

}  // namespace shpar::runtime
