#pragma once

#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <string>
#include <string_view>
#include <sys/stat.h>
#include <unistd.h>
#include <vector>

#include "shpar/error.hpp"
#include "shpar/runtime/io.hpp"

namespace shpar::runtime {

// Per-chunk line counts: the first `total % n` chunks get one extra line.
inline std::vector<std::size_t> chunk_plan(std::size_t total, std::size_t n) {
  if (n == 0) throw Error("split: fanout must be positive");
  std::vector<std::size_t> out(n, total / n);
  for (std::size_t i = 0; i < total % n; ++i) ++out[i];
  return out;
}

inline std::vector<std::string> split_content(std::string_view data, std::size_t n) {
  auto lines = split_lines(data);
  auto plan = chunk_plan(lines.size(), n);
  std::vector<std::string> out(n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < plan[i]; ++j) out[i] += lines[k++];
  }
  return out;
}

// Boundary k of n over a buffer: the first line start at or after k*size/n.
inline std::size_t range_boundary(std::string_view data, std::size_t n, std::size_t k) {
  const std::size_t size = data.size();
  if (k == 0) return 0;
  if (k >= n) return size;
  std::size_t p = static_cast<std::size_t>((static_cast<unsigned __int128>(k) * size) / n);
  if (p == 0 || data[p - 1] == '\n') return p;
  std::size_t nl = data.find('\n', p);
  return nl == std::string_view::npos ? size : nl + 1;
}

inline std::string split_range(std::string_view data, std::size_t n, std::size_t i) {
  std::size_t b = range_boundary(data, n, i);
  std::size_t e = range_boundary(data, n, i + 1);
  return std::string(data.substr(b, e - b));
}

namespace detail {

// Same rule as range_boundary, reading the file with pread.
inline std::size_t file_boundary(int fd, std::size_t size, std::size_t n, std::size_t k) {
  if (k == 0) return 0;
  if (k >= n) return size;
  std::size_t p = static_cast<std::size_t>((static_cast<unsigned __int128>(k) * size) / n);
  if (p == 0) return 0;
  char buf[1 << 14];
  std::size_t pos = p - 1;
  while (pos < size) {
    ssize_t got = ::pread(fd, buf, sizeof buf, static_cast<off_t>(pos));
    if (got < 0) {
      if (errno == EINTR) continue;
      throw Error(std::string("split: read: ") + std::strerror(errno));
    }
    if (got == 0) break;
    for (ssize_t j = 0; j < got; ++j) {
      if (buf[j] == '\n') return pos + static_cast<std::size_t>(j) + 1;
    }
    pos += static_cast<std::size_t>(got);
  }
  return size;
}

}  // namespace detail

// Streams chunk i of n of a regular file to out_fd. Returns false when the
// consumer went away.
inline bool split_file_range(const std::string& path, std::size_t n, std::size_t i, int out_fd) {
  if (n == 0 || i >= n) throw Error("split: chunk index out of range");
  int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd < 0) throw Error(path + ": " + std::strerror(errno));
  struct stat st {};
  if (::fstat(fd, &st) != 0) {
    ::close(fd);
    throw Error(path + ": " + std::strerror(errno));
  }
  const std::size_t size = static_cast<std::size_t>(st.st_size);
  std::size_t b = detail::file_boundary(fd, size, n, i);
  std::size_t e = detail::file_boundary(fd, size, n, i + 1);
  std::vector<char> buf(1 << 17);
  std::size_t pos = b;
  while (pos < e) {
    std::size_t want = std::min(buf.size(), e - pos);
    ssize_t got = ::pread(fd, buf.data(), want, static_cast<off_t>(pos));
    if (got < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      throw Error(path + ": " + std::strerror(errno));
    }
    if (got == 0) {
      ::close(fd);
      throw Error(path + ": file shrank while being read");
    }
    if (!write_all(out_fd, std::string_view(buf.data(), static_cast<std::size_t>(got)))) {
      ::close(fd);
      return false;
    }
    pos += static_cast<std::size_t>(got);
  }
  ::close(fd);
  return true;
}

}  // namespace shpar::runtime
