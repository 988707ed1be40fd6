#pragma once

#include <dirent.h>
#include <stdlib.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "shpar/annotations.hpp"
#include "shpar/process.hpp"
#include "shpar/runtime/io.hpp"

namespace shpar::test {

namespace fs = std::filesystem;

inline const std::string kBinDir = SHPAR_TEST_BIN_DIR;
inline const std::string kSourceDir = SHPAR_TEST_SOURCE_DIR;
inline const std::string kRuntimeDir = SHPAR_DEFAULT_RUNTIME_DIR;
inline const std::string kAnnotationDir = SHPAR_DEFAULT_ANNOTATION_DIR;

inline const AnnotationDb& annotations() {
  static const AnnotationDb db = load_annotations(kAnnotationDir);
  return db;
}

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag = "t") {
    const char* t = std::getenv("TMPDIR");
    std::string tmpl = std::string(t && *t ? t : "/tmp") + "/shpar-test-" + tag + "-XXXXXX";
    if (!::mkdtemp(tmpl.data())) throw Error("mkdtemp failed");
    path_ = tmpl;
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const fs::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string write(const std::string& name, std::string_view data) const {
    runtime::write_file(file(name), data);
    return file(name);
  }

 private:
  fs::path path_;
};

// bash -c SCRIPT in `cwd` under the C locale.
inline ProcessResult bash(const std::string& script, const std::string& cwd = ".",
                          std::map<std::string, std::string> env = {}) {
  ProcessOptions po;
  po.cwd = cwd;
  env.emplace("LC_ALL", "C");
  env.emplace("SHPAR_RUNTIME", kRuntimeDir);
  po.env = std::move(env);
  return run_process({"bash", "-c", script}, po);
}

// Line data with duplicates, blank lines and numbers; the last newline is
// sometimes missing.
inline std::string random_lines(std::mt19937_64& rng, std::size_t max_lines, bool allow_no_trailing_newline = true) {
  static const std::vector<std::string> words = {"alpha", "beta", "Gamma", "delta", "eps", "zeta", "ETA",
                                                 "theta", "iota", "kappa", "x", "", "10", "9", "-3", "007"};
  std::uniform_int_distribution<std::size_t> nlines(0, max_lines), nwords(0, 4), pick(0, words.size() - 1);
  std::string s;
  std::size_t n = nlines(rng);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t k = nwords(rng);
    for (std::size_t j = 0; j < k; ++j) {
      if (j) s += ' ';
      s += words[pick(rng)];
    }
    s += '\n';
  }
  if (allow_no_trailing_newline && !s.empty() && std::bernoulli_distribution(0.2)(rng)) s.pop_back();
  return s;
}

// Random cut points in [0, size], sorted, n-1 of them.
inline std::vector<std::string> random_partition(std::mt19937_64& rng, const std::string& data, std::size_t n) {
  std::vector<std::size_t> cuts = {0, data.size()};
  std::uniform_int_distribution<std::size_t> at(0, data.size());
  for (std::size_t i = 1; i < n; ++i) cuts.push_back(at(rng));
  std::sort(cuts.begin(), cuts.end());
  std::vector<std::string> parts;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) parts.push_back(data.substr(cuts[i], cuts[i + 1] - cuts[i]));
  return parts;
}

// Same, but cuts only after newlines, as a line-oriented splitter would.
inline std::vector<std::string> random_line_partition(std::mt19937_64& rng, const std::string& data, std::size_t n) {
  std::vector<std::size_t> ends = {0};
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i] == '\n') ends.push_back(i + 1);
  }
  std::vector<std::size_t> cuts = {0, data.size()};
  std::uniform_int_distribution<std::size_t> at(0, ends.size() - 1);
  for (std::size_t i = 1; i < n; ++i) cuts.push_back(ends[at(rng)]);
  std::sort(cuts.begin(), cuts.end());
  std::vector<std::string> parts;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) parts.push_back(data.substr(cuts[i], cuts[i + 1] - cuts[i]));
  return parts;
}

// Live processes whose environment carries NAME=VALUE.
inline std::vector<int> processes_marked(const std::string& name, const std::string& value) {
  std::vector<int> out;
  std::string needle = name + "=" + value;
  for (const auto& e : fs::directory_iterator("/proc")) {
    std::string pid = e.path().filename().string();
    if (pid.find_first_not_of("0123456789") != std::string::npos) continue;
    std::ifstream stat(e.path() / "stat");
    std::string line;
    std::getline(stat, line);
    auto rp = line.rfind(')');
    if (rp != std::string::npos && rp + 2 < line.size() && line[rp + 2] == 'Z') continue;
    std::ifstream env(e.path() / "environ", std::ios::binary);
    std::string entry;
    while (std::getline(env, entry, '\0')) {
      if (entry == needle) {
        out.push_back(std::stoi(pid));
        break;
      }
    }
  }
  return out;
}

inline std::size_t count_entries(const fs::path& dir) {
  std::size_t n = 0;
  for (auto it = fs::recursive_directory_iterator(dir); it != fs::recursive_directory_iterator(); ++it) ++n;
  return n;
}

}  // namespace shpar::test
