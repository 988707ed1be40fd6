#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "shpar/driver.hpp"
#include "shpar/process.hpp"

namespace shpar::harness {

namespace fs = std::filesystem;

// Writes the inputs a case needs into `dir`, about `bytes` in total.
using Generator = std::function<void(const fs::path& dir, std::size_t bytes, std::uint64_t seed)>;

struct BenchmarkCase {
  std::string name;
  std::string script;
  std::string structure;  // class multiset of the commands, e.g. "3xS"
  Generator generate;
  std::vector<int> widths = {1, 2, 4, 8};
  std::string note;
};

// ---- input generation ----

class TextGen {
 public:
  explicit TextGen(std::uint64_t seed, std::size_t vocabulary = 6000) : rng_(seed) {
    std::uniform_int_distribution<int> len(2, 10), letter(0, 25);
    for (std::size_t i = 0; i < vocabulary; ++i) {
      std::string w;
      int n = len(rng_);
      for (int k = 0; k < n; ++k) w += static_cast<char>('a' + letter(rng_));
      words_.push_back(std::move(w));
    }
  }

  const std::vector<std::string>& words() const { return words_; }

  // Zipf-ish word choice so frequencies vary.
  const std::string& word() {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double x = u(rng_);
    auto idx = static_cast<std::size_t>(static_cast<double>(words_.size()) * x * x * x);
    return words_[std::min(idx, words_.size() - 1)];
  }

  std::string line() {
    std::uniform_int_distribution<int> count(3, 12), pct(0, 99);
    int n = count(rng_);
    std::string s;
    for (int i = 0; i < n; ++i) {
      if (i) s += ' ';
      std::string w = word();
      int p = pct(rng_);
      if (p < 6) w[0] = static_cast<char>(w[0] - 'a' + 'A');
      else if (p < 8) w = "X" + w;
      s += w;
      p = pct(rng_);
      if (p < 4) s += ',';
      else if (p < 6) s += '.';
      else if (p < 7) s += std::to_string(p * 7);
    }
    return s + '\n';
  }

  void write(const fs::path& file, std::size_t bytes) {
    std::ofstream out(file, std::ios::binary);
    std::size_t written = 0;
    std::string buf;
    while (written < bytes) {
      std::string l = line();
      written += l.size();
      buf += l;
      if (buf.size() > (1 << 20)) {
        out << buf;
        buf.clear();
      }
    }
    out << buf;
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
  std::vector<std::string> words_;
};

inline void text_input(const fs::path& dir, std::size_t bytes, std::uint64_t seed) {
  TextGen(seed).write(dir / "in.txt", bytes);
}

// Text plus a dictionary holding most, not all, of the vocabulary.
inline void spell_input(const fs::path& dir, std::size_t bytes, std::uint64_t seed) {
  TextGen gen(seed);
  gen.write(dir / "in.txt", bytes);
  std::vector<std::string> dict;
  std::bernoulli_distribution keep(0.9);
  for (const auto& w : gen.words()) {
    if (keep(gen.rng())) dict.push_back(w);
  }
  std::sort(dict.begin(), dict.end());
  std::ofstream out(dir / "dict.txt");
  for (const auto& w : dict) out << w << '\n';
}

// A directory of small files and an index in `file` output format.
inline void scripts_input(const fs::path& dir, std::size_t bytes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  fs::create_directories(dir / "bin");
  std::size_t files = std::clamp<std::size_t>(bytes / 40000, 50, 1500);
  std::uniform_int_distribution<int> lines(0, 300), kind(0, 3);
  std::ofstream index(dir / "in.txt");
  TextGen text(seed ^ 0x5eed);
  for (std::size_t i = 0; i < files; ++i) {
    std::string name = "bin/tool" + std::to_string(i);
    std::ofstream f(dir / name);
    int n = lines(rng);
    bool script = kind(rng) != 0;
    if (script && n > 0) f << "#!/bin/sh\n";
    for (int k = 1; k < n; ++k) f << "echo " << text.line();
    index << name << ": " << (script ? "POSIX shell script, ASCII text executable" : "ASCII text") << '\n';
  }
}

inline const std::vector<BenchmarkCase>& corpus() {
  static const std::vector<BenchmarkCase> cases = {
      {"nfa-regex", "IN=in.txt\ncat $IN | tr A-Z a-z | grep '\\(.\\).*\\1\\(.\\).*\\2'\n", "3xS", text_input, {1, 2, 4, 8}, {}},
      {"sort", "IN=in.txt\ntr A-Z a-z < $IN | sort\n", "1xS,1xP", text_input, {1, 2, 4, 8}, {}},
      {"top-n",
       "IN=in.txt\ntr -cs A-Za-z '\\n' < $IN | tr A-Z a-z | sort | uniq -c | sort -rn | tac\n",
       "2xS,4xP", text_input, {1, 2, 4, 8}, {}},
      {"wf", "IN=in.txt\ncat $IN | tr -cs A-Za-z '\\n' | tr A-Z a-z | sort | uniq -c | sort -rn\n", "3xS,3xP",
       text_input, {1, 2, 4, 8}, {}},
      {"spell",
       "IN=in.txt\nDICT=dict.txt\n"
       "cat $IN | tr -cs A-Za-z '\\n' | tr A-Z a-z | grep -vxF -f $DICT | sort | uniq -c | sort -rn\n",
       "4xS,3xP", spell_input, {1, 2, 4, 8}, {}},
      {"difference",
       "IN=in.txt\n"
       "tr -cs A-Za-z '\\n' < $IN | sort -u > words-all.tmp\n"
       "tr -cs a-z '\\n' < $IN | sort -u > words-lower.tmp\n"
       "diff words-all.tmp words-lower.tmp\n",
       "2xS,2xP,1xN", text_input, {1, 2, 4, 8}, {}},
      {"bi-grams",
       "IN=in.txt\n"
       "tr -cs A-Za-z '\\n' < $IN | tr A-Z a-z > w1.tmp\n"
       "tail -n +2 w1.tmp > w2.tmp\n"
       "paste -d ' ' w1.tmp w2.tmp | grep -v ' $' | sort | uniq -c | sort -rn\n",
       "3xS,3xP,2xN", text_input, {1, 2, 4, 8},
       "the shift-and-pair step needs tail and paste, both non-parallelizable"},
      {"set-difference",
       "IN=in.txt\n"
       "cut -d ' ' -f 1 < $IN | tr A-Z a-z | tr -d '[:punct:]' | sort -u > first.tmp\n"
       "cut -d ' ' -f 2 < $IN | tr A-Z a-z | sort -u > second.tmp\n"
       "comm -23 first.tmp second.tmp\n",
       "5xS,2xP,1xN", text_input, {1, 2, 4, 8}, {}},
      {"sort-sort", "IN=in.txt\ntr A-Z a-z < $IN | sort | sort -r\n", "1xS,2xP", text_input, {1, 2, 4, 8}, {}},
      {"shortest-scripts",
       "IN=in.txt\n"
       "cat $IN | grep 'shell script' | cut -d: -f1 | xargs -n 1 wc -l | grep -v '^0 ' | sort -rn | tac\n",
       "5xS,2xP", scripts_input, {1, 2, 4, 8}, "input size sets the number of files, capped at 1500"},
  };
  return cases;
}

inline const BenchmarkCase* find_case(const std::vector<BenchmarkCase>& cases, const std::string& name) {
  for (const auto& c : cases) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

// ---- digests ----

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) { EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr); }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::string_view s) { EVP_DigestUpdate(ctx_, s.data(), s.size()); }
  void update_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(p.string() + ": cannot read");
    std::vector<char> buf(1 << 16);
    while (in) {
      in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
      update(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())));
    }
  }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int n = 0;
    EVP_DigestFinal_ex(ctx_, md, &n);
    std::string s;
    char b[3];
    for (unsigned int i = 0; i < n; ++i) {
      std::snprintf(b, sizeof b, "%02x", md[i]);
      s += b;
    }
    return s;
  }

 private:
  EVP_MD_CTX* ctx_;
};

inline std::string sha256_hex(std::string_view s) {
  Sha256 h;
  h.update(s);
  return h.hex();
}

// stdout, then each declared output file in name order.
inline std::string output_digest(const fs::path& stdout_file, const std::vector<fs::path>& outputs = {}) {
  Sha256 h;
  h.update_file(stdout_file);
  auto sorted = outputs;
  std::sort(sorted.begin(), sorted.end());
  for (const auto& p : sorted) {
    h.update("\n--" + p.filename().string() + "--\n");
    if (fs::exists(p)) h.update_file(p);
  }
  return h.hex();
}

// ---- running ----

struct HarnessOptions {
  std::size_t size_bytes = 50u << 20;
  std::uint64_t seed = 20210426;
  fs::path work_root;  // default: $TMPDIR
  std::string annotation_dir = SHPAR_DEFAULT_ANNOTATION_DIR;
  std::string runtime_dir = SHPAR_DEFAULT_RUNTIME_DIR;
  std::string shell = "bash";
  bool keep_work = false;
};

struct CaseResult {
  std::string name;
  int width = 1;
  std::string sequential_digest;
  std::string parallel_digest;
  int sequential_status = 0;
  int parallel_status = 0;
  double sequential_seconds = 0;
  double parallel_seconds = 0;
  std::size_t nodes = 0;
  std::map<std::string, std::size_t> census;
  std::string structure;
  std::string expected_structure;
  std::size_t regions = 0;
  std::size_t compiled_regions = 0;
  std::string artifact_dir;  // kept on mismatch
  bool equal() const { return sequential_digest == parallel_digest && sequential_status == parallel_status; }
};

inline fs::path default_work_root() {
  const char* t = std::getenv("TMPDIR");
  return fs::path(t && *t ? t : "/tmp");
}

inline std::string class_structure(const Compilation& c) {
  std::map<char, std::size_t> counts;
  for (const auto& r : c.regions) {
    if (!r.original) continue;
    for (const auto& [id, n] : r.original->nodes()) ++counts[class_key(n.command.cls)];
  }
  std::string s;
  for (char k : std::string("SPNE")) {
    if (!counts[k]) continue;
    if (!s.empty()) s += ',';
    s += std::to_string(counts[k]) + "x" + k;
  }
  return s;
}

// Prepared inputs for one case, reused across widths.
class Workspace {
 public:
  Workspace(const BenchmarkCase& c, const HarnessOptions& o) : opts_(o) {
    fs::path root = o.work_root.empty() ? default_work_root() : o.work_root;
    std::string tmpl = (root / ("shpar-harness-" + c.name + "-XXXXXX")).string();
    if (!::mkdtemp(tmpl.data())) throw Error("mkdtemp failed under " + root.string());
    dir_ = tmpl;
    fs::create_directories(dir_ / "data");
    c.generate(dir_ / "data", o.size_bytes, o.seed);
    script_path_ = dir_ / (c.name + ".sh");
    std::ofstream(script_path_) << c.script;
  }
  ~Workspace() {
    if (!opts_.keep_work) {
      std::error_code ec;
      fs::remove_all(dir_, ec);
    }
  }
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;

  const fs::path& dir() const { return dir_; }
  fs::path data() const { return dir_ / "data"; }
  const fs::path& script() const { return script_path_; }

 private:
  HarnessOptions opts_;
  fs::path dir_;
  fs::path script_path_;
};

namespace detail {

inline std::map<std::string, std::string> run_env(const HarnessOptions& o) {
  return {{"LC_ALL", "C"}, {"SHPAR_RUNTIME", o.runtime_dir}};
}

inline double timed_run(const std::vector<std::string>& argv, const fs::path& cwd, const fs::path& out,
                        const HarnessOptions& o, int& status) {
  ProcessOptions po;
  po.cwd = cwd.string();
  po.stdout_path = out.string();
  po.env = run_env(o);
  auto t0 = std::chrono::steady_clock::now();
  status = run_process(argv, po).status;
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Removes scratch files a script leaves in the data directory.
inline void clean_scratch(const fs::path& data) {
  for (const auto& e : fs::directory_iterator(data)) {
    if (e.path().extension() == ".tmp") fs::remove(e.path());
  }
}

}  // namespace detail

inline Compilation compile_case(const BenchmarkCase& c, int width, const HarnessOptions& o, bool optimize = true) {
  AnnotationDb db = load_annotations(o.annotation_dir);
  CompileOptions co;
  co.width = width;
  co.optimize = optimize;
  co.emit.runtime_dir = o.runtime_dir;
  return compile(c.script, db, co);
}

inline CaseResult run_case(const BenchmarkCase& c, int width, const Workspace& ws, const HarnessOptions& o) {
  CaseResult r;
  r.name = c.name;
  r.width = width;
  r.expected_structure = c.structure;
  Compilation comp = compile_case(c, width, o);
  r.structure = class_structure(comp);
  r.regions = comp.regions.size();
  r.compiled_regions = comp.compiled_count();
  for (const auto& reg : comp.regions) {
    if (!reg.expanded) continue;
    r.nodes += reg.expanded->node_count();
    for (const auto& [k, v] : node_census(*reg.expanded)) r.census[k] += v;
  }
  fs::path seq_out = ws.dir() / ("seq-" + std::to_string(width) + ".out");
  fs::path par_out = ws.dir() / ("par-" + std::to_string(width) + ".out");
  fs::path par_script = ws.dir() / ("par-" + std::to_string(width) + ".sh");
  std::ofstream(par_script) << comp.script;

  detail::clean_scratch(ws.data());
  r.sequential_seconds =
      detail::timed_run({o.shell, ws.script().string()}, ws.data(), seq_out, o, r.sequential_status);
  r.sequential_digest = output_digest(seq_out);
  detail::clean_scratch(ws.data());
  r.parallel_seconds = detail::timed_run({o.shell, par_script.string()}, ws.data(), par_out, o, r.parallel_status);
  r.parallel_digest = output_digest(par_out);
  detail::clean_scratch(ws.data());

  if (!r.equal()) {
    fs::path keep = ws.dir().parent_path() / ("shpar-mismatch-" + c.name + "-w" + std::to_string(width));
    std::error_code ec;
    fs::remove_all(keep, ec);
    fs::create_directories(keep);
    fs::copy_file(seq_out, keep / "sequential.out");
    fs::copy_file(par_out, keep / "parallel.out");
    fs::copy_file(par_script, keep / "parallel.sh");
    fs::copy_file(ws.script(), keep / "sequential.sh");
    r.artifact_dir = keep.string();
  }
  fs::remove(seq_out);
  fs::remove(par_out);
  return r;
}

inline nlohmann::ordered_json result_json(const CaseResult& r) {
  nlohmann::ordered_json j;
  j["case"] = r.name;
  j["width"] = r.width;
  j["equal"] = r.equal();
  j["sequential_digest"] = r.sequential_digest;
  j["parallel_digest"] = r.parallel_digest;
  j["sequential_status"] = r.sequential_status;
  j["parallel_status"] = r.parallel_status;
  j["sequential_seconds"] = r.sequential_seconds;
  j["parallel_seconds"] = r.parallel_seconds;
  j["speedup"] = r.parallel_seconds > 0 ? r.sequential_seconds / r.parallel_seconds : 0.0;
  j["nodes"] = r.nodes;
  j["census"] = r.census;
  j["structure"] = r.structure;
  j["expected_structure"] = r.expected_structure;
  j["regions"] = r.regions;
  j["compiled_regions"] = r.compiled_regions;
  if (!r.artifact_dir.empty()) j["artifacts"] = r.artifact_dir;
  return j;
}

inline std::string results_table(const std::vector<CaseResult>& rs) {
  std::string s;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-18s %5s %6s %9s %9s %7s %6s  %s\n", "case", "width", "equal", "seq(s)", "par(s)",
                "speedup", "nodes", "structure");
  s += buf;
  for (const auto& r : rs) {
    std::snprintf(buf, sizeof buf, "%-18s %5d %6s %9.2f %9.2f %7.2f %6zu  %s\n", r.name.c_str(), r.width,
                  r.equal() ? "yes" : "NO", r.sequential_seconds, r.parallel_seconds,
                  r.parallel_seconds > 0 ? r.sequential_seconds / r.parallel_seconds : 0.0, r.nodes,
                  r.structure.c_str());
    s += buf;
  }
  return s;
}

}  // namespace shpar::harness
