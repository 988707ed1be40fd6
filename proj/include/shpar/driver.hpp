#pragma once

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <sys/mman.h>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>
#include <vector>

#include <json.hpp>

#include "shpar/annotations.hpp"
#include "shpar/emit.hpp"
#include "shpar/error.hpp"
#include "shpar/parallelize.hpp"
#include "shpar/parser.hpp"
#include "shpar/regions.hpp"
#include "shpar/runtime/io.hpp"
#include "shpar/unparse.hpp"

#ifndef SHPAR_DEFAULT_ANNOTATION_DIR
#define SHPAR_DEFAULT_ANNOTATION_DIR "/usr/local/share/shpar/annotations"
#endif

namespace shpar {

inline constexpr const char* kVersion = "0.4.0";

struct RuntimeConfig {
  std::optional<std::string> input;    // script path
  std::optional<std::string> command;  // -c text
  std::vector<std::string> script_args;
  std::optional<int> width;
  bool no_optimize = false;
  bool dry_run_compiler = false;
  bool assert_compiler_success = false;
  bool output_time = false;
  bool output_optimized = false;
  int debug = 0;
  std::optional<std::string> log_file;
  bool no_eager = false;
  Termination termination = Termination::CleanUpGraph;
  std::optional<std::string> config_path;
  bool preprocess_only = false;
  bool output_preprocessed = false;

  // Filled from the config file and environment.
  std::string annotation_dir = SHPAR_DEFAULT_ANNOTATION_DIR;
  std::string runtime_dir = SHPAR_DEFAULT_RUNTIME_DIR;
  std::string shell = "bash";
};

// Config file: a JSON object with optional keys "annotation_dir",
// "runtime_dir", "width" and "shell". Relative paths are taken from the
// file's directory.
inline void apply_config_file(RuntimeConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(path + ": cannot open config file");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": " + e.what());
  }
  if (!j.is_object()) throw Error(path + ": config must be a JSON object");
  auto base = std::filesystem::absolute(path).parent_path();
  auto resolve = [&](const std::string& p) { return std::filesystem::path(p).is_absolute() ? p : (base / p).string(); };
  try {
    if (j.contains("annotation_dir")) cfg.annotation_dir = resolve(j.at("annotation_dir").get<std::string>());
    if (j.contains("runtime_dir")) cfg.runtime_dir = resolve(j.at("runtime_dir").get<std::string>());
    if (j.contains("shell")) cfg.shell = j.at("shell").get<std::string>();
    if (j.contains("width") && !cfg.width) cfg.width = j.at("width").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": " + e.what());
  }
}

// SHPAR_ANNOTATIONS and SHPAR_RUNTIME override the built-in locations.
inline void apply_environment(RuntimeConfig& cfg) {
  if (const char* a = std::getenv("SHPAR_ANNOTATIONS"); a && *a) cfg.annotation_dir = a;
  if (const char* r = std::getenv("SHPAR_RUNTIME"); r && *r) cfg.runtime_dir = r;
}

struct CompileOptions {
  int width = 1;
  bool optimize = true;
  bool eager = true;
  EmitOptions emit;
};

struct CompiledRegion {
  int id = -1;
  std::string text;
  std::optional<Dfg> original;
  std::optional<Dfg> expanded;
  std::string demote_reason;  // empty when compiled
  TransformReport report;
};

struct Compilation {
  std::string source;
  std::string script;  // the program to execute
  std::optional<std::string> parse_error;
  RegionAnalysis analysis;
  std::vector<CompiledRegion> regions;
  std::vector<std::pair<std::string, double>> timings_ms;

  bool succeeded() const {
    if (parse_error) return false;
    for (const auto& r : regions) {
      if (!r.demote_reason.empty()) return false;
    }
    return true;
  }
  std::size_t compiled_count() const {
    std::size_t n = 0;
    for (const auto& r : regions) n += r.demote_reason.empty();
    return n;
  }
};

namespace detail {

class PhaseClock {
 public:
  explicit PhaseClock(std::vector<std::pair<std::string, double>>& sink) : sink_(sink) {}
  void mark(const std::string& phase) {
    auto now = std::chrono::steady_clock::now();
    sink_.emplace_back(phase, std::chrono::duration<double, std::milli>(now - last_).count());
    last_ = now;
  }

 private:
  std::vector<std::pair<std::string, double>>& sink_;
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

}  // namespace detail

// Frontend, graph lowering, expansion and emission. A parse failure or a
// demoted region never fails compilation: the affected text runs as is.
inline Compilation compile(const std::string& source, const AnnotationDb& db, const CompileOptions& opts) {
  Compilation c;
  c.source = source;
  detail::PhaseClock clock(c.timings_ms);
  Node ast;
  try {
    ast = parse_script(source);
  } catch (const ParseError& e) {
    c.parse_error = e.what();
    c.script = source;
    clock.mark("parse");
    return c;
  }
  clock.mark("parse");
  c.analysis = find_dataflow_regions(ast, db);
  clock.mark("regions");
  std::map<int, Dfg> emitted;
  for (const DataflowRegion& r : c.analysis.regions) {
    CompiledRegion cr;
    cr.id = r.id;
    cr.text = r.text;
    RegionCompile rc = region_to_dfg(r, db);
    if (!rc.dfg) {
      cr.demote_reason = rc.demote_reason;
      c.regions.push_back(std::move(cr));
      continue;
    }
    cr.original = *rc.dfg;
    if (opts.optimize) {
      ExpandOptions eo;
      eo.width = opts.width;
      eo.eager = opts.eager;
      auto [g, report] = expand(*rc.dfg, eo);
      cr.expanded = std::move(g);
      cr.report = std::move(report);
    } else {
      cr.expanded = *rc.dfg;
      cr.report.region_id = r.id;
      cr.report.nodes_before = cr.report.nodes_after = rc.dfg->node_count();
    }
    emitted.emplace(r.id, *cr.expanded);
    c.regions.push_back(std::move(cr));
  }
  clock.mark("compile");
  c.script = emit_program(source, c.analysis, emitted, opts.emit);
  clock.mark("emit");
  return c;
}

// Census of a graph by display label: command names, "agg", "eager", "split",
// "cat", "relay".
inline std::map<std::string, std::size_t> node_census(const Dfg& g) {
  std::map<std::string, std::size_t> out;
  for (const auto& [id, n] : g.nodes()) {
    switch (n.kind) {
      case DfgNodeKind::Command:
      case DfgNodeKind::Map:
        ++out[n.command.name];
        break;
      case DfgNodeKind::Aggregate:
        ++out["agg"];
        break;
      case DfgNodeKind::Relay:
        ++out[n.relay == RelayKind::Eager ? "eager" : "relay"];
        break;
      case DfgNodeKind::Split:
        ++out["split"];
        break;
      case DfgNodeKind::Cat:
        ++out["cat"];
        break;
    }
  }
  return out;
}

inline std::string compile_report(const Compilation& c) {
  std::string s;
  if (c.parse_error) s += "parse error: " + *c.parse_error + " (running the script unchanged)\n";
  s += "regions: " + std::to_string(c.regions.size()) + ", compiled: " + std::to_string(c.compiled_count()) + "\n";
  for (const auto& r : c.regions) {
    s += "region " + std::to_string(r.id) + ": " + r.text + "\n";
    if (!r.demote_reason.empty()) {
      s += "  demoted: " + r.demote_reason + "\n";
      continue;
    }
    s += r.report.text();
  }
  return s;
}

namespace detail {

inline volatile sig_atomic_t g_child_pid = 0;

inline void forward_signal(int sig) {
  if (g_child_pid > 0) ::kill(g_child_pid, sig);
}

}  // namespace detail

// Runs `script` under `shell` with inherited stdio, forwarding INT/TERM/HUP.
// Returns the exit status, 128+N if the shell died of signal N.
inline int execute_script(const std::string& script, const std::string& shell, const std::string& name,
                          const std::vector<std::string>& args) {
  std::vector<std::string> argv = {shell};
  int memfd = -1;
  if (script.size() < 100000) {
    argv.push_back("-c");
    argv.push_back(script);
  } else {
    // too long for one argument
    memfd = ::memfd_create("shpar-script", 0);
    if (memfd < 0) throw Error(std::string("memfd_create: ") + std::strerror(errno));
    if (!runtime::write_all(memfd, script)) throw Error("cannot stage the script");
    argv.push_back("-c");
    argv.push_back(". /dev/fd/" + std::to_string(memfd));
  }
  argv.push_back(name);
  argv.insert(argv.end(), args.begin(), args.end());

  std::vector<char*> cargv;
  for (auto& a : argv) cargv.push_back(a.data());
  cargv.push_back(nullptr);

  struct sigaction sa {}, old_int {}, old_term {}, old_hup {};
  sa.sa_handler = detail::forward_signal;
  sigemptyset(&sa.sa_mask);
  sa.sa_flags = SA_RESTART;

  pid_t pid = ::fork();
  if (pid < 0) throw Error(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    ::execvp(cargv[0], cargv.data());
    std::fprintf(stderr, "shpar: %s: %s\n", cargv[0], std::strerror(errno));
    ::_exit(127);
  }
  detail::g_child_pid = pid;
  ::sigaction(SIGINT, &sa, &old_int);
  ::sigaction(SIGTERM, &sa, &old_term);
  ::sigaction(SIGHUP, &sa, &old_hup);
  int st = 0;
  while (::waitpid(pid, &st, 0) < 0) {
    if (errno != EINTR) break;
  }
  detail::g_child_pid = 0;
  ::sigaction(SIGINT, &old_int, nullptr);
  ::sigaction(SIGTERM, &old_term, nullptr);
  ::sigaction(SIGHUP, &old_hup, nullptr);
  if (memfd >= 0) ::close(memfd);
  if (WIFEXITED(st)) return WEXITSTATUS(st);
  if (WIFSIGNALED(st)) return 128 + WTERMSIG(st);
  return 1;
}

inline std::string read_script_source(const RuntimeConfig& cfg) {
  if (cfg.command) return *cfg.command;
  if (!cfg.input) throw Error("no input script (give a file or -c COMMAND)");
  std::ifstream in(*cfg.input, std::ios::binary);
  if (!in) throw Error(*cfg.input + ": cannot read script");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Region listing followed by the normalized script.
inline std::string preprocessed_text(const Compilation& c) {
  std::string s;
  for (const auto& r : c.analysis.regions) s += "# region " + std::to_string(r.id) + ": " + r.text + "\n";
  if (c.parse_error) return s + c.source;
  return s + unparse(c.analysis.ast);
}

inline constexpr int kAssertFailureStatus = 3;

// The whole driver. `out` receives printed scripts, `log` diagnostics.
inline int run(RuntimeConfig cfg, std::ostream& out = std::cout, std::ostream* log_override = nullptr) {
  std::ofstream log_file;
  std::ostream* logp = log_override ? log_override : &std::cerr;
  if (cfg.log_file && !log_override) {
    log_file.open(*cfg.log_file, std::ios::app);
    if (!log_file) {
      std::cerr << "shpar: " << *cfg.log_file << ": cannot open log file\n";
      return 2;
    }
    logp = &log_file;
  }
  std::ostream& log = *logp;
  try {
    if (cfg.input && cfg.command) {
      // with -c the positional argument is $0
      cfg.script_args.insert(cfg.script_args.begin(), *cfg.input);
      cfg.input.reset();
    }
    if (cfg.config_path) apply_config_file(cfg, *cfg.config_path);
    apply_environment(cfg);
    std::string source = read_script_source(cfg);
    std::string name = cfg.input ? *cfg.input : "shpar";
    if (cfg.command && !cfg.script_args.empty()) {
      name = cfg.script_args.front();
      cfg.script_args.erase(cfg.script_args.begin());
    }

    AnnotationDb db = load_annotations(cfg.annotation_dir);
    CompileOptions co;
    WidthConfig wc;
    wc.requested = cfg.width;
    wc.cpu_count = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    co.width = wc.effective();
    co.optimize = !cfg.no_optimize;
    co.eager = !cfg.no_eager;
    co.emit.runtime_dir = cfg.runtime_dir;
    co.emit.termination = cfg.termination;

    auto t0 = std::chrono::steady_clock::now();
    Compilation c = compile(source, db, co);
    if (cfg.output_preprocessed) out << preprocessed_text(c);
    if (cfg.preprocess_only) return 0;

    if (cfg.debug >= 1) log << "width: " << co.width << "\n" << compile_report(c);
    if (cfg.debug >= 2) {
      for (const auto& r : c.regions) {
        if (r.original) log << "region " << r.id << " graph: " << dfg_to_json(*r.original).dump() << "\n";
        if (r.expanded) log << "region " << r.id << " expanded: " << dfg_to_json(*r.expanded).dump() << "\n";
      }
    }
    if (cfg.debug >= 3) log << "emitted script:\n" << c.script;
    if (cfg.output_time) {
      for (const auto& [phase, ms] : c.timings_ms) log << "time " << phase << ": " << ms << " ms\n";
    }
    if (cfg.assert_compiler_success && !c.succeeded()) {
      log << "shpar: compiler did not succeed\n";
      if (cfg.debug < 1) log << compile_report(c);
      return kAssertFailureStatus;
    }
    if (cfg.output_optimized) {
      if (cfg.dry_run_compiler) out << c.script;
      else log << c.script;
    }
    out.flush();
    if (cfg.dry_run_compiler) return 0;

    auto t1 = std::chrono::steady_clock::now();
    int status = execute_script(c.script, cfg.shell, name, cfg.script_args);
    if (cfg.output_time) {
      auto t2 = std::chrono::steady_clock::now();
      log << "time compile-total: " << std::chrono::duration<double, std::milli>(t1 - t0).count() << " ms\n";
      log << "time execute: " << std::chrono::duration<double, std::milli>(t2 - t1).count() << " ms\n";
    }
    return status;
  } catch (const std::exception& e) {
    log << "shpar: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace shpar
