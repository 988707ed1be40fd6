#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "shpar/ast.hpp"
#include "shpar/dfg.hpp"
#include "shpar/error.hpp"
#include "shpar/regions.hpp"

#ifndef SHPAR_DEFAULT_RUNTIME_DIR
#define SHPAR_DEFAULT_RUNTIME_DIR "/usr/local/lib/shpar"
#endif

namespace shpar {

enum class Termination { CleanUpGraph, DrainStream };

struct EmitOptions {
  std::string runtime_dir = SHPAR_DEFAULT_RUNTIME_DIR;
  Termination termination = Termination::CleanUpGraph;
  int grace_ticks = 20;  // 50ms each, before PIPE escalates to TERM
};

struct EmitProcess {
  std::string command;                  // shell text, without the trailing `&`
  std::optional<NodeId> node;           // unset for partition readers
  std::optional<EdgeId> partition_edge;  // set for partition readers
};

// Concrete artifacts of lowering one graph.
struct EmitPlan {
  std::string function_name;
  std::vector<std::string> fifos;         // names inside the run directory, e.g. "e12"
  std::vector<EmitProcess> processes;     // launch order
  std::vector<std::size_t> wait_set;      // indices of output producers; status producer last
  std::vector<std::size_t> status_group;  // other processes whose statuses fold into the region's
  bool structural_status = false;          // status producer is a cat/relay; only the group's statuses count
  std::vector<std::pair<std::string, std::size_t>> drains;  // fifo, index of its writer
  bool uses_stdin = false;
  bool background = false;
  std::string temp_dir_template = "${TMPDIR:-/tmp}/shpar-XXXXXXXX";
  std::vector<std::string> newline_files;  // shell words; see Dfg::newline_terminated
  std::shared_ptr<EmitPlan> fallback;      // runs when one of them does not end a line
};

namespace detail {

inline std::string fifo_name(EdgeId e) { return "e" + std::to_string(e); }
inline std::string fifo_ref(EdgeId e) { return "\"$_sp_d/" + fifo_name(e) + "\""; }

inline bool edge_is_fifo(const DfgEdge& e) { return e.is_internal() || (e.is_graph_input() && e.partition); }

inline std::string sh_quote(const std::string& s) {
  if (!s.empty() && s.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-./=:,+@%") ==
                        std::string::npos) {
    return s;
  }
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

class PlanBuilder {
 public:
  PlanBuilder(const Dfg& g, const EmitOptions& opts) : g_(g), opts_(opts) {}

  EmitPlan build() {
    plan_.function_name = "_shpar_region_" + std::to_string(std::max(0, g_.region_id));
    plan_.background = g_.background;
    if (g_.empty()) return plan_;
    if (g_.sequential && !g_.newline_terminated.empty()) {
      plan_.fallback = std::make_shared<EmitPlan>(PlanBuilder(*g_.sequential, opts_).build());
      plan_.fallback->function_name = plan_.function_name + "_seq";
      for (const auto& [resolved, raw] : g_.newline_terminated) {
        plan_.newline_files.push_back(raw.empty() ? sh_quote(resolved) : raw);
      }
    }
    auto order = g_.topological_order();
    if (!order) throw Error("emit: graph has a cycle");
    auto report = validate(g_);
    if (!report.ok()) throw Error("emit: invalid graph: " + report.errors.front());

    for (const auto& [id, e] : g_.edges()) {
      if (edge_is_fifo(e)) plan_.fifos.push_back(fifo_name(id));
    }
    for (const auto& [id, e] : g_.edges()) {
      if (e.is_graph_input() && e.partition) {
        EmitProcess p;
        p.partition_edge = id;
        p.command = "\"$_sp_rt/split\" --ranges " + e.resource_raw + " " + std::to_string(e.partition->count) + " " +
                    std::to_string(e.partition->index) + " > " + fifo_ref(id);
        writer_[id] = plan_.processes.size();
        plan_.processes.push_back(std::move(p));
      }
    }
    for (NodeId id : *order) {
      EmitProcess p;
      p.node = id;
      p.command = command_for(g_.node(id));
      proc_of_[id] = plan_.processes.size();
      for (EdgeId e : g_.node(id).outputs) writer_[e] = plan_.processes.size();
      plan_.processes.push_back(std::move(p));
    }

    std::optional<NodeId> status_node;
    if (g_.status_output && g_.has_edge(*g_.status_output)) status_node = g_.edge(*g_.status_output).producer;
    std::set<std::size_t> waits;
    for (EdgeId e : g_.output_edges()) {
      auto prod = g_.edge(e).producer;
      if (prod && prod != status_node) waits.insert(proc_of_.at(*prod));
    }
    plan_.wait_set.assign(waits.begin(), waits.end());
    if (status_node) {
      std::size_t s = proc_of_.at(*status_node);
      plan_.wait_set.erase(std::remove(plan_.wait_set.begin(), plan_.wait_set.end(), s), plan_.wait_set.end());
      plan_.wait_set.push_back(s);
      // copies of the original status command answer for it together
      NodeId origin = g_.node(*status_node).origin;
      DfgNodeKind sk = g_.node(*status_node).kind;
      plan_.structural_status = sk != DfgNodeKind::Command && sk != DfgNodeKind::Map && sk != DfgNodeKind::Aggregate;
      for (const auto& [id, n] : g_.nodes()) {
        if (id == *status_node || n.origin != origin) continue;
        if (n.kind == DfgNodeKind::Command || n.kind == DfgNodeKind::Map || n.kind == DfgNodeKind::Aggregate) {
          plan_.status_group.push_back(proc_of_.at(id));
        }
      }
      std::sort(plan_.status_group.begin(), plan_.status_group.end());
    }
    for (const auto& [id, e] : g_.edges()) {
      if (edge_is_fifo(e)) plan_.drains.emplace_back(fifo_name(id), writer_.at(id));
    }
    return plan_;
  }

 private:
  // Path argument for reading edge `e` as a file operand.
  std::string input_path(EdgeId id) {
    const DfgEdge& e = g_.edge(id);
    if (edge_is_fifo(e)) return fifo_ref(id);
    if (e.kind == EdgeKind::Stdin) {
      plan_.uses_stdin = true;
      return "/dev/fd/\"$_sp_in\"";
    }
    return e.resource_raw.empty() ? sh_quote(e.resource) : e.resource_raw;
  }

  std::string stdin_redirect(EdgeId id) {
    const DfgEdge& e = g_.edge(id);
    if (e.kind == EdgeKind::Stdin && !edge_is_fifo(e)) {
      plan_.uses_stdin = true;
      return " <&\"$_sp_in\"";
    }
    return " < " + input_path(id);
  }

  std::string output_redirect(EdgeId id) {
    const DfgEdge& e = g_.edge(id);
    if (edge_is_fifo(e)) return " > " + fifo_ref(id);
    if (e.kind == EdgeKind::Stdout) return "";
    std::string target = e.resource_raw.empty() ? sh_quote(e.resource) : e.resource_raw;
    return (e.append ? " >> " : " > ") + target;
  }

  // File path for an output opened by the program itself.
  std::string output_path(EdgeId id) {
    const DfgEdge& e = g_.edge(id);
    if (edge_is_fifo(e)) return fifo_ref(id);
    if (e.kind == EdgeKind::Stdout) return "";
    return e.resource_raw.empty() ? sh_quote(e.resource) : e.resource_raw;
  }

  std::string command_for(const DfgNode& n) {
    std::string s;
    switch (n.kind) {
      case DfgNodeKind::Command:
      case DfgNodeKind::Map: {
        const CommandSpec& c = n.command;
        s = c.name_raw.empty() ? sh_quote(c.name) : c.name_raw;
        for (const ArgPiece& p : c.args) {
          s += ' ';
          switch (p.kind) {
            case ArgPiece::Kind::Literal:
            case ArgPiece::Kind::Config:
              s += p.raw.empty() ? sh_quote(p.value) : p.raw;
              break;
            case ArgPiece::Kind::Stream:
              s += input_path(n.inputs.at(static_cast<std::size_t>(p.slot)));
              break;
          }
        }
        if (c.stdin_slot) s += stdin_redirect(n.inputs.at(static_cast<std::size_t>(*c.stdin_slot)));
        s += output_redirect(n.outputs.at(0));
        break;
      }
      case DfgNodeKind::Cat:
        s = "cat";
        for (EdgeId e : n.inputs) s += " " + input_path(e);
        s += output_redirect(n.outputs.at(0));
        break;
      case DfgNodeKind::Split:
        s = "\"$_sp_rt/split\" " + std::to_string(n.outputs.size());
        for (EdgeId e : n.outputs) {
          std::string p = output_path(e);
          if (p.empty()) throw Error("emit: split output cannot be stdout");
          s += " " + p;
        }
        s += stdin_redirect(n.inputs.at(0));
        break;
      case DfgNodeKind::Relay:
        if (n.relay == RelayKind::Eager) {
          // eager opens its output on its own writer thread
          const DfgEdge& out = g_.edge(n.outputs.at(0));
          s = "\"$_sp_rt/eager\"";
          if (out.append) {
            s += stdin_redirect(n.inputs.at(0)) + output_redirect(n.outputs.at(0));
          } else {
            std::string p = output_path(n.outputs.at(0));
            if (!p.empty()) s += " " + p;
            s += stdin_redirect(n.inputs.at(0));
          }
        } else {
          s = "cat" + stdin_redirect(n.inputs.at(0)) + output_redirect(n.outputs.at(0));
        }
        break;
      case DfgNodeKind::Aggregate:
        if (n.aggregate_program.empty()) throw Error("emit: aggregate node without a program");
        s = "\"$_sp_rt/" + n.aggregate_program + "\"";
        for (const ArgPiece& p : n.aggregate_args) s += " " + (p.raw.empty() ? sh_quote(p.value) : p.raw);
        for (EdgeId e : n.inputs) s += " " + input_path(e);
        s += output_redirect(n.outputs.at(0));
        break;
    }
    return s;
  }

  const Dfg& g_;
  const EmitOptions& opts_;
  EmitPlan plan_;
  std::map<NodeId, std::size_t> proc_of_;
  std::map<EdgeId, std::size_t> writer_;
};

inline std::string pid_ref(std::size_t i) { return "\"${_sp_pids[" + std::to_string(i) + "]}\""; }

}  // namespace detail

inline EmitPlan plan_emission(const Dfg& g, const EmitOptions& opts = {}) {
  return detail::PlanBuilder(g, opts).build();
}

// Shared helpers and traps; emitted once per script.
inline std::string emit_prelude(const EmitOptions& opts = {}) {
  std::string s;
  s += "# shpar runtime support\n";
  s += "_shpar_all=()\n";
  s += "_shpar_dirs=()\n";
  s += "_shpar_abort() {\n";
  s += "  local _i _x\n";
  s += "  local -a _v=(\"${_shpar_all[@]}\")\n";
  // a trap can run between `cmd &` and recording $!, so the newest child may be missing
  s += "  if [ ${#_shpar_dirs[@]} -gt 0 ] && [ -n \"$!\" ]; then _v+=(\"$!\"); fi\n";
  // consumers first, so nothing downstream reports a truncated input
  s += "  for ((_i = ${#_v[@]} - 1; _i >= 0; _i--)); do kill -TERM \"${_v[_i]}\" 2>/dev/null || true; done\n";
  // a child still between fork and exec can lose the first signal
  s += "  for _x in \"${_v[@]}\"; do\n";
  s += "    if kill -0 \"$_x\" 2>/dev/null; then sleep 0.05; kill -TERM \"${_v[@]}\" 2>/dev/null; break; fi\n";
  s += "  done\n";
  s += "  for _x in \"${_shpar_dirs[@]}\"; do rm -rf \"$_x\"; done\n";
  s += "  _shpar_all=()\n";
  s += "  _shpar_dirs=()\n";
  s += "}\n";
  s += "_shpar_reap() {\n";
  s += "  local _i _p _live=\n";
  s += "  for ((_i = 0; _i < " + std::to_string(opts.grace_ticks) + "; _i++)); do\n";
  s += "    _live=\n";
  s += "    for _p in \"$@\"; do kill -0 \"$_p\" 2>/dev/null && _live=1; done\n";
  s += "    [ -z \"$_live\" ] && break\n";
  s += "    sleep 0.05\n";
  s += "  done\n";
  s += "  if [ -n \"$_live\" ]; then kill -TERM \"$@\" 2>/dev/null || true; fi\n";
  s += "  wait \"$@\" 2>/dev/null\n";
  s += "  return 0\n";
  s += "}\n";
  // status of a parallelized command: any hard failure wins, then any success
  s += "_shpar_fold() {\n";
  s += "  local _r=$1 _p _c _e=0\n";
  s += "  shift\n";
  s += "  if [ \"$_r\" -gt 1 ]; then _e=$_r; fi\n";
  s += "  for _p in \"$@\"; do\n";
  s += "    wait \"$_p\" && _c=0 || _c=$?\n";
  s += "    if [ \"$_c\" -eq 0 ]; then _r=0; elif [ \"$_c\" -gt 1 ] && [ \"$_e\" -eq 0 ]; then _e=$_c; fi\n";
  s += "  done\n";
  s += "  if [ \"$_e\" -ne 0 ]; then return \"$_e\"; fi\n";
  s += "  return \"$_r\"\n";
  s += "}\n";
  // every named file is empty or ends with a newline
  s += "_shpar_lines_end() {\n";
  s += "  local _f\n";
  s += "  for _f in \"$@\"; do\n";
  s += "    [ -s \"$_f\" ] || continue\n";
  s += "    [ \"$(tail -c 1 -- \"$_f\" | od -An -tx1)\" = \" 0a\" ] || return 1\n";
  s += "  done\n";
  s += "}\n";
  s += "trap '_shpar_abort' EXIT\n";
  s += "trap '_shpar_abort; trap - INT; kill -INT $$' INT\n";
  s += "trap '_shpar_abort; trap - TERM; kill -TERM $$' TERM\n";
  return s;
}

inline std::string render_region(const EmitPlan& plan, const EmitOptions& opts = {}) {
  using detail::pid_ref;
  std::string s;
  if (plan.fallback) s += render_region(*plan.fallback, opts);
  s += plan.function_name + "() {\n";
  if (plan.processes.empty()) {
    s += "  return 0\n}\n";
    return s;
  }
  if (plan.fallback) {
    s += "  if ! _shpar_lines_end";
    for (const auto& f : plan.newline_files) s += " " + f;
    s += "; then " + plan.fallback->function_name + "; return $?; fi\n";
  }
  s += "  local _sp_d _sp_s=0 _sp_in=0\n";
  s += "  local _sp_rt=\"${SHPAR_RUNTIME:-" + opts.runtime_dir + "}\"\n";
  s += "  local -a _sp_pids=() _sp_outs=()\n";
  s += "  _sp_d=\"$(mktemp -d \"" + plan.temp_dir_template + "\")\" || return 1\n";
  s += "  _shpar_dirs+=(\"$_sp_d\")\n";
  if (!plan.fifos.empty()) {
    s += "  mkfifo";
    for (const auto& f : plan.fifos) s += " \"$_sp_d/" + f + "\"";
    s += " || { rm -rf \"$_sp_d\"; return 1; }\n";
  }
  if (plan.uses_stdin) s += "  exec {_sp_in}<&0\n";
  for (const auto& p : plan.processes) {
    s += "  " + p.command + " &\n";
    s += "  _sp_pids+=($!); _shpar_all+=($!)\n";
  }
  s += "  _sp_outs=(";
  for (std::size_t i = 0; i < plan.wait_set.size(); ++i) s += (i ? " " : "") + pid_ref(plan.wait_set[i]);
  s += ")\n";
  s += "  wait \"${_sp_outs[@]}\" && _sp_s=0 || _sp_s=$?\n";
  if (opts.termination == Termination::DrainStream) {
    s += "  local -a _sp_drains=()\n";
    for (const auto& [fifo, writer] : plan.drains) {
      s += "  \"$_sp_rt/eager\" --drain \"$_sp_d/" + fifo + "\" --pid " + pid_ref(writer) +
           " & _sp_drains+=($!); _shpar_all+=($!)\n";
    }
    if (!plan.status_group.empty()) {
      if (plan.structural_status) s += "  if [ \"$_sp_s\" -eq 0 ]; then _sp_s=1; fi\n";
      s += "  _shpar_fold \"$_sp_s\"";
      for (std::size_t i : plan.status_group) s += " " + pid_ref(i);
      s += " && _sp_s=0 || _sp_s=$?\n";
    }
    s += "  wait \"${_sp_drains[@]}\" \"${_sp_pids[@]}\" 2>/dev/null || true\n";
  } else {
    // group members feed the outputs, so they are finished or finishing here
    if (!plan.status_group.empty()) {
      if (plan.structural_status) s += "  if [ \"$_sp_s\" -eq 0 ]; then _sp_s=1; fi\n";
      s += "  _shpar_fold \"$_sp_s\"";
      for (std::size_t i : plan.status_group) s += " " + pid_ref(i);
      s += " && _sp_s=0 || _sp_s=$?\n";
    }
    s += "  kill -PIPE \"${_sp_pids[@]}\" 2>/dev/null || true\n";
    s += "  _shpar_reap \"${_sp_pids[@]}\"\n";
  }
  if (plan.uses_stdin) s += "  exec {_sp_in}<&-\n";
  s += "  rm -rf \"$_sp_d\"\n";
  s += "  _shpar_all=()\n";
  s += "  _shpar_dirs=()\n";
  s += "  return \"$_sp_s\"\n";
  s += "}\n";
  return s;
}

// The call that stands in for a region in the program text.
inline std::string region_call(const EmitPlan& plan) {
  if (!plan.background) return plan.function_name;
  // background subshells do not inherit traps
  return "{ trap '_shpar_abort' EXIT; trap '_shpar_abort; exit 143' TERM; " + plan.function_name + "; } &";
}

// A standalone script running one graph.
inline std::string emit_script(const Dfg& g, const EmitOptions& opts = {}) {
  if (g.empty()) return "";
  EmitPlan plan = plan_emission(g, opts);
  std::string s = "#!/bin/bash\n";
  s += emit_prelude(opts);
  s += render_region(plan, opts);
  s += region_call(plan) + "\n";
  return s;
}

namespace detail {

inline void collect_region_spans(const Node& n, const std::map<int, Dfg>& compiled,
                                 std::vector<std::pair<Span, int>>& out) {
  if (n.kind == NodeKind::Sequence) {
    std::size_t i = 0;
    while (i < n.children.size()) {
      int r = n.children[i].region_id;
      if (r >= 0 && compiled.count(r)) {
        std::size_t j = i;
        while (j + 1 < n.children.size() && n.children[j + 1].region_id == r) ++j;
        out.push_back({{n.children[i].span.begin, n.children[j].span.end}, r});
        i = j + 1;
        continue;
      }
      collect_region_spans(n.children[i], compiled, out);
      ++i;
    }
    return;
  }
  if (n.kind == NodeKind::AndOr) {
    for (const Node& c : n.children) {
      if (c.region_id >= 0 && compiled.count(c.region_id)) {
        out.push_back({c.span, c.region_id});
      } else {
        collect_region_spans(c, compiled, out);
      }
    }
    return;
  }
  for (const Node& c : n.children) collect_region_spans(c, compiled, out);
}

}  // namespace detail

// Rewrites `source` with every compiled region replaced by a call to its
// emitted function. Everything else is kept byte for byte.
inline std::string emit_program(const std::string& source, const RegionAnalysis& analysis,
                                const std::map<int, Dfg>& compiled, const EmitOptions& opts = {}) {
  std::vector<std::pair<Span, int>> spans;
  detail::collect_region_spans(analysis.ast, compiled, spans);
  if (spans.empty()) return source;
  std::sort(spans.begin(), spans.end(), [](const auto& a, const auto& b) { return a.first.begin < b.first.begin; });

  std::string functions;
  std::map<int, std::string> calls;
  for (const auto& [id, g] : compiled) {
    EmitPlan plan = plan_emission(g, opts);
    functions += render_region(plan, opts);
    calls[id] = region_call(plan);
  }

  std::string body;
  std::size_t pos = 0;
  for (const auto& [span, id] : spans) {
    body.append(source, pos, span.begin - pos);
    body += calls.at(id);
    pos = span.end;
  }
  body.append(source, pos, std::string::npos);

  std::string head;
  if (body.rfind("#!", 0) == 0) {
    auto nl = body.find('\n');
    head = body.substr(0, nl == std::string::npos ? body.size() : nl + 1);
    if (nl == std::string::npos) head += '\n';
    body = nl == std::string::npos ? std::string() : body.substr(nl + 1);
  }
  return head + emit_prelude(opts) + functions + "# end shpar support\n" + body;
}

}  // namespace shpar
