#pragma once

#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "shpar/annotations.hpp"
#include "shpar/ast.hpp"
#include "shpar/dfg.hpp"
#include "shpar/parser.hpp"
#include "shpar/unparse.hpp"

namespace shpar {

struct RegionMember {
  Node node;  // Command or Pipeline
  bool background = false;
};

struct DataflowRegion {
  int id = -1;
  std::vector<RegionMember> members;
  // One environment per possible binding of enclosing loop variables; the
  // first is used for naming, all must give the same graph shape.
  std::vector<VarEnv> envs;
  bool background = false;  // the last member is backgrounded too
  std::string text;
  std::vector<std::string> inputs;   // files, or "<stdin>"
  std::vector<std::string> outputs;  // files, or "<stdout>"
};

struct RegionAnalysis {
  Node ast;  // region_id set on the nodes a region replaces
  std::vector<DataflowRegion> regions;
};

struct RegionCompile {
  std::optional<Dfg> dfg;
  std::string demote_reason;
};

namespace detail {

inline constexpr std::size_t kMaxLoopBindings = 64;

inline std::string region_text(const std::vector<RegionMember>& members, bool background) {
  std::string s;
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (i) s += ' ';
    s += unparse(members[i].node);
    if (members[i].background && (i + 1 < members.size() || background)) s += " &";
  }
  return s;
}

inline bool is_state_clearing_command(std::string_view name) {
  static const std::set<std::string, std::less<>> kClear = {"eval", "source", ".", "set", "let", "exec", "trap",
                                                            "alias", "builtin", "command", "shopt"};
  return kClear.count(name) > 0;
}

inline bool is_name_setting_command(std::string_view name) {
  static const std::set<std::string, std::less<>> kSet = {"read",  "mapfile", "readarray", "getopts", "unset",
                                                          "export", "declare", "typeset",  "local",   "readonly",
                                                          "printf"};
  return kSet.count(name) > 0;
}

class RegionFinder {
 public:
  RegionFinder(const AnnotationDb& db, std::set<std::string> functions) : db_(db), functions_(std::move(functions)) {}

  std::vector<DataflowRegion> regions;

  void visit_sequence(Node& seq, std::vector<VarEnv>& envs) {
    std::size_t i = 0;
    while (i < seq.children.size()) {
      std::vector<RegionMember> members;
      std::size_t j = i;
      bool trailing_bg = false;
      while (j < seq.children.size()) {
        Node& c = seq.children[j];
        if (c.kind == NodeKind::Background && eligible(c.children.front(), envs)) {
          members.push_back({c.children.front(), true});
          trailing_bg = true;
          ++j;
          continue;
        }
        if (c.kind != NodeKind::Background && eligible(c, envs)) {
          members.push_back({c, false});
          trailing_bg = false;
          ++j;
        }
        break;
      }
      if (members.empty()) {
        visit_item(seq.children[i], envs);
        ++i;
        continue;
      }
      int id = add_region(std::move(members), envs, trailing_bg);
      for (std::size_t k = i; k < j; ++k) {
        seq.children[k].region_id = id;
        apply_effects(seq.children[k], envs);
      }
      i = j;
    }
  }

 private:
  const AnnotationDb& db_;
  std::set<std::string> functions_;

  int add_region(std::vector<RegionMember> members, const std::vector<VarEnv>& envs, bool background) {
    DataflowRegion r;
    r.id = static_cast<int>(regions.size());
    r.members = std::move(members);
    r.envs = envs;
    r.background = background;
    r.text = region_text(r.members, background);
    regions.push_back(std::move(r));
    return regions.back().id;
  }

  bool eligible_command(const Node& c, const std::vector<VarEnv>& envs) const {
    if (c.kind != NodeKind::Command || !c.assignments.empty() || c.words.empty()) return false;
    for (const VarEnv& env : envs) {
      for (const Word& w : c.words) {
        if (!resolve_word(w, env)) return false;
      }
      auto name = resolve_word(c.words.front(), env);
      if (functions_.count(*name)) return false;
      int ins = 0, outs = 0;
      for (const Redirect& r : c.redirects) {
        switch (r.op) {
          case RedirectOp::In:
            if (r.effective_fd() != 0) return false;
            ++ins;
            break;
          case RedirectOp::Out:
          case RedirectOp::Append:
          case RedirectOp::Clobber:
            if (r.effective_fd() != 1) return false;
            ++outs;
            break;
          default:
            return false;
        }
        auto t = resolve_word(r.target, env);
        if (!t || t->empty()) return false;
      }
      if (ins > 1 || outs > 1) return false;
    }
    return true;
  }

  bool eligible(const Node& n, const std::vector<VarEnv>& envs) const {
    if (envs.empty()) return false;
    if (n.kind == NodeKind::Command) return eligible_command(n, envs);
    if (n.kind == NodeKind::Pipeline && !n.negated) {
      for (const Node& c : n.children) {
        if (!eligible_command(c, envs)) return false;
      }
      return true;
    }
    return false;
  }

  static void erase_names(std::vector<VarEnv>& envs, const std::set<std::string>& names) {
    for (VarEnv& e : envs) {
      for (const auto& n : names) e.erase(n);
    }
  }

  static void clear_all(std::vector<VarEnv>& envs) {
    envs.assign(1, VarEnv{});
  }

  // Names a statement may assign, and whether it may change anything.
  void summarize(const Node& n, std::set<std::string>& names, bool& clears) const {
    switch (n.kind) {
      case NodeKind::Assignment:
        for (const auto& a : n.assignments) names.insert(a.name);
        break;
      case NodeKind::Command: {
        if (n.words.empty()) break;
        auto name = resolve_word(n.words.front(), VarEnv{});
        if (!name || is_state_clearing_command(*name) || functions_.count(*name)) {
          clears = true;
        } else if (is_name_setting_command(*name)) {
          for (std::size_t i = 1; i < n.words.size(); ++i) {
            std::string w = n.words[i].raw;
            std::size_t eq = w.find('=');
            if (eq != std::string::npos) w = w.substr(0, eq);
            if (detail::is_valid_name(w)) names.insert(w);
            else if (w.empty() || w[0] != '-') clears = true;
          }
        }
        break;
      }
      case NodeKind::ForLoop:
        names.insert(n.loop_var);
        for (const Node& c : n.children) summarize(c, names, clears);
        break;
      case NodeKind::Unparsed:
        clears = true;
        break;
      case NodeKind::Pipeline:
      case NodeKind::Background:
      case NodeKind::Subshell:
        break;  // runs in a subshell
      default:
        for (const Node& c : n.children) summarize(c, names, clears);
    }
  }

  void apply_effects(const Node& n, std::vector<VarEnv>& envs) const {
    if (n.kind == NodeKind::Assignment) {
      for (VarEnv& env : envs) {
        for (const auto& a : n.assignments) {
          auto v = resolve_word(a.value, env);
          if (v) {
            env[a.name] = *v;
          } else {
            env.erase(a.name);
          }
        }
      }
      return;
    }
    std::set<std::string> names;
    bool clears = false;
    summarize(n, names, clears);
    if (clears) {
      clear_all(envs);
    } else {
      erase_names(envs, names);
    }
  }

  void visit_item(Node& n, std::vector<VarEnv>& envs) {
    switch (n.kind) {
      case NodeKind::AndOr: {
        std::set<std::string> names;
        bool clears = false;
        for (std::size_t i = 1; i < n.children.size(); ++i) summarize(n.children[i], names, clears);
        for (std::size_t i = 0; i < n.children.size(); ++i) {
          Node& c = n.children[i];
          if (eligible(c, envs)) {
            c.region_id = add_region({{c, false}}, envs, false);
            apply_effects(c, envs);
          } else {
            visit_item(c, envs);
          }
        }
        // later operands run conditionally
        if (clears) {
          clear_all(envs);
        } else {
          erase_names(envs, names);
        }
        break;
      }
      case NodeKind::Background: {
        std::vector<VarEnv> copy = envs;
        visit_item(n.children.front(), copy);
        break;
      }
      case NodeKind::Subshell: {
        std::vector<VarEnv> copy = envs;
        visit_sequence(n.children.front(), copy);
        break;
      }
      case NodeKind::Sequence:
        visit_sequence(n, envs);
        break;
      case NodeKind::ForLoop: {
        std::set<std::string> names;
        bool clears = false;
        summarize(n, names, clears);
        std::vector<VarEnv> outer = envs;
        if (clears) {
          clear_all(outer);
        } else {
          erase_names(outer, names);
        }
        std::vector<VarEnv> body;
        bool known = n.loop_has_in;
        for (const VarEnv& base : outer) {
          if (!known) break;
          std::vector<std::string> values;
          for (const Word& w : n.loop_words) {
            auto v = resolve_word(w, base);
            if (!v || v->empty() || v->front() == '-' || detail::has_field_split_char(*v) ||
                detail::has_glob_char(*v)) {
              known = false;
              break;
            }
            values.push_back(*v);
          }
          for (const auto& v : values) {
            VarEnv e = base;
            e[n.loop_var] = v;
            body.push_back(std::move(e));
          }
          if (body.size() > kMaxLoopBindings) known = false;
        }
        if (!known || body.empty()) body = outer;
        visit_sequence(n.children.front(), body);
        envs = std::move(outer);
        break;
      }
      default:
        apply_effects(n, envs);
    }
  }
};

inline std::set<std::string> function_names(const Node& n) {
  std::set<std::string> out;
  if (n.kind == NodeKind::Unparsed) {
    static const std::regex re(R"((?:^|[\s;&|(])(?:function\s+)?([A-Za-z_][A-Za-z0-9_]*)\s*\(\s*\))");
    for (auto it = std::sregex_iterator(n.raw.begin(), n.raw.end(), re); it != std::sregex_iterator(); ++it) {
      out.insert((*it)[1].str());
    }
    static const std::regex re2(R"(function\s+([A-Za-z_][A-Za-z0-9_]*))");
    for (auto it = std::sregex_iterator(n.raw.begin(), n.raw.end(), re2); it != std::sregex_iterator(); ++it) {
      out.insert((*it)[1].str());
    }
  }
  for (const Node& c : n.children) {
    auto sub = function_names(c);
    out.insert(sub.begin(), sub.end());
  }
  return out;
}

struct DfgBuildResult {
  std::optional<Dfg> dfg;
  std::string reason;
};

inline DfgBuildResult build_dfg(const DataflowRegion& region, const VarEnv& env, const AnnotationDb& db) {
  DfgBuildResult res;
  auto fail = [&](std::string why) {
    res.dfg.reset();
    res.reason = std::move(why);
    return res;
  };
  Dfg g;
  g.region_id = region.id;
  std::set<std::string> read_files, written_files;
  std::optional<EdgeId> status_edge;
  bool stdin_used = false;
  for (std::size_t m = 0; m < region.members.size(); ++m) {
    const RegionMember& member = region.members[m];
    std::vector<const Node*> cmds;
    if (member.node.kind == NodeKind::Command) {
      cmds.push_back(&member.node);
    } else {
      for (const Node& c : member.node.children) cmds.push_back(&c);
    }
    std::optional<EdgeId> pipe_in;
    for (std::size_t ci = 0; ci < cmds.size(); ++ci) {
      const Node& c = *cmds[ci];
      std::vector<std::string> values;
      for (const Word& w : c.words) {
        auto v = resolve_word(w, env);
        if (!v) return fail("word '" + w.raw + "' has no known value");
        values.push_back(*v);
      }
      std::vector<std::string> args(values.begin() + 1, values.end());
      CommandInstance inst = classify(values[0], args, db);
      if (inst.cls == ParClass::SideEffectful) {
        return fail("command '" + values[0] + "' is side-effectful or unannotated (" + inst.reason + ")");
      }
      const Redirect* in_redir = nullptr;
      const Redirect* out_redir = nullptr;
      for (const Redirect& r : c.redirects) {
        if (r.op == RedirectOp::In) in_redir = &r;
        else out_redir = &r;
      }
      std::size_t stdin_refs = 0;
      for (const auto& s : inst.inputs) stdin_refs += s.kind == StreamRef::Kind::Stdin;
      if (stdin_refs > 1) return fail("'" + values[0] + "' reads stdin more than once");
      if (pipe_in && (stdin_refs == 0 || in_redir)) return fail("'" + values[0] + "' ignores its pipe input");
      if (in_redir && stdin_refs == 0) return fail("'" + values[0] + "' ignores its input redirection");
      if (inst.outputs.size() != 1 || inst.outputs[0].kind != StreamRef::Kind::Stdout) {
        return fail("'" + values[0] + "' has outputs other than stdout");
      }
      for (const auto& s : inst.config) {
        if (s.kind != StreamRef::Kind::Arg) return fail("'" + values[0] + "' reads configuration from stdin");
      }

      DfgNode node;
      node.kind = DfgNodeKind::Command;
      node.command.name_raw = c.words[0].raw;
      node.command.name = values[0];
      node.command.cls = inst.cls;
      node.command.arg_values = args;
      node.command.parsed = inst.parsed;
      std::map<std::size_t, int> stream_slot, config_slot;
      for (std::size_t k = 0; k < inst.inputs.size(); ++k) {
        const StreamRef& s = inst.inputs[k];
        EdgeId e;
        if (s.kind == StreamRef::Kind::Stdin) {
          if (in_redir) {
            std::string path = *resolve_word(in_redir->target, env);
            e = g.add_edge(EdgeKind::NamedFile, in_redir->target.raw, path);
            read_files.insert(path);
          } else if (pipe_in) {
            e = *pipe_in;
          } else if (member.background) {
            e = g.add_edge(EdgeKind::NamedFile, "/dev/null", "/dev/null");
          } else {
            if (stdin_used) return fail("two commands read the region's stdin");
            stdin_used = true;
            e = g.add_edge(EdgeKind::Stdin);
          }
          node.command.stdin_slot = static_cast<int>(k);
        } else {
          e = g.add_edge(EdgeKind::NamedFile, c.words[s.arg_index + 1].raw, s.path);
          read_files.insert(s.path);
          stream_slot[s.arg_index] = static_cast<int>(k);
        }
        node.inputs.push_back(e);
      }
      for (std::size_t k = 0; k < inst.config.size(); ++k) {
        const StreamRef& s = inst.config[k];
        node.config_inputs.push_back(g.add_edge(EdgeKind::NamedFile, c.words[s.arg_index + 1].raw, s.path));
        read_files.insert(s.path);
        config_slot[s.arg_index] = static_cast<int>(k);
      }
      for (std::size_t a = 0; a < args.size(); ++a) {
        ArgPiece p;
        p.raw = c.words[a + 1].raw;
        p.value = args[a];
        if (auto it = stream_slot.find(a); it != stream_slot.end()) {
          p.kind = ArgPiece::Kind::Stream;
          p.slot = it->second;
        } else if (auto it2 = config_slot.find(a); it2 != config_slot.end()) {
          p.kind = ArgPiece::Kind::Config;
          p.slot = it2->second;
        }
        node.command.args.push_back(std::move(p));
      }
      EdgeId out;
      if (out_redir) {
        std::string path = *resolve_word(out_redir->target, env);
        out = g.add_edge(EdgeKind::NamedFile, out_redir->target.raw, path);
        g.edge(out).append = out_redir->op == RedirectOp::Append;
        if (path != "/dev/null" && !written_files.insert(path).second) {
          return fail("file '" + path + "' is written twice");
        }
        pipe_in.reset();
        if (ci + 1 < cmds.size()) {
          // the next command gets an empty pipe
          return fail("'" + values[0] + "' redirects away its pipe output");
        }
      } else if (ci + 1 < cmds.size()) {
        out = g.add_edge(EdgeKind::EphemeralPipe);
        pipe_in = out;
      } else {
        out = g.add_edge(EdgeKind::Stdout);
      }
      node.outputs.push_back(out);
      g.add_node(std::move(node));
      if (ci + 1 == cmds.size() && m + 1 == region.members.size()) status_edge = out;
    }
  }
  for (const auto& f : written_files) {
    if (read_files.count(f)) return fail("file '" + f + "' is both read and written");
  }
  g.status_output = status_edge;
  g.background = region.background;
  res.dfg = std::move(g);
  return res;
}

inline nlohmann::ordered_json shape_of(const Dfg& g) {
  auto j = dfg_to_json(g);
  for (auto& e : j["edges"]) e.erase("resource");
  return j;
}

}  // namespace detail

// Marks maximal `|`/`&` regions of eligible commands; `;`, `&&`, `||`,
// loops and unknown constructs are barriers.
inline RegionAnalysis find_dataflow_regions(const Node& ast, const AnnotationDb& db) {
  RegionAnalysis out;
  out.ast = ast;
  detail::RegionFinder finder(db, detail::function_names(ast));
  std::vector<VarEnv> envs(1);
  if (out.ast.kind == NodeKind::Sequence) {
    finder.visit_sequence(out.ast, envs);
  }
  out.regions = std::move(finder.regions);
  for (DataflowRegion& r : out.regions) {
    auto built = detail::build_dfg(r, r.envs.front(), db);
    if (!built.dfg) continue;
    for (const auto& [id, e] : built.dfg->edges()) {
      if (e.is_graph_input()) r.inputs.push_back(e.kind == EdgeKind::Stdin ? "<stdin>" : e.resource);
      if (e.is_graph_output()) r.outputs.push_back(e.kind == EdgeKind::Stdout ? "<stdout>" : e.resource);
    }
  }
  return out;
}

// Lowers a region to a graph, or explains why it stays sequential.
inline RegionCompile region_to_dfg(const DataflowRegion& region, const AnnotationDb& db) {
  RegionCompile out;
  if (region.envs.empty()) {
    out.demote_reason = "no environment";
    return out;
  }
  auto first = detail::build_dfg(region, region.envs.front(), db);
  if (!first.dfg) {
    out.demote_reason = first.reason;
    return out;
  }
  auto shape = detail::shape_of(*first.dfg);
  for (std::size_t i = 1; i < region.envs.size(); ++i) {
    auto other = detail::build_dfg(region, region.envs[i], db);
    if (!other.dfg) {
      out.demote_reason = "loop iteration: " + other.reason;
      return out;
    }
    if (detail::shape_of(*other.dfg) != shape) {
      out.demote_reason = "graph shape depends on the loop variable";
      return out;
    }
  }
  out.dfg = std::move(first.dfg);
  return out;
}

}  // namespace shpar
