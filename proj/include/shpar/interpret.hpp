#pragma once

#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "shpar/dfg.hpp"
#include "shpar/error.hpp"
#include "shpar/process.hpp"
#include "shpar/runtime/aggregators.hpp"
#include "shpar/runtime/io.hpp"
#include "shpar/runtime/split.hpp"

namespace shpar {

class InterpretError : public Error {
 public:
  InterpretError(NodeId node, int status, const std::string& what)
      : Error("node " + std::to_string(node) + ": " + what), node_(node), status_(status) {}
  NodeId node() const { return node_; }
  int status() const { return status_; }

 private:
  NodeId node_;
  int status_;
};

struct InterpretInputs {
  std::map<std::string, std::string> files;  // file name -> contents; others are read from disk
  std::string stdin_data;
};

namespace detail {

class TempDir {
 public:
  TempDir() {
    const char* t = std::getenv("TMPDIR");
    std::string tmpl = std::string(t && *t ? t : "/tmp") + "/shpar-interp-XXXXXX";
    if (!::mkdtemp(tmpl.data())) throw Error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  std::string file(const std::string& name) const { return path_ + "/" + name; }

 private:
  std::string path_;
};

inline std::string graph_input_content(const DfgEdge& e, const InterpretInputs& in) {
  std::string content;
  if (e.kind == EdgeKind::Stdin) {
    content = in.stdin_data;
  } else if (auto it = in.files.find(e.resource); it != in.files.end()) {
    content = it->second;
  } else {
    content = runtime::read_file(e.resource);
  }
  if (e.partition) return runtime::split_range(content, e.partition->count, e.partition->index);
  return content;
}

}  // namespace detail

// Reference semantics: nodes run one at a time in topological order over
// fully materialized streams. Returns the contents of every graph output.
inline std::map<EdgeId, std::string> interpret(const Dfg& g, const InterpretInputs& in) {
  if (g.sequential) {
    for (const auto& [file, raw] : g.newline_terminated) {
      auto it = in.files.find(file);
      std::string content = it != in.files.end() ? it->second : runtime::read_file(file);
      if (!content.empty() && content.back() != '\n') return interpret(*g.sequential, in);
    }
  }
  auto order = g.topological_order();
  if (!order) throw Error("interpret: graph has a cycle");
  std::map<EdgeId, std::string> values;
  auto value_of = [&](EdgeId id) -> const std::string& {
    auto it = values.find(id);
    if (it != values.end()) return it->second;
    const DfgEdge& e = g.edge(id);
    if (e.producer) throw Error("interpret: edge " + std::to_string(id) + " read before it was produced");
    return values.emplace(id, detail::graph_input_content(e, in)).first->second;
  };
  detail::TempDir tmp;
  int counter = 0;
  for (NodeId id : *order) {
    const DfgNode& n = g.node(id);
    std::vector<std::string> ins;
    for (EdgeId e : n.inputs) ins.push_back(value_of(e));
    switch (n.kind) {
      case DfgNodeKind::Cat: {
        std::string out;
        for (const auto& s : ins) out += s;
        values[n.outputs.at(0)] = std::move(out);
        break;
      }
      case DfgNodeKind::Split: {
        auto parts = runtime::split_content(ins.at(0), n.outputs.size());
        for (std::size_t i = 0; i < parts.size(); ++i) values[n.outputs[i]] = std::move(parts[i]);
        break;
      }
      case DfgNodeKind::Relay:
        values[n.outputs.at(0)] = ins.at(0);
        break;
      case DfgNodeKind::Aggregate: {
        std::vector<std::string> args;
        for (const auto& p : n.aggregate_args) args.push_back(p.value);
        std::string out;
        try {
          if (n.aggregate_program == "agg-wc") {
            out = runtime::agg_wc(ins);
          } else if (n.aggregate_program == "agg-uniq") {
            bool counts = std::find(args.begin(), args.end(), "-c") != args.end();
            out = runtime::agg_uniq(ins, counts);
          } else if (n.aggregate_program == "agg-tac") {
            out = runtime::agg_tac(ins);
          } else if (n.aggregate_program == "agg-squeeze") {
            if (args.size() != 1) throw Error("agg-squeeze takes one byte code");
            out = runtime::agg_squeeze(ins, static_cast<char>(std::stoi(args[0])));
          } else if (n.aggregate_program == "agg-merge") {
            auto opts = runtime::parse_sort_flags(args);
            if (opts && runtime::c_collation()) {
              out = runtime::merge_sorted(ins, *opts);
            } else {
              std::vector<std::string> argv = {"sort", "-m"};
              argv.insert(argv.end(), args.begin(), args.end());
              for (const auto& s : ins) {
                std::string p = tmp.file("m" + std::to_string(counter++));
                runtime::write_file(p, s);
                argv.push_back(p);
              }
              auto r = run_process(argv);
              if (r.status != 0) throw InterpretError(id, r.status, "sort -m failed");
              out = std::move(r.out);
            }
          } else {
            throw InterpretError(id, -1, "unknown aggregator '" + n.aggregate_program + "'");
          }
        } catch (const InterpretError&) {
          throw;
        } catch (const Error& e) {
          throw InterpretError(id, -1, e.what());
        }
        values[n.outputs.at(0)] = std::move(out);
        break;
      }
      case DfgNodeKind::Command:
      case DfgNodeKind::Map: {
        std::vector<std::string> paths;
        for (const auto& s : ins) {
          std::string p = tmp.file("i" + std::to_string(counter++));
          runtime::write_file(p, s);
          paths.push_back(p);
        }
        std::vector<std::string> config_paths;
        for (EdgeId e : n.config_inputs) {
          const DfgEdge& ce = g.edge(e);
          if (ce.producer || in.files.count(ce.resource)) {
            std::string p = tmp.file("c" + std::to_string(counter++));
            runtime::write_file(p, value_of(e));
            config_paths.push_back(p);
          } else {
            config_paths.push_back(ce.resource);
          }
        }
        std::vector<std::string> argv = {n.command.name};
        for (const ArgPiece& p : n.command.args) {
          switch (p.kind) {
            case ArgPiece::Kind::Literal:
              argv.push_back(p.value);
              break;
            case ArgPiece::Kind::Stream:
              argv.push_back(paths.at(static_cast<std::size_t>(p.slot)));
              break;
            case ArgPiece::Kind::Config: {
              const DfgEdge& ce = g.edge(n.config_inputs.at(static_cast<std::size_t>(p.slot)));
              argv.push_back(p.value == ce.resource ? config_paths[static_cast<std::size_t>(p.slot)] : p.value);
              break;
            }
          }
        }
        ProcessOptions po;
        if (n.command.stdin_slot) {
          // only `< file` gives a command a regular-file stdin; anything else
          // is a pipe in the emitted script, and wc pads differently for those
          auto slot = static_cast<std::size_t>(*n.command.stdin_slot);
          const DfgEdge& se = g.edge(n.inputs.at(slot));
          if (se.kind == EdgeKind::NamedFile && !se.producer && !se.partition) {
            po.stdin_path = paths.at(slot);
          } else {
            po.stdin_data = ins.at(slot);
          }
        }
        ProcessResult r;
        try {
          r = run_process(argv, po);
        } catch (const Error& e) {
          throw InterpretError(id, 127, e.what());
        }
        // status 1 is an ordinary answer for grep-like commands
        if (r.signaled || r.status > 1) {
          throw InterpretError(id, r.status, n.command.name + " exited with status " + std::to_string(r.status));
        }
        values[n.outputs.at(0)] = std::move(r.out);
        break;
      }
    }
  }
  std::map<EdgeId, std::string> out;
  for (EdgeId e : g.output_edges()) {
    auto it = values.find(e);
    out[e] = it == values.end() ? std::string() : it->second;
  }
  return out;
}

}  // namespace shpar
