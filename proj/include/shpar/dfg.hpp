#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "shpar/annotations.hpp"

namespace shpar {

using NodeId = int;
using EdgeId = int;

enum class EdgeKind { NamedFile, EphemeralPipe, Fifo, Stdin, Stdout };

inline std::string_view edge_kind_name(EdgeKind k) {
  switch (k) {
    case EdgeKind::NamedFile: return "named-file";
    case EdgeKind::EphemeralPipe: return "ephemeral-pipe";
    case EdgeKind::Fifo: return "fifo";
    case EdgeKind::Stdin: return "stdin";
    case EdgeKind::Stdout: return "stdout";
  }
  return "?";
}

// Line-aligned byte range i of n of a static input file.
struct Partition {
  int index = 0;
  int count = 1;
  bool operator==(const Partition&) const = default;
};

struct DfgEdge {
  EdgeId id = -1;
  EdgeKind kind = EdgeKind::Fifo;
  std::string resource_raw;  // shell word as written, for files
  std::string resource;      // resolved file name
  std::optional<NodeId> producer;
  std::optional<NodeId> consumer;
  std::optional<Partition> partition;
  bool append = false;  // `>>` sink

  bool is_graph_input() const { return !producer.has_value(); }
  bool is_graph_output() const { return !consumer.has_value(); }
  bool is_internal() const { return producer.has_value() && consumer.has_value(); }
};

enum class DfgNodeKind { Command, Cat, Split, Relay, Aggregate, Map };
enum class RelayKind { Eager, Plain };

inline std::string_view node_kind_name(DfgNodeKind k) {
  switch (k) {
    case DfgNodeKind::Command: return "command";
    case DfgNodeKind::Cat: return "cat";
    case DfgNodeKind::Split: return "split";
    case DfgNodeKind::Relay: return "relay";
    case DfgNodeKind::Aggregate: return "aggregate";
    case DfgNodeKind::Map: return "map";
  }
  return "?";
}

// One argument of a command line: a literal word, or a placeholder bound to
// a streaming or configuration input slot.
struct ArgPiece {
  enum class Kind { Literal, Stream, Config };
  Kind kind = Kind::Literal;
  std::string raw;    // Literal: the shell word as written
  std::string value;  // Literal: its expansion
  int slot = -1;      // Stream/Config: index into inputs/config_inputs
};

struct CommandSpec {
  std::string name_raw;
  std::string name;
  std::vector<ArgPiece> args;
  std::optional<int> stdin_slot;  // streaming input fed on fd 0
  ParClass cls = ParClass::SideEffectful;
  std::vector<std::string> arg_values;  // expanded argument vector (for classification)
  ParsedArgs parsed;
};

struct DfgNode {
  NodeId id = -1;
  DfgNodeKind kind = DfgNodeKind::Command;
  std::vector<EdgeId> config_inputs;
  std::vector<EdgeId> inputs;
  std::vector<EdgeId> outputs;

  CommandSpec command;  // Command and Map
  RelayKind relay = RelayKind::Plain;
  std::string aggregate_program;            // Aggregate
  std::vector<ArgPiece> aggregate_args;     // Aggregate: literal flag words

  // Provenance: the source node this one derives from and the step that made it.
  NodeId origin = -1;
  std::string introduced_by = "source";
  bool expanded = false;
};

struct ValidationReport {
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};

class Dfg {
 public:
  int region_id = -1;
  bool background = false;                // the region runs asynchronously
  std::optional<EdgeId> status_output;    // output whose producer's status is the region's
  // Files (resolved -> as written) the parallel plan needs to be empty or end
  // in a newline, because a copy boundary follows them. When one does not,
  // `sequential` runs instead.
  std::map<std::string, std::string> newline_terminated;
  std::shared_ptr<const Dfg> sequential;

  EdgeId add_edge(EdgeKind kind, std::string resource_raw = {}, std::string resource = {}) {
    DfgEdge e;
    e.id = next_edge_++;
    e.kind = kind;
    e.resource_raw = std::move(resource_raw);
    e.resource = std::move(resource);
    edges_.emplace(e.id, e);
    return e.id;
  }

  NodeId add_node(DfgNode node) {
    node.id = next_node_++;
    if (node.origin < 0) node.origin = node.id;
    NodeId id = node.id;
    for (EdgeId e : node.inputs) edge(e).consumer = id;
    for (EdgeId e : node.config_inputs) edge(e).consumer = id;
    for (EdgeId e : node.outputs) edge(e).producer = id;
    nodes_.emplace(id, std::move(node));
    return id;
  }

  void remove_node(NodeId id) {
    DfgNode& n = node(id);
    for (EdgeId e : n.inputs) {
      if (edges_.count(e) && edge(e).consumer == id) edge(e).consumer.reset();
    }
    for (EdgeId e : n.config_inputs) {
      if (edges_.count(e) && edge(e).consumer == id) edge(e).consumer.reset();
    }
    for (EdgeId e : n.outputs) {
      if (edges_.count(e) && edge(e).producer == id) edge(e).producer.reset();
    }
    nodes_.erase(id);
  }

  void remove_edge(EdgeId id) { edges_.erase(id); }

  DfgNode& node(NodeId id) { return nodes_.at(id); }
  const DfgNode& node(NodeId id) const { return nodes_.at(id); }
  DfgEdge& edge(EdgeId id) { return edges_.at(id); }
  const DfgEdge& edge(EdgeId id) const { return edges_.at(id); }
  bool has_node(NodeId id) const { return nodes_.count(id) > 0; }
  bool has_edge(EdgeId id) const { return edges_.count(id) > 0; }

  const std::map<NodeId, DfgNode>& nodes() const { return nodes_; }
  const std::map<EdgeId, DfgEdge>& edges() const { return edges_; }
  std::map<NodeId, DfgNode>& nodes_mut() { return nodes_; }
  std::map<EdgeId, DfgEdge>& edges_mut() { return edges_; }

  std::vector<EdgeId> input_edges() const {
    std::vector<EdgeId> out;
    for (const auto& [id, e] : edges_) {
      if (e.is_graph_input()) out.push_back(id);
    }
    return out;
  }
  std::vector<EdgeId> output_edges() const {
    std::vector<EdgeId> out;
    for (const auto& [id, e] : edges_) {
      if (e.is_graph_output()) out.push_back(id);
    }
    return out;
  }

  std::size_t node_count() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }

  // Nodes feeding `id` through streaming or configuration inputs.
  std::vector<NodeId> predecessors(NodeId id) const {
    std::vector<NodeId> out;
    const DfgNode& n = node(id);
    for (const auto* list : {&n.config_inputs, &n.inputs}) {
      for (EdgeId e : *list) {
        auto it = edges_.find(e);
        if (it != edges_.end() && it->second.producer) out.push_back(*it->second.producer);
      }
    }
    return out;
  }

  // Kahn's algorithm with smallest-id-first tie breaking; nullopt on a cycle.
  std::optional<std::vector<NodeId>> topological_order() const {
    std::map<NodeId, int> indeg;
    std::map<NodeId, std::vector<NodeId>> succ;
    for (const auto& [id, n] : nodes_) indeg[id];
    for (const auto& [id, n] : nodes_) {
      for (NodeId p : predecessors(id)) {
        if (!nodes_.count(p)) continue;
        ++indeg[id];
        succ[p].push_back(id);
      }
    }
    std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
    for (const auto& [id, d] : indeg) {
      if (d == 0) ready.push(id);
    }
    std::vector<NodeId> order;
    while (!ready.empty()) {
      NodeId id = ready.top();
      ready.pop();
      order.push_back(id);
      for (NodeId s : succ[id]) {
        if (--indeg[s] == 0) ready.push(s);
      }
    }
    if (order.size() != nodes_.size()) return std::nullopt;
    return order;
  }

  std::map<std::string, int> census() const {
    std::map<std::string, int> out;
    for (const auto& [id, n] : nodes_) {
      switch (n.kind) {
        case DfgNodeKind::Command:
        case DfgNodeKind::Map:
          ++out[n.command.name];
          break;
        case DfgNodeKind::Relay:
          ++out[n.relay == RelayKind::Eager ? "eager" : "relay"];
          break;
        case DfgNodeKind::Aggregate:
          ++out["aggregate"];
          break;
        default:
          ++out[std::string(node_kind_name(n.kind))];
      }
    }
    return out;
  }

 private:
  std::map<NodeId, DfgNode> nodes_;
  std::map<EdgeId, DfgEdge> edges_;
  NodeId next_node_ = 0;
  EdgeId next_edge_ = 0;
};

// Structural checks; reports every violation found.
inline ValidationReport validate(const Dfg& g) {
  ValidationReport r;
  auto err = [&](std::string s) { r.errors.push_back(std::move(s)); };
  std::map<EdgeId, int> consumers;
  std::map<EdgeId, int> producers;
  for (const auto& [id, n] : g.nodes()) {
    const std::string tag = "node " + std::to_string(id);
    for (const auto* list : {&n.inputs, &n.config_inputs}) {
      for (EdgeId e : *list) {
        if (!g.has_edge(e)) {
          err(tag + ": unknown input edge " + std::to_string(e));
          continue;
        }
        ++consumers[e];
        if (g.edge(e).consumer != id) err(tag + ": edge " + std::to_string(e) + " consumer mismatch");
      }
    }
    for (EdgeId e : n.outputs) {
      if (!g.has_edge(e)) {
        err(tag + ": unknown output edge " + std::to_string(e));
        continue;
      }
      ++producers[e];
      if (g.edge(e).producer != id) err(tag + ": edge " + std::to_string(e) + " producer mismatch");
    }
    const std::size_t ni = n.inputs.size();
    const std::size_t no = n.outputs.size();
    switch (n.kind) {
      case DfgNodeKind::Cat:
        if (ni < 1 || no != 1) err(tag + ": port arity: cat needs >=1 input and 1 output");
        break;
      case DfgNodeKind::Split:
        if (ni != 1 || no < 1) err(tag + ": port arity: split needs 1 input and >=1 outputs");
        break;
      case DfgNodeKind::Relay:
        if (ni != 1 || no != 1) err(tag + ": port arity: relay needs 1 input and 1 output");
        break;
      case DfgNodeKind::Aggregate:
        if (ni < 1 || no != 1) err(tag + ": port arity: aggregate needs >=1 input and 1 output");
        break;
      case DfgNodeKind::Command:
      case DfgNodeKind::Map: {
        if (no != 1) err(tag + ": port arity: command needs exactly 1 output");
        std::vector<int> stream_refs(ni, 0);
        std::vector<int> config_refs(n.config_inputs.size(), 0);
        for (const ArgPiece& p : n.command.args) {
          if (p.kind == ArgPiece::Kind::Stream) {
            if (p.slot < 0 || static_cast<std::size_t>(p.slot) >= ni) {
              err(tag + ": argument references missing input slot " + std::to_string(p.slot));
            } else {
              ++stream_refs[p.slot];
            }
          } else if (p.kind == ArgPiece::Kind::Config) {
            if (p.slot < 0 || static_cast<std::size_t>(p.slot) >= config_refs.size()) {
              err(tag + ": argument references missing config slot " + std::to_string(p.slot));
            } else {
              ++config_refs[p.slot];
            }
          }
        }
        if (n.command.stdin_slot) {
          int s = *n.command.stdin_slot;
          if (s < 0 || static_cast<std::size_t>(s) >= ni) {
            err(tag + ": stdin references missing input slot " + std::to_string(s));
          } else {
            ++stream_refs[s];
          }
        }
        for (std::size_t i = 0; i < ni; ++i) {
          if (stream_refs[i] != 1) err(tag + ": ordered input " + std::to_string(i) + " is not bound exactly once");
        }
        for (std::size_t i = 0; i < config_refs.size(); ++i) {
          if (config_refs[i] != 1) err(tag + ": config input " + std::to_string(i) + " is not bound exactly once");
        }
        break;
      }
    }
  }
  for (const auto& [e, c] : consumers) {
    if (c > 1) err("edge " + std::to_string(e) + ": edge fan-out (" + std::to_string(c) + " consumers)");
  }
  for (const auto& [e, c] : producers) {
    if (c > 1) err("edge " + std::to_string(e) + ": multiple producers");
  }
  for (const auto& [id, e] : g.edges()) {
    if (e.producer && !g.has_node(*e.producer)) err("edge " + std::to_string(id) + ": dangling producer");
    if (e.consumer && !g.has_node(*e.consumer)) err("edge " + std::to_string(id) + ": dangling consumer");
    if (e.producer && e.consumer && e.producer == e.consumer) err("edge " + std::to_string(id) + ": cycle (self-loop)");
    if (!e.producer && !e.consumer) err("edge " + std::to_string(id) + ": detached edge");
  }
  if (!g.topological_order()) err("graph: cycle");
  return r;
}

namespace detail {

inline nlohmann::ordered_json pieces_json(const std::vector<ArgPiece>& pieces) {
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (const ArgPiece& p : pieces) {
    switch (p.kind) {
      case ArgPiece::Kind::Literal: a.push_back(p.raw); break;
      case ArgPiece::Kind::Stream: a.push_back({{"input", p.slot}}); break;
      case ArgPiece::Kind::Config: a.push_back({{"config", p.slot}}); break;
    }
  }
  return a;
}

}  // namespace detail

// Stable JSON rendering (ids ascending).
inline nlohmann::ordered_json dfg_to_json(const Dfg& g) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["region"] = g.region_id;
  ordered_json nodes = ordered_json::array();
  for (const auto& [id, n] : g.nodes()) {
    ordered_json jn;
    jn["id"] = id;
    jn["kind"] = node_kind_name(n.kind);
    if (n.kind == DfgNodeKind::Command || n.kind == DfgNodeKind::Map) {
      jn["command"] = n.command.name;
      jn["class"] = class_wire_name(n.command.cls);
      jn["args"] = detail::pieces_json(n.command.args);
      if (n.command.stdin_slot) jn["stdin"] = *n.command.stdin_slot;
    } else if (n.kind == DfgNodeKind::Relay) {
      jn["relay"] = n.relay == RelayKind::Eager ? "eager" : "plain";
    } else if (n.kind == DfgNodeKind::Aggregate) {
      jn["program"] = n.aggregate_program;
      jn["args"] = detail::pieces_json(n.aggregate_args);
    }
    if (!n.config_inputs.empty()) jn["config_inputs"] = n.config_inputs;
    jn["inputs"] = n.inputs;
    jn["outputs"] = n.outputs;
    jn["origin"] = n.origin;
    jn["introduced_by"] = n.introduced_by;
    nodes.push_back(jn);
  }
  j["nodes"] = nodes;
  ordered_json edges = ordered_json::array();
  for (const auto& [id, e] : g.edges()) {
    ordered_json je;
    je["id"] = id;
    je["kind"] = edge_kind_name(e.kind);
    if (!e.resource.empty()) je["resource"] = e.resource;
    je["producer"] = e.producer ? ordered_json(*e.producer) : ordered_json(nullptr);
    je["consumer"] = e.consumer ? ordered_json(*e.consumer) : ordered_json(nullptr);
    if (e.partition) je["partition"] = {e.partition->index, e.partition->count};
    if (e.append) je["append"] = true;
    edges.push_back(je);
  }
  j["edges"] = edges;
  j["inputs"] = g.input_edges();
  j["outputs"] = g.output_edges();
  if (!g.newline_terminated.empty()) {
    ordered_json files = ordered_json::array();
    for (const auto& [resolved, raw] : g.newline_terminated) files.push_back(resolved);
    j["newline_terminated"] = files;
  }
  return j;
}

}  // namespace shpar
