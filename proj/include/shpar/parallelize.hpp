#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "shpar/annotations.hpp"
#include "shpar/dfg.hpp"
#include "shpar/process.hpp"

namespace shpar {

// Width heuristic: one copy per core on tiny machines is pointless.
inline int default_width(int cpu_cores) {
  if (cpu_cores <= 1) return 1;
  if (cpu_cores <= 16) return 2;
  return cpu_cores / 8;
}

struct WidthConfig {
  std::optional<int> requested;
  int cpu_count = 1;
  int effective() const { return std::max(1, requested ? *requested : default_width(cpu_count)); }
};

struct ExpandOptions {
  int width = 2;
  bool eager = true;
  bool partition_inputs = true;
  std::vector<AggregatorSpec> aggregators = default_aggregators();
};

struct TransformReport {
  int region_id = -1;
  std::size_t nodes_before = 0;
  std::size_t nodes_after = 0;
  std::vector<std::string> applied;
  std::vector<std::string> skipped;
  std::map<NodeId, std::string> provenance;  // every output node -> how it came to be

  std::string text() const {
    std::string s = "region " + std::to_string(region_id) + ": " + std::to_string(nodes_before) + " -> " +
                    std::to_string(nodes_after) + " nodes\n";
    for (const auto& a : applied) s += "  applied: " + a + "\n";
    for (const auto& k : skipped) s += "  skipped: " + k + "\n";
    return s;
  }
};

namespace detail {

inline void note(TransformReport* r, std::string s) {
  if (r) r->applied.push_back(std::move(s));
}

inline std::string describe(const DfgNode& n) {
  std::string s = "node " + std::to_string(n.id);
  if (n.kind == DfgNodeKind::Command || n.kind == DfgNodeKind::Map) s += " (" + n.command.name + ")";
  return s;
}

inline bool is_kind(const Dfg& g, std::optional<NodeId> id, DfgNodeKind k) {
  return id && g.has_node(*id) && g.node(*id).kind == k;
}

inline bool is_eager(const Dfg& g, std::optional<NodeId> id) {
  return is_kind(g, id, DfgNodeKind::Relay) && g.node(*id).relay == RelayKind::Eager;
}

inline NodeId add_cat(Dfg& g, std::vector<EdgeId> inputs, EdgeId out, NodeId origin, const char* by) {
  DfgNode c;
  c.kind = DfgNodeKind::Cat;
  c.inputs = std::move(inputs);
  c.outputs = {out};
  c.origin = origin;
  c.introduced_by = by;
  c.expanded = true;
  return g.add_node(std::move(c));
}

// Replaces `old_edge` by `new_edge` in the input lists of its consumer.
inline void retarget_consumer(Dfg& g, EdgeId old_edge, EdgeId new_edge) {
  auto consumer = g.edge(old_edge).consumer;
  if (!consumer) return;
  DfgNode& n = g.node(*consumer);
  for (auto* list : {&n.inputs, &n.config_inputs}) {
    for (EdgeId& e : *list) {
      if (e == old_edge) e = new_edge;
    }
  }
  g.edge(new_edge).consumer = *consumer;
  g.edge(old_edge).consumer.reset();
}

inline bool is_static_file(const DfgEdge& e) {
  if (e.kind != EdgeKind::NamedFile || e.producer || e.partition) return false;
  return e.resource.rfind("/dev/", 0) != 0 && e.resource.rfind("/proc/", 0) != 0;
}

}  // namespace detail

// Relay on an edge; the original edge keeps its producer, so graph output ids survive.
inline NodeId aux_t3_insert_relay(Dfg& g, EdgeId edge, RelayKind kind = RelayKind::Plain) {
  auto consumer = g.edge(edge).consumer;
  EdgeId fresh = g.add_edge(EdgeKind::Fifo);
  if (consumer) detail::retarget_consumer(g, edge, fresh);
  DfgNode r;
  r.kind = DfgNodeKind::Relay;
  r.relay = kind;
  r.inputs = {edge};
  r.outputs = {fresh};
  r.origin = consumer ? g.node(*consumer).origin : -1;
  r.introduced_by = kind == RelayKind::Eager ? "eager" : "relay";
  r.expanded = true;
  NodeId id = g.add_node(std::move(r));
  if (!consumer) {
    // relay on a graph output: swap so the output edge id stays the boundary
    DfgNode& rn = g.node(id);
    auto producer = g.edge(edge).producer;
    if (producer) {
      DfgNode& p = g.node(*producer);
      for (EdgeId& e : p.outputs) {
        if (e == edge) e = fresh;
      }
      g.edge(fresh).producer = *producer;
      g.edge(fresh).consumer = id;
      g.edge(edge).producer = id;
      g.edge(edge).consumer.reset();
      rn.inputs = {fresh};
      rn.outputs = {edge};
    }
  }
  return id;
}

// Concatenates a node's streaming inputs through a Cat so it reads one stream.
inline bool aux_t1_insert_cat(Dfg& g, NodeId id, TransformReport* report = nullptr) {
  DfgNode& n = g.node(id);
  if (n.kind != DfgNodeKind::Command && n.kind != DfgNodeKind::Map) return false;
  if (n.inputs.size() < 2) return false;
  std::vector<EdgeId> ins = n.inputs;
  EdgeId merged = g.add_edge(EdgeKind::Fifo);
  for (EdgeId e : ins) g.edge(e).consumer.reset();
  {
    DfgNode& x = g.node(id);
    x.inputs = {merged};
    // The first file operand carries the whole stream; other stream operands go.
    bool placed = false;
    std::vector<ArgPiece> args;
    for (ArgPiece p : x.command.args) {
      if (p.kind == ArgPiece::Kind::Stream) {
        if (placed) continue;
        p.slot = 0;
        placed = true;
      }
      args.push_back(std::move(p));
    }
    x.command.args = std::move(args);
    if (placed) {
      x.command.stdin_slot.reset();
    } else {
      x.command.stdin_slot = 0;
    }
  }
  g.edge(merged).consumer = id;
  detail::add_cat(g, ins, merged, g.node(id).origin, "t1");
  detail::note(report, "t1 cat before " + detail::describe(g.node(id)) + " (" + std::to_string(ins.size()) + " inputs)");
  return true;
}

// Split(width) then Cat(width) on the single input of a node.
inline bool aux_t2_split_cat(Dfg& g, NodeId id, int width, TransformReport* report = nullptr) {
  if (width <= 1) return false;
  DfgNode& n = g.node(id);
  if (n.inputs.size() != 1) return false;
  EdgeId in = n.inputs[0];
  EdgeId to_cat = g.add_edge(EdgeKind::Fifo);
  detail::retarget_consumer(g, in, to_cat);
  std::vector<EdgeId> parts;
  for (int i = 0; i < width; ++i) parts.push_back(g.add_edge(EdgeKind::Fifo));
  DfgNode s;
  s.kind = DfgNodeKind::Split;
  s.inputs = {in};
  s.outputs = parts;
  s.origin = g.node(id).origin;
  s.introduced_by = "t2";
  s.expanded = true;
  g.add_node(std::move(s));
  detail::add_cat(g, parts, to_cat, g.node(id).origin, "t2");
  detail::note(report, "t2 split/cat x" + std::to_string(width) + " before " + detail::describe(g.node(id)));
  return true;
}

namespace detail {

// The Cat feeding node `id`, if its single input comes from one with >= 2 inputs.
inline std::optional<NodeId> feeding_cat(const Dfg& g, NodeId id) {
  const DfgNode& n = g.node(id);
  if (n.inputs.size() != 1) return std::nullopt;
  auto p = g.edge(n.inputs[0]).producer;
  if (!is_kind(g, p, DfgNodeKind::Cat) || g.node(*p).inputs.size() < 2) return std::nullopt;
  return p;
}

// Splits a wide Cat into at most `width` groups, ceiling-first.
inline void regroup_cat(Dfg& g, NodeId cat, int width) {
  std::vector<EdgeId> ins = g.node(cat).inputs;
  if (static_cast<int>(ins.size()) <= width) return;
  std::size_t n = ins.size(), w = static_cast<std::size_t>(width);
  std::vector<EdgeId> outer;
  std::size_t k = 0;
  for (std::size_t gi = 0; gi < w; ++gi) {
    std::size_t cnt = n / w + (gi < n % w ? 1 : 0);
    std::vector<EdgeId> grp(ins.begin() + static_cast<long>(k), ins.begin() + static_cast<long>(k + cnt));
    k += cnt;
    if (grp.size() == 1) {
      outer.push_back(grp[0]);
      continue;
    }
    for (EdgeId e : grp) g.edge(e).consumer.reset();
    EdgeId o = g.add_edge(EdgeKind::Fifo);
    add_cat(g, grp, o, g.node(cat).origin, "regroup");
    outer.push_back(o);
  }
  DfgNode& c = g.node(cat);
  c.inputs = outer;
  for (EdgeId e : outer) g.edge(e).consumer = cat;
}

// Removes node `id` and its feeding Cat; returns (its data, the Cat inputs).
inline std::pair<DfgNode, std::vector<EdgeId>> detach_with_cat(Dfg& g, NodeId id, NodeId cat) {
  DfgNode x = g.node(id);
  std::vector<EdgeId> ins = g.node(cat).inputs;
  EdgeId link = x.inputs[0];
  g.remove_node(id);
  g.remove_node(cat);
  g.remove_edge(link);
  for (EdgeId e : x.config_inputs) g.remove_edge(e);
  return {std::move(x), std::move(ins)};
}

inline NodeId make_copy(Dfg& g, const DfgNode& x, EdgeId in, DfgNodeKind kind, const char* by) {
  DfgNode c;
  c.kind = kind;
  c.command = x.command;
  c.inputs = {in};
  c.outputs = {g.add_edge(EdgeKind::Fifo)};
  c.origin = x.origin;
  c.introduced_by = by;
  c.expanded = true;
  return g.add_node(std::move(c));
}

inline bool config_inputs_static(const Dfg& g, const DfgNode& n) {
  return std::all_of(n.config_inputs.begin(), n.config_inputs.end(),
                     [&](EdgeId e) { return !g.edge(e).producer && g.edge(e).kind == EdgeKind::NamedFile; });
}

// Copies configuration edges for a fresh node copy.
inline void duplicate_config(Dfg& g, NodeId copy, const std::vector<DfgEdge>& config) {
  DfgNode& c = g.node(copy);
  c.config_inputs.clear();
  for (const DfgEdge& e : config) {
    EdgeId d = g.add_edge(e.kind, e.resource_raw, e.resource);
    g.edge(d).consumer = copy;
    c.config_inputs.push_back(d);
  }
}

inline std::vector<DfgEdge> config_edges(const Dfg& g, const DfgNode& n) {
  std::vector<DfgEdge> out;
  for (EdgeId e : n.config_inputs) out.push_back(g.edge(e));
  return out;
}

// The byte a newline turns into when this `tr` also squeezes it, found by
// asking tr itself. Chunk seams fall after newlines, so such copies need
// agg-squeeze rather than a plain cat.
inline std::optional<char> newline_squeeze_byte(const DfgNode& n) {
  if (n.command.name != "tr") return std::nullopt;
  static std::map<std::vector<std::string>, std::optional<char>> cache;
  auto [it, fresh] = cache.try_emplace(n.command.arg_values);
  if (fresh) {
    std::vector<std::string> argv = {"tr"};
    argv.insert(argv.end(), n.command.arg_values.begin(), n.command.arg_values.end());
    ProcessOptions po;
    po.stdin_data = "\n\n";
    po.env = {{"LC_ALL", "C"}};
    try {
      auto r = run_process(argv, po);
      if (r.status == 0 && r.out.size() == 1) it->second = r.out[0];
    } catch (const Error&) {
    }
  }
  return it->second;
}

// Copies split a concatenation at its input boundaries, which is only sound
// when each piece but the last ends a line. Pieces that are partitions
// already do, short of the file's final range; the rest are checked when the
// region runs.
inline void note_seams(Dfg& g, NodeId cat) {
  std::function<void(EdgeId)> tail_file = [&](EdgeId id) {
    const DfgEdge& e = g.edge(id);
    if (e.producer) {
      if (is_kind(g, e.producer, DfgNodeKind::Cat) && !g.node(*e.producer).inputs.empty()) {
        tail_file(g.node(*e.producer).inputs.back());
      }
      return;
    }
    if (e.kind != EdgeKind::NamedFile) return;
    if (e.partition && e.partition->index + 1 < e.partition->count) return;
    g.newline_terminated.emplace(e.resource, e.resource_raw);
  };
  const auto ins = g.node(cat).inputs;
  for (std::size_t i = 0; i + 1 < ins.size(); ++i) tail_file(ins[i]);
}

}  // namespace detail

// S node fed by Cat(x1..xn) becomes Cat(v(x1)..v(xn)).
inline bool parallelize_stateless(Dfg& g, NodeId id, TransformReport* report = nullptr) {
  if (!g.has_node(id)) return false;
  const DfgNode& n = g.node(id);
  if (n.kind != DfgNodeKind::Command || n.command.cls != ParClass::Stateless) return false;
  auto cat = detail::feeding_cat(g, id);
  if (!cat || !detail::config_inputs_static(g, n)) return false;
  detail::note_seams(g, *cat);
  auto config = detail::config_edges(g, n);
  auto [x, ins] = detail::detach_with_cat(g, id, *cat);
  std::vector<EdgeId> outs;
  for (EdgeId e : ins) {
    NodeId c = detail::make_copy(g, x, e, DfgNodeKind::Command, "stateless");
    detail::duplicate_config(g, c, config);
    outs.push_back(g.node(c).outputs[0]);
  }
  if (auto seam = detail::newline_squeeze_byte(x)) {
    DfgNode a;
    a.kind = DfgNodeKind::Aggregate;
    a.aggregate_program = "agg-squeeze";
    std::string code = std::to_string(static_cast<unsigned char>(*seam));
    a.aggregate_args = {{ArgPiece::Kind::Literal, code, code, -1}};
    a.inputs = outs;
    a.outputs = {x.outputs[0]};
    a.origin = x.origin;
    a.introduced_by = "stateless";
    a.expanded = true;
    g.add_node(std::move(a));
  } else {
    detail::add_cat(g, outs, x.outputs[0], x.origin, "stateless");
  }
  detail::note(report, "stateless x" + std::to_string(ins.size()) + " on " + detail::describe(x));
  return true;
}

// P node fed by Cat(x1..xn): n maps and a balanced tree of n-1 aggregators.
inline bool parallelize_pure(Dfg& g, NodeId id, const AggregatorPair& pair, TransformReport* report = nullptr) {
  if (!g.has_node(id)) return false;
  const DfgNode& n = g.node(id);
  if (n.kind != DfgNodeKind::Command || n.command.cls != ParClass::ParallelizablePure) return false;
  auto cat = detail::feeding_cat(g, id);
  if (!cat || !detail::config_inputs_static(g, n)) return false;
  detail::note_seams(g, *cat);
  auto config = detail::config_edges(g, n);
  auto [x, ins] = detail::detach_with_cat(g, id, *cat);
  std::vector<EdgeId> outs;
  for (EdgeId e : ins) {
    NodeId c = detail::make_copy(g, x, e, DfgNodeKind::Map, "map");
    detail::duplicate_config(g, c, config);
    outs.push_back(g.node(c).outputs[0]);
  }
  std::vector<ArgPiece> agg_args;
  std::size_t fixed = pair.aggregate_args.size() - pair.forwarded_arg_indices.size();
  for (std::size_t i = 0; i < fixed; ++i) agg_args.push_back({ArgPiece::Kind::Literal, pair.aggregate_args[i], pair.aggregate_args[i], -1});
  for (std::size_t idx : pair.forwarded_arg_indices) {
    const ArgPiece& p = x.command.args.at(idx);
    agg_args.push_back({ArgPiece::Kind::Literal, p.raw, p.value, -1});
  }
  // balanced binary tree, left to right
  std::function<EdgeId(std::size_t, std::size_t, std::optional<EdgeId>)> build =
      [&](std::size_t lo, std::size_t hi, std::optional<EdgeId> out) -> EdgeId {
    if (hi - lo == 1) return outs[lo];
    std::size_t mid = lo + (hi - lo + 1) / 2;
    EdgeId l = build(lo, mid, std::nullopt);
    EdgeId r = build(mid, hi, std::nullopt);
    EdgeId o = out ? *out : g.add_edge(EdgeKind::Fifo);
    DfgNode a;
    a.kind = DfgNodeKind::Aggregate;
    a.aggregate_program = pair.aggregate_program;
    a.aggregate_args = agg_args;
    a.inputs = {l, r};
    a.outputs = {o};
    a.origin = x.origin;
    a.introduced_by = "aggregate";
    a.expanded = true;
    g.add_node(std::move(a));
    return o;
  };
  build(0, outs.size(), x.outputs[0]);
  detail::note(report, "pure x" + std::to_string(ins.size()) + " on " + detail::describe(x) + " with " +
                           pair.aggregate_program);
  return true;
}

namespace detail {

// wc sizes its columns from the file when stdin is a regular file, and the
// maps only ever see pipes. One column is printed bare either way.
inline bool wc_pads_by_stdin(const DfgNode& n) {
  if (n.kind != DfgNodeKind::Command || n.command.name != "wc" || !n.command.stdin_slot) return false;
  int columns = 0;
  for (const char* f : {"-l", "-w", "-c", "-m"}) columns += n.command.parsed.has(f);
  return columns != 1;
}

inline bool wc_padding_follows_file(const Dfg& g, const DfgNode& n) {
  if (!wc_pads_by_stdin(n)) return false;
  const DfgEdge& e = g.edge(n.inputs.at(static_cast<std::size_t>(*n.command.stdin_slot)));
  return e.kind == EdgeKind::NamedFile && !e.producer;
}

// Cat nodes from plain `cat` commands; Cat-into-Cat and one-input Cat fusion.
inline void normalize_cats(Dfg& g) {
  for (auto& [id, n] : g.nodes_mut()) {
    if (n.kind == DfgNodeKind::Command && n.command.name == "cat" && n.command.cls == ParClass::Stateless &&
        n.config_inputs.empty() && !n.inputs.empty() &&
        std::all_of(n.command.args.begin(), n.command.args.end(),
                    [](const ArgPiece& p) { return p.kind == ArgPiece::Kind::Stream; })) {
      // argument order is the input order for cat
      std::vector<EdgeId> ordered;
      for (const ArgPiece& p : n.command.args) ordered.push_back(n.inputs[static_cast<std::size_t>(p.slot)]);
      if (n.command.stdin_slot) {
        if (!ordered.empty()) continue;
        ordered.push_back(n.inputs[static_cast<std::size_t>(*n.command.stdin_slot)]);
      }
      n.inputs = ordered;
      n.kind = DfgNodeKind::Cat;
      n.command = {};
      n.introduced_by = "cat-command";
    }
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto& [id, n] : g.nodes_mut()) {
      if (n.kind != DfgNodeKind::Cat) continue;
      for (std::size_t i = 0; i < n.inputs.size(); ++i) {
        auto p = g.edge(n.inputs[i]).producer;
        if (!is_kind(g, p, DfgNodeKind::Cat)) continue;
        std::vector<EdgeId> inner = g.node(*p).inputs;
        EdgeId link = n.inputs[i];
        NodeId self = id;
        g.remove_node(*p);
        g.remove_edge(link);
        DfgNode& me = g.node(self);
        me.inputs.erase(me.inputs.begin() + static_cast<long>(i));
        me.inputs.insert(me.inputs.begin() + static_cast<long>(i), inner.begin(), inner.end());
        for (EdgeId e : inner) g.edge(e).consumer = self;
        changed = true;
        break;
      }
      if (changed) break;
    }
    if (changed) continue;
    for (auto& [id, n] : g.nodes_mut()) {
      if (n.kind != DfgNodeKind::Cat || n.inputs.size() != 1) continue;
      EdgeId in = n.inputs[0], out = n.outputs[0];
      auto prod = g.edge(in).producer;
      auto cons = g.edge(out).consumer;
      NodeId self = id;
      if (prod) {
        g.remove_node(self);
        DfgNode& p = g.node(*prod);
        for (EdgeId& e : p.outputs) {
          if (e == in) e = out;
        }
        g.edge(out).producer = *prod;
        g.remove_edge(in);
      } else if (cons) {
        // `cat f | wc` must stay a pipe, not become `wc < f`
        const DfgNode& c = g.node(*cons);
        if (wc_pads_by_stdin(c) && c.inputs.at(static_cast<std::size_t>(*c.command.stdin_slot)) == out) continue;
        g.remove_node(self);
        retarget_consumer(g, out, in);
        g.remove_edge(out);
      } else {
        continue;
      }
      changed = true;
      break;
    }
  }
}

// Replaces static file inputs of the Cat (or node) feeding `id` by line-aligned partitions.
inline void partition_inputs(Dfg& g, NodeId id, int width, TransformReport* report) {
  DfgNode& n = g.node(id);
  if (n.inputs.size() != 1) return;
  EdgeId in = n.inputs[0];
  auto p = g.edge(in).producer;
  std::vector<EdgeId> list;
  std::optional<NodeId> cat;
  if (is_kind(g, p, DfgNodeKind::Cat)) {
    cat = p;
    list = g.node(*p).inputs;
  } else if (!p) {
    list = {in};
  } else {
    return;
  }
  int parts = std::max(1, width / static_cast<int>(list.size()));
  if (parts < 2) return;
  std::vector<EdgeId> expanded;
  bool any = false;
  for (EdgeId e : list) {
    const DfgEdge orig = g.edge(e);
    if (!is_static_file(orig)) {
      expanded.push_back(e);
      continue;
    }
    any = true;
    for (int i = 0; i < parts; ++i) {
      EdgeId pe = g.add_edge(EdgeKind::NamedFile, orig.resource_raw, orig.resource);
      g.edge(pe).partition = Partition{i, parts};
      expanded.push_back(pe);
    }
    if (cat) g.remove_edge(e);
  }
  if (!any) return;
  if (cat) {
    DfgNode& c = g.node(*cat);
    c.inputs = expanded;
    for (EdgeId e : expanded) g.edge(e).consumer = *cat;
  } else {
    EdgeId link = g.add_edge(EdgeKind::Fifo);
    retarget_consumer(g, in, link);
    g.remove_edge(in);
    for (EdgeId e : expanded) g.edge(e).consumer.reset();
    add_cat(g, expanded, link, g.node(id).origin, "partition");
  }
  note(report, "partitioned inputs of " + describe(g.node(id)) + " into " + std::to_string(parts));
}

inline void place_eager(Dfg& g, TransformReport* report) {
  std::vector<EdgeId> targets;
  for (const auto& [id, n] : g.nodes()) {
    if (n.kind == DfgNodeKind::Aggregate && n.aggregate_program != "agg-squeeze") {
      for (EdgeId e : n.inputs) targets.push_back(e);
    } else if (n.kind == DfgNodeKind::Split) {
      for (std::size_t i = 0; i + 1 < n.outputs.size(); ++i) targets.push_back(n.outputs[i]);
    } else if (n.kind == DfgNodeKind::Cat || n.kind == DfgNodeKind::Aggregate) {
      // concatenating nodes read their first input first anyway
      for (std::size_t i = 1; i < n.inputs.size(); ++i) {
        if (g.edge(n.inputs[i]).producer) targets.push_back(n.inputs[i]);
      }
    }
  }
  std::set<EdgeId> done;
  int count = 0;
  for (EdgeId e : targets) {
    if (!done.insert(e).second || !g.has_edge(e)) continue;
    const DfgEdge& ed = g.edge(e);
    if (is_eager(g, ed.producer) || is_eager(g, ed.consumer)) continue;
    aux_t3_insert_relay(g, e, RelayKind::Eager);
    ++count;
  }
  if (count) note(report, "eager relays: " + std::to_string(count));
}

}  // namespace detail

// Applies the transformations node by node in topological order until every
// parallelizable node has been expanded to `width` copies.
namespace detail {

}  // namespace detail

inline std::pair<Dfg, TransformReport> expand(const Dfg& input, const ExpandOptions& opts) {
  Dfg g = input;
  TransformReport report;
  report.region_id = g.region_id;
  report.nodes_before = g.node_count();
  const int width = std::max(1, opts.width);
  if (width > 1) {
    detail::normalize_cats(g);
    std::set<NodeId> visited;
    for (;;) {
      auto order = g.topological_order();
      if (!order) break;
      std::optional<NodeId> next;
      for (NodeId id : *order) {
        const DfgNode& n = g.node(id);
        if (n.kind == DfgNodeKind::Command && !n.expanded && !visited.count(id)) {
          next = id;
          break;
        }
      }
      if (!next) break;
      NodeId id = *next;
      visited.insert(id);
      const DfgNode& n = g.node(id);
      std::optional<AggregatorPair> pair;
      bool parallel = n.command.cls == ParClass::Stateless;
      if (n.command.cls == ParClass::ParallelizablePure) {
        CommandInstance inst;
        inst.name = n.command.name;
        inst.args = n.command.arg_values;
        inst.parsed = n.command.parsed;
        inst.cls = n.command.cls;
        pair = aggregator_for(inst, opts.aggregators);
        if (pair && detail::wc_padding_follows_file(g, n)) {
          pair.reset();
          report.skipped.push_back(detail::describe(n) + ": column width follows the input file size");
        } else if (!pair) {
          report.skipped.push_back(detail::describe(n) + ": no aggregator for this invocation");
        }
        parallel = pair.has_value();
      } else if (!parallel) {
        report.skipped.push_back(detail::describe(n) + ": class " + std::string(class_wire_name(n.command.cls)));
      }
      if (!parallel) continue;
      if (n.inputs.empty()) {
        report.skipped.push_back(detail::describe(n) + ": no streaming input");
        continue;
      }
      if (!detail::config_inputs_static(g, n)) {
        report.skipped.push_back(detail::describe(n) + ": configuration input produced inside the graph");
        continue;
      }
      aux_t1_insert_cat(g, id, &report);
      detail::normalize_cats(g);
      if (opts.partition_inputs) detail::partition_inputs(g, id, width, &report);
      if (!detail::feeding_cat(g, id)) aux_t2_split_cat(g, id, width, &report);
      if (auto cat = detail::feeding_cat(g, id)) detail::regroup_cat(g, *cat, width);
      bool ok = pair ? parallelize_pure(g, id, *pair, &report) : parallelize_stateless(g, id, &report);
      if (!ok) report.skipped.push_back("node " + std::to_string(id) + ": transformation precondition not met");
      detail::normalize_cats(g);
    }
    for (const auto& [id, n] : std::map<NodeId, DfgNode>(g.nodes())) {
      if (n.kind == DfgNodeKind::Cat && g.has_node(id)) detail::regroup_cat(g, id, width);
    }
    if (opts.eager) detail::place_eager(g, &report);
    if (!g.newline_terminated.empty() && !g.sequential) g.sequential = std::make_shared<const Dfg>(input);
  }
  report.nodes_after = g.node_count();
  for (const auto& [id, n] : g.nodes()) {
    report.provenance[id] = n.introduced_by + " (origin " + std::to_string(n.origin) + ")";
  }
  return {std::move(g), std::move(report)};
}

}  // namespace shpar
