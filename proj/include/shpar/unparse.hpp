#pragma once

#include <string>

#include <json.hpp>

#include "shpar/ast.hpp"

namespace shpar {

namespace detail {

inline std::string unparse_redirect(const Redirect& r) {
  std::string s;
  if (r.fd >= 0) s += std::to_string(r.fd);
  s += redirect_op_text(r.op);
  s += r.target.raw;
  return s;
}

inline void append_redirects(std::string& out, const std::vector<Redirect>& redirects) {
  for (const Redirect& r : redirects) {
    out += ' ';
    out += unparse_redirect(r);
  }
}

}  // namespace detail

inline std::string unparse(const Node& node) {
  std::string out;
  switch (node.kind) {
    case NodeKind::Command:
    case NodeKind::Assignment: {
      bool first = true;
      auto sep = [&] {
        if (!first) out += ' ';
        first = false;
      };
      for (const Assignment& a : node.assignments) {
        sep();
        out += a.name + "=" + a.value.raw;
      }
      for (const Word& w : node.words) {
        sep();
        out += w.raw;
      }
      for (const Redirect& r : node.redirects) {
        sep();
        out += detail::unparse_redirect(r);
      }
      break;
    }
    case NodeKind::Pipeline:
      if (node.negated) out += "! ";
      for (std::size_t i = 0; i < node.children.size(); ++i) {
        if (i) out += " | ";
        out += unparse(node.children[i]);
      }
      break;
    case NodeKind::AndOr:
      for (std::size_t i = 0; i < node.children.size(); ++i) {
        if (i) out += node.ops[i - 1] == AndOrOp::And ? " && " : " || ";
        out += unparse(node.children[i]);
      }
      break;
    case NodeKind::Sequence:
      for (std::size_t i = 0; i < node.children.size(); ++i) {
        out += unparse(node.children[i]);
        const std::string& sep = i < node.separators.size() ? node.separators[i] : std::string();
        out += sep;
        if (i + 1 < node.children.size() && sep != "\n") {
          out += (sep.empty() && node.children[i].kind != NodeKind::Background &&
                  node.children[i].kind != NodeKind::Unparsed)
                     ? "; "
                     : " ";
        }
      }
      break;
    case NodeKind::Background:
      out += unparse(node.children.front());
      out += " &";
      break;
    case NodeKind::ForLoop:
      out += "for " + node.loop_var;
      if (node.loop_has_in) {
        out += " in";
        for (const Word& w : node.loop_words) out += " " + w.raw;
      }
      out += "; do\n";
      out += unparse(node.children.front());
      out += "\ndone";
      detail::append_redirects(out, node.redirects);
      break;
    case NodeKind::Subshell:
      out += "( ";
      out += unparse(node.children.front());
      out += " )";
      detail::append_redirects(out, node.redirects);
      break;
    case NodeKind::Unparsed:
      out += node.raw;
      break;
  }
  return out;
}

// Stable JSON rendering of an AST, for debugging and golden tests.
inline nlohmann::ordered_json ast_to_json(const Node& node) {
  using nlohmann::ordered_json;
  static constexpr const char* kKindNames[] = {"Command",    "Pipeline", "Sequence", "AndOr",   "Background",
                                               "Assignment", "ForLoop",  "Subshell", "Unparsed"};
  ordered_json j;
  j["kind"] = kKindNames[static_cast<int>(node.kind)];
  j["span"] = {node.span.begin, node.span.end};
  if (node.region_id >= 0) j["region"] = node.region_id;
  auto words = [](const std::vector<Word>& ws) {
    ordered_json a = ordered_json::array();
    for (const Word& w : ws) a.push_back(w.raw);
    return a;
  };
  switch (node.kind) {
    case NodeKind::Command:
    case NodeKind::Assignment: {
      if (!node.assignments.empty()) {
        ordered_json a = ordered_json::array();
        for (const Assignment& as : node.assignments) a.push_back({{"name", as.name}, {"value", as.value.raw}});
        j["assignments"] = a;
      }
      j["words"] = words(node.words);
      if (!node.redirects.empty()) {
        ordered_json r = ordered_json::array();
        for (const Redirect& rd : node.redirects) r.push_back(detail::unparse_redirect(rd));
        j["redirects"] = r;
      }
      break;
    }
    case NodeKind::ForLoop:
      j["var"] = node.loop_var;
      if (node.loop_has_in) j["in"] = words(node.loop_words);
      break;
    case NodeKind::Pipeline:
      if (node.negated) j["negated"] = true;
      break;
    case NodeKind::AndOr: {
      ordered_json ops = ordered_json::array();
      for (AndOrOp op : node.ops) ops.push_back(op == AndOrOp::And ? "&&" : "||");
      j["ops"] = ops;
      break;
    }
    case NodeKind::Unparsed:
      j["raw"] = node.raw;
      break;
    default:
      break;
  }
  if (!node.children.empty()) {
    ordered_json c = ordered_json::array();
    for (const Node& ch : node.children) c.push_back(ast_to_json(ch));
    j["children"] = c;
  }
  return j;
}

}  // namespace shpar
