#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace shpar {

// Half-open byte range into the script source.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct WordPart {
  enum class Kind { Literal, Param, Unknown };
  Kind kind = Kind::Literal;
  std::string text;  // literal text after quote removal, parameter name, or raw text
  bool quoted = false;
};

struct Word {
  std::string raw;
  std::vector<WordPart> parts;
  Span span;
};

// Variables whose values are known at compile time.
using VarEnv = std::map<std::string, std::string, std::less<>>;

namespace detail {

inline bool has_glob_char(std::string_view s) {
  return s.find_first_of("*?[") != std::string_view::npos;
}

inline bool has_field_split_char(std::string_view s) {
  return s.find_first_of(" \t\n") != std::string_view::npos;
}

}  // namespace detail

// The value a word expands to, if it is a single field fully determined by
// `env`. Anything subject to field splitting, globbing, brace or tilde
// expansion, or depending on an unknown parameter resolves to nullopt.
inline std::optional<std::string> resolve_word(const Word& word, const VarEnv& env) {
  std::string out;
  for (std::size_t i = 0; i < word.parts.size(); ++i) {
    const WordPart& p = word.parts[i];
    switch (p.kind) {
      case WordPart::Kind::Literal:
        if (!p.quoted) {
          if (detail::has_glob_char(p.text)) return std::nullopt;
          if (i == 0 && !p.text.empty() && p.text.front() == '~') return std::nullopt;
          if (p.text.find('{') != std::string::npos) return std::nullopt;
        }
        out += p.text;
        break;
      case WordPart::Kind::Param: {
        auto it = env.find(p.text);
        if (it == env.end()) return std::nullopt;
        if (!p.quoted) {
          const std::string& v = it->second;
          if (v.empty() || detail::has_field_split_char(v) || detail::has_glob_char(v)) {
            return std::nullopt;
          }
        }
        out += it->second;
        break;
      }
      case WordPart::Kind::Unknown:
        return std::nullopt;
    }
  }
  return out;
}

enum class RedirectOp { In, Out, Append, Clobber, DupIn, DupOut, ReadWrite, HereDoc };

struct Redirect {
  int fd = -1;  // -1: the operator's default descriptor
  RedirectOp op = RedirectOp::Out;
  Word target;
  Span span;

  int effective_fd() const {
    if (fd >= 0) return fd;
    switch (op) {
      case RedirectOp::In:
      case RedirectOp::DupIn:
      case RedirectOp::ReadWrite:
      case RedirectOp::HereDoc:
        return 0;
      default:
        return 1;
    }
  }
};

inline std::string_view redirect_op_text(RedirectOp op) {
  switch (op) {
    case RedirectOp::In: return "<";
    case RedirectOp::Out: return ">";
    case RedirectOp::Append: return ">>";
    case RedirectOp::Clobber: return ">|";
    case RedirectOp::DupIn: return "<&";
    case RedirectOp::DupOut: return ">&";
    case RedirectOp::ReadWrite: return "<>";
    case RedirectOp::HereDoc: return "<<";
  }
  return "?";
}

struct Assignment {
  std::string name;
  Word value;
};

enum class NodeKind {
  Command,     // words + redirections, optional prefix assignments
  Pipeline,    // children joined by '|'
  Sequence,    // children separated by ';' / newline
  AndOr,       // children joined by ops
  Background,  // single child followed by '&'
  Assignment,  // bare `name=value` statements
  ForLoop,
  Subshell,
  Unparsed,
};

enum class AndOrOp { And, Or };

struct Node {
  NodeKind kind = NodeKind::Unparsed;
  Span span;

  // Command / Assignment
  std::vector<Assignment> assignments;
  std::vector<Word> words;
  std::vector<Redirect> redirects;  // also used by ForLoop and Subshell

  std::vector<Node> children;
  std::vector<AndOrOp> ops;            // AndOr: ops[i] joins children[i] and children[i+1]
  std::vector<std::string> separators;  // Sequence: ";", "\n" or "" after each child
  bool negated = false;                 // Pipeline prefixed by '!'

  // ForLoop
  std::string loop_var;
  std::vector<Word> loop_words;
  bool loop_has_in = false;

  // Unparsed
  std::string raw;

  // Set by region analysis on Sequence children.
  int region_id = -1;
};

// Counts simple commands (Command nodes) in a tree, excluding Unparsed text.
inline std::size_t count_commands(const Node& node) {
  std::size_t n = node.kind == NodeKind::Command ? 1 : 0;
  for (const Node& c : node.children) n += count_commands(c);
  return n;
}

}  // namespace shpar
