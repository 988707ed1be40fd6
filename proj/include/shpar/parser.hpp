#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "shpar/ast.hpp"
#include "shpar/error.hpp"
#include "shpar/lexer.hpp"

namespace shpar {

namespace detail {

inline bool is_valid_name(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

class Parser {
 public:
  Parser(std::string_view src, std::vector<Token> toks) : src_(src), toks_(std::move(toks)) {}

  Node parse_program() {
    skip_newlines();
    Node seq = parse_list();
    skip_newlines();
    if (peek().kind != Token::Kind::End) fail("unexpected '" + peek().text + "'");
    return seq;
  }

 private:
  const Token& peek(std::size_t k = 0) const { return toks_[std::min(i_ + k, toks_.size() - 1)]; }
  const Token& next() { return toks_[std::min(i_++, toks_.size() - 1)]; }

  [[noreturn]] void fail(const std::string& what) const {
    std::size_t off = peek().span.begin;
    std::size_t line = 1 + static_cast<std::size_t>(std::count(src_.begin(), src_.begin() + std::min(off, src_.size()), '\n'));
    std::size_t last_nl = src_.rfind('\n', off == 0 ? 0 : off - 1);
    std::size_t col = (last_nl == std::string_view::npos || off == 0) ? off + 1 : off - last_nl;
    throw ParseError(what, line, col);
  }

  void skip_newlines() {
    while (peek().kind == Token::Kind::Newline) ++i_;
  }

  static bool is_list_terminator(const Token& t) {
    if (t.kind == Token::Kind::End) return true;
    if (t.is_op(")") || t.is_op(";;")) return true;
    for (std::string_view w : {"done", "fi", "esac", "then", "else", "elif", "do", "}"}) {
      if (t.is_plain_word(w)) return true;
    }
    return false;
  }

  Node parse_list() {
    Node seq;
    seq.kind = NodeKind::Sequence;
    seq.span = {peek().span.begin, peek().span.begin};
    while (!is_list_terminator(peek())) {
      std::size_t item_tok = i_;
      heredoc_seen_ = false;
      Node item = parse_and_or();
      if (heredoc_seen_) {
        // Here-documents are kept verbatim, body included.
        const Token& nl = peek();
        if (nl.kind != Token::Kind::Newline) fail("here-document must end its line");
        Node u;
        u.kind = NodeKind::Unparsed;
        u.span = {toks_[item_tok].span.begin, nl.heredoc_end};
        u.raw = std::string(src_.substr(u.span.begin, u.span.end - u.span.begin));
        ++i_;
        seq.children.push_back(std::move(u));
        seq.separators.push_back("");
        seq.span.end = nl.heredoc_end;
        skip_newlines();
        continue;
      }
      std::string sep;
      if (peek().is_op("&")) {
        Node bg;
        bg.kind = NodeKind::Background;
        bg.span = {item.span.begin, peek().span.end};
        bg.children.push_back(std::move(item));
        item = std::move(bg);
        ++i_;
        if (peek().kind == Token::Kind::Newline) sep = "\n";
      } else if (peek().is_op(";")) {
        ++i_;
        sep = ";";
        if (peek().kind == Token::Kind::Newline) sep = "\n";
      } else if (peek().kind == Token::Kind::Newline) {
        sep = "\n";
      } else if (!is_list_terminator(peek())) {
        fail("unexpected '" + peek().text + "'");
      }
      seq.span.end = toks_[i_ == 0 ? 0 : i_ - 1].span.end;
      seq.children.push_back(std::move(item));
      seq.separators.push_back(sep);
      skip_newlines();
    }
    return seq;
  }

  Node parse_and_or() {
    Node first = parse_pipeline();
    if (!(peek().is_op("&&") || peek().is_op("||"))) return first;
    Node ao;
    ao.kind = NodeKind::AndOr;
    ao.span.begin = first.span.begin;
    ao.children.push_back(std::move(first));
    while (peek().is_op("&&") || peek().is_op("||")) {
      ao.ops.push_back(next().text == "&&" ? AndOrOp::And : AndOrOp::Or);
      skip_newlines();
      ao.children.push_back(parse_pipeline());
    }
    ao.span.end = ao.children.back().span.end;
    return ao;
  }

  Node parse_pipeline() {
    bool negated = false;
    std::size_t begin = peek().span.begin;
    if (peek().is_plain_word("!")) {
      negated = true;
      ++i_;
    }
    Node first = parse_command();
    if (!negated && !peek().is_op("|")) return first;
    Node pl;
    pl.kind = NodeKind::Pipeline;
    pl.negated = negated;
    pl.span.begin = begin;
    pl.children.push_back(std::move(first));
    while (peek().is_op("|")) {
      ++i_;
      skip_newlines();
      pl.children.push_back(parse_command());
    }
    pl.span.end = pl.children.back().span.end;
    return pl;
  }

  static bool is_redirect_op(const Token& t) {
    if (t.kind != Token::Kind::Op) return false;
    for (std::string_view op : {"<", ">", ">>", ">|", "<&", ">&", "<>", "<<", "<<-"}) {
      if (t.text == op) return true;
    }
    return false;
  }

  static RedirectOp redirect_op(std::string_view s) {
    if (s == "<") return RedirectOp::In;
    if (s == ">") return RedirectOp::Out;
    if (s == ">>") return RedirectOp::Append;
    if (s == ">|") return RedirectOp::Clobber;
    if (s == "<&") return RedirectOp::DupIn;
    if (s == ">&") return RedirectOp::DupOut;
    if (s == "<>") return RedirectOp::ReadWrite;
    return RedirectOp::HereDoc;
  }

  bool at_redirect() const {
    return is_redirect_op(peek()) || (peek().kind == Token::Kind::IoNumber && is_redirect_op(peek(1)));
  }

  Redirect parse_redirect() {
    Redirect r;
    r.span.begin = peek().span.begin;
    if (peek().kind == Token::Kind::IoNumber) r.fd = std::stoi(next().text);
    const Token& op = next();
    r.op = redirect_op(op.text);
    if (r.op == RedirectOp::HereDoc) heredoc_seen_ = true;
    if (peek().kind != Token::Kind::Word) fail("malformed redirection: expected a word after '" + op.text + "'");
    r.target = next().word;
    r.span.end = r.target.span.end;
    return r;
  }

  void parse_trailing_redirects(Node& n) {
    while (at_redirect()) {
      n.redirects.push_back(parse_redirect());
      n.span.end = n.redirects.back().span.end;
    }
  }

  static bool is_compound_opener(const Token& t) {
    for (std::string_view w : {"if", "while", "until", "case", "{", "[[", "select", "function"}) {
      if (t.is_plain_word(w)) return true;
    }
    return false;
  }

  Node parse_command() {
    const Token& t = peek();
    if (t.is_plain_word("for")) return parse_for();
    if (t.is_op("(")) {
      if (peek(1).is_op("(") && peek(1).span.begin == t.span.end) return scan_unparsed();
      return parse_subshell();
    }
    if (is_compound_opener(t)) return scan_unparsed();
    if (t.kind == Token::Kind::Word && peek(1).is_op("(") && peek(2).is_op(")")) return scan_unparsed();
    return parse_simple();
  }

  Node parse_simple() {
    Node cmd;
    cmd.kind = NodeKind::Command;
    cmd.span = {peek().span.begin, peek().span.begin};
    bool any = false;
    while (true) {
      if (at_redirect()) {
        cmd.redirects.push_back(parse_redirect());
        cmd.span.end = cmd.redirects.back().span.end;
        any = true;
        continue;
      }
      if (peek().kind != Token::Kind::Word) break;
      const Token& w = peek();
      if (cmd.words.empty()) {
        std::size_t eq = w.text.find('=');
        if (eq != std::string::npos && is_valid_name(std::string_view(w.text).substr(0, eq))) {
          Assignment a;
          a.name = w.text.substr(0, eq);
          a.value = strip_assignment_name(w.word, eq + 1);
          cmd.assignments.push_back(std::move(a));
          cmd.span.end = w.span.end;
          ++i_;
          any = true;
          continue;
        }
      }
      cmd.words.push_back(next().word);
      cmd.span.end = cmd.words.back().span.end;
      any = true;
    }
    if (!any) fail(peek().kind == Token::Kind::End ? "unexpected end of input" : "unexpected '" + peek().text + "'");
    if (cmd.words.empty() && cmd.redirects.empty()) cmd.kind = NodeKind::Assignment;
    return cmd;
  }

  // Drops the `name=` prefix from an assignment word.
  static Word strip_assignment_name(const Word& w, std::size_t skip) {
    Word v;
    v.raw = w.raw.substr(skip);
    v.span = {w.span.begin + skip, w.span.end};
    std::size_t remaining = skip;
    for (const WordPart& p : w.parts) {
      if (remaining == 0) {
        v.parts.push_back(p);
        continue;
      }
      // The name and '=' are always unquoted literal text at the start.
      if (p.kind == WordPart::Kind::Literal && !p.quoted) {
        if (p.text.size() <= remaining) {
          remaining -= p.text.size();
          continue;
        }
        WordPart rest = p;
        rest.text = p.text.substr(remaining);
        remaining = 0;
        v.parts.push_back(std::move(rest));
      } else {
        remaining = 0;
        v.parts.push_back(p);
      }
    }
    if (v.parts.empty()) v.parts.push_back({WordPart::Kind::Literal, "", true});
    return v;
  }

  Node parse_for() {
    Node loop;
    loop.kind = NodeKind::ForLoop;
    loop.span.begin = next().span.begin;
    if (peek().kind != Token::Kind::Word || !is_valid_name(peek().text)) fail("expected a loop variable name");
    loop.loop_var = next().text;
    skip_newlines();
    if (peek().is_plain_word("in")) {
      ++i_;
      loop.loop_has_in = true;
      while (peek().kind == Token::Kind::Word) loop.loop_words.push_back(next().word);
      if (peek().is_op(";") || peek().kind == Token::Kind::Newline) ++i_;
    } else if (peek().is_op(";")) {
      ++i_;
    }
    skip_newlines();
    if (!peek().is_plain_word("do")) fail("expected 'do'");
    ++i_;
    skip_newlines();
    loop.children.push_back(parse_list());
    if (!peek().is_plain_word("done")) fail("expected 'done'");
    loop.span.end = next().span.end;
    parse_trailing_redirects(loop);
    return loop;
  }

  Node parse_subshell() {
    Node sub;
    sub.kind = NodeKind::Subshell;
    sub.span.begin = next().span.begin;
    skip_newlines();
    sub.children.push_back(parse_list());
    if (!peek().is_op(")")) fail("expected ')'");
    sub.span.end = next().span.end;
    parse_trailing_redirects(sub);
    return sub;
  }

  // Consumes a construct outside the supported grammar, keeping its text.
  Node scan_unparsed() {
    std::size_t begin = peek().span.begin;
    std::vector<std::string> closers;
    bool cmd_pos = true;
    auto closer_for = [](const Token& t) -> std::string {
      if (t.is_plain_word("if")) return "fi";
      if (t.is_plain_word("while") || t.is_plain_word("until") || t.is_plain_word("for") ||
          t.is_plain_word("select")) {
        return "done";
      }
      if (t.is_plain_word("case")) return "esac";
      if (t.is_plain_word("{")) return "}";
      if (t.is_plain_word("[[")) return "]]";
      if (t.is_op("(")) return ")";
      return "";
    };
    // Function definitions: `name ( )` or `function name` precede the body.
    if (peek().is_plain_word("function")) {
      ++i_;
      if (peek().kind == Token::Kind::Word) ++i_;
      if (peek().is_op("(") && peek(1).is_op(")")) i_ += 2;
      skip_newlines();
    } else if (peek().kind == Token::Kind::Word && peek(1).is_op("(") && peek(2).is_op(")") &&
               !is_compound_opener(peek())) {
      i_ += 3;
      skip_newlines();
    }
    do {
      const Token& t = peek();
      if (t.kind == Token::Kind::End) fail("unterminated compound command");
      bool in_case = !closers.empty() && closers.back() == "esac";
      bool in_test = !closers.empty() && closers.back() == "]]";
      if (in_test) {
        if (t.is_plain_word("]]")) closers.pop_back();
        ++i_;
        cmd_pos = false;
        continue;
      }
      if (t.is_op("<<") || t.is_op("<<-")) heredoc_seen_ = true;
      std::string closer = (cmd_pos && !(in_case && t.is_op("("))) ? closer_for(t) : "";
      if (!closer.empty()) {
        closers.push_back(closer);
      } else if (!closers.empty() &&
                 ((closers.back() == ")" && t.is_op(")") && !in_case) ||
                  (t.kind == Token::Kind::Word && t.is_plain_word(closers.back()) &&
                   (cmd_pos || closers.back() == "esac")))) {
        closers.pop_back();
      }
      ++i_;
      if (t.kind == Token::Kind::Op || t.kind == Token::Kind::Newline) {
        if (is_redirect_op(t)) {
          cmd_pos = false;
        } else if (t.is_op(")")) {
          cmd_pos = in_case;
        } else {
          cmd_pos = true;
        }
      } else {
        cmd_pos = false;
        for (std::string_view w : {"then", "do", "else", "elif", "if", "while", "until", "{", "!", "}", "fi",
                                   "done", "esac"}) {
          if (t.is_plain_word(w)) cmd_pos = (w != "}" && w != "fi" && w != "done" && w != "esac");
        }
      }
    } while (!closers.empty());
    Node u;
    u.kind = NodeKind::Unparsed;
    u.span = {begin, toks_[i_ - 1].span.end};
    parse_trailing_redirects(u);
    u.raw = std::string(src_.substr(u.span.begin, u.span.end - u.span.begin));
    u.redirects.clear();
    return u;
  }

  std::string_view src_;
  std::vector<Token> toks_;
  std::size_t i_ = 0;
  bool heredoc_seen_ = false;
};

}  // namespace detail

// Parses `text` into a Sequence node. Constructs outside the supported
// subset become Unparsed nodes carrying their source text.
inline Node parse_script(std::string_view text) {
  Lexer lexer(text);
  detail::Parser parser(text, lexer.run());
  return parser.parse_program();
}

}  // namespace shpar
