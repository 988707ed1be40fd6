#pragma once

#include <cctype>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "shpar/ast.hpp"
#include "shpar/error.hpp"

namespace shpar {

struct Token {
  enum class Kind { Word, Op, IoNumber, Newline, End };
  Kind kind = Kind::End;
  std::string text;  // operator text, or the raw word
  Word word;
  Span span;
  // Newline tokens: offset just past any here-document bodies read at this newline.
  std::size_t heredoc_end = 0;

  bool is_op(std::string_view op) const { return kind == Kind::Op && text == op; }
  // A word that is a single unquoted literal equal to `s` (reserved word check).
  bool is_plain_word(std::string_view s) const {
    return kind == Kind::Word && word.parts.size() == 1 && !word.parts[0].quoted &&
           word.parts[0].kind == WordPart::Kind::Literal && word.parts[0].text == s;
  }
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    bool expect_delim = false;
    bool strip_tabs = false;
    while (true) {
      skip_blanks_and_comments();
      if (pos_ >= src_.size()) {
        if (!pending_.empty()) {
          throw_at("here-document delimiter never seen", pos_);
        }
        Token t;
        t.kind = Token::Kind::End;
        t.span = {pos_, pos_};
        out.push_back(std::move(t));
        return out;
      }
      char c = src_[pos_];
      if (c == '\n') {
        Token t;
        t.kind = Token::Kind::Newline;
        t.text = "\n";
        t.span = {pos_, pos_ + 1};
        ++pos_;
        read_heredoc_bodies();
        t.heredoc_end = pos_;
        out.push_back(std::move(t));
        continue;
      }
      if (is_operator_start(c)) {
        Token t = lex_operator();
        if (t.text == "<<" || t.text == "<<-") {
          expect_delim = true;
          strip_tabs = t.text == "<<-";
        }
        out.push_back(std::move(t));
        continue;
      }
      Token t = lex_word();
      if (expect_delim) {
        std::string delim;
        for (const WordPart& p : t.word.parts) delim += p.text;
        pending_.push_back({delim, strip_tabs});
        expect_delim = false;
      } else if (pos_ < src_.size() && (src_[pos_] == '<' || src_[pos_] == '>') && is_all_digits(t.text)) {
        t.kind = Token::Kind::IoNumber;
      }
      out.push_back(std::move(t));
    }
  }

 private:
  struct PendingHeredoc {
    std::string delim;
    bool strip_tabs;
  };

  static bool is_operator_start(char c) {
    return c == '|' || c == '&' || c == ';' || c == '<' || c == '>' || c == '(' || c == ')';
  }

  static bool is_all_digits(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s) {
      if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    }
    return true;
  }

  static bool is_name_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
  static bool is_name_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

  [[noreturn]] void throw_at(const std::string& what, std::size_t offset) const {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < offset && i < src_.size(); ++i) {
      if (src_[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(what, line, col);
  }

  void skip_blanks_and_comments() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\r') {
        ++pos_;
      } else if (c == '\\' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '\n') {
        pos_ += 2;
      } else if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  Token lex_operator() {
    static constexpr std::string_view kOps[] = {"<<-", "&&", "||", ";;", "<<", ">>", "<&", ">&", "<>", ">|",
                                                "&",   "|",  ";",  "<",  ">",  "(",  ")"};
    for (std::string_view op : kOps) {
      if (src_.substr(pos_, op.size()) == op) {
        Token t;
        t.kind = Token::Kind::Op;
        t.text = std::string(op);
        t.span = {pos_, pos_ + op.size()};
        pos_ += op.size();
        return t;
      }
    }
    throw_at("unexpected character", pos_);
  }

  void add_part(Word& w, WordPart::Kind kind, std::string text, bool quoted) {
    if (kind == WordPart::Kind::Literal && !w.parts.empty()) {
      WordPart& last = w.parts.back();
      if (last.kind == WordPart::Kind::Literal && last.quoted == quoted) {
        last.text += text;
        return;
      }
    }
    w.parts.push_back({kind, std::move(text), quoted});
  }

  // Scans a balanced construct starting at `open_pos` (which holds `open`),
  // honoring quotes. Returns the offset just past the matching `close`.
  std::size_t scan_balanced(std::size_t open_pos, char open, char close) {
    std::size_t i = open_pos + 1;
    int depth = 1;
    while (i < src_.size()) {
      char c = src_[i];
      if (c == '\\') {
        i += 2;
        continue;
      }
      if (c == '\'') {
        std::size_t e = src_.find('\'', i + 1);
        if (e == std::string_view::npos) throw_at("unterminated single quote", i);
        i = e + 1;
        continue;
      }
      if (c == '"') {
        i = scan_double_quote_end(i);
        continue;
      }
      if (c == '`') {
        i = scan_backquote_end(i);
        continue;
      }
      if (c == open) {
        ++depth;
      } else if (c == close) {
        if (--depth == 0) return i + 1;
      }
      ++i;
    }
    throw_at(std::string("unterminated '") + open + "'", open_pos);
  }

  std::size_t scan_backquote_end(std::size_t start) {
    std::size_t i = start + 1;
    while (i < src_.size()) {
      if (src_[i] == '\\') {
        i += 2;
        continue;
      }
      if (src_[i] == '`') return i + 1;
      ++i;
    }
    throw_at("unterminated backquote", start);
  }

  std::size_t scan_double_quote_end(std::size_t start) {
    std::size_t i = start + 1;
    while (i < src_.size()) {
      char c = src_[i];
      if (c == '\\') {
        i += 2;
        continue;
      }
      if (c == '"') return i + 1;
      if (c == '`') {
        i = scan_backquote_end(i);
        continue;
      }
      if (c == '$' && i + 1 < src_.size() && (src_[i + 1] == '(' || src_[i + 1] == '{')) {
        i = src_[i + 1] == '(' ? scan_balanced(i + 1, '(', ')') : scan_balanced(i + 1, '{', '}');
        continue;
      }
      ++i;
    }
    throw_at("unterminated double quote", start);
  }

  // Parses a `$` expansion at pos_, appending a part to `w`.
  void lex_dollar(Word& w, bool quoted) {
    std::size_t start = pos_;
    if (pos_ + 1 >= src_.size()) {
      add_part(w, WordPart::Kind::Literal, "$", quoted);
      ++pos_;
      return;
    }
    char n = src_[pos_ + 1];
    if (n == '(') {
      pos_ = scan_balanced(pos_ + 1, '(', ')');
      add_part(w, WordPart::Kind::Unknown, std::string(src_.substr(start, pos_ - start)), quoted);
      return;
    }
    if (n == '{') {
      pos_ = scan_balanced(pos_ + 1, '{', '}');
      std::string_view inner = src_.substr(start + 2, pos_ - start - 3);
      bool simple = !inner.empty() && is_name_start(inner[0]);
      for (char c : inner) simple = simple && is_name_char(c);
      if (simple) {
        add_part(w, WordPart::Kind::Param, std::string(inner), quoted);
      } else {
        add_part(w, WordPart::Kind::Unknown, std::string(src_.substr(start, pos_ - start)), quoted);
      }
      return;
    }
    if (is_name_start(n)) {
      std::size_t e = pos_ + 1;
      while (e < src_.size() && is_name_char(src_[e])) ++e;
      add_part(w, WordPart::Kind::Param, std::string(src_.substr(pos_ + 1, e - pos_ - 1)), quoted);
      pos_ = e;
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(n)) || std::string_view("@*#?-$!").find(n) != std::string_view::npos) {
      pos_ += 2;
      add_part(w, WordPart::Kind::Unknown, std::string(src_.substr(start, 2)), quoted);
      return;
    }
    add_part(w, WordPart::Kind::Literal, "$", quoted);
    ++pos_;
  }

  Token lex_word() {
    Token t;
    t.kind = Token::Kind::Word;
    std::size_t start = pos_;
    Word& w = t.word;
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || is_operator_start(c)) break;
      if (c == '\'') {
        std::size_t e = src_.find('\'', pos_ + 1);
        if (e == std::string_view::npos) throw_at("unterminated single quote", pos_);
        add_part(w, WordPart::Kind::Literal, std::string(src_.substr(pos_ + 1, e - pos_ - 1)), true);
        if (e == pos_ + 1) add_part(w, WordPart::Kind::Literal, "", true);
        pos_ = e + 1;
      } else if (c == '"') {
        lex_double_quoted(w);
      } else if (c == '\\') {
        if (pos_ + 1 >= src_.size()) {
          add_part(w, WordPart::Kind::Literal, "\\", false);
          ++pos_;
        } else if (src_[pos_ + 1] == '\n') {
          pos_ += 2;
        } else {
          add_part(w, WordPart::Kind::Literal, std::string(1, src_[pos_ + 1]), true);
          pos_ += 2;
        }
      } else if (c == '$') {
        lex_dollar(w, false);
      } else if (c == '`') {
        std::size_t e = scan_backquote_end(pos_);
        add_part(w, WordPart::Kind::Unknown, std::string(src_.substr(pos_, e - pos_)), false);
        pos_ = e;
      } else {
        add_part(w, WordPart::Kind::Literal, std::string(1, c), false);
        ++pos_;
      }
    }
    w.raw = std::string(src_.substr(start, pos_ - start));
    w.span = {start, pos_};
    t.text = w.raw;
    t.span = w.span;
    return t;
  }

  void lex_double_quoted(Word& w) {
    std::size_t start = pos_;
    ++pos_;
    bool empty = true;
    while (true) {
      if (pos_ >= src_.size()) throw_at("unterminated double quote", start);
      char c = src_[pos_];
      if (c == '"') {
        ++pos_;
        break;
      }
      empty = false;
      if (c == '\\' && pos_ + 1 < src_.size()) {
        char n = src_[pos_ + 1];
        if (n == '\n') {
          pos_ += 2;
        } else if (n == '$' || n == '`' || n == '"' || n == '\\') {
          add_part(w, WordPart::Kind::Literal, std::string(1, n), true);
          pos_ += 2;
        } else {
          add_part(w, WordPart::Kind::Literal, std::string("\\") + n, true);
          pos_ += 2;
        }
      } else if (c == '$') {
        lex_dollar(w, true);
      } else if (c == '`') {
        std::size_t e = scan_backquote_end(pos_);
        add_part(w, WordPart::Kind::Unknown, std::string(src_.substr(pos_, e - pos_)), true);
        pos_ = e;
      } else {
        add_part(w, WordPart::Kind::Literal, std::string(1, c), true);
        ++pos_;
      }
    }
    if (empty) add_part(w, WordPart::Kind::Literal, "", true);
  }

  void read_heredoc_bodies() {
    for (const PendingHeredoc& h : pending_) {
      while (true) {
        if (pos_ >= src_.size()) throw_at("here-document '" + h.delim + "' not terminated", pos_);
        std::size_t eol = src_.find('\n', pos_);
        std::size_t line_end = eol == std::string_view::npos ? src_.size() : eol;
        std::string_view line = src_.substr(pos_, line_end - pos_);
        if (h.strip_tabs) {
          while (!line.empty() && line.front() == '\t') line.remove_prefix(1);
        }
        pos_ = eol == std::string_view::npos ? src_.size() : eol + 1;
        if (line == h.delim) break;
      }
    }
    pending_.clear();
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::vector<PendingHeredoc> pending_;
};

}  // namespace shpar
