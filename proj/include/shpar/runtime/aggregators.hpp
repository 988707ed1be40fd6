#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

#include "shpar/error.hpp"
#include "shpar/runtime/io.hpp"

namespace shpar::runtime {

// ---- line sources and sinks ----

class LineSource {
 public:
  virtual ~LineSource() = default;
  // Next line including its '\n' (absent only on a final unterminated line).
  virtual bool next(std::string& line) = 0;
};

class StringLineSource : public LineSource {
 public:
  explicit StringLineSource(std::string_view data) : data_(data) {}
  bool next(std::string& line) override {
    if (pos_ >= data_.size()) return false;
    std::size_t nl = data_.find('\n', pos_);
    std::size_t end = nl == std::string_view::npos ? data_.size() : nl + 1;
    line.assign(data_.substr(pos_, end - pos_));
    pos_ = end;
    return true;
  }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

class FdLineSource : public LineSource {
 public:
  explicit FdLineSource(int fd) : fd_(fd), buf_(1 << 16) {}
  bool next(std::string& line) override {
    line.clear();
    for (;;) {
      if (pos_ < len_) {
        const char* start = buf_.data() + pos_;
        const void* nl = std::memchr(start, '\n', len_ - pos_);
        if (nl) {
          std::size_t n = static_cast<const char*>(nl) - start + 1;
          line.append(start, n);
          pos_ += n;
          return true;
        }
        line.append(start, len_ - pos_);
        pos_ = len_;
      }
      if (eof_) return !line.empty();
      ssize_t got;
      do {
        got = ::read(fd_, buf_.data(), buf_.size());
      } while (got < 0 && errno == EINTR);
      if (got < 0) throw Error(std::string("read: ") + std::strerror(errno));
      if (got == 0) {
        eof_ = true;
      } else {
        pos_ = 0;
        len_ = static_cast<std::size_t>(got);
      }
    }
  }

 private:
  int fd_;
  std::vector<char> buf_;
  std::size_t pos_ = 0, len_ = 0;
  bool eof_ = false;
};

// Thrown when the reader of an output has gone away.
struct BrokenPipe {};

class Sink {
 public:
  virtual ~Sink() = default;
  virtual void put(std::string_view s) = 0;
  virtual void flush() {}
};

class StringSink : public Sink {
 public:
  void put(std::string_view s) override { out.append(s); }
  std::string out;
};

class FdSink : public Sink {
 public:
  explicit FdSink(int fd) : fd_(fd) { buf_.reserve(kCap); }
  ~FdSink() override {
    try {
      flush();
    } catch (...) {
    }
  }
  void put(std::string_view s) override {
    if (buf_.size() + s.size() > kCap) flush();
    if (s.size() >= kCap) {
      if (!write_all(fd_, s)) throw BrokenPipe{};
      return;
    }
    buf_.append(s);
  }
  void flush() override {
    if (buf_.empty()) return;
    std::string tmp;
    tmp.swap(buf_);
    buf_.reserve(kCap);
    if (!write_all(fd_, tmp)) throw BrokenPipe{};
  }

 private:
  static constexpr std::size_t kCap = 1 << 16;
  int fd_;
  std::string buf_;
};

// ---- wc ----

// Column sums of `wc` outputs. One column prints bare, several are padded to 7.
inline void agg_wc(std::vector<LineSource*> inputs, Sink& out) {
  std::vector<unsigned long long> sums;
  bool first = true;
  std::string line;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::vector<unsigned long long> cols;
    bool any = false;
    while (inputs[i]->next(line)) {
      any = true;
      std::size_t p = 0;
      while (p < line.size()) {
        while (p < line.size() && std::isspace(static_cast<unsigned char>(line[p]))) ++p;
        if (p >= line.size()) break;
        std::size_t q = p;
        while (q < line.size() && !std::isspace(static_cast<unsigned char>(line[q]))) ++q;
        std::string field = line.substr(p, q - p);
        if (field.find_first_not_of("0123456789") != std::string::npos) {
          throw Error("agg-wc: input " + std::to_string(i + 1) + ": non-numeric field '" + field + "'");
        }
        cols.push_back(std::stoull(field));
        p = q;
      }
    }
    if (!any) throw Error("agg-wc: input " + std::to_string(i + 1) + ": empty");
    if (first) {
      sums = cols;
      first = false;
    } else {
      if (cols.size() != sums.size()) throw Error("agg-wc: input " + std::to_string(i + 1) + ": column count differs");
      for (std::size_t k = 0; k < cols.size(); ++k) sums[k] += cols[k];
    }
  }
  std::string s;
  char buf[32];
  for (std::size_t k = 0; k < sums.size(); ++k) {
    if (k) s += ' ';
    std::snprintf(buf, sizeof buf, sums.size() == 1 ? "%llu" : "%7llu", sums[k]);
    s += buf;
  }
  s += '\n';
  out.put(s);
}

// ---- sort -m ----

struct SortKey {
  std::size_t sword = 0;  // fields skipped before the key
  std::size_t schar = 0;  // chars skipped inside the start field
  std::optional<std::size_t> eword;  // end field index (0-based); nullopt: end of line
  std::size_t echar = 0;             // 0: end of field
  bool numeric = false, reverse = false, fold = false, skip_sblanks = false, skip_eblanks = false;
};

struct SortOptions {
  bool numeric = false, reverse = false, fold = false, blanks = false, unique = false, stable = false;
  std::optional<char> tab;
  std::vector<SortKey> keys;
};

namespace detail {

inline bool is_blank(char c) { return c == ' ' || c == '\t'; }

inline std::optional<std::size_t> parse_count(std::string_view& s) {
  std::size_t i = 0;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  if (i == 0) return std::nullopt;
  std::size_t v = std::stoul(std::string(s.substr(0, i)));
  s.remove_prefix(i);
  return v;
}

// Ordering letters; returns false on anything unsupported.
inline bool parse_key_opts(std::string_view& s, SortKey& k, bool start, bool& any) {
  while (!s.empty() && s[0] != ',') {
    switch (s[0]) {
      case 'n': k.numeric = true; break;
      case 'r': k.reverse = true; break;
      case 'f': k.fold = true; break;
      case 'b':
        if (start) k.skip_sblanks = true;
        else k.skip_eblanks = true;
        break;
      default: return false;
    }
    any = true;
    s.remove_prefix(1);
  }
  return true;
}

inline bool parse_key(std::string_view s, SortKey& k, bool& has_opts) {
  auto f1 = parse_count(s);
  if (!f1 || *f1 == 0) return false;
  k.sword = *f1 - 1;
  if (!s.empty() && s[0] == '.') {
    s.remove_prefix(1);
    auto c1 = parse_count(s);
    if (!c1 || *c1 == 0) return false;
    k.schar = *c1 - 1;
  }
  if (!parse_key_opts(s, k, true, has_opts)) return false;
  if (!s.empty() && s[0] == ',') {
    s.remove_prefix(1);
    auto f2 = parse_count(s);
    if (!f2 || *f2 == 0) return false;
    k.eword = *f2 - 1;
    if (!s.empty() && s[0] == '.') {
      s.remove_prefix(1);
      auto c2 = parse_count(s);
      if (!c2) return false;
      k.echar = *c2;
    }
    if (!parse_key_opts(s, k, false, has_opts)) return false;
  }
  return s.empty();
}

inline std::size_t key_begin(std::string_view line, const SortKey& k, std::optional<char> tab) {
  std::size_t p = 0, lim = line.size();
  std::size_t sword = k.sword;
  if (tab) {
    while (p < lim && sword--) {
      while (p < lim && line[p] != *tab) ++p;
      if (p < lim) ++p;
    }
  } else {
    while (p < lim && sword--) {
      while (p < lim && is_blank(line[p])) ++p;
      while (p < lim && !is_blank(line[p])) ++p;
    }
  }
  if (k.skip_sblanks) {
    while (p < lim && is_blank(line[p])) ++p;
  }
  return std::min(lim, p + k.schar);
}

inline std::size_t key_end(std::string_view line, const SortKey& k, std::optional<char> tab) {
  std::size_t lim = line.size();
  if (!k.eword) return lim;
  std::size_t eword = *k.eword, echar = k.echar;
  if (echar == 0) ++eword;
  std::size_t p = 0;
  if (tab) {
    while (p < lim && eword--) {
      while (p < lim && line[p] != *tab) ++p;
      if (p < lim && (eword || echar)) ++p;
    }
  } else {
    while (p < lim && eword--) {
      while (p < lim && is_blank(line[p])) ++p;
      while (p < lim && !is_blank(line[p])) ++p;
    }
  }
  if (echar != 0) {
    if (k.skip_eblanks) {
      while (p < lim && is_blank(line[p])) ++p;
    }
    p = std::min(lim, p + echar);
  }
  return p;
}

// Decimal comparison in the C locale, as `sort -n` does it.
inline int numeric_compare(std::string_view a, std::string_view b) {
  struct Num {
    bool neg = false;
    std::string_view intpart, frac;
    bool zero = true;
  };
  auto parse = [](std::string_view s) {
    Num n;
    std::size_t p = 0;
    while (p < s.size() && is_blank(s[p])) ++p;
    if (p < s.size() && s[p] == '-') {
      n.neg = true;
      ++p;
    }
    while (p < s.size() && s[p] == '0') ++p;
    std::size_t ib = p;
    while (p < s.size() && std::isdigit(static_cast<unsigned char>(s[p]))) ++p;
    n.intpart = s.substr(ib, p - ib);
    if (p < s.size() && s[p] == '.') {
      ++p;
      std::size_t fb = p;
      while (p < s.size() && std::isdigit(static_cast<unsigned char>(s[p]))) ++p;
      std::string_view f = s.substr(fb, p - fb);
      while (!f.empty() && f.back() == '0') f.remove_suffix(1);
      n.frac = f;
    }
    n.zero = n.intpart.empty() && n.frac.empty();
    if (n.zero) n.neg = false;
    return n;
  };
  Num x = parse(a), y = parse(b);
  if (x.zero && y.zero) return 0;
  if (x.neg != y.neg) return x.neg ? -1 : 1;
  int mag;
  if (x.intpart.size() != y.intpart.size()) {
    mag = x.intpart.size() < y.intpart.size() ? -1 : 1;
  } else {
    int c = x.intpart.compare(y.intpart);
    if (c == 0) c = x.frac.compare(y.frac);
    mag = c < 0 ? -1 : (c > 0 ? 1 : 0);
  }
  return x.neg ? -mag : mag;
}

inline int bytes_compare(std::string_view a, std::string_view b, bool fold) {
  if (!fold) {
    int c = a.compare(b);
    return c < 0 ? -1 : (c > 0 ? 1 : 0);
  }
  std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    int x = std::toupper(static_cast<unsigned char>(a[i]));
    int y = std::toupper(static_cast<unsigned char>(b[i]));
    if (x != y) return x < y ? -1 : 1;
  }
  return a.size() < b.size() ? -1 : (a.size() > b.size() ? 1 : 0);
}

}  // namespace detail

// Parses sort flags; nullopt when the native merger does not support them.
inline std::optional<SortOptions> parse_sort_flags(const std::vector<std::string>& args) {
  SortOptions o;
  std::vector<std::pair<SortKey, bool>> keys;
  auto add_key = [&](std::string_view spec) {
    SortKey k;
    bool has = false;
    if (!detail::parse_key(spec, k, has)) return false;
    keys.emplace_back(k, has);
    return true;
  };
  auto set_tab = [&](const std::string& v) {
    if (v.size() != 1) return false;
    o.tab = v[0];
    return true;
  };
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) == 0) {
      std::string name = a, value;
      bool has_value = false;
      if (auto eq = a.find('='); eq != std::string::npos) {
        name = a.substr(0, eq);
        value = a.substr(eq + 1);
        has_value = true;
      }
      auto need = [&]() -> std::optional<std::string> {
        if (has_value) return value;
        if (i + 1 < args.size()) return args[++i];
        return std::nullopt;
      };
      if (name == "--numeric-sort") o.numeric = true;
      else if (name == "--reverse") o.reverse = true;
      else if (name == "--ignore-case") o.fold = true;
      else if (name == "--ignore-leading-blanks") o.blanks = true;
      else if (name == "--unique") o.unique = true;
      else if (name == "--stable") o.stable = true;
      else if (name == "--key") {
        auto v = need();
        if (!v || !add_key(*v)) return std::nullopt;
      } else if (name == "--field-separator") {
        auto v = need();
        if (!v || !set_tab(*v)) return std::nullopt;
      } else if (name == "--buffer-size" || name == "--temporary-directory" || name == "--parallel") {
        if (!need()) return std::nullopt;
      } else {
        return std::nullopt;
      }
      continue;
    }
    if (a.size() < 2 || a[0] != '-') return std::nullopt;
    for (std::size_t k = 1; k < a.size(); ++k) {
      char c = a[k];
      if (c == 'k' || c == 't' || c == 'S' || c == 'T') {
        std::string v;
        if (k + 1 < a.size()) {
          v = a.substr(k + 1);
        } else if (i + 1 < args.size()) {
          v = args[++i];
        } else {
          return std::nullopt;
        }
        if (c == 'k' && !add_key(v)) return std::nullopt;
        if (c == 't' && !set_tab(v)) return std::nullopt;
        break;
      }
      switch (c) {
        case 'n': o.numeric = true; break;
        case 'r': o.reverse = true; break;
        case 'f': o.fold = true; break;
        case 'b': o.blanks = true; break;
        case 'u': o.unique = true; break;
        case 's': o.stable = true; break;
        case 'm': break;
        default: return std::nullopt;
      }
    }
  }
  for (auto& [k, has] : keys) {
    if (!has) {
      k.numeric = o.numeric;
      k.reverse = o.reverse;
      k.fold = o.fold;
      k.skip_sblanks = k.skip_eblanks = o.blanks;
    }
    o.keys.push_back(k);
  }
  if (o.keys.empty() && (o.numeric || o.fold || o.blanks)) {
    SortKey whole;
    whole.numeric = o.numeric;
    whole.reverse = o.reverse;
    whole.fold = o.fold;
    whole.skip_sblanks = whole.skip_eblanks = o.blanks;
    o.keys.push_back(whole);
  }
  return o;
}

// Three-way line comparison (lines without their '\n').
inline int compare_lines(std::string_view a, std::string_view b, const SortOptions& o) {
  if (o.keys.empty()) {
    int d = detail::bytes_compare(a, b, false);
    return o.reverse ? -d : d;
  }
  for (const SortKey& k : o.keys) {
    std::size_t ab = detail::key_begin(a, k, o.tab), ae = std::max(ab, detail::key_end(a, k, o.tab));
    std::size_t bb = detail::key_begin(b, k, o.tab), be = std::max(bb, detail::key_end(b, k, o.tab));
    std::string_view ka = a.substr(ab, ae - ab), kb = b.substr(bb, be - bb);
    int d = k.numeric ? detail::numeric_compare(ka, kb) : detail::bytes_compare(ka, kb, k.fold);
    if (d) return k.reverse ? -d : d;
  }
  if (o.unique || o.stable) return 0;
  int d = detail::bytes_compare(a, b, false);
  return o.reverse ? -d : d;
}

inline std::string_view without_newline(std::string_view s) {
  if (!s.empty() && s.back() == '\n') s.remove_suffix(1);
  return s;
}

// k-way merge; ties go to the earlier input.
inline void merge_sorted(std::vector<LineSource*> inputs, const SortOptions& o, Sink& out) {
  struct Head {
    std::string line;
    std::size_t src;
  };
  std::vector<Head> heads;
  auto cmp = [&](const Head& x, const Head& y) {
    int d = compare_lines(without_newline(x.line), without_newline(y.line), o);
    if (d) return d > 0;
    return x.src > y.src;
  };
  std::priority_queue<Head, std::vector<Head>, decltype(cmp)> pq(cmp);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Head h{{}, i};
    if (inputs[i]->next(h.line)) pq.push(std::move(h));
  }
  std::optional<std::string> last;
  while (!pq.empty()) {
    Head h = pq.top();
    pq.pop();
    if (!h.line.empty() && h.line.back() != '\n') h.line += '\n';
    bool emit = true;
    if (o.unique && last && compare_lines(without_newline(*last), without_newline(h.line), o) == 0) emit = false;
    if (emit) {
      out.put(h.line);
      if (o.unique) last = h.line;
    }
    Head nxt{{}, h.src};
    if (inputs[h.src]->next(nxt.line)) pq.push(std::move(nxt));
  }
}

// Whether the current locale collates bytewise.
inline bool c_collation() {
  for (const char* var : {"LC_ALL", "LC_COLLATE", "LANG"}) {
    const char* v = std::getenv(var);
    if (v && *v) {
      std::string_view s(v);
      return s == "C" || s == "POSIX" || s == "C.UTF-8" || s == "C.utf8";
    }
  }
  return true;
}

// ---- uniq ----

namespace detail {

inline bool parse_count_line(std::string_view line, unsigned long long& count, std::string_view& text) {
  std::size_t p = 0;
  while (p < line.size() && line[p] == ' ') ++p;
  std::size_t db = p;
  while (p < line.size() && std::isdigit(static_cast<unsigned char>(line[p]))) ++p;
  if (p == db || p >= line.size() || line[p] != ' ') return false;
  count = std::stoull(std::string(line.substr(db, p - db)));
  text = line.substr(p + 1);
  return true;
}

inline std::string format_count_line(unsigned long long count, std::string_view text) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%7llu ", count);
  return std::string(buf) + std::string(text);
}

}  // namespace detail

// Concatenates per-chunk `uniq` (or `uniq -c`) outputs, merging equal lines at seams.
inline void agg_uniq(std::vector<LineSource*> inputs, bool counts, Sink& out) {
  std::optional<std::string> pending_text;
  unsigned long long pending_count = 0;
  std::string line;
  auto flush = [&] {
    if (!pending_text) return;
    out.put(counts ? detail::format_count_line(pending_count, *pending_text) : *pending_text);
    pending_text.reset();
  };
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    bool first = true;
    while (inputs[i]->next(line)) {
      if (line.back() != '\n') line += '\n';
      unsigned long long c = 1;
      std::string_view text = line;
      if (counts && !detail::parse_count_line(line, c, text)) {
        throw Error("agg-uniq: input " + std::to_string(i + 1) + ": malformed count line");
      }
      if (first && pending_text && *pending_text == text) {
        pending_count += c;
      } else {
        flush();
        pending_text = std::string(text);
        pending_count = c;
      }
      first = false;
    }
  }
  flush();
}

// ---- tac ----

// Inputs are emitted last to first; each is fully read before the next.
inline void agg_tac(std::vector<LineSource*> inputs, Sink& out) {
  std::string line;
  for (std::size_t i = inputs.size(); i-- > 0;) {
    while (inputs[i]->next(line)) out.put(line);
  }
}

// Concatenation for copies of a `tr -s` that squeezes the newline's image:
// a run of that byte straddling a seam collapses to one, as in a single pass.
inline void agg_squeeze(std::vector<LineSource*> inputs, char c, Sink& out) {
  bool ends_with_c = false;
  std::string piece;
  for (LineSource* in : inputs) {
    bool at_seam = ends_with_c;
    while (in->next(piece)) {
      std::string_view v = piece;
      if (at_seam) {
        std::size_t k = v.find_first_not_of(c);
        if (k == std::string_view::npos) continue;
        v.remove_prefix(k);
        at_seam = false;
      }
      out.put(v);
      ends_with_c = v.back() == c;
    }
  }
}

// ---- string conveniences ----

namespace detail {

template <class F>
std::string with_sources(const std::vector<std::string>& inputs, F&& f) {
  std::vector<StringLineSource> srcs;
  srcs.reserve(inputs.size());
  for (const auto& s : inputs) srcs.emplace_back(s);
  std::vector<LineSource*> ptrs;
  for (auto& s : srcs) ptrs.push_back(&s);
  StringSink sink;
  f(ptrs, sink);
  return sink.out;
}

}  // namespace detail

inline std::string agg_wc(const std::vector<std::string>& inputs) {
  return detail::with_sources(inputs, [](auto& p, Sink& s) { agg_wc(p, s); });
}
inline std::string agg_uniq(const std::vector<std::string>& inputs, bool counts) {
  return detail::with_sources(inputs, [&](auto& p, Sink& s) { agg_uniq(p, counts, s); });
}
inline std::string agg_tac(const std::vector<std::string>& inputs) {
  return detail::with_sources(inputs, [](auto& p, Sink& s) { agg_tac(p, s); });
}
inline std::string agg_squeeze(const std::vector<std::string>& inputs, char c) {
  return detail::with_sources(inputs, [c](auto& p, Sink& s) { agg_squeeze(p, c, s); });
}
inline std::string merge_sorted(const std::vector<std::string>& inputs, const SortOptions& o) {
  return detail::with_sources(inputs, [&](auto& p, Sink& s) { merge_sorted(p, o, s); });
}

}  // namespace shpar::runtime
