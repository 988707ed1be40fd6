#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "shpar/error.hpp"

namespace shpar {

// Ordered by parallelization difficulty: S < P < N < E.
enum class ParClass { Stateless = 0, ParallelizablePure = 1, NonParallelizablePure = 2, SideEffectful = 3 };

inline std::string_view class_wire_name(ParClass c) {
  switch (c) {
    case ParClass::Stateless: return "stateless";
    case ParClass::ParallelizablePure: return "pure";
    case ParClass::NonParallelizablePure: return "n-pure";
    case ParClass::SideEffectful: return "side-effectful";
  }
  return "side-effectful";
}

inline char class_key(ParClass c) { return "SPNE"[static_cast<int>(c)]; }

inline std::optional<ParClass> class_from_wire(std::string_view s) {
  if (s == "stateless") return ParClass::Stateless;
  if (s == "pure") return ParClass::ParallelizablePure;
  if (s == "n-pure") return ParClass::NonParallelizablePure;
  if (s == "side-effectful") return ParClass::SideEffectful;
  return std::nullopt;
}

struct Predicate {
  // and/not/args_match/operands_gt extend the operators shown in the
  // published annotation examples.
  enum class Op { Default, Exists, ValOptEq, Or, And, Not, ArgsMatch, OperandsGt };
  Op op = Op::Default;
  std::vector<std::string> strings;
  std::vector<Predicate> subs;
  std::shared_ptr<const std::regex> regex;

  static Predicate always() { return {}; }
  static Predicate exists(std::string flag) {
    Predicate p;
    p.op = Op::Exists;
    p.strings = {std::move(flag)};
    return p;
  }
  static Predicate val_opt_eq(std::string flag, std::string value) {
    Predicate p;
    p.op = Op::ValOptEq;
    p.strings = {std::move(flag), std::move(value)};
    return p;
  }
  static Predicate any_of(std::vector<Predicate> subs) {
    Predicate p;
    p.op = Op::Or;
    p.subs = std::move(subs);
    return p;
  }
  static Predicate all_of(std::vector<Predicate> subs) {
    Predicate p;
    p.op = Op::And;
    p.subs = std::move(subs);
    return p;
  }
  static Predicate negation(Predicate sub) {
    Predicate p;
    p.op = Op::Not;
    p.subs = {std::move(sub)};
    return p;
  }
};

// One entry of an inputs/outputs list: stdin, stdout, or a slice of the
// non-option arguments.
struct IoSpec {
  enum class Kind { Stdin, Stdout, Args };
  Kind kind = Kind::Stdin;
  long begin = 0;
  std::optional<long> end;  // nullopt: to the end
  std::string text;
};

inline std::optional<IoSpec> parse_io_spec(const std::string& s) {
  IoSpec spec;
  spec.text = s;
  if (s == "stdin") return spec;
  if (s == "stdout") {
    spec.kind = IoSpec::Kind::Stdout;
    return spec;
  }
  static const std::regex re(R"(args\[(-?\d*)(:(-?\d*))?\])");
  std::smatch m;
  if (!std::regex_match(s, m, re)) return std::nullopt;
  spec.kind = IoSpec::Kind::Args;
  if (!m[2].matched) {
    if (m[1].str().empty()) return std::nullopt;
    spec.begin = std::stol(m[1].str());
    spec.end = spec.begin == -1 ? std::optional<long>() : std::optional<long>(spec.begin + 1);
    return spec;
  }
  spec.begin = m[1].str().empty() ? 0 : std::stol(m[1].str());
  if (!m[3].str().empty()) spec.end = std::stol(m[3].str());
  return spec;
}

struct AnnotationCase {
  Predicate predicate;
  ParClass cls = ParClass::SideEffectful;
  std::vector<IoSpec> inputs;
  std::vector<IoSpec> outputs;
  std::vector<IoSpec> config;  // arguments read fully before streaming starts
};

struct AnnotationRecord {
  std::string command;
  std::vector<AnnotationCase> cases;
  bool stdin_hyphen = false;
  bool empty_args_stdin = false;
  std::vector<std::pair<std::string, std::string>> short_long;
  std::set<std::string> value_flags;   // flags that consume a value
  std::set<std::string> config_flags;  // flags whose value names a configuration input file
  std::string source;                  // file it was loaded from
};

// Arguments split into flags and operands.
struct ParsedArgs {
  struct Flag {
    std::string name;  // normalized to the short form when known
    std::optional<std::string> value;
    std::size_t index = 0;                    // argument index of the flag
    std::optional<std::size_t> value_index;   // argument index holding the value, if separate
  };
  struct Operand {
    std::string value;
    std::size_t index = 0;
  };
  std::vector<Flag> flags;
  std::vector<Operand> operands;
  std::vector<std::string> raw;

  bool has(std::string_view name) const {
    return std::any_of(flags.begin(), flags.end(), [&](const Flag& f) { return f.name == name; });
  }
  const Flag* find(std::string_view name) const {
    for (const Flag& f : flags) {
      if (f.name == name) return &f;
    }
    return nullptr;
  }
};

// GNU-style argument parsing: `-` alone is an operand; `--` ends flags;
// clustered short flags are split; value flags take the rest of the cluster
// or the next argument.
inline ParsedArgs parse_args(const std::vector<std::string>& args, const AnnotationRecord* record) {
  ParsedArgs out;
  out.raw = args;
  auto to_short = [&](const std::string& name) {
    if (record) {
      for (const auto& [s, l] : record->short_long) {
        if (l == name) return s;
      }
    }
    return name;
  };
  auto takes_value = [&](const std::string& name) { return record && record->value_flags.count(name) > 0; };
  bool flags_done = false;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (flags_done || a.size() < 2 || a[0] != '-') {
      out.operands.push_back({a, i});
      continue;
    }
    if (a == "--") {
      flags_done = true;
      continue;
    }
    if (a.rfind("--", 0) == 0) {
      ParsedArgs::Flag f;
      f.index = i;
      std::size_t eq = a.find('=');
      if (eq != std::string::npos) {
        f.name = to_short(a.substr(0, eq));
        f.value = a.substr(eq + 1);
      } else {
        f.name = to_short(a);
        if (takes_value(f.name) && i + 1 < args.size()) {
          f.value = args[i + 1];
          f.value_index = ++i;
        }
      }
      out.flags.push_back(std::move(f));
      continue;
    }
    for (std::size_t k = 1; k < a.size(); ++k) {
      ParsedArgs::Flag f;
      f.index = i;
      f.name = std::string("-") + a[k];
      if (takes_value(f.name)) {
        if (k + 1 < a.size()) {
          f.value = a.substr(k + 1);
        } else if (i + 1 < args.size()) {
          f.value = args[i + 1];
          f.value_index = i + 1;
          out.flags.push_back(std::move(f));
          ++i;
          break;
        }
        out.flags.push_back(std::move(f));
        break;
      }
      out.flags.push_back(std::move(f));
    }
  }
  return out;
}

inline bool evaluate_predicate(const Predicate& p, const ParsedArgs& args) {
  switch (p.op) {
    case Predicate::Op::Default:
      return true;
    case Predicate::Op::Exists:
      return args.has(p.strings.at(0));
    case Predicate::Op::ValOptEq: {
      const std::string& flag = p.strings.at(0);
      const std::string& value = p.strings.at(1);
      for (const auto& f : args.flags) {
        if (f.name == flag && f.value && *f.value == value) return true;
      }
      // The flag may not be declared as taking a value: `-d v` adjacency.
      for (std::size_t i = 0; i + 1 < args.raw.size(); ++i) {
        if (args.raw[i] == flag && args.raw[i + 1] == value) return true;
      }
      return false;
    }
    case Predicate::Op::Or:
      return std::any_of(p.subs.begin(), p.subs.end(), [&](const Predicate& s) { return evaluate_predicate(s, args); });
    case Predicate::Op::And:
      return std::all_of(p.subs.begin(), p.subs.end(), [&](const Predicate& s) { return evaluate_predicate(s, args); });
    case Predicate::Op::Not:
      return !evaluate_predicate(p.subs.at(0), args);
    case Predicate::Op::ArgsMatch:
      return p.regex && std::any_of(args.raw.begin(), args.raw.end(),
                                    [&](const std::string& a) { return std::regex_search(a, *p.regex); });
    case Predicate::Op::OperandsGt:
      return static_cast<long>(args.operands.size()) > std::stol(p.strings.at(0));
  }
  return false;
}

inline bool evaluate_predicate(const Predicate& p, const std::vector<std::string>& args) {
  return evaluate_predicate(p, parse_args(args, nullptr));
}

// A stream a command instance reads or writes.
struct StreamRef {
  enum class Kind { Stdin, Stdout, Arg };
  Kind kind = Kind::Stdin;
  std::size_t arg_index = 0;  // Arg: index into CommandInstance::args
  std::string path;           // Arg: the file name

  bool operator==(const StreamRef&) const = default;
};

struct CommandInstance {
  std::string name;
  std::vector<std::string> args;
  ParsedArgs parsed;
  ParClass cls = ParClass::SideEffectful;
  std::vector<StreamRef> inputs;   // streaming inputs, in read order
  std::vector<StreamRef> config;   // configuration inputs
  std::vector<StreamRef> outputs;
  std::string reason;              // why the class was chosen, for reports
};

using ClassifierHook = std::function<CommandInstance(const std::string&, const std::vector<std::string>&,
                                                     const class AnnotationDb&)>;

class AnnotationDb {
 public:
  const AnnotationRecord* find(std::string_view command) const {
    auto it = records_.find(std::string(command));
    return it == records_.end() ? nullptr : &it->second;
  }

  void add(AnnotationRecord record) {
    std::string name = record.command;
    if (records_.count(name)) {
      throw AnnotationError(record.source + ": duplicate annotation for command '" + name + "' (first in " +
                            records_.at(name).source + ")");
    }
    records_.emplace(std::move(name), std::move(record));
  }

  void erase(std::string_view command) { records_.erase(std::string(command)); }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const std::map<std::string, AnnotationRecord>& records() const { return records_; }

 private:
  std::map<std::string, AnnotationRecord> records_;
};

namespace detail {

[[noreturn]] inline void schema_error(const std::string& file, const std::string& field, const std::string& what) {
  throw AnnotationError(file + ": field '" + field + "': " + what);
}

inline Predicate parse_predicate(const nlohmann::json& j, const std::string& file, const std::string& field) {
  if (j.is_string()) {
    if (j.get<std::string>() == "default") return Predicate::always();
    schema_error(file, field, "unknown predicate '" + j.get<std::string>() + "'");
  }
  if (!j.is_object() || !j.contains("operator")) schema_error(file, field, "predicate must be \"default\" or an object");
  std::string op = j.at("operator").get<std::string>();
  const nlohmann::json operands = j.value("operands", nlohmann::json::array());
  if (!operands.is_array()) schema_error(file, field + ".operands", "must be an array");
  Predicate p;
  auto strings = [&](std::size_t n) {
    if (operands.size() != n) {
      schema_error(file, field + ".operands", "operator '" + op + "' takes " + std::to_string(n) + " operand(s)");
    }
    for (const auto& o : operands) {
      if (!o.is_string()) schema_error(file, field + ".operands", "operator '" + op + "' takes string operands");
      p.strings.push_back(o.get<std::string>());
    }
  };
  auto subs = [&] {
    for (std::size_t i = 0; i < operands.size(); ++i) {
      p.subs.push_back(parse_predicate(operands[i], file, field + ".operands[" + std::to_string(i) + "]"));
    }
  };
  if (op == "exists") {
    p.op = Predicate::Op::Exists;
    strings(1);
  } else if (op == "val_opt_eq") {
    p.op = Predicate::Op::ValOptEq;
    strings(2);
  } else if (op == "or") {
    p.op = Predicate::Op::Or;
    subs();
  } else if (op == "and") {
    p.op = Predicate::Op::And;
    subs();
  } else if (op == "not") {
    p.op = Predicate::Op::Not;
    subs();
    if (p.subs.size() != 1) schema_error(file, field + ".operands", "operator 'not' takes 1 operand");
  } else if (op == "args_match") {
    p.op = Predicate::Op::ArgsMatch;
    strings(1);
    try {
      p.regex = std::make_shared<const std::regex>(p.strings[0], std::regex::extended);
    } catch (const std::regex_error& e) {
      schema_error(file, field + ".operands", std::string("bad regular expression: ") + e.what());
    }
  } else if (op == "operands_gt") {
    p.op = Predicate::Op::OperandsGt;
    strings(1);
    try {
      (void)std::stol(p.strings[0]);
    } catch (const std::exception&) {
      schema_error(file, field + ".operands", "operator 'operands_gt' takes an integer");
    }
  } else {
    schema_error(file, field + ".operator", "unknown predicate operator '" + op + "'");
  }
  return p;
}

inline std::vector<IoSpec> parse_io_list(const nlohmann::json& j, const std::string& file, const std::string& field) {
  std::vector<IoSpec> out;
  if (j.is_null()) return out;
  if (!j.is_array()) schema_error(file, field, "must be an array");
  for (const auto& e : j) {
    if (!e.is_string()) schema_error(file, field, "entries must be strings");
    auto spec = parse_io_spec(e.get<std::string>());
    if (!spec) schema_error(file, field, "bad stream spec '" + e.get<std::string>() + "'");
    out.push_back(*spec);
  }
  return out;
}

}  // namespace detail

inline AnnotationRecord parse_annotation(const nlohmann::json& j, const std::string& file) {
  using detail::schema_error;
  if (!j.is_object()) schema_error(file, "<root>", "record must be an object");
  AnnotationRecord r;
  r.source = file;
  if (!j.contains("command") || !j.at("command").is_string()) schema_error(file, "command", "missing or not a string");
  r.command = j.at("command").get<std::string>();
  if (!j.contains("cases") || !j.at("cases").is_array() || j.at("cases").empty()) {
    schema_error(file, "cases", "must be a non-empty array");
  }
  const auto& cases = j.at("cases");
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const std::string field = "cases[" + std::to_string(i) + "]";
    const auto& c = cases[i];
    if (!c.is_object()) schema_error(file, field, "must be an object");
    AnnotationCase ac;
    if (!c.contains("predicate")) schema_error(file, field + ".predicate", "missing");
    ac.predicate = detail::parse_predicate(c.at("predicate"), file, field + ".predicate");
    if (!c.contains("class") || !c.at("class").is_string()) schema_error(file, field + ".class", "missing");
    auto cls = class_from_wire(c.at("class").get<std::string>());
    if (!cls) schema_error(file, field + ".class", "unknown class '" + c.at("class").get<std::string>() + "'");
    ac.cls = *cls;
    ac.inputs = detail::parse_io_list(c.value("inputs", nlohmann::json()), file, field + ".inputs");
    ac.outputs = detail::parse_io_list(c.value("outputs", nlohmann::json()), file, field + ".outputs");
    ac.config = detail::parse_io_list(c.value("config-inputs", nlohmann::json()), file, field + ".config-inputs");
    bool is_default = ac.predicate.op == Predicate::Op::Default;
    if (is_default && i + 1 != cases.size()) schema_error(file, field + ".predicate", "\"default\" must be the last case");
    r.cases.push_back(std::move(ac));
  }
  for (const auto& o : j.value("options", nlohmann::json::array())) {
    std::string opt = o.get<std::string>();
    if (opt == "stdin-hyphen") {
      r.stdin_hyphen = true;
    } else if (opt == "empty-args-stdin") {
      r.empty_args_stdin = true;
    } else {
      schema_error(file, "options", "unknown option '" + opt + "'");
    }
  }
  for (const auto& sl : j.value("short-long", nlohmann::json::array())) {
    if (!sl.contains("short") || !sl.contains("long")) schema_error(file, "short-long", "entries need short and long");
    r.short_long.emplace_back(sl.at("short").get<std::string>(), sl.at("long").get<std::string>());
  }
  for (const auto& v : j.value("value-flags", nlohmann::json::array())) r.value_flags.insert(v.get<std::string>());
  for (const auto& v : j.value("config-flags", nlohmann::json::array())) {
    r.config_flags.insert(v.get<std::string>());
    r.value_flags.insert(v.get<std::string>());
  }
  return r;
}

// Loads every *.json file in `directory` (a record or an array of records).
inline AnnotationDb load_annotations(const std::filesystem::path& directory) {
  AnnotationDb db;
  if (!std::filesystem::is_directory(directory)) {
    throw AnnotationError(directory.string() + ": not a directory");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(directory)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::ifstream in(f);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw AnnotationError(f.string() + ": invalid JSON: " + e.what());
    }
    try {
      if (j.is_array()) {
        for (const auto& r : j) db.add(parse_annotation(r, f.string()));
      } else {
        db.add(parse_annotation(j, f.string()));
      }
    } catch (const nlohmann::json::exception& e) {
      throw AnnotationError(f.string() + ": " + e.what());
    }
  }
  return db;
}

namespace detail {

inline std::vector<StreamRef> resolve_streams(const std::vector<IoSpec>& specs, const ParsedArgs& parsed,
                                              const AnnotationRecord& rec, bool apply_empty_args) {
  std::vector<StreamRef> out;
  bool any_args_spec = false;
  bool any_args_resolved = false;
  const long n = static_cast<long>(parsed.operands.size());
  for (const IoSpec& s : specs) {
    switch (s.kind) {
      case IoSpec::Kind::Stdin:
        out.push_back({StreamRef::Kind::Stdin, 0, {}});
        break;
      case IoSpec::Kind::Stdout:
        out.push_back({StreamRef::Kind::Stdout, 0, {}});
        break;
      case IoSpec::Kind::Args: {
        any_args_spec = true;
        long b = s.begin < 0 ? std::max(0L, n + s.begin) : std::min(s.begin, n);
        long e = s.end ? (*s.end < 0 ? std::max(0L, n + *s.end) : std::min(*s.end, n)) : n;
        for (long i = b; i < e; ++i) {
          const auto& op = parsed.operands[static_cast<std::size_t>(i)];
          any_args_resolved = true;
          if (rec.stdin_hyphen && op.value == "-") {
            out.push_back({StreamRef::Kind::Stdin, op.index, {}});
          } else {
            out.push_back({StreamRef::Kind::Arg, op.index, op.value});
          }
        }
        break;
      }
    }
  }
  if (apply_empty_args && rec.empty_args_stdin && any_args_spec && !any_args_resolved) {
    out.push_back({StreamRef::Kind::Stdin, 0, {}});
  }
  return out;
}

inline std::map<std::string, ClassifierHook>& hook_table();

}  // namespace detail

inline CommandInstance classify_with_record(const std::string& name, const std::vector<std::string>& args,
                                            const AnnotationRecord& rec) {
  CommandInstance inst;
  inst.name = name;
  inst.args = args;
  inst.parsed = parse_args(args, &rec);
  for (std::size_t i = 0; i < rec.cases.size(); ++i) {
    const AnnotationCase& c = rec.cases[i];
    if (!evaluate_predicate(c.predicate, inst.parsed)) continue;
    inst.cls = c.cls;
    inst.reason = rec.source + " case " + std::to_string(i);
    if (c.cls == ParClass::SideEffectful) return inst;
    inst.inputs = detail::resolve_streams(c.inputs, inst.parsed, rec, true);
    inst.outputs = detail::resolve_streams(c.outputs, inst.parsed, rec, false);
    inst.config = detail::resolve_streams(c.config, inst.parsed, rec, false);
    for (const auto& f : inst.parsed.flags) {
      if (rec.config_flags.count(f.name) && f.value) {
        std::size_t idx = f.value_index.value_or(f.index);
        if (*f.value == "-" && rec.stdin_hyphen) {
          inst.config.push_back({StreamRef::Kind::Stdin, idx, {}});
        } else {
          inst.config.push_back({StreamRef::Kind::Arg, idx, *f.value});
        }
      }
    }
    return inst;
  }
  inst.cls = ParClass::SideEffectful;
  inst.reason = rec.source + ": no case matched";
  return inst;
}

// Resolves a concrete invocation: the first matching case wins; commands
// without an annotation (or hook) are side-effectful.
inline CommandInstance classify(const std::string& name, const std::vector<std::string>& args, const AnnotationDb& db) {
  auto& hooks = detail::hook_table();
  if (auto it = hooks.find(name); it != hooks.end()) return it->second(name, args, db);
  if (const AnnotationRecord* rec = db.find(name)) return classify_with_record(name, args, *rec);
  CommandInstance inst;
  inst.name = name;
  inst.args = args;
  inst.parsed = parse_args(args, nullptr);
  inst.cls = ParClass::SideEffectful;
  inst.reason = "no annotation for '" + name + "'";
  return inst;
}

namespace detail {

inline bool sed_script_is_substitution_only(std::string_view script) {
  std::size_t i = 0;
  auto skip_ws = [&] {
    while (i < script.size() && (script[i] == ' ' || script[i] == '\t' || script[i] == '\n' || script[i] == ';')) ++i;
  };
  skip_ws();
  if (i >= script.size()) return false;
  while (i < script.size()) {
    char cmd = script[i];
    if (cmd != 's' && cmd != 'y') return false;
    if (++i >= script.size()) return false;
    char delim = script[i];
    if (delim == '\\' || delim == '\n') return false;
    ++i;
    for (int seg = 0; seg < 2; ++seg) {
      while (i < script.size() && script[i] != delim) {
        if (script[i] == '\\') ++i;
        ++i;
      }
      if (i >= script.size()) return false;
      ++i;
    }
    while (i < script.size() && std::string_view(cmd == 's' ? "gpiI0123456789" : "").find(script[i]) != std::string_view::npos &&
           cmd == 's') {
      ++i;
    }
    while (i < script.size() && (script[i] == ' ' || script[i] == '\t')) ++i;
    if (i < script.size() && script[i] != ';' && script[i] != '\n') return false;
    skip_ws();
  }
  return true;
}

inline CommandInstance classify_sed(const std::string& name, const std::vector<std::string>& args, const AnnotationDb&) {
  AnnotationRecord rec;
  rec.command = name;
  rec.source = "builtin:sed";
  rec.value_flags = {"-e", "-f", "-l", "-s"};
  rec.short_long = {{"-e", "--expression"}, {"-E", "--regexp-extended"}, {"-n", "--quiet"}, {"-i", "--in-place"},
                    {"-z", "--null-data"}, {"-s", "--separate"}, {"-u", "--unbuffered"}};
  rec.stdin_hyphen = true;
  CommandInstance inst;
  inst.name = name;
  inst.args = args;
  inst.parsed = parse_args(args, &rec);
  inst.cls = ParClass::SideEffectful;
  std::vector<std::string> scripts;
  for (const auto& f : inst.parsed.flags) {
    if (f.name == "-e" && f.value) {
      scripts.push_back(*f.value);
    } else if (f.name != "-E" && f.name != "-r" && f.name != "-n" && f.name != "-u") {
      inst.reason = "sed flag " + f.name + " is not supported for parallelization";
      return inst;
    }
  }
  std::size_t first_input = 0;
  if (scripts.empty()) {
    if (inst.parsed.operands.empty()) {
      inst.reason = "sed without a script";
      return inst;
    }
    scripts.push_back(inst.parsed.operands[0].value);
    first_input = 1;
  }
  for (const auto& s : scripts) {
    if (!sed_script_is_substitution_only(s)) {
      inst.reason = "sed script is not substitution-only";
      return inst;
    }
  }
  inst.cls = ParClass::Stateless;
  inst.reason = "builtin:sed substitution-only";
  for (std::size_t i = first_input; i < inst.parsed.operands.size(); ++i) {
    const auto& op = inst.parsed.operands[i];
    if (op.value == "-") {
      inst.inputs.push_back({StreamRef::Kind::Stdin, op.index, {}});
    } else {
      inst.inputs.push_back({StreamRef::Kind::Arg, op.index, op.value});
    }
  }
  if (inst.inputs.empty()) inst.inputs.push_back({StreamRef::Kind::Stdin, 0, {}});
  inst.outputs.push_back({StreamRef::Kind::Stdout, 0, {}});
  return inst;
}

// xargs is classified through the command it runs: one invocation per input
// line of a pure command makes the whole invocation stateless.
inline CommandInstance classify_xargs(const std::string& name, const std::vector<std::string>& args,
                                      const AnnotationDb& db) {
  CommandInstance inst;
  inst.name = name;
  inst.args = args;
  inst.cls = ParClass::SideEffectful;
  static const std::set<std::string> kValueFlags = {"-n", "-L", "-I", "-d", "-P", "-s", "-a", "-E", "-e", "-i", "-l"};
  std::size_t i = 0;
  std::optional<std::string> per_call;
  bool replace = false;
  bool unsafe = false;
  while (i < args.size() && args[i].size() > 1 && args[i][0] == '-') {
    const std::string& a = args[i];
    if (a == "--") {
      ++i;
      break;
    }
    std::string flag = a.substr(0, 2);
    std::optional<std::string> value;
    if (kValueFlags.count(flag)) {
      if (a.size() > 2) {
        value = a.substr(2);
      } else if (i + 1 < args.size()) {
        value = args[++i];
      }
    } else if (a == "-r" || a == "--no-run-if-empty" || a == "-t" || a == "-x") {
      // harmless
    } else {
      unsafe = true;
    }
    if (flag == "-n" || flag == "-L") per_call = value;
    if (flag == "-I" || flag == "-i") replace = true;
    if (flag == "-P" || flag == "-a" || flag == "-d" || flag == "-E" || flag == "-e" || flag == "-s") unsafe = true;
    ++i;
  }
  inst.parsed = parse_args(std::vector<std::string>(args.begin(), args.begin() + static_cast<long>(i)), nullptr);
  std::string inner = i < args.size() ? args[i] : "echo";
  std::vector<std::string> inner_args(args.begin() + static_cast<long>(std::min(i + 1, args.size())), args.end());
  CommandInstance sub = classify(inner, inner_args, db);
  inst.inputs = {{StreamRef::Kind::Stdin, 0, {}}};
  inst.outputs = {{StreamRef::Kind::Stdout, 0, {}}};
  if (sub.cls == ParClass::SideEffectful || unsafe) {
    inst.cls = ParClass::SideEffectful;
    inst.inputs.clear();
    inst.outputs.clear();
    inst.reason = "xargs runs " + inner + " (" + std::string(class_wire_name(sub.cls)) + ")";
    return inst;
  }
  bool one_per_line = replace || (per_call && *per_call == "1");
  inst.cls = one_per_line ? ParClass::Stateless : ParClass::NonParallelizablePure;
  inst.reason = "builtin:xargs over " + inner;
  return inst;
}

inline std::map<std::string, ClassifierHook>& hook_table() {
  static std::map<std::string, ClassifierHook> table = {{"sed", classify_sed}, {"xargs", classify_xargs}};
  return table;
}

}  // namespace detail

// Map/aggregate pairs for parallelizable pure commands.
struct AggregatorSpec {
  std::string command;
  std::set<std::string> allowed_flags;   // every flag of the instance must be in here
  std::set<std::string> required_flags;  // and all of these must be present
  std::string aggregate_program;
  std::vector<std::string> aggregate_args;
  bool forward_flags = false;  // pass the command's flag words to the aggregator
};

struct AggregatorPair {
  std::string map_program;               // the command itself
  std::string aggregate_program;
  std::vector<std::string> aggregate_args;
  std::vector<std::size_t> forwarded_arg_indices;  // instance argument indices passed to the aggregator
};

inline std::vector<AggregatorSpec> default_aggregators() {
  std::set<std::string> sort_flags = {"-n", "-r", "-f", "-b", "-u", "-s", "-k", "-t", "-g", "-h",
                                      "-M", "-V", "-d", "-i", "-S", "-T", "--parallel"};
  return {
      {"wc", {"-l", "-w", "-c", "-m"}, {}, "agg-wc", {}, false},
      {"sort", sort_flags, {}, "agg-merge", {}, true},
      {"uniq", {}, {}, "agg-uniq", {}, false},
      {"uniq", {"-c"}, {"-c"}, "agg-uniq", {"-c"}, false},
      {"tac", {}, {}, "agg-tac", {}, false},
  };
}

inline std::optional<AggregatorPair> aggregator_for(const CommandInstance& inst,
                                                    const std::vector<AggregatorSpec>& registry) {
  if (inst.cls != ParClass::ParallelizablePure) return std::nullopt;
  for (const AggregatorSpec& spec : registry) {
    if (spec.command != inst.name) continue;
    bool ok = std::all_of(inst.parsed.flags.begin(), inst.parsed.flags.end(),
                          [&](const ParsedArgs::Flag& f) { return spec.allowed_flags.count(f.name) > 0; });
    ok = ok && std::all_of(spec.required_flags.begin(), spec.required_flags.end(),
                           [&](const std::string& f) { return inst.parsed.has(f); });
    if (!ok) continue;
    AggregatorPair pair;
    pair.map_program = inst.name;
    pair.aggregate_program = spec.aggregate_program;
    pair.aggregate_args = spec.aggregate_args;
    if (spec.forward_flags) {
      std::set<std::size_t> idx;
      for (const auto& f : inst.parsed.flags) {
        idx.insert(f.index);
        if (f.value_index) idx.insert(*f.value_index);
      }
      pair.forwarded_arg_indices.assign(idx.begin(), idx.end());
      for (std::size_t i : pair.forwarded_arg_indices) pair.aggregate_args.push_back(inst.args[i]);
    }
    return pair;
  }
  return std::nullopt;
}

}  // namespace shpar
