#ifndef DLINT_SCRIPT_HPP
#define DLINT_SCRIPT_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dlint {

enum class Dialect { Auto, Keras, TensorFlowV1 };

struct ScriptSource {
  std::string path;
  std::string text;
  Dialect dialect = Dialect::Auto;
};

// A resolved source value: either a concrete literal or Unknown. Anything
// the flow-insensitive binding table cannot pin down stays Unknown and the
// rules keep quiet about it.
struct Literal {
  enum class Kind { Unknown, None, Int, Float, Bool, Text, IntList };
  Kind kind = Kind::Unknown;
  std::int64_t i = 0;
  double f = 0;
  bool b = false;
  std::string s;
  std::vector<std::int64_t> xs;  // None elements encoded as -1

  static Literal unknown() { return {}; }
  static Literal none() { return {Kind::None, 0, 0, false, {}, {}}; }
  static Literal of_int(std::int64_t v) { return {Kind::Int, v, 0, false, {}, {}}; }
  static Literal of_float(double v) { return {Kind::Float, 0, v, false, {}, {}}; }
  static Literal of_bool(bool v) { return {Kind::Bool, 0, 0, v, {}, {}}; }
  static Literal of_text(std::string v) { return {Kind::Text, 0, 0, false, std::move(v), {}}; }
  static Literal of_ints(std::vector<std::int64_t> v) {
    return {Kind::IntList, 0, 0, false, {}, std::move(v)};
  }

  bool is_unknown() const { return kind == Kind::Unknown; }
  bool is_int() const { return kind == Kind::Int; }
  bool is_text() const { return kind == Kind::Text; }
};

using BindingTable = std::map<std::string, Literal>;

// Call argument: a literal, a reference to an earlier ApiCall (nested
// calls), a variable reference (with its resolved literal, when any), or a
// list of arguments.
struct ArgValue {
  enum class Kind { Lit, CallRef, NameRef, List };
  Kind kind = Kind::Lit;
  Literal lit;
  int call_index = -1;
  std::string name;  // NameRef: dotted, alias-expanded
  std::vector<ArgValue> items;

  static ArgValue of(Literal l) {
    ArgValue a;
    a.lit = std::move(l);
    return a;
  }
};

// One recognized call site, in source order. `callee` is the dotted path
// with import aliases expanded; a call-valued base appears as "()", e.g.
// "tensorflow.train.AdamOptimizer().minimize".
struct ApiCall {
  std::string callee;
  std::string receiver;  // first segment of the original expression
  std::vector<ArgValue> args;
  std::map<std::string, ArgValue> kwargs;
  int source_line = 0;
  bool in_loop = false;
  bool in_overcap_loop = false;  // body executed once because the range exceeded the cap
  std::string assign_target;

  const ArgValue* kwarg(const std::string& name) const {
    auto it = kwargs.find(name);
    return it == kwargs.end() ? nullptr : &it->second;
  }
  const ArgValue* arg(size_t i) const { return i < args.size() ? &args[i] : nullptr; }
};

struct ParseOptions {
  int max_unroll = 64;
};

struct ParseResult {
  std::vector<ApiCall> calls;
  BindingTable bindings;
  std::vector<std::string> wildcard_modules;  // from `from m import *`
  // target -> source pairs produced by inlined functions returning a local
  // variable (`model = build()` where build returns its own `m`).
  std::vector<std::pair<std::string, std::string>> var_aliases;
};

// Parses the supported scripting subset: module-level assignments, calls,
// attribute access, literals, `for` over literal range (unrolled up to the
// cap), `with`, and single-use function definitions (inlined). Throws
// SyntaxError for input outside the subset and UnsupportedConstruct when a
// supported construct cannot be handled within limits.
ParseResult parse_script(const ScriptSource& src, const ParseOptions& opts = {});

}  // namespace dlint

#endif
