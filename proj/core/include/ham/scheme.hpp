#pragma once

// Reference machine: a deterministic, cycle-counted interpreter for a Scheme
// subset (R5RS essentials, no quasiquote/macros/IO/continuations).  Candidate
// programs produced by the search are run here under hard cycle budgets.
//
// Cost model (fixed): every expression-node visit costs 1 cycle and every
// procedure application costs 1 cycle.  Nothing else is charged.  The model
// is deliberately simple; what matters is that it is deterministic and that
// budget exhaustion cuts evaluation at exactly the budget.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "ham/errors.hpp"

namespace ham::scheme {

using Int = boost::multiprecision::cpp_int;

class Value;
struct Pair;
struct Closure;
struct BuiltinProc;

// Interned identifier.  Within one parse all occurrences of a name share the
// pointer, so the evaluator can compare pointers before falling back to
// content comparison.  Symbol equality is by content.
struct Symbol {
  std::shared_ptr<const std::string> name;
  const std::string& str() const { return *name; }
};

struct Str {
  std::shared_ptr<const std::string> text;
};

struct Unspecified {};
struct Nil {};

class Value {
 public:
  using Rep = std::variant<Unspecified, Nil, bool, Int, double, char, Symbol,
                           Str, std::shared_ptr<const Pair>,
                           const BuiltinProc*, std::shared_ptr<const Closure>>;

  Value() : rep_(Unspecified{}) {}
  Value(Rep rep) : rep_(std::move(rep)) {}

  static Value nil() { return Value(Rep(Nil{})); }
  static Value boolean(bool b) { return Value(Rep(b)); }
  static Value integer(Int i) { return Value(Rep(std::move(i))); }
  static Value real(double d) { return Value(Rep(d)); }
  static Value character(char c) { return Value(Rep(c)); }
  static Value symbol(Symbol s) { return Value(Rep(std::move(s))); }
  static Value string(std::string s);
  static Value cons(Value car, Value cdr);

  const Rep& rep() const { return rep_; }
  std::size_t kind() const { return rep_.index(); }

  bool isUnspecified() const { return std::holds_alternative<Unspecified>(rep_); }
  bool isNil() const { return std::holds_alternative<Nil>(rep_); }
  bool isBool() const { return std::holds_alternative<bool>(rep_); }
  bool isInt() const { return std::holds_alternative<Int>(rep_); }
  bool isReal() const { return std::holds_alternative<double>(rep_); }
  bool isNumber() const { return isInt() || isReal(); }
  bool isChar() const { return std::holds_alternative<char>(rep_); }
  bool isSymbol() const { return std::holds_alternative<Symbol>(rep_); }
  bool isString() const { return std::holds_alternative<Str>(rep_); }
  bool isPair() const { return std::holds_alternative<std::shared_ptr<const Pair>>(rep_); }
  bool isBuiltin() const { return std::holds_alternative<const BuiltinProc*>(rep_); }
  bool isClosure() const { return std::holds_alternative<std::shared_ptr<const Closure>>(rep_); }
  bool isProcedure() const { return isBuiltin() || isClosure(); }

  bool asBool() const { return std::get<bool>(rep_); }
  const Int& asInt() const { return std::get<Int>(rep_); }
  double asReal() const { return std::get<double>(rep_); }
  char asChar() const { return std::get<char>(rep_); }
  const Symbol& asSymbol() const { return std::get<Symbol>(rep_); }
  const Str& asString() const { return std::get<Str>(rep_); }
  const Pair& asPair() const;
  const BuiltinProc* asBuiltin() const { return std::get<const BuiltinProc*>(rep_); }
  const std::shared_ptr<const Closure>& asClosure() const {
    return std::get<std::shared_ptr<const Closure>>(rep_);
  }

  // Everything except #f is true.
  bool truthy() const { return !(isBool() && !asBool()); }

 private:
  Rep rep_;
};

struct Pair {
  Value car;
  Value cdr;
};

// R5RS-style equivalence.
bool eqv(const Value& a, const Value& b);
bool equal(const Value& a, const Value& b);

// External representation (write notation: strings quoted, chars as #\x).
std::string write(const Value& v);

// A parsed program: a sequence of top-level forms.  Forms are plain data;
// the evaluator interprets them directly.
struct ProgramAst {
  std::vector<Value> forms;
};

// Parse source text.  Throws ParseError on malformed input and
// UnsupportedForm on quasiquotation, macro definitions or vector literals.
ProgramAst parse(std::string_view source);

// Single datum convenience (exactly one form expected).
Value parse_datum(std::string_view source);

struct ExecBudget {
  std::uint64_t maxCycles = 1'000'000;
  std::uint32_t maxDepth = 10'000;  // non-tail recursion depth bound
};

enum class ExecStatus { Value, SchemeError, TimeLimit };

struct ExecOutcome {
  ExecStatus status = ExecStatus::Value;
  Value value;          // meaningful when status == Value
  std::string error;    // meaningful when status == SchemeError
  std::uint64_t cyclesUsed = 0;
};

// Arity descriptor for a standard procedure; max == kVariadic means "any".
struct Arity {
  int min = 0;
  int max = 0;
  static constexpr int kVariadic = -1;
};

struct StdlibEntry {
  std::string name;
  Arity arity;
};

// The stdlib manifest: every procedure installed in the initial environment.
const std::vector<StdlibEntry>& stdlib_manifest();

// Manifest text format: one line per procedure, "name min max|*".
std::string stdlib_manifest_text();
std::vector<StdlibEntry> parse_stdlib_manifest(std::string_view text);

// Lookup; throws UnknownProcedure for names outside the subset (e.g. "read").
Arity stdlib_arity(std::string_view name);

// The interpreter.  Each evaluate() call runs in a fresh environment (stdlib
// plus the given bindings).  An instance is single-threaded; use one
// interpreter per worker.  Values returned in an ExecOutcome stay valid until
// the next evaluate()/reset() on the same interpreter (ground data outlives
// that; only procedure values reference interpreter-owned frames).
class Interpreter {
 public:
  Interpreter();
  ~Interpreter();
  Interpreter(const Interpreter&) = delete;
  Interpreter& operator=(const Interpreter&) = delete;

  ExecOutcome evaluate(const ProgramAst& program, const ExecBudget& budget,
                       const std::vector<std::pair<std::string, Value>>& bindings = {});

  // Drop environments created by the previous evaluate() call.
  void reset();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ham::scheme
