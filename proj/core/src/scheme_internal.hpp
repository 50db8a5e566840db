#pragma once

// Shared internals of the reference machine (reader, stdlib, evaluator).

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ham/scheme.hpp"

namespace ham::scheme {

struct Frame;  // interpreter-owned environment frame (arena-allocated)

// A lambda value.  The env pointer targets the owning interpreter's arena and
// stays valid until that interpreter's next evaluate()/reset().
struct Closure {
  std::vector<Symbol> params;
  std::optional<Symbol> rest;  // dotted tail / (lambda args ...) formal
  std::vector<Value> body;     // one or more forms
  Frame* env = nullptr;
  std::string name;  // procedure name when introduced by define (diagnostics)
};

// Raised inside evaluation; caught at the evaluate() boundary.
struct SchemeSignal {
  std::string message;
};
struct TimeLimitSignal {};

// Callback surface builtins use to re-enter the evaluator (apply, map, ...).
struct EvalState {
  virtual Value applyProcedure(const Value& op, Value* args, std::size_t n) = 0;
  [[noreturn]] virtual void fail(const std::string& msg) = 0;
  virtual ~EvalState() = default;
};

struct BuiltinProc {
  std::string name;
  Arity arity;
  Value (*fn)(EvalState&, Value* args, std::size_t n);
};

enum class Kw {
  None,
  Quote,
  If,
  Define,
  Set,
  Lambda,
  Begin,
  Let,
  LetStar,
  LetRec,
  Cond,
  Case,
  Else,
  Arrow,
  And,
  Or,
  Do,
};

// Keyword lookup: pointer identity first (symbols from our reader), then
// content, so hand-built symbols still dispatch correctly.
Kw keyword_of(const Symbol& s);

// Symbols every parse shares: special form keywords and stdlib names.  Reusing
// the pointers makes pointer-equality work across separately parsed programs.
const std::vector<std::shared_ptr<const std::string>>& core_symbols();

class Interner {
 public:
  Interner();
  Symbol intern(std::string_view name);

 private:
  std::unordered_map<std::string_view, std::shared_ptr<const std::string>> map_;
};

// All builtin procedures, in manifest order.
const std::vector<BuiltinProc>& builtin_table();

}  // namespace ham::scheme
