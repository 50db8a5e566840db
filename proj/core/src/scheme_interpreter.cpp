#include <deque>

#include "ham/scheme.hpp"
#include "scheme_internal.hpp"

// The evaluator.  A hand-rolled trampoline gives proper tail calls: the main
// loop rewrites (expr, env) instead of recursing for every tail position (if
// branches, last body form, cond/case results, and/or tails, do results).
// Cycle accounting happens in exactly two places: the top of the trampoline
// (one per expression-node visit) and the two application sites (one per
// procedure application).
//
// Stack discipline: runaway recursion in interpreted code must exhaust the
// configured depth bound before the host stack.  Runtime recursion always
// nests through eval()'s application arm, so that frame is kept minimal and
// every special-form handler is a separate noinline function (their larger
// frames only stack up with lexical nesting, which the reader caps).

namespace ham::scheme {

namespace {

struct Binding {
  Symbol name;
  Value value;
};

enum class Flow { Return, Continue };

}  // namespace

struct Frame {
  Frame* parent = nullptr;
  std::vector<Binding> slots;
};

namespace {

// Stdlib lookup table, shared by every interpreter instance.
const std::unordered_map<std::string_view, const BuiltinProc*>& globalEnv() {
  static const std::unordered_map<std::string_view, const BuiltinProc*> env = [] {
    std::unordered_map<std::string_view, const BuiltinProc*> m;
    for (const auto& b : builtin_table()) m.emplace(b.name, &b);
    return m;
  }();
  return env;
}

bool sameName(const Symbol& a, const Symbol& b) {
  return a.name == b.name || *a.name == *b.name;
}

}  // namespace

struct Interpreter::Impl final : EvalState {
  std::deque<Frame> arena;
  ExecBudget budget;
  std::uint64_t cycles = 0;
  std::uint32_t depth = 0;

  Frame* newFrame(Frame* parent) {
    arena.emplace_back();
    arena.back().parent = parent;
    return &arena.back();
  }

  void charge() {
    if (cycles == budget.maxCycles) throw TimeLimitSignal{};
    ++cycles;
  }

  [[noreturn]] void fail(const std::string& msg) override { throw SchemeSignal{msg}; }

  struct DepthGuard {
    Impl& self;
    explicit DepthGuard(Impl& s) : self(s) {
      if (self.depth == self.budget.maxDepth)
        self.fail("maximum recursion depth exceeded");
      ++self.depth;
    }
    ~DepthGuard() { --self.depth; }
  };

  Value* findSlot(Frame* env, const Symbol& sym) {
    for (Frame* f = env; f; f = f->parent) {
      // reverse scan so the latest binding of a re-used name wins
      for (auto it = f->slots.rbegin(); it != f->slots.rend(); ++it)
        if (sameName(it->name, sym)) return &it->value;
    }
    return nullptr;
  }

  [[gnu::noinline]] Value lookup(Frame* env, const Symbol& sym) {
    if (Value* slot = findSlot(env, sym)) return *slot;
    auto it = globalEnv().find(*sym.name);
    if (it != globalEnv().end()) return Value(Value::Rep(it->second));
    if (keyword_of(sym) != Kw::None)
      fail("syntax keyword used as a variable: " + sym.str());
    fail("unbound variable: " + sym.str());
  }

  static void bind(Frame* f, Symbol name, Value v) {
    f->slots.push_back(Binding{std::move(name), std::move(v)});
  }

  // ---- form decomposition helpers (SchemeError on malformed forms) ----

  std::vector<Value> listItems(const Value& v, const char* what) {
    std::vector<Value> items;
    const Value* cur = &v;
    while (cur->isPair()) {
      items.push_back(cur->asPair().car);
      cur = &cur->asPair().cdr;
    }
    if (!cur->isNil()) fail(std::string("malformed ") + what);
    return items;
  }

  struct Formals {
    std::vector<Symbol> params;
    std::optional<Symbol> rest;
  };

  Formals parseFormals(const Value& v) {
    Formals f;
    const Value* cur = &v;
    while (cur->isPair()) {
      const Value& p = cur->asPair().car;
      if (!p.isSymbol()) fail("formal parameter is not a symbol");
      f.params.push_back(p.asSymbol());
      cur = &cur->asPair().cdr;
    }
    if (cur->isSymbol())
      f.rest = cur->asSymbol();
    else if (!cur->isNil())
      fail("malformed formals list");
    return f;
  }

  Value makeClosureValue(const Formals& formals, std::vector<Value> body,
                         Frame* env, std::string name) {
    if (body.empty()) fail("empty procedure body");
    auto cl = std::make_shared<Closure>();
    cl->params = formals.params;
    cl->rest = formals.rest;
    cl->body = std::move(body);
    cl->env = env;
    cl->name = std::move(name);
    return Value(Value::Rep(std::shared_ptr<const Closure>(std::move(cl))));
  }

  Frame* bindArgs(const Closure& cl, Value* args, std::size_t n) {
    std::size_t need = cl.params.size();
    if (n < need || (!cl.rest && n > need)) {
      std::string who = cl.name.empty() ? "#<procedure>" : cl.name;
      fail(who + ": expects " + (cl.rest ? "at least " : "") +
           std::to_string(need) + " argument(s), got " + std::to_string(n));
    }
    Frame* f = newFrame(cl.env);
    f->slots.reserve(need + (cl.rest ? 1 : 0));
    for (std::size_t i = 0; i < need; ++i) bind(f, cl.params[i], args[i]);
    if (cl.rest) {
      Value lst = Value::nil();
      for (std::size_t i = n; i-- > need;) lst = Value::cons(args[i], lst);
      bind(f, *cl.rest, std::move(lst));
    }
    return f;
  }

  [[gnu::noinline]] Value callBuiltin(const BuiltinProc& b, Value* args, std::size_t n) {
    std::size_t minA = static_cast<std::size_t>(b.arity.min);
    if (n < minA ||
        (b.arity.max != Arity::kVariadic && n > static_cast<std::size_t>(b.arity.max))) {
      fail(b.name + ": expects " +
           (b.arity.max == Arity::kVariadic
                ? "at least " + std::to_string(b.arity.min)
                : b.arity.min == b.arity.max
                      ? std::to_string(b.arity.min)
                      : std::to_string(b.arity.min) + ".." + std::to_string(b.arity.max)) +
           " argument(s), got " + std::to_string(n));
    }
    return b.fn(*this, args, n);
  }

  // Entering a closure body in tail position: evaluate all but the last body
  // form, leave the last one to the caller's trampoline.
  void enterClosureTail(const Closure& cl, Value* args, std::size_t n,
                        Value& expr, Frame*& env) {
    Frame* f = bindArgs(cl, args, n);
    for (std::size_t i = 0; i + 1 < cl.body.size(); ++i) eval(cl.body[i], f);
    expr = cl.body.back();
    env = f;
  }

  // Non-tail application, also the re-entry point for builtins (apply, map,
  // for-each, cond's =>).  Charges the application cycle.
  Value applyProcedure(const Value& op, Value* args, std::size_t n) override {
    charge();
    if (op.isBuiltin()) return callBuiltin(*op.asBuiltin(), args, n);
    if (op.isClosure()) {
      const Closure& cl = *op.asClosure();
      Frame* f = bindArgs(cl, args, n);
      for (std::size_t i = 0; i + 1 < cl.body.size(); ++i) eval(cl.body[i], f);
      return eval(cl.body.back(), f);
    }
    fail("application of non-procedure: " + write(op));
  }

  // ---- special form handlers ----
  // Each returns Flow::Return with `out` set, or Flow::Continue after
  // rewriting (expr, env).  noinline keeps eval()'s own frame small.

  [[gnu::noinline]] Flow kwQuote(const Pair& form, Value& out) {
    auto items = listItems(form.cdr, "quote");
    if (items.size() != 1) fail("quote expects exactly one datum");
    out = items[0];
    return Flow::Return;
  }

  [[gnu::noinline]] Flow kwIf(const Pair& form, Value& expr, Frame* env, Value& out) {
    auto items = listItems(form.cdr, "if");
    if (items.size() != 2 && items.size() != 3) fail("malformed if");
    Value test = eval(items[0], env);
    if (test.truthy()) {
      expr = items[1];
      return Flow::Continue;
    }
    if (items.size() == 3) {
      expr = items[2];
      return Flow::Continue;
    }
    out = Value();
    return Flow::Return;
  }

  [[gnu::noinline]] Flow kwDefine(const Pair& form, Frame* env, Value& out) {
    auto items = listItems(form.cdr, "define");
    if (items.size() < 2) fail("malformed define");
    if (items[0].isSymbol()) {
      if (items.size() != 2) fail("malformed define");
      Value v = eval(items[1], env);
      bind(env, items[0].asSymbol(), std::move(v));
      out = Value();
      return Flow::Return;
    }
    if (!items[0].isPair() || !items[0].asPair().car.isSymbol())
      fail("malformed define");
    Symbol name = items[0].asPair().car.asSymbol();
    Formals formals = parseFormals(items[0].asPair().cdr);
    std::vector<Value> body(items.begin() + 1, items.end());
    bind(env, name, makeClosureValue(formals, std::move(body), env, name.str()));
    out = Value();
    return Flow::Return;
  }

  [[gnu::noinline]] Flow kwSet(const Pair& form, Frame* env, Value& out) {
    auto items = listItems(form.cdr, "set!");
    if (items.size() != 2 || !items[0].isSymbol()) fail("malformed set!");
    Value v = eval(items[1], env);
    const Symbol& sym = items[0].asSymbol();
    if (Value* slot = findSlot(env, sym)) {
      *slot = std::move(v);
      out = Value();
      return Flow::Return;
    }
    if (globalEnv().count(*sym.name))
      fail("set!: cannot modify a standard-library binding: " + sym.str());
    fail("set!: unbound variable: " + sym.str());
  }

  [[gnu::noinline]] Flow kwLambda(const Pair& form, Frame* env, Value& out) {
    auto items = listItems(form.cdr, "lambda");
    if (items.empty()) fail("malformed lambda");
    Formals formals = parseFormals(items[0]);
    out = makeClosureValue(formals, std::vector<Value>(items.begin() + 1, items.end()),
                           env, "");
    return Flow::Return;
  }

  [[gnu::noinline]] Flow kwBegin(const Pair& form, Value& expr, Frame* env, Value& out) {
    auto items = listItems(form.cdr, "begin");
    if (items.empty()) {
      out = Value();
      return Flow::Return;
    }
    for (std::size_t i = 0; i + 1 < items.size(); ++i) eval(items[i], env);
    expr = items.back();
    return Flow::Continue;
  }

  [[gnu::noinline]] Flow kwLet(const Pair& form, Value& expr, Frame*& env) {
    auto items = listItems(form.cdr, "let");
    if (items.empty()) fail("malformed let");
    if (items[0].isSymbol()) {
      // named let: (let loop ((v init) ...) body ...)
      if (items.size() < 3) fail("malformed named let");
      Symbol name = items[0].asSymbol();
      std::vector<Value> inits;
      Formals formals;
      for (const Value& bindingForm : listItems(items[1], "let bindings")) {
        auto parts = listItems(bindingForm, "let binding");
        if (parts.size() != 2 || !parts[0].isSymbol()) fail("malformed let binding");
        formals.params.push_back(parts[0].asSymbol());
        inits.push_back(eval(parts[1], env));
      }
      Frame* outer = newFrame(env);
      Value proc = makeClosureValue(
          formals, std::vector<Value>(items.begin() + 2, items.end()), outer, name.str());
      bind(outer, name, proc);
      charge();  // the implicit first application
      enterClosureTail(*proc.asClosure(), inits.data(), inits.size(), expr, env);
      return Flow::Continue;
    }
    if (items.size() < 2) fail("malformed let");
    Frame* f = newFrame(env);
    for (const Value& bindingForm : listItems(items[0], "let bindings")) {
      auto parts = listItems(bindingForm, "let binding");
      if (parts.size() != 2 || !parts[0].isSymbol()) fail("malformed let binding");
      bind(f, parts[0].asSymbol(), eval(parts[1], env));
    }
    for (std::size_t i = 1; i + 1 < items.size(); ++i) eval(items[i], f);
    expr = items.back();
    env = f;
    return Flow::Continue;
  }

  [[gnu::noinline]] Flow kwLetStar(const Pair& form, Value& expr, Frame*& env) {
    auto items = listItems(form.cdr, "let*");
    if (items.size() < 2) fail("malformed let*");
    Frame* f = newFrame(env);
    for (const Value& bindingForm : listItems(items[0], "let* bindings")) {
      auto parts = listItems(bindingForm, "let* binding");
      if (parts.size() != 2 || !parts[0].isSymbol()) fail("malformed let* binding");
      bind(f, parts[0].asSymbol(), eval(parts[1], f));
    }
    for (std::size_t i = 1; i + 1 < items.size(); ++i) eval(items[i], f);
    expr = items.back();
    env = f;
    return Flow::Continue;
  }

  [[gnu::noinline]] Flow kwLetRec(const Pair& form, Value& expr, Frame*& env) {
    auto items = listItems(form.cdr, "letrec");
    if (items.size() < 2) fail("malformed letrec");
    Frame* f = newFrame(env);
    std::vector<std::pair<Symbol, Value>> pending;
    for (const Value& bindingForm : listItems(items[0], "letrec bindings")) {
      auto parts = listItems(bindingForm, "letrec binding");
      if (parts.size() != 2 || !parts[0].isSymbol()) fail("malformed letrec binding");
      bind(f, parts[0].asSymbol(), Value());
      pending.emplace_back(parts[0].asSymbol(), parts[1]);
    }
    for (auto& [name, init] : pending) *findSlot(f, name) = eval(init, f);
    for (std::size_t i = 1; i + 1 < items.size(); ++i) eval(items[i], f);
    expr = items.back();
    env = f;
    return Flow::Continue;
  }

  [[gnu::noinline]] Flow kwCond(const Pair& form, Value& expr, Frame* env, Value& out) {
    auto clauses = listItems(form.cdr, "cond");
    for (const Value& clause : clauses) {
      auto parts = listItems(clause, "cond clause");
      if (parts.empty()) fail("malformed cond clause");
      bool isElse = parts[0].isSymbol() && keyword_of(parts[0].asSymbol()) == Kw::Else;
      Value testV;
      if (isElse) {
        if (parts.size() < 2) fail("malformed else clause");
      } else {
        testV = eval(parts[0], env);
        if (!testV.truthy()) continue;
        if (parts.size() == 1) {
          out = testV;
          return Flow::Return;
        }
      }
      if (parts.size() == 3 && parts[1].isSymbol() &&
          keyword_of(parts[1].asSymbol()) == Kw::Arrow) {
        Value recv = eval(parts[2], env);
        out = applyProcedure(recv, &testV, 1);
        return Flow::Return;
      }
      for (std::size_t i = 1; i + 1 < parts.size(); ++i) eval(parts[i], env);
      expr = parts.back();
      return Flow::Continue;
    }
    out = Value();
    return Flow::Return;
  }

  [[gnu::noinline]] Flow kwCase(const Pair& form, Value& expr, Frame* env, Value& out) {
    auto items = listItems(form.cdr, "case");
    if (items.empty()) fail("malformed case");
    Value key = eval(items[0], env);
    for (std::size_t c = 1; c < items.size(); ++c) {
      auto parts = listItems(items[c], "case clause");
      if (parts.size() < 2) fail("malformed case clause");
      bool isElse = parts[0].isSymbol() && keyword_of(parts[0].asSymbol()) == Kw::Else;
      if (!isElse) {
        bool hit = false;
        for (const Value& d : listItems(parts[0], "case datum list"))
          if (eqv(d, key)) {
            hit = true;
            break;
          }
        if (!hit) continue;
      }
      for (std::size_t i = 1; i + 1 < parts.size(); ++i) eval(parts[i], env);
      expr = parts.back();
      return Flow::Continue;
    }
    out = Value();
    return Flow::Return;
  }

  [[gnu::noinline]] Flow kwAnd(const Pair& form, Value& expr, Frame* env, Value& out) {
    auto items = listItems(form.cdr, "and");
    if (items.empty()) {
      out = Value::boolean(true);
      return Flow::Return;
    }
    for (std::size_t i = 0; i + 1 < items.size(); ++i)
      if (!eval(items[i], env).truthy()) {
        out = Value::boolean(false);
        return Flow::Return;
      }
    expr = items.back();
    return Flow::Continue;
  }

  [[gnu::noinline]] Flow kwOr(const Pair& form, Value& expr, Frame* env, Value& out) {
    auto items = listItems(form.cdr, "or");
    if (items.empty()) {
      out = Value::boolean(false);
      return Flow::Return;
    }
    for (std::size_t i = 0; i + 1 < items.size(); ++i) {
      Value v = eval(items[i], env);
      if (v.truthy()) {
        out = v;
        return Flow::Return;
      }
    }
    expr = items.back();
    return Flow::Continue;
  }

  [[gnu::noinline]] Flow kwDo(const Pair& form, Value& expr, Frame*& env, Value& out) {
    auto items = listItems(form.cdr, "do");
    if (items.size() < 2) fail("malformed do");
    struct DoVar {
      Symbol name;
      Value step;
      bool hasStep;
    };
    std::vector<DoVar> vars;
    Frame* f = newFrame(env);
    for (const Value& spec : listItems(items[0], "do bindings")) {
      auto parts = listItems(spec, "do binding");
      if ((parts.size() != 2 && parts.size() != 3) || !parts[0].isSymbol())
        fail("malformed do binding");
      bind(f, parts[0].asSymbol(), eval(parts[1], env));
      vars.push_back(DoVar{parts[0].asSymbol(), parts.size() == 3 ? parts[2] : Value(),
                           parts.size() == 3});
    }
    auto exit = listItems(items[1], "do exit clause");
    if (exit.empty()) fail("malformed do exit clause");
    for (;;) {
      if (eval(exit[0], f).truthy()) {
        if (exit.size() == 1) {
          out = Value();
          return Flow::Return;
        }
        for (std::size_t i = 1; i + 1 < exit.size(); ++i) eval(exit[i], f);
        expr = exit.back();
        env = f;
        return Flow::Continue;
      }
      for (std::size_t i = 2; i < items.size(); ++i) eval(items[i], f);
      // fresh locations each iteration
      std::vector<Value> next;
      for (const DoVar& v : vars)
        next.push_back(v.hasStep ? eval(v.step, f) : *findSlot(f, v.name));
      Frame* g = newFrame(env);
      for (std::size_t i = 0; i < vars.size(); ++i)
        bind(g, vars[i].name, std::move(next[i]));
      f = g;
    }
  }

  // Argument evaluation for the application arm, separated so eval()'s frame
  // holds only the args vector itself.
  [[gnu::noinline]] void evalOperands(const Pair& form, Frame* env, Value& op,
                                      std::vector<Value>& args) {
    op = eval(form.car, env);
    const Value* cur = &form.cdr;
    while (cur->isPair()) {
      args.push_back(eval(cur->asPair().car, env));
      cur = &cur->asPair().cdr;
    }
    if (!cur->isNil()) fail("malformed application (dotted argument list)");
  }

  // ---- the trampoline ----

  Value eval(Value expr, Frame* env) {
    DepthGuard guard(*this);
    Value out;
    for (;;) {
      charge();
      if (expr.isSymbol()) return lookup(env, expr.asSymbol());
      if (!expr.isPair()) {
        if (expr.isNil()) fail("empty application: ()");
        return expr;  // numbers, booleans, chars, strings self-evaluate
      }
      const Pair& form = expr.asPair();
      Kw kw = form.car.isSymbol() ? keyword_of(form.car.asSymbol()) : Kw::None;
      if (kw != Kw::None) {
        Flow flow;
        switch (kw) {
          case Kw::Quote: flow = kwQuote(form, out); break;
          case Kw::If: flow = kwIf(form, expr, env, out); break;
          case Kw::Define: flow = kwDefine(form, env, out); break;
          case Kw::Set: flow = kwSet(form, env, out); break;
          case Kw::Lambda: flow = kwLambda(form, env, out); break;
          case Kw::Begin: flow = kwBegin(form, expr, env, out); break;
          case Kw::Let: flow = kwLet(form, expr, env); break;
          case Kw::LetStar: flow = kwLetStar(form, expr, env); break;
          case Kw::LetRec: flow = kwLetRec(form, expr, env); break;
          case Kw::Cond: flow = kwCond(form, expr, env, out); break;
          case Kw::Case: flow = kwCase(form, expr, env, out); break;
          case Kw::And: flow = kwAnd(form, expr, env, out); break;
          case Kw::Or: flow = kwOr(form, expr, env, out); break;
          case Kw::Do: flow = kwDo(form, expr, env, out); break;
          default:
            fail("misplaced syntax keyword: " + form.car.asSymbol().str());
        }
        if (flow == Flow::Return) return out;
        continue;
      }
      // procedure application
      Value op;
      std::vector<Value> args;
      evalOperands(form, env, op, args);
      charge();  // the application itself
      if (op.isBuiltin()) return callBuiltin(*op.asBuiltin(), args.data(), args.size());
      if (op.isClosure()) {
        const Closure& cl = *op.asClosure();
        Frame* f = bindArgs(cl, args.data(), args.size());
        for (std::size_t i = 0; i + 1 < cl.body.size(); ++i) eval(cl.body[i], f);
        expr = cl.body.back();
        env = f;
        continue;  // proper tail call
      }
      fail("application of non-procedure: " + write(op));
    }
  }
};

Interpreter::Interpreter() : impl_(std::make_unique<Impl>()) {}
Interpreter::~Interpreter() = default;

void Interpreter::reset() {
  impl_->arena.clear();
  impl_->depth = 0;
}

ExecOutcome Interpreter::evaluate(const ProgramAst& program, const ExecBudget& budget,
                                  const std::vector<std::pair<std::string, Value>>& bindings) {
  Impl& im = *impl_;
  im.arena.clear();  // retire frames from the previous run
  im.budget = budget;
  im.cycles = 0;
  im.depth = 0;
  Frame* top = im.newFrame(nullptr);
  for (const auto& [name, value] : bindings)
    Impl::bind(top, Symbol{std::make_shared<const std::string>(name)}, value);

  ExecOutcome out;
  try {
    Value last;
    for (const Value& form : program.forms) last = im.eval(form, top);
    out.status = ExecStatus::Value;
    out.value = std::move(last);
  } catch (const SchemeSignal& sig) {
    out.status = ExecStatus::SchemeError;
    out.error = sig.message;
  } catch (const TimeLimitSignal&) {
    out.status = ExecStatus::TimeLimit;
  }
  out.cyclesUsed = im.cycles;
  return out;
}

}  // namespace ham::scheme
