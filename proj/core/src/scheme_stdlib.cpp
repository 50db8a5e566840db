#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <cmath>
#include <cstring>
#include <optional>
#include <sstream>
#include <unordered_map>

#include "ham/scheme.hpp"
#include "scheme_internal.hpp"

// Standard library: the R5RS 6.1-6.5 essentials over our value set.
// Omissions (documented in the README): mutators (set-car!, string-set!, ...)
// because values are immutable here, vectors, eval, call/cc, dynamic-wind,
// delay/force, and all I/O.  The numeric tower is exact integers plus
// binary64 reals; no rationals or complex numbers.

namespace ham::scheme {

namespace {

[[noreturn]] void typeFail(EvalState& st, const char* who, const char* expected,
                           const Value& got) {
  st.fail(std::string(who) + ": expected " + expected + ", got " + write(got));
  std::abort();  // unreachable; fail() always throws
}

double toD(const Value& v) {
  return v.isInt() ? v.asInt().convert_to<double>() : v.asReal();
}

void wantNumber(EvalState& st, const char* who, const Value& v) {
  if (!v.isNumber()) typeFail(st, who, "number", v);
}

const Int& wantExactInt(EvalState& st, const char* who, const Value& v) {
  if (!v.isInt()) typeFail(st, who, "exact integer", v);
  return v.asInt();
}

const Pair& wantPair(EvalState& st, const char* who, const Value& v) {
  if (!v.isPair()) typeFail(st, who, "pair", v);
  return v.asPair();
}

const Str& wantString(EvalState& st, const char* who, const Value& v) {
  if (!v.isString()) typeFail(st, who, "string", v);
  return v.asString();
}

char wantChar(EvalState& st, const char* who, const Value& v) {
  if (!v.isChar()) typeFail(st, who, "character", v);
  return v.asChar();
}

bool isIntegral(double d) { return std::isfinite(d) && std::trunc(d) == d; }

// ---- numeric ----------------------------------------------------------

Value addV(EvalState& st, Value* a, std::size_t n) {
  bool inexact = false;
  for (std::size_t i = 0; i < n; ++i) {
    wantNumber(st, "+", a[i]);
    inexact |= a[i].isReal();
  }
  if (inexact) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += toD(a[i]);
    return Value::real(s);
  }
  Int s = 0;
  for (std::size_t i = 0; i < n; ++i) s += a[i].asInt();
  return Value::integer(std::move(s));
}

Value mulV(EvalState& st, Value* a, std::size_t n) {
  bool inexact = false;
  for (std::size_t i = 0; i < n; ++i) {
    wantNumber(st, "*", a[i]);
    inexact |= a[i].isReal();
  }
  if (inexact) {
    double s = 1;
    for (std::size_t i = 0; i < n; ++i) s *= toD(a[i]);
    return Value::real(s);
  }
  Int s = 1;
  for (std::size_t i = 0; i < n; ++i) s *= a[i].asInt();
  return Value::integer(std::move(s));
}

Value subV(EvalState& st, Value* a, std::size_t n) {
  bool inexact = false;
  for (std::size_t i = 0; i < n; ++i) {
    wantNumber(st, "-", a[i]);
    inexact |= a[i].isReal();
  }
  if (inexact) {
    double s = toD(a[0]);
    if (n == 1) return Value::real(-s);
    for (std::size_t i = 1; i < n; ++i) s -= toD(a[i]);
    return Value::real(s);
  }
  if (n == 1) return Value::integer(-a[0].asInt());
  Int s = a[0].asInt();
  for (std::size_t i = 1; i < n; ++i) s -= a[i].asInt();
  return Value::integer(std::move(s));
}

Value divide2(EvalState& st, const Value& a, const Value& b) {
  if (a.isInt() && b.isInt()) {
    if (b.asInt() == 0) st.fail("/: division by zero");
    Int q = a.asInt() / b.asInt();
    if (q * b.asInt() == a.asInt()) return Value::integer(std::move(q));
    return Value::real(toD(a) / toD(b));
  }
  if (b.isReal() || a.isReal()) return Value::real(toD(a) / toD(b));
  return Value::real(toD(a) / toD(b));
}

Value divV(EvalState& st, Value* a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) wantNumber(st, "/", a[i]);
  if (n == 1) return divide2(st, Value::integer(Int(1)), a[0]);
  Value acc = a[0];
  for (std::size_t i = 1; i < n; ++i) acc = divide2(st, acc, a[i]);
  return acc;
}

int numCompare(EvalState& st, const char* who, const Value& a, const Value& b) {
  wantNumber(st, who, a);
  wantNumber(st, who, b);
  if (a.isInt() && b.isInt()) {
    if (a.asInt() < b.asInt()) return -1;
    if (a.asInt() == b.asInt()) return 0;
    return 1;
  }
  double x = toD(a), y = toD(b);
  if (x < y) return -1;
  if (x == y) return 0;
  if (x > y) return 1;
  st.fail(std::string(who) + ": cannot order NaN");
  std::abort();  // unreachable; fail() always throws
}

template <int Lo, int Hi>
Value cmpChain(EvalState& st, const char* who, Value* a, std::size_t n) {
  for (std::size_t i = 0; i + 1 < n; ++i) {
    int c = numCompare(st, who, a[i], a[i + 1]);
    if (c < Lo || c > Hi) return Value::boolean(false);
  }
  return Value::boolean(true);
}

Value minmaxV(EvalState& st, Value* a, std::size_t n, bool wantMax) {
  bool inexact = false;
  for (std::size_t i = 0; i < n; ++i) {
    wantNumber(st, wantMax ? "max" : "min", a[i]);
    inexact |= a[i].isReal();
  }
  Value best = a[0];
  for (std::size_t i = 1; i < n; ++i) {
    int c = numCompare(st, wantMax ? "max" : "min", a[i], best);
    if (wantMax ? c > 0 : c < 0) best = a[i];
  }
  if (inexact && best.isInt()) return Value::real(toD(best));
  return best;
}

Value quotRem(EvalState& st, const char* who, const Value& a, const Value& b,
              bool wantRem) {
  const Int& x = wantExactInt(st, who, a);
  const Int& y = wantExactInt(st, who, b);
  if (y == 0) st.fail(std::string(who) + ": division by zero");
  return Value::integer(wantRem ? Int(x % y) : Int(x / y));
}

Value moduloV(EvalState& st, const Value& a, const Value& b) {
  const Int& x = wantExactInt(st, "modulo", a);
  const Int& y = wantExactInt(st, "modulo", b);
  if (y == 0) st.fail("modulo: division by zero");
  Int r = x % y;  // truncated remainder: sign follows x
  if (r != 0 && ((r < 0) != (y < 0))) r += y;
  return Value::integer(std::move(r));
}

Value roundToInt(EvalState& st, const char* who, const Value& v,
                 double (*f)(double)) {
  wantNumber(st, who, v);
  if (v.isInt()) return v;
  return Value::real(f(v.asReal()));
}

double roundHalfEven(double d) { return std::nearbyint(d); }

Value transcend(EvalState& st, const char* who, const Value& v,
                double (*f)(double)) {
  wantNumber(st, who, v);
  return Value::real(f(toD(v)));
}

Value sqrtV(EvalState& st, const Value& v) {
  wantNumber(st, "sqrt", v);
  if (v.isInt()) {
    if (v.asInt() < 0) st.fail("sqrt: negative argument");
    Int r = boost::multiprecision::sqrt(v.asInt());
    if (r * r == v.asInt()) return Value::integer(std::move(r));
    return Value::real(std::sqrt(toD(v)));
  }
  if (v.asReal() < 0) st.fail("sqrt: negative argument");
  return Value::real(std::sqrt(v.asReal()));
}

Value exptV(EvalState& st, const Value& a, const Value& b) {
  wantNumber(st, "expt", a);
  wantNumber(st, "expt", b);
  if (a.isInt() && b.isInt()) {
    const Int& e = b.asInt();
    if (e >= 0) {
      if (e > 1'000'000) st.fail("expt: exponent too large");
      return Value::integer(boost::multiprecision::pow(a.asInt(), e.convert_to<unsigned>()));
    }
    return Value::real(std::pow(toD(a), toD(b)));
  }
  return Value::real(std::pow(toD(a), toD(b)));
}

Value gcdLcmV(EvalState& st, Value* a, std::size_t n, bool wantLcm) {
  Int acc = wantLcm ? 1 : 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Int& x = wantExactInt(st, wantLcm ? "lcm" : "gcd", a[i]);
    if (wantLcm)
      acc = Int(boost::multiprecision::lcm(acc, x));
    else
      acc = Int(boost::multiprecision::gcd(acc, x));
  }
  if (acc < 0) acc = -acc;
  return Value::integer(std::move(acc));
}

Value inexactToExact(EvalState& st, const Value& v) {
  wantNumber(st, "inexact->exact", v);
  if (v.isInt()) return v;
  double d = v.asReal();
  if (!isIntegral(d)) st.fail("inexact->exact: no exact representation (rationals unsupported)");
  return Value::integer(Int(d));
}

std::string intToString(EvalState& st, const Int& x, int radix) {
  if (radix == 10) return x.str();
  bool neg = x < 0;
  Int v = neg ? Int(-x) : x;
  std::string digits;
  if (v == 0) digits = "0";
  while (v != 0) {
    int d = (v % radix).convert_to<int>();
    digits += d < 10 ? char('0' + d) : char('a' + d - 10);
    v /= radix;
  }
  if (neg) digits += '-';
  std::reverse(digits.begin(), digits.end());
  (void)st;
  return digits;
}

Value numberToString(EvalState& st, Value* a, std::size_t n) {
  wantNumber(st, "number->string", a[0]);
  int radix = 10;
  if (n == 2) {
    radix = static_cast<int>(wantExactInt(st, "number->string", a[1]).convert_to<long>());
    if (radix != 2 && radix != 8 && radix != 10 && radix != 16)
      st.fail("number->string: radix must be 2, 8, 10 or 16");
  }
  if (a[0].isReal()) {
    if (radix != 10) st.fail("number->string: inexact numbers need radix 10");
    return Value::string(write(a[0]));
  }
  return Value::string(intToString(st, a[0].asInt(), radix));
}

std::optional<Value> parseIntRadix(std::string_view s, int radix) {
  if (s.empty()) return std::nullopt;
  bool neg = false;
  std::size_t i = 0;
  if (s[0] == '+' || s[0] == '-') {
    neg = s[0] == '-';
    i = 1;
  }
  if (i == s.size()) return std::nullopt;
  Int acc = 0;
  for (; i < s.size(); ++i) {
    char c = static_cast<char>(std::tolower(static_cast<unsigned char>(s[i])));
    int d;
    if (c >= '0' && c <= '9')
      d = c - '0';
    else if (c >= 'a' && c <= 'z')
      d = c - 'a' + 10;
    else
      return std::nullopt;
    if (d >= radix) return std::nullopt;
    acc = acc * radix + d;
  }
  if (neg) acc = -acc;
  return Value::integer(std::move(acc));
}

Value stringToNumber(EvalState& st, Value* a, std::size_t n) {
  const Str& s = wantString(st, "string->number", a[0]);
  int radix = 10;
  if (n == 2) {
    radix = static_cast<int>(wantExactInt(st, "string->number", a[1]).convert_to<long>());
    if (radix != 2 && radix != 8 && radix != 10 && radix != 16)
      st.fail("string->number: radix must be 2, 8, 10 or 16");
  }
  const std::string& text = *s.text;
  if (radix != 10) {
    auto v = parseIntRadix(text, radix);
    return v ? *v : Value::boolean(false);
  }
  try {
    ProgramAst ast = parse(text);
    if (ast.forms.size() == 1 && ast.forms[0].isNumber()) return ast.forms[0];
  } catch (const Error&) {
  }
  return Value::boolean(false);
}

// ---- pairs and lists --------------------------------------------------

Value carCdrPath(EvalState& st, const char* name, const Value& v) {
  // name is "cadr" etc; apply the a/d letters right to left.
  std::string_view path(name + 1, std::strlen(name) - 2);
  Value cur = v;
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    const Pair& p = wantPair(st, name, cur);
    cur = (*it == 'a') ? p.car : p.cdr;
  }
  return cur;
}

bool isProperList(const Value& v) {
  const Value* cur = &v;
  while (cur->isPair()) cur = &cur->asPair().cdr;
  return cur->isNil();
}

Value lengthV(EvalState& st, const Value& v) {
  Int n = 0;
  const Value* cur = &v;
  while (cur->isPair()) {
    ++n;
    cur = &cur->asPair().cdr;
  }
  if (!cur->isNil()) typeFail(st, "length", "proper list", v);
  return Value::integer(std::move(n));
}

Value appendV(EvalState& st, Value* a, std::size_t n) {
  if (n == 0) return Value::nil();
  Value result = a[n - 1];  // last argument is shared, not copied
  for (std::size_t i = n - 1; i-- > 0;) {
    std::vector<Value> items;
    const Value* cur = &a[i];
    while (cur->isPair()) {
      items.push_back(cur->asPair().car);
      cur = &cur->asPair().cdr;
    }
    if (!cur->isNil()) typeFail(st, "append", "proper list", a[i]);
    for (auto it = items.rbegin(); it != items.rend(); ++it)
      result = Value::cons(*it, result);
  }
  return result;
}

Value reverseV(EvalState& st, const Value& v) {
  Value out = Value::nil();
  const Value* cur = &v;
  while (cur->isPair()) {
    out = Value::cons(cur->asPair().car, out);
    cur = &cur->asPair().cdr;
  }
  if (!cur->isNil()) typeFail(st, "reverse", "proper list", v);
  return out;
}

Value listTail(EvalState& st, const char* who, const Value& v, const Int& k) {
  Value cur = v;
  for (Int i = 0; i < k; ++i) {
    if (!cur.isPair()) st.fail(std::string(who) + ": list too short");
    cur = cur.asPair().cdr;
  }
  return cur;
}

template <bool (*Eq)(const Value&, const Value&)>
Value memberV(EvalState& st, const Value& x, const Value& lst) {
  (void)st;
  Value cur = lst;
  while (cur.isPair()) {
    if (Eq(x, cur.asPair().car)) return cur;
    cur = cur.asPair().cdr;
  }
  return Value::boolean(false);
}

template <bool (*Eq)(const Value&, const Value&)>
Value assocV(EvalState& st, const Value& x, const Value& alist) {
  Value cur = alist;
  while (cur.isPair()) {
    const Value& entry = cur.asPair().car;
    if (entry.isPair() && Eq(x, entry.asPair().car)) return entry;
    cur = cur.asPair().cdr;
  }
  (void)st;
  return Value::boolean(false);
}

// ---- control ----------------------------------------------------------

Value applyV(EvalState& st, Value* a, std::size_t n) {
  if (!a[0].isProcedure()) typeFail(st, "apply", "procedure", a[0]);
  std::vector<Value> args;
  for (std::size_t i = 1; i + 1 < n; ++i) args.push_back(a[i]);
  Value rest = a[n - 1];
  while (rest.isPair()) {
    args.push_back(rest.asPair().car);
    rest = rest.asPair().cdr;
  }
  if (!rest.isNil()) typeFail(st, "apply", "proper list", a[n - 1]);
  return st.applyProcedure(a[0], args.data(), args.size());
}

Value mapLike(EvalState& st, const char* who, Value* a, std::size_t n,
              bool collect) {
  if (!a[0].isProcedure()) typeFail(st, who, "procedure", a[0]);
  std::size_t lists = n - 1;
  std::vector<Value> cursors(a + 1, a + n);
  std::vector<Value> out;
  std::vector<Value> args(lists);
  for (;;) {
    bool allPairs = true, anyNil = false;
    for (const Value& c : cursors) {
      if (c.isPair()) continue;
      allPairs = false;
      if (c.isNil())
        anyNil = true;
      else
        typeFail(st, who, "proper list", c);
    }
    if (!allPairs) {
      for (const Value& c : cursors)
        if (!c.isNil()) {
          if (anyNil) st.fail(std::string(who) + ": lists have different lengths");
          break;
        }
      break;
    }
    for (std::size_t i = 0; i < lists; ++i) {
      args[i] = cursors[i].asPair().car;
      cursors[i] = cursors[i].asPair().cdr;
    }
    Value r = st.applyProcedure(a[0], args.data(), args.size());
    if (collect) out.push_back(r);
  }
  if (!collect) return Value();
  Value lst = Value::nil();
  for (auto it = out.rbegin(); it != out.rend(); ++it) lst = Value::cons(*it, lst);
  return lst;
}

// ---- strings / chars ---------------------------------------------------

Value substringV(EvalState& st, const Value& s, const Value& a, const Value& b) {
  const Str& str = wantString(st, "substring", s);
  long from = wantExactInt(st, "substring", a).convert_to<long>();
  long to = wantExactInt(st, "substring", b).convert_to<long>();
  long len = static_cast<long>(str.text->size());
  if (from < 0 || to < from || to > len) st.fail("substring: index out of range");
  return Value::string(str.text->substr(from, to - from));
}

template <int Lo, int Hi>
Value strCompare(EvalState& st, const char* who, const Value& a, const Value& b) {
  const Str& x = wantString(st, who, a);
  const Str& y = wantString(st, who, b);
  int c = x.text->compare(*y.text);
  c = c < 0 ? -1 : (c > 0 ? 1 : 0);
  return Value::boolean(c >= Lo && c <= Hi);
}

template <int Lo, int Hi>
Value charCompare(EvalState& st, const char* who, const Value& a, const Value& b) {
  char x = wantChar(st, who, a);
  char y = wantChar(st, who, b);
  int c = x < y ? -1 : (x > y ? 1 : 0);
  return Value::boolean(c >= Lo && c <= Hi);
}

// Builds the full table.  Kept as one flat list so the manifest, the initial
// environment and the grammar's procedure-call rules all see the same thing.
std::vector<BuiltinProc> makeTable() {
  std::vector<BuiltinProc> t;
  auto def = [&t](const char* name, int min, int max,
                  Value (*fn)(EvalState&, Value*, std::size_t)) {
    t.push_back(BuiltinProc{name, Arity{min, max}, fn});
  };
  constexpr int V = Arity::kVariadic;

  // 6.1 equivalence
  def("eqv?", 2, 2, [](EvalState&, Value* a, std::size_t) {
    return Value::boolean(eqv(a[0], a[1]));
  });
  def("eq?", 2, 2, [](EvalState&, Value* a, std::size_t) {
    return Value::boolean(eqv(a[0], a[1]));
  });
  def("equal?", 2, 2, [](EvalState&, Value* a, std::size_t) {
    return Value::boolean(equal(a[0], a[1]));
  });

  // 6.2 numbers
  def("number?", 1, 1, [](EvalState&, Value* a, std::size_t) {
    return Value::boolean(a[0].isNumber());
  });
  def("complex?", 1, 1, [](EvalState&, Value* a, std::size_t) {
    return Value::boolean(a[0].isNumber());
  });
  def("real?", 1, 1, [](EvalState&, Value* a, std::size_t) {
    return Value::boolean(a[0].isNumber());
  });
  def("rational?", 1, 1, [](EvalState&, Value* a, std::size_t) {
    return Value::boolean(a[0].isInt() || (a[0].isReal() && std::isfinite(a[0].asReal())));
  });
  def("integer?", 1, 1, [](EvalState&, Value* a, std::size_t) {
    return Value::boolean(a[0].isInt() || (a[0].isReal() && isIntegral(a[0].asReal())));
  });
  def("exact?", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    wantNumber(st, "exact?", a[0]);
    return Value::boolean(a[0].isInt());
  });
  def("inexact?", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    wantNumber(st, "inexact?", a[0]);
    return Value::boolean(a[0].isReal());
  });
  def("=", 2, V, [](EvalState& st, Value* a, std::size_t n) {
    return cmpChain<0, 0>(st, "=", a, n);
  });
  def("<", 2, V, [](EvalState& st, Value* a, std::size_t n) {
    return cmpChain<-1, -1>(st, "<", a, n);
  });
  def(">", 2, V, [](EvalState& st, Value* a, std::size_t n) {
    return cmpChain<1, 1>(st, ">", a, n);
  });
  def("<=", 2, V, [](EvalState& st, Value* a, std::size_t n) {
    return cmpChain<-1, 0>(st, "<=", a, n);
  });
  def(">=", 2, V, [](EvalState& st, Value* a, std::size_t n) {
    return cmpChain<0, 1>(st, ">=", a, n);
  });
  def("zero?", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    wantNumber(st, "zero?", a[0]);
    return Value::boolean(a[0].isInt() ? a[0].asInt() == 0 : a[0].asReal() == 0);
  });
  def("positive?", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    wantNumber(st, "positive?", a[0]);
    return Value::boolean(a[0].isInt() ? a[0].asInt() > 0 : a[0].asReal() > 0);
  });
  def("negative?", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    wantNumber(st, "negative?", a[0]);
    return Value::boolean(a[0].isInt() ? a[0].asInt() < 0 : a[0].asReal() < 0);
  });
  def("odd?", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    return Value::boolean(wantExactInt(st, "odd?", a[0]) % 2 != 0);
  });
  def("even?", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    return Value::boolean(wantExactInt(st, "even?", a[0]) % 2 == 0);
  });
  def("max", 1, V, [](EvalState& st, Value* a, std::size_t n) {
    return minmaxV(st, a, n, true);
  });
  def("min", 1, V, [](EvalState& st, Value* a, std::size_t n) {
    return minmaxV(st, a, n, false);
  });
  def("+", 0, V, addV);
  def("*", 0, V, mulV);
  def("-", 1, V, subV);
  def("/", 1, V, divV);
  def("abs", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    wantNumber(st, "abs", a[0]);
    if (a[0].isInt()) return Value::integer(boost::multiprecision::abs(a[0].asInt()));
    return Value::real(std::fabs(a[0].asReal()));
  });
  def("quotient", 2, 2, [](EvalState& st, Value* a, std::size_t) {
    return quotRem(st, "quotient", a[0], a[1], false);
  });
  def("remainder", 2, 2, [](EvalState& st, Value* a, std::size_t) {
    return quotRem(st, "remainder", a[0], a[1], true);
  });
  def("modulo", 2, 2, [](EvalState& st, Value* a, std::size_t) {
    return moduloV(st, a[0], a[1]);
  });
  def("gcd", 0, V, [](EvalState& st, Value* a, std::size_t n) {
    return gcdLcmV(st, a, n, false);
  });
  def("lcm", 0, V, [](EvalState& st, Value* a, std::size_t n) {
    return gcdLcmV(st, a, n, true);
  });
  def("floor", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    return roundToInt(st, "floor", a[0], std::floor);
  });
  def("ceiling", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    return roundToInt(st, "ceiling", a[0], std::ceil);
  });
  def("truncate", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    return roundToInt(st, "truncate", a[0], std::trunc);
  });
  def("round", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    return roundToInt(st, "round", a[0], roundHalfEven);
  });
  def("exp", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    return transcend(st, "exp", a[0], std::exp);
  });
  def("log", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    return transcend(st, "log", a[0], std::log);
  });
  def("sin", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    return transcend(st, "sin", a[0], std::sin);
  });
  def("cos", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    return transcend(st, "cos", a[0], std::cos);
  });
  def("tan", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    return transcend(st, "tan", a[0], std::tan);
  });
  def("asin", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    return transcend(st, "asin", a[0], std::asin);
  });
  def("acos", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    return transcend(st, "acos", a[0], std::acos);
  });
  def("atan", 1, 2, [](EvalState& st, Value* a, std::size_t n) {
    wantNumber(st, "atan", a[0]);
    if (n == 1) return Value::real(std::atan(toD(a[0])));
    wantNumber(st, "atan", a[1]);
    return Value::real(std::atan2(toD(a[0]), toD(a[1])));
  });
  def("sqrt", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    return sqrtV(st, a[0]);
  });
  def("expt", 2, 2, [](EvalState& st, Value* a, std::size_t) {
    return exptV(st, a[0], a[1]);
  });
  def("exact->inexact", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    wantNumber(st, "exact->inexact", a[0]);
    return a[0].isReal() ? a[0] : Value::real(toD(a[0]));
  });
  def("inexact->exact", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    return inexactToExact(st, a[0]);
  });
  def("number->string", 1, 2, numberToString);
  def("string->number", 1, 2, stringToNumber);

  // 6.3.1 booleans
  def("not", 1, 1, [](EvalState&, Value* a, std::size_t) {
    return Value::boolean(!a[0].truthy());
  });
  def("boolean?", 1, 1, [](EvalState&, Value* a, std::size_t) {
    return Value::boolean(a[0].isBool());
  });

  // 6.3.2 pairs and lists
  def("pair?", 1, 1, [](EvalState&, Value* a, std::size_t) {
    return Value::boolean(a[0].isPair());
  });
  def("cons", 2, 2, [](EvalState&, Value* a, std::size_t) {
    return Value::cons(a[0], a[1]);
  });
  def("car", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    return wantPair(st, "car", a[0]).car;
  });
  def("cdr", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    return wantPair(st, "cdr", a[0]).cdr;
  });
#define HAM_CXR(NAME)                                             \
  def(#NAME, 1, 1, [](EvalState& st, Value* a, std::size_t) {     \
    return carCdrPath(st, #NAME, a[0]);                           \
  });
  HAM_CXR(caar) HAM_CXR(cadr) HAM_CXR(cdar) HAM_CXR(cddr)
  HAM_CXR(caaar) HAM_CXR(caadr) HAM_CXR(cadar) HAM_CXR(caddr)
  HAM_CXR(cdaar) HAM_CXR(cdadr) HAM_CXR(cddar) HAM_CXR(cdddr)
#undef HAM_CXR
  def("null?", 1, 1, [](EvalState&, Value* a, std::size_t) {
    return Value::boolean(a[0].isNil());
  });
  def("list?", 1, 1, [](EvalState&, Value* a, std::size_t) {
    return Value::boolean(isProperList(a[0]));
  });
  def("list", 0, V, [](EvalState&, Value* a, std::size_t n) {
    Value lst = Value::nil();
    for (std::size_t i = n; i-- > 0;) lst = Value::cons(a[i], lst);
    return lst;
  });
  def("length", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    return lengthV(st, a[0]);
  });
  def("append", 0, V, appendV);
  def("reverse", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    return reverseV(st, a[0]);
  });
  def("list-tail", 2, 2, [](EvalState& st, Value* a, std::size_t) {
    return listTail(st, "list-tail", a[0], wantExactInt(st, "list-tail", a[1]));
  });
  def("list-ref", 2, 2, [](EvalState& st, Value* a, std::size_t) {
    Value tail = listTail(st, "list-ref", a[0], wantExactInt(st, "list-ref", a[1]));
    return wantPair(st, "list-ref", tail).car;
  });
  def("memq", 2, 2, [](EvalState& st, Value* a, std::size_t) {
    return memberV<eqv>(st, a[0], a[1]);
  });
  def("memv", 2, 2, [](EvalState& st, Value* a, std::size_t) {
    return memberV<eqv>(st, a[0], a[1]);
  });
  def("member", 2, 2, [](EvalState& st, Value* a, std::size_t) {
    return memberV<equal>(st, a[0], a[1]);
  });
  def("assq", 2, 2, [](EvalState& st, Value* a, std::size_t) {
    return assocV<eqv>(st, a[0], a[1]);
  });
  def("assv", 2, 2, [](EvalState& st, Value* a, std::size_t) {
    return assocV<eqv>(st, a[0], a[1]);
  });
  def("assoc", 2, 2, [](EvalState& st, Value* a, std::size_t) {
    return assocV<equal>(st, a[0], a[1]);
  });

  // 6.3.3 symbols
  def("symbol?", 1, 1, [](EvalState&, Value* a, std::size_t) {
    return Value::boolean(a[0].isSymbol());
  });
  def("symbol->string", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    if (!a[0].isSymbol()) typeFail(st, "symbol->string", "symbol", a[0]);
    return Value(Value::Rep(Str{a[0].asSymbol().name}));
  });
  def("string->symbol", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    const Str& s = wantString(st, "string->symbol", a[0]);
    return Value::symbol(Symbol{s.text});
  });

  // 6.3.4 characters
  def("char?", 1, 1, [](EvalState&, Value* a, std::size_t) {
    return Value::boolean(a[0].isChar());
  });
  def("char=?", 2, 2, [](EvalState& st, Value* a, std::size_t) {
    return charCompare<0, 0>(st, "char=?", a[0], a[1]);
  });
  def("char<?", 2, 2, [](EvalState& st, Value* a, std::size_t) {
    return charCompare<-1, -1>(st, "char<?", a[0], a[1]);
  });
  def("char>?", 2, 2, [](EvalState& st, Value* a, std::size_t) {
    return charCompare<1, 1>(st, "char>?", a[0], a[1]);
  });
  def("char<=?", 2, 2, [](EvalState& st, Value* a, std::size_t) {
    return charCompare<-1, 0>(st, "char<=?", a[0], a[1]);
  });
  def("char>=?", 2, 2, [](EvalState& st, Value* a, std::size_t) {
    return charCompare<0, 1>(st, "char>=?", a[0], a[1]);
  });
  def("char->integer", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    return Value::integer(Int(static_cast<unsigned char>(wantChar(st, "char->integer", a[0]))));
  });
  def("integer->char", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    long c = wantExactInt(st, "integer->char", a[0]).convert_to<long>();
    if (c < 0 || c > 127) st.fail("integer->char: out of range");
    return Value::character(static_cast<char>(c));
  });
  def("char-upcase", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    return Value::character(static_cast<char>(
        std::toupper(static_cast<unsigned char>(wantChar(st, "char-upcase", a[0])))));
  });
  def("char-downcase", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    return Value::character(static_cast<char>(
        std::tolower(static_cast<unsigned char>(wantChar(st, "char-downcase", a[0])))));
  });
  def("char-alphabetic?", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    return Value::boolean(
        std::isalpha(static_cast<unsigned char>(wantChar(st, "char-alphabetic?", a[0]))) != 0);
  });
  def("char-numeric?", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    return Value::boolean(
        std::isdigit(static_cast<unsigned char>(wantChar(st, "char-numeric?", a[0]))) != 0);
  });
  def("char-whitespace?", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    return Value::boolean(
        std::isspace(static_cast<unsigned char>(wantChar(st, "char-whitespace?", a[0]))) != 0);
  });

  // 6.3.5 strings
  def("string?", 1, 1, [](EvalState&, Value* a, std::size_t) {
    return Value::boolean(a[0].isString());
  });
  def("make-string", 1, 2, [](EvalState& st, Value* a, std::size_t n) {
    long len = wantExactInt(st, "make-string", a[0]).convert_to<long>();
    if (len < 0) st.fail("make-string: negative length");
    char fill = n == 2 ? wantChar(st, "make-string", a[1]) : ' ';
    return Value::string(std::string(len, fill));
  });
  def("string", 0, V, [](EvalState& st, Value* a, std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += wantChar(st, "string", a[i]);
    return Value::string(std::move(s));
  });
  def("string-length", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    return Value::integer(Int(wantString(st, "string-length", a[0]).text->size()));
  });
  def("string-ref", 2, 2, [](EvalState& st, Value* a, std::size_t) {
    const Str& s = wantString(st, "string-ref", a[0]);
    long i = wantExactInt(st, "string-ref", a[1]).convert_to<long>();
    if (i < 0 || i >= static_cast<long>(s.text->size()))
      st.fail("string-ref: index out of range");
    return Value::character((*s.text)[i]);
  });
  def("string=?", 2, 2, [](EvalState& st, Value* a, std::size_t) {
    return strCompare<0, 0>(st, "string=?", a[0], a[1]);
  });
  def("string<?", 2, 2, [](EvalState& st, Value* a, std::size_t) {
    return strCompare<-1, -1>(st, "string<?", a[0], a[1]);
  });
  def("string>?", 2, 2, [](EvalState& st, Value* a, std::size_t) {
    return strCompare<1, 1>(st, "string>?", a[0], a[1]);
  });
  def("string<=?", 2, 2, [](EvalState& st, Value* a, std::size_t) {
    return strCompare<-1, 0>(st, "string<=?", a[0], a[1]);
  });
  def("string>=?", 2, 2, [](EvalState& st, Value* a, std::size_t) {
    return strCompare<0, 1>(st, "string>=?", a[0], a[1]);
  });
  def("substring", 3, 3, [](EvalState& st, Value* a, std::size_t) {
    return substringV(st, a[0], a[1], a[2]);
  });
  def("string-append", 0, V, [](EvalState& st, Value* a, std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += *wantString(st, "string-append", a[i]).text;
    return Value::string(std::move(s));
  });
  def("string->list", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    const Str& s = wantString(st, "string->list", a[0]);
    Value lst = Value::nil();
    for (auto it = s.text->rbegin(); it != s.text->rend(); ++it)
      lst = Value::cons(Value::character(*it), lst);
    return lst;
  });
  def("list->string", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    std::string s;
    Value cur = a[0];
    while (cur.isPair()) {
      s += wantChar(st, "list->string", cur.asPair().car);
      cur = cur.asPair().cdr;
    }
    if (!cur.isNil()) typeFail(st, "list->string", "proper list", a[0]);
    return Value::string(std::move(s));
  });
  def("string-copy", 1, 1, [](EvalState& st, Value* a, std::size_t) {
    return Value::string(std::string(*wantString(st, "string-copy", a[0]).text));
  });

  // 6.4 control
  def("procedure?", 1, 1, [](EvalState&, Value* a, std::size_t) {
    return Value::boolean(a[0].isProcedure());
  });
  def("apply", 2, V, applyV);
  def("map", 2, V, [](EvalState& st, Value* a, std::size_t n) {
    return mapLike(st, "map", a, n, true);
  });
  def("for-each", 2, V, [](EvalState& st, Value* a, std::size_t n) {
    return mapLike(st, "for-each", a, n, false);
  });

  return t;
}

}  // namespace

const std::vector<BuiltinProc>& builtin_table() {
  static const std::vector<BuiltinProc> table = makeTable();
  return table;
}

const std::vector<StdlibEntry>& stdlib_manifest() {
  static const std::vector<StdlibEntry> entries = [] {
    std::vector<StdlibEntry> v;
    for (const auto& b : builtin_table()) v.push_back(StdlibEntry{b.name, b.arity});
    return v;
  }();
  return entries;
}

std::string stdlib_manifest_text() {
  std::string out;
  for (const auto& e : stdlib_manifest()) {
    out += e.name;
    out += ' ';
    out += std::to_string(e.arity.min);
    out += ' ';
    out += e.arity.max == Arity::kVariadic ? "*" : std::to_string(e.arity.max);
    out += '\n';
  }
  return out;
}

std::vector<StdlibEntry> parse_stdlib_manifest(std::string_view text) {
  std::vector<StdlibEntry> entries;
  std::size_t pos = 0;
  int lineNo = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++lineNo;
    if (line.empty()) continue;
    std::istringstream in{std::string(line)};
    std::string name, mn, mx;
    if (!(in >> name >> mn >> mx))
      throw ParseError("manifest line " + std::to_string(lineNo) + ": expected 'name min max|*'");
    Arity a;
    a.min = std::stoi(mn);
    a.max = mx == "*" ? Arity::kVariadic : std::stoi(mx);
    entries.push_back(StdlibEntry{name, a});
  }
  return entries;
}

Arity stdlib_arity(std::string_view name) {
  static const std::unordered_map<std::string_view, Arity> byName = [] {
    std::unordered_map<std::string_view, Arity> m;
    for (const auto& e : stdlib_manifest()) m.emplace(e.name, e.arity);
    return m;
  }();
  auto it = byName.find(name);
  if (it == byName.end())
    throw UnknownProcedure("'" + std::string(name) + "' is not in the standard library subset");
  return it->second;
}

}  // namespace ham::scheme
