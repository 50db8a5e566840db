#include "ham/scheme.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace ham::scheme {

Value Value::string(std::string s) {
  return Value(Rep(Str{std::make_shared<const std::string>(std::move(s))}));
}

Value Value::cons(Value car, Value cdr) {
  return Value(Rep(std::make_shared<const Pair>(Pair{std::move(car), std::move(cdr)})));
}

const Pair& Value::asPair() const {
  return *std::get<std::shared_ptr<const Pair>>(rep_);
}

bool eqv(const Value& a, const Value& b) {
  if (a.kind() != b.kind()) return false;
  if (a.isUnspecified() || a.isNil()) return true;
  if (a.isBool()) return a.asBool() == b.asBool();
  if (a.isInt()) return a.asInt() == b.asInt();
  if (a.isReal()) return a.asReal() == b.asReal();
  if (a.isChar()) return a.asChar() == b.asChar();
  if (a.isSymbol()) return a.asSymbol().str() == b.asSymbol().str();
  // Pairs, strings and procedures compare by identity under eqv?.
  if (a.isString()) return a.asString().text == b.asString().text;
  if (a.isPair())
    return &a.asPair() == &b.asPair();
  if (a.isBuiltin()) return a.asBuiltin() == b.asBuiltin();
  if (a.isClosure()) return a.asClosure() == b.asClosure();
  return false;
}

// Iterative: candidate programs can build arbitrarily deep structures within
// their cycle budget, and comparing those must never overflow the host stack.
bool equal(const Value& a, const Value& b) {
  std::vector<std::pair<const Value*, const Value*>> work{{&a, &b}};
  while (!work.empty()) {
    auto [x, y] = work.back();
    work.pop_back();
    if (x->isPair() && y->isPair()) {
      work.emplace_back(&x->asPair().car, &y->asPair().car);
      work.emplace_back(&x->asPair().cdr, &y->asPair().cdr);
      continue;
    }
    if (x->isString() && y->isString()) {
      if (*x->asString().text != *y->asString().text) return false;
      continue;
    }
    if (!eqv(*x, *y)) return false;
  }
  return true;
}

namespace {

void formatReal(std::string& out, double d) {
  if (std::isnan(d)) {
    out += "+nan.0";
    return;
  }
  if (std::isinf(d)) {
    out += d > 0 ? "+inf.0" : "-inf.0";
    return;
  }
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, d);
  std::string_view sv(buf, res.ptr - buf);
  out.append(sv);
  // Make sure an inexact number never prints like an exact integer.
  if (sv.find('.') == std::string_view::npos &&
      sv.find('e') == std::string_view::npos &&
      sv.find("inf") == std::string_view::npos &&
      sv.find("nan") == std::string_view::npos) {
    out += ".0";
  }
}

void writeInto(std::string& out, const Value& v, int depth = 0) {
  if (depth > 1000) {  // guard against runtime-built deep nesting
    out += "...";
    return;
  }
  if (v.isUnspecified()) {
    out += "#<unspecified>";
  } else if (v.isNil()) {
    out += "()";
  } else if (v.isBool()) {
    out += v.asBool() ? "#t" : "#f";
  } else if (v.isInt()) {
    out += v.asInt().str();
  } else if (v.isReal()) {
    formatReal(out, v.asReal());
  } else if (v.isChar()) {
    char c = v.asChar();
    out += "#\\";
    if (c == ' ')
      out += "space";
    else if (c == '\n')
      out += "newline";
    else
      out += c;
  } else if (v.isSymbol()) {
    out += v.asSymbol().str();
  } else if (v.isString()) {
    out += '"';
    for (char c : *v.asString().text) {
      if (c == '\n') {
        out += "\\n";
      } else if (c == '\t') {
        out += "\\t";
      } else {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
      }
    }
    out += '"';
  } else if (v.isPair()) {
    out += '(';
    const Value* cur = &v;
    bool first = true;
    while (cur->isPair()) {
      if (!first) out += ' ';
      writeInto(out, cur->asPair().car, depth + 1);
      cur = &cur->asPair().cdr;
      first = false;
    }
    if (!cur->isNil()) {
      out += " . ";
      writeInto(out, *cur, depth + 1);
    }
    out += ')';
  } else {
    out += "#<procedure>";
  }
}

}  // namespace

std::string write(const Value& v) {
  std::string out;
  writeInto(out, v);
  return out;
}

}  // namespace ham::scheme
