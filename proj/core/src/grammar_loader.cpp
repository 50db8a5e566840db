#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ham/grammar.hpp"
#include "ham/scheme.hpp"

namespace ham::grammar {

namespace {

struct Tok {
  std::string text;
  bool quoted = false;
};

[[noreturn]] void parseFail(int lineNo, const std::string& msg) {
  throw ParseError("grammar line " + std::to_string(lineNo) + ": " + msg);
}

// Split one line into tokens.  Double-quoted tokens are terminals and may
// contain the escapes \" \\ \n \t; a bare '#' starts a comment.
std::vector<Tok> tokenizeLine(const std::string& line, int lineNo) {
  std::vector<Tok> toks;
  std::size_t i = 0;
  while (i < line.size()) {
    char c = line[i];
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
      continue;
    }
    if (c == '#') break;
    if (c == '"') {
      std::string text;
      ++i;
      bool closed = false;
      while (i < line.size()) {
        char d = line[i++];
        if (d == '"') {
          closed = true;
          break;
        }
        if (d == '\\') {
          if (i >= line.size()) parseFail(lineNo, "dangling escape in terminal");
          char e = line[i++];
          switch (e) {
            case '"': text.push_back('"'); break;
            case '\\': text.push_back('\\'); break;
            case 'n': text.push_back('\n'); break;
            case 't': text.push_back('\t'); break;
            default: parseFail(lineNo, std::string("unknown escape \\") + e);
          }
        } else {
          text.push_back(d);
        }
      }
      if (!closed) parseFail(lineNo, "unterminated terminal quote");
      toks.push_back({std::move(text), true});
      continue;
    }
    std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' &&
           line[i] != '\r' && line[i] != '#') {
      ++i;
    }
    toks.push_back({line.substr(start, i - start), false});
  }
  return toks;
}

double parseDouble(const std::string& s, int lineNo) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    parseFail(lineNo, "malformed number '" + s + "'");
  }
  return v;
}

int parseInt(const std::string& s, int lineNo) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    parseFail(lineNo, "malformed integer '" + s + "'");
  }
  return v;
}

// Generate uniform call productions for every stdlib procedure:
//   head -> "(" "name" expr ... expr ")"
// Range arities are generated at the minimum; fully variadic procedures at
// arity max(min, 2) so folds like + and - appear in binary form.
void generateStdlib(Scfg& g, SymId head, SymId exprNt) {
  const auto& manifest = scheme::stdlib_manifest();
  if (manifest.empty()) throw Error("stdlib manifest is empty");
  SymId open = g.internTerminal("(");
  SymId close = g.internTerminal(")");
  double prob = 1.0 / static_cast<double>(manifest.size());
  for (const scheme::StdlibEntry& entry : manifest) {
    int arity = entry.arity.max == scheme::Arity::kVariadic
                    ? std::max(entry.arity.min, 2)
                    : entry.arity.min;
    Production p;
    p.head = head;
    p.probability = prob;
    p.body.push_back(open);
    p.body.push_back(g.internTerminal(entry.name));
    for (int i = 0; i < arity; ++i) p.body.push_back(exprNt);
    p.body.push_back(close);
    g.addProduction(std::move(p));
  }
}

// Reachability over static production bodies, from the start symbol and the
// hook nonterminals (memory attachment points are live even when nothing
// references them statically).  Heads that carry production procedures
// contribute no static edges; their emissions are context-built.  Hooks are
// exempt from the check.
void checkReachable(const Scfg& g) {
  std::set<SymId> seen;
  std::vector<SymId> work{g.startSymbol()};
  seen.insert(g.startSymbol());
  for (SymId nt : g.nonTerminals()) {
    if (g.isHook(nt) && seen.insert(nt).second) work.push_back(nt);
  }
  while (!work.empty()) {
    SymId nt = work.back();
    work.pop_back();
    for (std::size_t idx : g.productionIndices(nt)) {
      for (SymId s : g.productions()[idx].body) {
        if (g.isNonTerminal(s) && seen.insert(s).second) work.push_back(s);
      }
    }
  }
  for (SymId nt : g.nonTerminals()) {
    if (g.isHook(nt)) continue;
    bool hasContent = !g.productionIndices(nt).empty() || !g.proceduresOf(nt).empty();
    if (!hasContent) continue;  // dangling is validate()'s report
    if (!seen.count(nt)) {
      throw ValidationError("nonterminal '" + g.text(nt) +
                            "' is unreachable from the start symbol");
    }
  }
  if (!seen.count(g.startSymbol())) {
    throw ValidationError("grammar has no start symbol");
  }
}

// Productivity fixpoint: a nonterminal is productive when some production
// derives a finite terminal string.  Procedure-carrying heads count as
// productive (they emit terminal bodies); hooks are exempt.
void checkProductive(const Scfg& g) {
  std::set<SymId> productive;
  for (SymId nt : g.nonTerminals()) {
    if (g.isHook(nt) || !g.proceduresOf(nt).empty()) productive.insert(nt);
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (const Production& p : g.productions()) {
      if (productive.count(p.head)) continue;
      bool ok = true;
      for (SymId s : p.body) {
        if (g.isNonTerminal(s) && !productive.count(s)) {
          ok = false;
          break;
        }
      }
      if (ok) {
        productive.insert(p.head);
        changed = true;
      }
    }
  }
  for (SymId nt : g.nonTerminals()) {
    if (g.isHook(nt) || productive.count(nt)) continue;
    if (g.productionIndices(nt).empty() && g.proceduresOf(nt).empty()) continue;
    throw ValidationError("nonterminal '" + g.text(nt) +
                          "' cannot derive any terminal string");
  }
}

std::string quoteTerminal(const std::string& text) {
  std::string out = "\"";
  for (char c : text) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out.push_back(c);
    }
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::string format_probability(double p) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), p);
  if (ec != std::errc()) return "0";
  return std::string(buf, end);
}

Scfg load_grammar(std::string_view text) {
  Scfg g;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineNo = 0;
  SymId firstHead = kNoSym;
  SymId explicitStart = kNoSym;
  struct PendingStdlib {
    SymId head;
    SymId expr;
  };
  std::vector<PendingStdlib> stdlibDirectives;

  while (std::getline(in, line)) {
    ++lineNo;
    std::vector<Tok> toks = tokenizeLine(line, lineNo);
    if (toks.empty()) continue;
    const std::string& first = toks[0].text;

    if (!toks[0].quoted && first == "%start") {
      if (toks.size() != 2 || toks[1].quoted) parseFail(lineNo, "%start expects one nonterminal");
      explicitStart = g.internNonTerminal(toks[1].text);
      continue;
    }
    if (!toks[0].quoted && first == "%zeta") {
      if (toks.size() != 3) parseFail(lineNo, "%zeta expects: %zeta s kmax");
      double s = parseDouble(toks[1].text, lineNo);
      int kmax = parseInt(toks[2].text, lineNo);
      try {
        g.setIntegerZeta(s, kmax);
      } catch (const DomainError& e) {
        parseFail(lineNo, e.what());
      }
      continue;
    }
    if (!toks[0].quoted && first == "%nt") {
      if (toks.size() != 2 || toks[1].quoted) parseFail(lineNo, "%nt expects one name");
      SymId nt = g.internNonTerminal(toks[1].text);
      if (firstHead == kNoSym) firstHead = nt;
      continue;
    }
    if (!toks[0].quoted && first == "%proc") {
      if (toks.size() != 4) parseFail(lineNo, "%proc expects: %proc head kind @mass");
      SymId head = g.internNonTerminal(toks[1].text);
      auto kind = proc_kind_from_string(toks[2].text);
      if (!kind) parseFail(lineNo, "unknown procedure kind '" + toks[2].text + "'");
      if (toks[3].text.empty() || toks[3].text[0] != '@') {
        parseFail(lineNo, "%proc mass must be written @mass");
      }
      double mass = parseDouble(toks[3].text.substr(1), lineNo);
      g.addProcedure(ProductionProcedure{head, *kind, mass});
      if (firstHead == kNoSym) firstHead = head;
      continue;
    }
    if (!toks[0].quoted && first == "%stdlib") {
      if (toks.size() != 3) parseFail(lineNo, "%stdlib expects: %stdlib head expr-nt");
      SymId head = g.internNonTerminal(toks[1].text);
      SymId expr = g.internNonTerminal(toks[2].text);
      stdlibDirectives.push_back({head, expr});
      if (firstHead == kNoSym) firstHead = head;
      continue;
    }
    if (!toks[0].quoted && !first.empty() && first[0] == '%') {
      parseFail(lineNo, "unknown directive '" + first + "'");
    }

    // Production: head -> sym ... [!scope] [!bind] [!origin=o] [!smooth=s] @p
    if (toks[0].quoted) parseFail(lineNo, "production head must be a bare nonterminal");
    if (toks.size() < 2 || toks[1].quoted || toks[1].text != "->") {
      parseFail(lineNo, "expected '->' after head");
    }
    Production p;
    p.head = g.internNonTerminal(first);
    bool haveProb = false;
    for (std::size_t i = 2; i < toks.size(); ++i) {
      const Tok& t = toks[i];
      if (t.quoted) {
        p.body.push_back(g.internTerminal(t.text));
        continue;
      }
      if (!t.text.empty() && t.text[0] == '@') {
        if (haveProb) parseFail(lineNo, "duplicate probability");
        p.probability = parseDouble(t.text.substr(1), lineNo);
        haveProb = true;
        continue;
      }
      if (t.text == "!scope") {
        p.newScope = true;
        continue;
      }
      if (t.text == "!bind") {
        p.bindsName = true;
        continue;
      }
      if (t.text.rfind("!origin=", 0) == 0) {
        auto o = origin_from_string(t.text.substr(8));
        if (!o) parseFail(lineNo, "unknown origin '" + t.text.substr(8) + "'");
        p.origin = *o;
        continue;
      }
      if (t.text.rfind("!smooth=", 0) == 0) {
        p.smoothed = parseDouble(t.text.substr(8), lineNo);
        continue;
      }
      if (t.text[0] == '!') parseFail(lineNo, "unknown flag '" + t.text + "'");
      p.body.push_back(g.internNonTerminal(t.text));
    }
    if (!haveProb) parseFail(lineNo, "production is missing @probability");
    if (firstHead == kNoSym) firstHead = p.head;
    g.addProduction(std::move(p));
  }

  for (const PendingStdlib& d : stdlibDirectives) generateStdlib(g, d.head, d.expr);

  SymId start = explicitStart != kNoSym ? explicitStart : firstHead;
  if (start == kNoSym) throw ParseError("grammar defines no productions");
  g.setStartSymbol(start);

  std::vector<Violation> violations = g.validate();
  if (!violations.empty()) {
    std::string msg = "grammar is invalid:";
    for (const Violation& v : violations) {
      msg += "\n  " + v.where + ": " + v.message;
    }
    throw ValidationError(msg);
  }
  checkReachable(g);
  checkProductive(g);
  return g;
}

Scfg load_grammar_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open grammar file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_grammar(buf.str());
}

std::string grammar_text(const Scfg& g) {
  std::string out;
  out += "%start " + g.text(g.startSymbol()) + "\n";
  out += "%zeta " + format_probability(g.integerZeta().s) + " " +
         std::to_string(g.integerZeta().kmax) + "\n";
  for (const Production& p : g.productions()) {
    out += g.text(p.head) + " ->";
    for (SymId s : p.body) {
      out.push_back(' ');
      out += g.isTerminal(s) ? quoteTerminal(g.text(s)) : g.text(s);
    }
    if (p.newScope) out += " !scope";
    if (p.bindsName) out += " !bind";
    if (p.origin != Origin::Initial) {
      out += " !origin=";
      out += to_string(p.origin);
    }
    if (p.smoothed >= 0.0) out += " !smooth=" + format_probability(p.smoothed);
    out += " @" + format_probability(p.probability) + "\n";
  }
  for (const ProductionProcedure& p : g.procedures()) {
    out += "%proc " + g.text(p.head) + " ";
    out += to_string(p.kind);
    out += " @" + format_probability(p.reservedMass) + "\n";
  }
  return out;
}

}  // namespace ham::grammar
