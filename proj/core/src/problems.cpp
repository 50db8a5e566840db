#include "ham/problems.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace ham::problems {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> splitWords(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

double toDouble(const scheme::Value& v) {
  return v.isInt() ? v.asInt().convert_to<double>() : v.asReal();
}

// An integral real becomes an exact integer so that fixtures like
// (0.25) -> 4 keep an exact expected side.
scheme::Value makeNumber(double v) {
  if (std::floor(v) == v && std::fabs(v) <= 9.007199254740992e15) {
    return scheme::Value::integer(scheme::Int(static_cast<long long>(v)));
  }
  return scheme::Value::real(v);
}

}  // namespace

std::string to_string(Kind k) {
  return k == Kind::Inversion ? "inversion" : "operator-induction";
}

Kind kind_from_string(const std::string& s) {
  if (s == "inversion") return Kind::Inversion;
  if (s == "operator-induction") return Kind::OperatorInduction;
  throw ParseError("unknown problem kind: " + s);
}

TrainingSequence load_sequence(const std::string& text) {
  TrainingSequence seq;
  seq.id = "seq";
  std::istringstream in(text);
  std::string line;
  int lineNo = 0;
  auto fail = [&](const std::string& msg) {
    throw ParseError("sequence line " + std::to_string(lineNo) + ": " + msg);
  };
  ProblemSpec* cur = nullptr;
  while (std::getline(in, line)) {
    ++lineNo;
    std::string_view sv = trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    std::vector<std::string> words = splitWords(sv);
    const std::string& head = words.front();
    if (head == "sequence") {
      if (words.size() != 2) fail("expected: sequence <id>");
      seq.id = words[1];
    } else if (head == "problem") {
      // problem <id> kind=<k> arity=<n> [tol=<r>]
      if (words.size() < 4) fail("expected: problem <id> kind=<k> arity=<n> [tol=<r>]");
      ProblemSpec p;
      p.id = words[1];
      bool sawKind = false, sawArity = false;
      for (std::size_t i = 2; i < words.size(); ++i) {
        const std::string& w = words[i];
        auto eq = w.find('=');
        if (eq == std::string::npos) fail("expected key=value, got '" + w + "'");
        std::string key = w.substr(0, eq), val = w.substr(eq + 1);
        try {
          if (key == "kind") {
            p.kind = kind_from_string(val);
            sawKind = true;
          } else if (key == "arity") {
            p.arity = std::stoi(val);
            sawArity = true;
          } else if (key == "tol") {
            p.tolerance = std::stod(val);
          } else {
            fail("unknown problem attribute '" + key + "'");
          }
        } catch (const std::invalid_argument&) {
          fail("bad value for " + key + ": '" + val + "'");
        } catch (const std::out_of_range&) {
          fail("bad value for " + key + ": '" + val + "'");
        }
      }
      if (!sawKind || !sawArity) fail("problem needs kind= and arity=");
      seq.problems.push_back(std::move(p));
      cur = &seq.problems.back();
    } else if (head == "ex") {
      if (!cur) fail("ex before any problem");
      // ex (<args>) -> <value>: find the balanced argument list first, then
      // the arrow, then the expected datum.
      auto open = sv.find('(');
      if (open == std::string_view::npos) fail("ex needs an argument list");
      std::size_t i = open;
      int depth = 0;
      bool inString = false;
      for (; i < sv.size(); ++i) {
        char c = sv[i];
        if (inString) {
          if (c == '\\') ++i;
          else if (c == '"') inString = false;
        } else if (c == '"') {
          inString = true;
        } else if (c == '(') {
          ++depth;
        } else if (c == ')' && --depth == 0) {
          break;
        }
      }
      if (i >= sv.size()) fail("unbalanced argument list");
      std::string argsText(sv.substr(open, i - open + 1));
      std::string_view rest = trim(sv.substr(i + 1));
      if (rest.substr(0, 2) != "->") fail("expected '->' after argument list");
      std::string valueText(trim(rest.substr(2)));
      if (valueText.empty()) fail("missing expected value");
      Example ex;
      try {
        scheme::Value args = scheme::parse_datum(argsText);
        while (args.isPair()) {
          ex.args.push_back(args.asPair().car);
          args = args.asPair().cdr;
        }
        ex.expected = scheme::parse_datum(valueText);
      } catch (const Error& e) {
        fail(e.what());
      }
      cur->examples.push_back(std::move(ex));
    } else if (head == "start") {
      if (!cur) fail("start before any problem");
      if (words.size() < 2) fail("start needs at least one token");
      if (!cur->startTokens.empty()) fail("duplicate start line");
      cur->startTokens.assign(words.begin() + 1, words.end());
    } else {
      fail("unknown directive '" + head + "'");
    }
  }

  if (seq.problems.empty()) throw ValidationError("sequence has no problems");
  std::set<std::string> ids;
  for (const ProblemSpec& p : seq.problems) {
    if (!ids.insert(p.id).second)
      throw ValidationError("duplicate problem id: " + p.id);
    if (p.arity < 1)
      throw ValidationError("problem " + p.id + ": arity must be positive");
    if (p.tolerance < 0)
      throw ValidationError("problem " + p.id + ": negative tolerance");
    if (p.examples.empty())
      throw ValidationError("problem " + p.id + ": no examples");
    for (const Example& ex : p.examples) {
      if (static_cast<int>(ex.args.size()) != p.arity)
        throw ValidationError("problem " + p.id + ": example tuple length " +
                              std::to_string(ex.args.size()) + " != arity " +
                              std::to_string(p.arity));
    }
  }
  return seq;
}

TrainingSequence load_sequence_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open sequence file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_sequence(buf.str());
}

std::string invocation_text(const ProblemSpec& problem, const Example& ex) {
  std::string out = "(" + problem.id;
  for (const scheme::Value& arg : ex.args) {
    out += " (quote ";
    out += scheme::write(arg);
    out += ")";
  }
  out += ")";
  return out;
}

bool values_match(const scheme::Value& actual, const scheme::Value& expected,
                  double tolerance) {
  if (actual.isNumber() && expected.isNumber() &&
      (actual.isReal() || expected.isReal())) {
    double a = toDouble(actual), e = toDouble(expected);
    if (std::isnan(a) || std::isnan(e)) return false;
    double diff = std::fabs(a - e);
    return e == 0.0 ? diff <= tolerance : diff <= tolerance * std::fabs(e);
  }
  return scheme::equal(actual, expected);
}

CheckResult check_solution(const scheme::ProgramAst& program,
                           const ProblemSpec& problem,
                           std::uint64_t perExampleBudget) {
  scheme::Interpreter interp;
  return check_solution(interp, program, problem, perExampleBudget);
}

CheckResult check_solution(scheme::Interpreter& interp,
                           const scheme::ProgramAst& program,
                           const ProblemSpec& problem,
                           std::uint64_t perExampleBudget) {
  CheckResult result;
  scheme::ExecBudget budget;
  budget.maxCycles = perExampleBudget;
  for (std::size_t i = 0; i < problem.examples.size(); ++i) {
    const Example& ex = problem.examples[i];
    scheme::ProgramAst full = program;
    full.forms.push_back(scheme::parse_datum(invocation_text(problem, ex)));
    scheme::ExecOutcome out = interp.evaluate(full, budget);
    result.cycles += out.cyclesUsed;
    if (out.status == scheme::ExecStatus::TimeLimit) {
      result.status = CheckStatus::TimeLimit;
      result.failedExample = static_cast<int>(i);
      return result;
    }
    if (out.status == scheme::ExecStatus::SchemeError) {
      result.status = CheckStatus::Error;
      result.failedExample = static_cast<int>(i);
      return result;
    }
    if (!values_match(out.value, ex.expected, problem.tolerance)) {
      result.status = CheckStatus::Fail;
      result.failedExample = static_cast<int>(i);
      return result;
    }
  }
  result.status = CheckStatus::Pass;
  result.failedExample = -1;
  return result;
}

CheckResult check_solution(const std::string& programText,
                           const ProblemSpec& problem,
                           std::uint64_t perExampleBudget) {
  scheme::Interpreter interp;
  return check_solution(interp, programText, problem, perExampleBudget);
}

CheckResult check_solution(scheme::Interpreter& interp,
                           const std::string& programText,
                           const ProblemSpec& problem,
                           std::uint64_t perExampleBudget) {
  scheme::ProgramAst program;
  try {
    program = scheme::parse(programText);
  } catch (const Error&) {
    CheckResult r;
    r.status = CheckStatus::Error;
    r.cycles = 0;
    r.failedExample = -1;
    return r;
  }
  return check_solution(interp, program, problem, perExampleBudget);
}

std::vector<Example> inversion_examples(InversionTarget target,
                                        const std::vector<double>& points) {
  std::vector<Example> out;
  out.reserve(points.size());
  for (double x : points) {
    double fx = 0;
    switch (target) {
      case InversionTarget::Identity:
        fx = x;
        break;
      case InversionTarget::Reciprocal:
        if (x == 0.0) throw DomainError("reciprocal inversion: point 0");
        fx = 1.0 / x;
        break;
      case InversionTarget::Sqrt:
        if (x < 0.0) throw DomainError("sqrt inversion: negative point");
        fx = std::sqrt(x);
        break;
    }
    Example ex;
    ex.args.push_back(makeNumber(fx));
    ex.expected = makeNumber(x);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace ham::problems
