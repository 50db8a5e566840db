#pragma once

// Problem and training-sequence definitions: induction problems given as
// input/output example pairs, plus the checking procedure that decides
// whether a candidate program solves a problem.  A problem's solution is a
// Scheme definition block; checking appends one invocation per example and
// compares the result against the expected value (exactly for exact values,
// at the problem's relative tolerance when inexact numbers are involved).

#include <cstdint>
#include <string>
#include <vector>

#include "ham/errors.hpp"
#include "ham/scheme.hpp"

namespace ham::problems {

enum class Kind { Inversion, OperatorInduction };

std::string to_string(Kind k);
Kind kind_from_string(const std::string& s);  // throws ParseError

struct Example {
  std::vector<scheme::Value> args;  // length == problem arity
  scheme::Value expected;
};

struct ProblemSpec {
  std::string id;
  Kind kind = Kind::OperatorInduction;
  int arity = 1;
  std::vector<Example> examples;
  // Relative tolerance used when either side of a numeric comparison is
  // inexact.  0 demands equality after conversion.
  double tolerance = 0.0;
  // Optional program prefix (sentential-form tokens, "<:name:>" marks a
  // nonterminal).  Empty means the caller builds the default define block.
  std::vector<std::string> startTokens;
};

struct TrainingSequence {
  std::string id;
  std::vector<ProblemSpec> problems;  // ordered, ids unique
};

// --- Sequence file format -------------------------------------------------
//
//   # comment
//   sequence <id>                 (optional; defaults to "seq")
//   problem <id> kind=<inversion|operator-induction> arity=<n> [tol=<r>]
//   ex (<arg> ...) -> <value>     (args/value are Scheme datums)
//   start <token> ...             (optional, once per problem)
//
// Throws ParseError on malformed lines and ValidationError on an empty
// sequence, duplicate ids, arity mismatches or problems without examples.
TrainingSequence load_sequence(const std::string& text);
TrainingSequence load_sequence_file(const std::string& path);

// The call syntax handed to the engine for re-use and checking:
// "(<id> (quote <arg1>) ... (quote <argN>))".
std::string invocation_text(const ProblemSpec& problem, const Example& ex);

enum class CheckStatus { Pass, Fail, Error, TimeLimit };

struct CheckResult {
  CheckStatus status = CheckStatus::Fail;
  // Total interpreter cycles consumed over the examples that ran (all of
  // them for Pass; checking stops at the first non-passing example).
  std::uint64_t cycles = 0;
  // Index of the example that failed/errored/timed out; -1 on Pass.
  int failedExample = -1;
};

// Evaluates the program's definition block plus one invocation per example,
// each under `perExampleBudget` cycles, in a fresh environment per example.
// All outcomes are data; nothing throws for candidate misbehaviour.
CheckResult check_solution(const scheme::ProgramAst& program,
                           const ProblemSpec& problem,
                           std::uint64_t perExampleBudget);

// Convenience overload: parses `programText` first.  A program that does not
// even parse is reported as Error with 0 cycles.
CheckResult check_solution(const std::string& programText,
                           const ProblemSpec& problem,
                           std::uint64_t perExampleBudget);

// Hot-path overloads reusing a caller-owned interpreter (every evaluate runs
// in a fresh environment, so results are identical to the ones above; this
// only skips rebuilding the standard library per candidate).
CheckResult check_solution(scheme::Interpreter& interp,
                           const scheme::ProgramAst& program,
                           const ProblemSpec& problem,
                           std::uint64_t perExampleBudget);
CheckResult check_solution(scheme::Interpreter& interp,
                           const std::string& programText,
                           const ProblemSpec& problem,
                           std::uint64_t perExampleBudget);

// Compare one actual value against an expected value under the problem
// tolerance rule (exposed for tests and the harness).
bool values_match(const scheme::Value& actual, const scheme::Value& expected,
                  double tolerance);

// --- Inversion fixtures ----------------------------------------------------

enum class InversionTarget { Identity, Reciprocal, Sqrt };

// Builds pairs (f(x), x) for the chosen f over the given points, so that a
// passing program computes f^{-1}.  Integral values stay exact integers;
// everything else becomes inexact.  Throws DomainError outside the target's
// invertible domain (reciprocal of 0, sqrt of a negative point).
std::vector<Example> inversion_examples(InversionTarget target,
                                        const std::vector<double>& points);

}  // namespace ham::problems
