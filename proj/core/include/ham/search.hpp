#pragma once

// Levin Search over the weighted grammar: probability-ordered enumeration of
// candidate programs by probability-limited depth-first search, run under a
// doubling cycle budget.  Phase k has total budget T_k = 2^k * initialLimit
// and enumerates every sentence whose derivation probability is at least the
// horizon t_q / T_k; each candidate runs on the problem's examples for
// floor(p * T_k) cycles per example, so no generated program is too cheap to
// run.  Phases always run to completion and the winner is chosen by a total
// order (phase, then probability descending, then program text), which makes
// the result independent of how the work was split across workers.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ham/derivation.hpp"
#include "ham/errors.hpp"
#include "ham/grammar.hpp"
#include "ham/problems.hpp"

namespace ham::search {

struct SearchConfig {
  std::uint64_t initialLimit = 1'000'000;  // T_0, cycles
  std::uint64_t quantum = 100;             // t_q, cycles
  int maxPhases = 20;
  int workers = 1;
  // Optional fixed program prefix to search from; when absent the search
  // builds the problem's default define block (see problem_start_form).
  std::optional<derivation::SententialForm> startForm;
};

struct SearchStats {
  std::uint64_t trials = 0;        // candidates executed on >= 1 example
  std::uint64_t schemeErrors = 0;  // candidates that raised a Scheme error
  std::uint64_t cyclesSpent = 0;   // interpreter cycles over all trials
  std::uint64_t maxCycles = 0;     // total budget T_k of the last phase run
  double wallTime = 0.0;           // seconds; informational, never asserted
};

struct SolutionRecord {
  std::string problemId;
  std::string programText;
  std::vector<derivation::Step> derivationSteps;
  double p_i = 0.0;     // a priori probability, exp2 of the derivation logProb
  std::uint64_t t_i = 0;  // cycles the solution used over all example checks
  SearchStats stats;    // aggregated across all phases of this search
};

// One worker's totals for one phase; the progress-log record.
struct PhaseEvent {
  int phase = 0;
  int worker = 0;
  std::uint64_t trials = 0;
  std::uint64_t schemeErrors = 0;
  std::uint64_t cycles = 0;
};

// "phase=<k> worker=<w> trials=<n> errors=<n> cycles=<n>"
std::string format_event(const PhaseEvent& ev);

// p_h = t_q / t: generating a program cheaper than this would produce
// candidates that get less than one quantum of run time.  Requires
// t >= t_q >= 1.
double probability_horizon(std::uint64_t t_q, std::uint64_t t);

// Conceptual jump size t/p and implicit code length -log2(p); both require
// 0 < p <= 1 (and t > 0 for cjs).
double cjs(double p, std::uint64_t t);
double entropy(double p);

// A complete sentence reached during enumeration.  The references borrow the
// enumerator's state and are valid only inside the visitor call.
struct Candidate {
  const std::vector<derivation::Occurrence>& tokens;
  double logProb;
  const std::vector<derivation::Step>& steps;
};

struct EnumSummary {
  std::uint64_t visited = 0;         // sentences at or above the horizon
  std::uint64_t expansions = 0;      // production applications performed
  std::uint64_t horizonCutoffs = 0;  // sibling groups cut for falling below
};

// Probability-limited leftmost DFS from `start`: visits exactly the complete
// sentences with exp2(logProb) >= horizon reachable from it, each once,
// siblings in descending-probability order (ties keep grammar order).
// Zero-probability expansions backtrack silently.  The visitor returns false
// to stop the walk.  Requires 0 < horizon <= 1.
EnumSummary enumerate_dfs(const grammar::Scfg& g,
                          const derivation::SententialForm& start,
                          double horizon,
                          const std::function<bool(const Candidate&)>& visit);

// Top-level work split: repeatedly expands the highest-probability
// expandable frontier form until the frontier holds at least 8 * nWorkers
// forms (or nothing can expand), then deals forms by descending probability
// onto the least-loaded worker (load = sum of form probabilities).  Forms
// whose leftmost nonterminal admits no expansion are dropped — they derive
// nothing.  Every sentence reachable from `start` is reachable from exactly
// one assigned form.
std::vector<std::vector<derivation::SententialForm>> partition_toplevel(
    const grammar::Scfg& g, const derivation::SententialForm& start,
    int nWorkers);

// Start form for a problem: the problem's own start tokens when present,
// else "( define ( <id> var0 .. var_{arity-1} ) <start-symbol> )" with the
// parameters pre-bound in the root scope.  Interns tokens the grammar has
// not seen (the problem id, at least), hence the mutable grammar.
derivation::SententialForm problem_start_form(
    grammar::Scfg& g, const problems::ProblemSpec& problem,
    const std::vector<grammar::SolutionRef>& solutions);

struct SearchResult {
  std::optional<SolutionRecord> solution;  // empty = exhausted all phases
  SearchStats stats;                       // totals, also on exhaustion
  std::vector<PhaseEvent> events;          // per phase, per worker
};

using EventSink = std::function<void(const PhaseEvent&)>;

// Runs phases until a solution is found or maxPhases is exhausted.  Within a
// phase every worker enumerates its assigned forms completely; all passing
// candidates are collected and the winner is the highest-probability one
// (ties: lexicographically smallest program text).  Events are delivered to
// the sink from the coordinating thread, workers ascending within a phase.
SearchResult levin_search(const grammar::Scfg& g,
                          const problems::ProblemSpec& problem,
                          const SearchConfig& config,
                          const EventSink& onEvent = {});

}  // namespace ham::search
