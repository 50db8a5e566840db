#pragma once

// Long-lived memory between problems: the corpus of solved problems plus the
// four update algorithms that rewrite the grammar after each solution —
// probability smoothing from corpus production frequencies, previous-solution
// call/definition wiring, idiom abstraction by bottom-up pruning, and
// frequent-subtree mining — together with a canonical byte serialization
// whose length is the memory-size metric.
//
// All updates mutate the state in place, run strictly single-threaded between
// searches, and leave `scfg.validate()` empty.  Every production they add
// (origin solution / idiom / mined) hangs off one of the four hook
// nonterminals, so a grammar stripped of hook content is the initial grammar.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ham/derivation.hpp"
#include "ham/errors.hpp"
#include "ham/grammar.hpp"

namespace ham::memory {

struct MemoryConfig {
  // Smoothing rate: s_t = alpha * p_t + (1 - alpha) * s_{t-1}, s_0 = p_0.
  double alpha = 0.125;
  // Probability share handed to the newest previous-solution call.
  double gamma = 0.5;
  // Probability share handed to the newest idiom family under
  // abstract-expression.
  double idiomMass = 0.5;
  // Minimum number of occurrences for a mined subtree to count as frequent.
  std::size_t supportThreshold = 2;
  // Pruning stops once an abstract form has this many symbols or fewer.
  std::size_t pruneCutoff = 3;
};

// One solved problem.  The derivation tree is rooted at the nonterminal the
// search expanded (the program body); the define-block prefix tokens around
// it are part of programText only.
struct CorpusRecord {
  std::string problemId;
  int arity = 0;
  std::string programText;           // the solving define block
  derivation::DerivationTree tree;   // its derivation
  double p_i = 0.0;                  // probability at solve time
  std::uint64_t t_i = 0;             // cycles the solution spends
};

struct HamState {
  grammar::Scfg scfg;
  std::vector<CorpusRecord> corpus;  // solve order, append-only
  MemoryConfig config;
};

HamState make_state(grammar::Scfg g, MemoryConfig config = {});

// Corpus record for a freshly solved problem: rebuilds the derivation tree
// from the recorded steps.  Throws MissingDerivation when `steps` is empty.
CorpusRecord make_record(const grammar::Scfg& g, std::string problemId,
                         int arity, std::string programText,
                         const std::vector<derivation::Step>& steps,
                         double p_i, std::uint64_t t_i);

// The corpus in the shape the generation hooks consume, oldest first.
std::vector<grammar::SolutionRef> solution_refs(const HamState& ham);

// Update 1 — probability smoothing.  For every static production A -> beta
// under a head applied somewhere in the corpus derivations: p_t is the
// corpus frequency ratio of that production among A's static applications
// (scaled into the head's static mass), the smoothed value follows the
// recurrence, and the head is renormalized.  Production procedures are not
// smoothable and procedural applications never count.  The
// frequent-expression hook is skipped: its probabilities belong to the
// mining rewrite.  Throws MissingDerivation when the corpus is empty or the
// latest record has no derivation tree.
void update_probabilities(HamState& ham);

// Update 2 — previous solutions.  Adds a call production
// `previous-solution -> ( id <:expression:> ... )` at probability gamma,
// rescaling existing alternatives to total 1 - gamma, and makes sure the
// solution-corpus hook carries the definition-emitting procedure (which
// registers the name and emits zero probability on re-definition).  Throws
// DuplicateSolutionId when a call production for the id already exists.
void add_previous_solution(HamState& ham, const CorpusRecord& record);

// Update 3 — idioms.  Every expression-rooted subtree of the record's
// derivation is pruned bottom-up one level at a time; each step's frontier
// is collected as an abstract form until pruneCutoff symbols or fewer
// remain.  New forms (deduplicated against existing idioms) land under a
// fresh nonterminal with equal probabilities, added as an alternative of
// abstract-expression at idiomMass, older alternatives rescaled.
void learn_idioms(HamState& ham, const CorpusRecord& record);

// A mined pattern: an expansion-shaped tree whose nonterminal leaves mark
// abstraction cuts, with the number of corpus nodes it matches.
struct FrequentSubtree {
  derivation::DerivationTree tree;
  std::size_t support = 0;
};

// All labelled rooted patterns matching at least `supportThreshold` nodes of
// the forest, found level-wise with apriori pruning (every subpattern of a
// frequent pattern is frequent).  A pattern is a node expanded at least one
// level; occurrences within one tree count separately.  Output is sorted by
// support (descending), then canonical encoding — fully deterministic.
std::vector<FrequentSubtree> mine_frequent_subtrees(
    const grammar::Scfg& g,
    const std::vector<derivation::DerivationTree>& trees,
    std::size_t supportThreshold);

// Update 4 — mining.  Runs mine_frequent_subtrees over the corpus forest of
// maximal expression-rooted subtrees and REWRITES the frequent-expression
// hook: old mined productions are removed, and each frequent
// expression-rooted pattern becomes a production over its frontier with
// probability proportional to its support.
void mine_frequent_subprograms(HamState& ham);

// Appends the record and applies, in order: add_previous_solution,
// learn_idioms, mine_frequent_subprograms, update_probabilities.  On
// DuplicateSolutionId the state is left unchanged.
void full_update(HamState& ham, CorpusRecord record);

// Canonical, deterministic byte encoding: a header, the config, the grammar
// in its text format (which carries smoothing state and origins), and the
// corpus records with their derivations in the bracket tree encoding.
// deserialize(serialize(h)) is structurally equal to h, and
// serialize(deserialize(b)) == b byte for byte.  Throws CorruptEncoding on
// malformed input.
std::string serialize(const HamState& ham);
HamState deserialize(std::string_view bytes);

// The memory-size metric: byte length of the serialized state.
std::size_t ham_bytes(const HamState& ham);

}  // namespace ham::memory
