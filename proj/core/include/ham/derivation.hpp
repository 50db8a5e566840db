#pragma once

// Leftmost derivation over the weighted grammar: sentential forms carrying
// accumulated log2-probability and a variable-scope structure, derivation
// trees rebuilt from the applied-step trace, bottom-up pruning (the source
// of abstract expressions), and the canonical bracket text for trees.
//
// Values are immutable from the caller's point of view: expand_leftmost
// returns a new form.  The search module keeps its own in-place expander for
// the hot enumeration path and is tested against this one step by step.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ham/errors.hpp"
#include "ham/grammar.hpp"

namespace ham::derivation {

using grammar::Expansion;
using grammar::GenerationContext;
using grammar::Scfg;
using grammar::SolutionRef;
using grammar::SymId;

// ---------------------------------------------------------------------------
// Scopes

// Scope of visibility for bound names.  Scope 0 is the root (problem
// parameters); !scope productions push children.  A name registered in a
// scope is visible to every occurrence whose chain passes through it.
using ScopeId = std::int32_t;
inline constexpr ScopeId kRootScope = 0;

struct Scope {
  ScopeId parent = -1;  // -1 only for the root
  std::vector<std::string> names;      // bound variables, registration order
  std::vector<std::string> solutions;  // solution ids defined in this scope
};

// One symbol occurrence in a sentential form, tagged with its scope.
struct Occurrence {
  SymId sym = grammar::kNoSym;
  ScopeId scope = kRootScope;
};

// ---------------------------------------------------------------------------
// Steps and forms

// One applied expansion.  Static productions are identified by their index
// into Scfg::productions() (staticIndex >= 0); procedural emissions carry
// staticIndex == -1.  The body and probability are recorded as applied,
// because contextual mass redistribution can change what the stored
// production says.
struct Step {
  SymId head = grammar::kNoSym;
  std::vector<SymId> body;
  double probability = 0.0;
  std::int64_t staticIndex = -1;
  bool newScope = false;
  std::string registersVariable;
  std::string registersSolution;
};

struct SententialForm {
  std::vector<Occurrence> symbols;
  // Index of the leftmost nonterminal; nullopt iff the form is a complete
  // sentence (all terminals).
  std::optional<std::size_t> leftmostNt;
  double logProb = 0.0;  // log2 of the product of applied probabilities
  std::vector<Step> steps;
  std::vector<Scope> scopes{Scope{}};
  // Context for expanding the leftmost nonterminal (boundVariables and
  // definedSolutions rebuilt from its scope chain; availableSolutions are
  // fixed per derivation).  For complete sentences only availableSolutions
  // are meaningful.
  GenerationContext ctx;

  bool complete() const { return !leftmostNt.has_value(); }
};

// Context for expanding an occurrence in the given scope: boundVariables
// from the scope chain (outer scopes first, duplicates keep their outermost
// position), definedSolutions sorted-unique over the chain, and the given
// availableSolutions.  expand_leftmost and the search's in-place expander
// share this one definition.
GenerationContext context_for(const std::vector<Scope>& scopes, ScopeId scope,
                              const std::vector<SolutionRef>& availableSolutions);

// Start from the grammar's start symbol, nothing bound.
SententialForm start_form(const Scfg& g);

// Start from an arbitrary symbol string with the given names pre-bound in
// the root scope (problem parameters) and the given solutions available.
SententialForm make_start_form(const Scfg& g, std::vector<SymId> symbols,
                               std::vector<std::string> preboundNames,
                               std::vector<SolutionRef> availableSolutions);

// Apply one expansion at the leftmost nonterminal.  Throws HeadMismatch when
// the expansion's head is not the leftmost nonterminal (or the form is
// already complete) and ZeroProbability when its probability is not > 0.
SententialForm expand_leftmost(const SententialForm& form, const Expansion& exp,
                               const Scfg& g);

// Token texts of a complete sentence.  Throws IncompleteDerivation when the
// form still has nonterminals.
std::vector<std::string> sentence_tokens(const SententialForm& form, const Scfg& g);
// The same, joined with single spaces (the program text handed to the
// interpreter).
std::string sentence_text(const SententialForm& form, const Scfg& g);

// ---------------------------------------------------------------------------
// Derivation trees

// internal == true: a nonterminal expanded by a production, children spell
// its body (empty for an epsilon body).  internal == false: a leaf — either
// a terminal token or a nonterminal left unexpanded (by pruning).
struct DerivationTree {
  SymId label = grammar::kNoSym;
  bool internal = false;
  std::vector<DerivationTree> children;
};

// Rebuild the tree from a complete leftmost trace.  Throws
// IncompleteDerivation when steps stop early, expand the wrong head, or
// leave symbols unexplained.
DerivationTree build_tree(const std::vector<Step>& steps, const Scfg& g);

// Leaves of every deepest internal node are removed, turning those nodes
// into nonterminal leaves.  Throws AlreadyLeaf for a single leaf.
DerivationTree prune_one_level(const DerivationTree& tree);

// Left-to-right leaf labels as a sentential form (nonterminal leaves stay
// nonterminals; no probability, no scopes).
SententialForm frontier(const DerivationTree& tree, const Scfg& g);

// Height in edges: 0 for a leaf.
int tree_height(const DerivationTree& tree);
// Number of frontier symbols (leaf count, epsilon-internal nodes count 0).
std::size_t frontier_size(const DerivationTree& tree);

// Canonical bracket text: `[Node <:NT:> child...]`, `[Leaf token]`,
// `[Leaf <:NT:>]`, single-space separated.  Tokens must not contain
// whitespace or square brackets (grammar terminals never do).
std::string encode_tree(const DerivationTree& tree, const Scfg& g);
// Parse the bracket text, interning symbols into `g` as needed.
DerivationTree parse_tree(std::string_view text, Scfg& g);

}  // namespace ham::derivation
