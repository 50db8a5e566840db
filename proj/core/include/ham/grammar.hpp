#pragma once

// Stochastic context-free grammar over Scheme token sentences.
//
// A grammar is a symbol table (terminals carry token text, nonterminals carry
// names), a list of weighted productions, and a list of production
// *procedures*: hooks whose right-hand sides are computed from a
// GenerationContext at expansion time instead of being stored.  Four hook
// nonterminals exist in every grammar loaded or built here --
// previous-solution, solution-corpus, abstract-expression and
// frequent-expression -- and start out empty; the memory-update algorithms
// populate them as problems are solved.
//
// Probability discipline: the productions and procedure masses under one head
// always sum to 1 (validated to 1e-9).  At expansion time a production whose
// body mentions a hook that is currently empty is dropped and its mass is
// redistributed proportionally over the surviving alternatives, so the
// search never spends probability on branches that cannot produce anything.
// Procedures may deliberately emit zero-probability entries (e.g. a solution
// that is already defined); those are kept, and a depth-first expander
// treats them as dead branches.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ham/errors.hpp"
#include "ham/zeta.hpp"

namespace ham::grammar {

// ---------------------------------------------------------------------------
// Symbols

// Symbols are interned to dense ids.  Terminal ids are disjoint from
// nonterminal ids; use Scfg::isTerminal to discriminate.
using SymId = std::int32_t;
inline constexpr SymId kNoSym = -1;

// The hook nonterminal names fixed by the memory design.
inline constexpr std::string_view kHookPreviousSolution = "previous-solution";
inline constexpr std::string_view kHookSolutionCorpus = "solution-corpus";
inline constexpr std::string_view kHookAbstractExpression = "abstract-expression";
inline constexpr std::string_view kHookFrequentExpression = "frequent-expression";

// ---------------------------------------------------------------------------
// Productions

enum class Origin : std::uint8_t { Initial, Solution, Idiom, Mined };

std::string_view to_string(Origin o);
std::optional<Origin> origin_from_string(std::string_view s);

struct Production {
  SymId head = kNoSym;
  std::vector<SymId> body;  // empty = epsilon
  double probability = 0.0;
  Origin origin = Origin::Initial;
  // !scope: expanding this production opens a fresh variable scope for the
  // symbols of its body (used by lambda bodies and the program body).
  bool newScope = false;
  // !bind: the single terminal of the body is registered as a bound variable
  // in the scope of the occurrence being expanded.
  bool bindsName = false;
  // Probability-smoothing state s_t (memory update #1); negative = never
  // smoothed.  Production procedures have no such state: they are not
  // smoothable.
  double smoothed = -1.0;
};

enum class ProcKind : std::uint8_t {
  IntegerLiteral,        // terminals "1".."kmax", Zeta(s) weights
  VariableName,          // one body per bound variable, Zeta-by-position
  PreviousSolutionCall,  // one call form per available solution
  SolutionDefinition,    // one definition block per available solution
};

std::string_view to_string(ProcKind k);
std::optional<ProcKind> proc_kind_from_string(std::string_view s);

struct ProductionProcedure {
  SymId head = kNoSym;
  ProcKind kind{};
  double reservedMass = 0.0;  // share of the head's mass this procedure owns
};

// ---------------------------------------------------------------------------
// Generation context

// What a production procedure is allowed to condition on.  Built by the
// derivation machinery from the scope chain of the occurrence being expanded.
struct SolutionRef {
  std::string id;                           // e.g. "sqr"
  std::vector<std::string> callTokens;      // e.g. ( sqr <:expression:> ) -- see below
  int arity = 0;
  std::vector<std::string> definitionTokens;  // full define block, tokenized
};

struct GenerationContext {
  // Ordered outer-first, duplicates removed keeping the first occurrence.
  std::vector<std::string> boundVariables;
  // Solution ids already defined along the current derivation path (sorted).
  std::vector<std::string> definedSolutions;
  // Solutions the memory holds, oldest first.
  std::vector<SolutionRef> availableSolutions;

  bool isDefined(std::string_view id) const;
};

// One alternative returned by productions_for: either a static production
// (prod != nullptr) or a procedural emission (prod == nullptr, kind set).
struct Expansion {
  SymId head = kNoSym;
  const Production* prod = nullptr;
  // Index into Scfg::productions() for static productions; -1 for
  // procedural emissions.  The stable identity derivation steps record.
  std::int64_t staticIndex = -1;
  std::optional<ProcKind> kind;
  std::vector<SymId> body;
  double probability = 0.0;
  bool newScope = false;
  bool bindsName = false;
  // Names the derivation must register in the current scope when this
  // expansion is chosen (procedural emissions bind solution names).
  std::string registersVariable;  // empty = none
  std::string registersSolution;  // empty = none
};

struct Violation {
  std::string where;    // head name or production rendering
  std::string message;  // what is wrong
};

// ---------------------------------------------------------------------------
// Grammar

class Scfg {
 public:
  Scfg();

  // --- symbol table -------------------------------------------------------
  SymId internTerminal(std::string_view text);
  SymId internNonTerminal(std::string_view name);
  SymId findTerminal(std::string_view text) const;     // kNoSym if absent
  SymId findNonTerminal(std::string_view name) const;  // kNoSym if absent
  bool isTerminal(SymId id) const;
  bool isNonTerminal(SymId id) const;
  const std::string& text(SymId id) const;
  std::size_t terminalCount() const;
  std::size_t nonTerminalCount() const;
  // All nonterminal ids in interning order.
  std::vector<SymId> nonTerminals() const;

  SymId startSymbol() const { return start_; }
  void setStartSymbol(SymId s);

  bool isHook(SymId id) const;

  // --- construction / mutation (single-threaded, between searches) --------
  void addProduction(Production p);
  void addProcedure(ProductionProcedure p);
  // Multiply the probability (and smoothing state) of every static
  // production under `head` by `factor`.
  void scaleHead(SymId head, double factor);
  // Normalize static production probabilities under `head` so that together
  // with procedural reserved mass they sum to 1.  No-op for heads w/o mass.
  void renormalizeHead(SymId head);
  // Drop every static production under `head` (the frequent-expression
  // rewrite).  Production indices of later productions shift; stored
  // staticIndex values from earlier derivations become stale, which is why
  // grammar mutation happens only between searches.
  void removeHeadProductions(SymId head);

  const std::vector<Production>& productions() const { return prods_; }
  std::vector<Production>& productions() { return prods_; }
  const std::vector<ProductionProcedure>& procedures() const { return procs_; }
  // Indices into productions() for a head, insertion order.
  std::vector<std::size_t> productionIndices(SymId head) const;
  std::vector<const ProductionProcedure*> proceduresOf(SymId head) const;

  // Zeta parameters for integer literals (%zeta directive; default 2, 256).
  void setIntegerZeta(double s, int kmax);
  const ZetaTable& integerZeta() const { return intZeta_; }

  // --- expansion (const, safe to share read-only across threads) ----------
  // All alternatives for `head` under `ctx`, deterministically ordered:
  // static productions in insertion order, then procedural emissions in
  // attachment order.  Probabilities sum to 1 within 1e-9 unless a hook
  // legitimately contributes zero mass (already-defined solutions).
  std::vector<Expansion> productionsFor(SymId head, const GenerationContext& ctx) const;

  // True when `head` can emit no alternative at all under `ctx`.
  bool isEmptyFor(SymId head, const GenerationContext& ctx) const;

  // --- validation ----------------------------------------------------------
  // Structural problems as data: per-head sums off by > 1e-9, probabilities
  // outside [0,1], bodies referencing nonterminals that have no productions,
  // no procedures and are not hooks.
  std::vector<Violation> validate() const;

 private:
  struct SymEntry {
    std::string text;
    bool terminal = false;
  };

  std::vector<Expansion> expandProcedure(const ProductionProcedure& proc,
                                         const GenerationContext& ctx) const;
  bool procedureEmpty(const ProductionProcedure& proc, const GenerationContext& ctx) const;
  // Map stored tokens to symbol ids: "<:name:>" = nonterminal reference,
  // anything else = terminal.  Throws Error for names never interned.
  std::vector<SymId> mapTokens(const std::vector<std::string>& toks) const;

  std::vector<SymEntry> syms_;
  std::unordered_map<std::string, SymId> termIds_;
  std::unordered_map<std::string, SymId> ntIds_;
  std::vector<Production> prods_;
  std::vector<ProductionProcedure> procs_;
  // prodIndex_[head] = indices into prods_, maintained on addProduction.
  std::unordered_map<SymId, std::vector<std::size_t>> prodIndex_;
  std::unordered_map<SymId, std::vector<std::size_t>> procIndex_;
  SymId start_ = kNoSym;
  SymId hooks_[4] = {kNoSym, kNoSym, kNoSym, kNoSym};
  ZetaTable intZeta_;
  std::vector<SymId> intTerms_;  // terminal ids for "1".."kmax"
  // Prefix sums of k^-2 for Zeta-by-position variable weighting.
  std::vector<double> posWeightPrefix_;

  double positionWeight(std::size_t index, std::size_t n) const;
};

// ---------------------------------------------------------------------------
// Loading / serialization

// Parse the textual grammar format:
//
//   # comment
//   head -> "terminal" nonterminal ... [!scope] [!bind] @0.25
//   head -> @1.0                        # epsilon body
//   %proc head kind @mass               # production procedure
//   %stdlib head expr-nt                # generate stdlib call productions
//   %nt name                            # declare a (possibly empty) head
//   %zeta s kmax                        # integer-literal distribution
//
// The head of the first production (or the first %nt) becomes the start
// symbol.  Serialized grammars additionally carry !origin=... and
// !smooth=... attributes on productions.  Throws ParseError on malformed
// input and ValidationError when the result violates the probability
// discipline or contains unreachable / unproductive nonterminals (the four
// hooks are exempt from both).
Scfg load_grammar(std::string_view text);
Scfg load_grammar_file(const std::string& path);

// Canonical text for a grammar; load_grammar(grammar_text(g)) reproduces g
// exactly (symbol ids may differ; structure and probabilities do not).
std::string grammar_text(const Scfg& g);

// Canonical shortest-round-trip rendering for probabilities (to_chars).
std::string format_probability(double p);

}  // namespace ham::grammar
