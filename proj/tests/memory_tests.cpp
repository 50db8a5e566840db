// Memory-module tests: the four grammar updates (smoothing, previous
// solutions, idioms, mining) with their spec-pinned arithmetic, the
// frequent-subtree miner against a brute-force oracle, the wiring that lets
// a later search define and call an earlier solution, and the canonical
// serialization.

#include "ham/memory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "ham/derivation.hpp"
#include "ham/errors.hpp"
#include "ham/grammar.hpp"
#include "ham/problems.hpp"
#include "ham/search.hpp"

using namespace ham;
using namespace ham::memory;
using derivation::DerivationTree;
using derivation::SententialForm;
using grammar::kNoSym;
using grammar::Origin;
using grammar::Production;
using grammar::Scfg;
using grammar::SymId;

namespace {

Scfg shippedGrammar() {
  return grammar::load_grammar_file(std::string(HAM_DATA_DIR) + "/scheme.scfg");
}

problems::TrainingSequence shippedSeq0() {
  return problems::load_sequence_file(std::string(HAM_DATA_DIR) + "/seq0.seq");
}

DerivationTree leafOf(SymId s) {
  DerivationTree t;
  t.label = s;
  return t;
}

DerivationTree nodeOf(SymId s, std::vector<DerivationTree> kids) {
  DerivationTree t;
  t.label = s;
  t.internal = true;
  t.children = std::move(kids);
  return t;
}

CorpusRecord treeRecord(std::string id, DerivationTree tree, int arity = 1) {
  CorpusRecord r;
  r.problemId = std::move(id);
  r.arity = arity;
  r.programText = "( define ( " + r.problemId + " var0 ) x )";
  r.tree = std::move(tree);
  r.p_i = 0.5;
  r.t_i = 10;
  return r;
}

// s -> "a" 0.5 | "b" 0.5
Scfg coinGrammar() {
  Scfg g;
  SymId s = g.internNonTerminal("s");
  g.setStartSymbol(s);
  g.addProduction({s, {g.internTerminal("a")}, 0.5});
  g.addProduction({s, {g.internTerminal("b")}, 0.5});
  return g;
}

// expression -> "x" 0.5 | "(" "f" expression ")" 0.5
Scfg unaryGrammar() {
  Scfg g;
  SymId e = g.internNonTerminal("expression");
  g.setStartSymbol(e);
  g.addProduction({e, {g.internTerminal("x")}, 0.5});
  g.addProduction(
      {e, {g.internTerminal("("), g.internTerminal("f"), e, g.internTerminal(")")}, 0.5});
  return g;
}

// x | ( f <tree> ), a random derivation of unaryGrammar.
DerivationTree randomUnaryTree(Scfg& g, std::mt19937& rng, int depth) {
  const SymId e = g.findNonTerminal("expression");
  std::bernoulli_distribution stop(0.4);
  if (depth == 0 || stop(rng)) return nodeOf(e, {leafOf(g.findTerminal("x"))});
  return nodeOf(e, {leafOf(g.findTerminal("(")), leafOf(g.findTerminal("f")),
                    randomUnaryTree(g, rng, depth - 1), leafOf(g.findTerminal(")"))});
}

std::vector<std::string> bodyTexts(const Scfg& g, const Production& p) {
  std::vector<std::string> out;
  for (SymId s : p.body) {
    out.push_back(g.isNonTerminal(s) ? "<:" + g.text(s) + ":>" : g.text(s));
  }
  return out;
}

const Production* findRow(const Scfg& g, SymId head, const std::vector<std::string>& toks) {
  for (std::size_t idx : g.productionIndices(head)) {
    const Production& p = g.productions()[idx];
    if (bodyTexts(g, p) == toks) return &p;
  }
  return nullptr;
}

// Expand the leftmost nonterminal with the first alternative satisfying
// `pred`, failing the test when none does.
template <typename Pred>
SententialForm applyWhere(const Scfg& g, const SententialForm& form, Pred pred) {
  REQUIRE(form.leftmostNt.has_value());
  const SymId head = form.symbols[*form.leftmostNt].sym;
  for (const grammar::Expansion& e : g.productionsFor(head, form.ctx)) {
    if (pred(e)) return derivation::expand_leftmost(form, e, g);
  }
  FAIL("no matching expansion for head '" << g.text(head) << "'");
  return form;
}

// ---------------------------------------------------------------------------
// Brute-force mining oracle: every pattern rooted at an internal node is a
// per-child choice between cutting (a leaf keeping the label) and every
// pattern of that child; occurrences are counted per (node, choice).

std::vector<DerivationTree> oraclePatternsAt(const DerivationTree& v) {
  std::vector<std::vector<DerivationTree>> options;
  for (const DerivationTree& c : v.children) {
    std::vector<DerivationTree> o;
    o.push_back(leafOf(c.label));
    if (c.internal) {
      for (DerivationTree& p : oraclePatternsAt(c)) o.push_back(std::move(p));
    }
    options.push_back(std::move(o));
  }
  std::vector<DerivationTree> out;
  std::vector<std::size_t> pick(options.size(), 0);
  while (true) {
    DerivationTree t;
    t.label = v.label;
    t.internal = true;
    for (std::size_t i = 0; i < options.size(); ++i) t.children.push_back(options[i][pick[i]]);
    out.push_back(std::move(t));
    std::size_t i = 0;
    while (i < options.size()) {
      if (++pick[i] < options[i].size()) break;
      pick[i] = 0;
      ++i;
    }
    if (i == options.size()) break;
  }
  return out;
}

std::map<std::string, std::size_t> oracleCounts(const Scfg& g,
                                                const std::vector<DerivationTree>& trees) {
  std::map<std::string, std::size_t> counts;
  std::vector<const DerivationTree*> stack;
  for (const DerivationTree& t : trees) {
    stack.push_back(&t);
    while (!stack.empty()) {
      const DerivationTree* n = stack.back();
      stack.pop_back();
      for (const DerivationTree& c : n->children) stack.push_back(&c);
      if (!n->internal) continue;
      for (const DerivationTree& p : oraclePatternsAt(*n)) {
        ++counts[derivation::encode_tree(p, g)];
      }
    }
  }
  return counts;
}

// Random forest over nonterminals {X,Y,Z} and terminals {a,b}; children can
// be terminal leaves, nonterminal leaves (pre-cut data), or deeper nodes.
DerivationTree randomOracleTree(std::mt19937& rng, const std::vector<SymId>& nts,
                                const std::vector<SymId>& terms, int depth) {
  std::uniform_int_distribution<std::size_t> ntPick(0, nts.size() - 1);
  std::uniform_int_distribution<std::size_t> tPick(0, terms.size() - 1);
  DerivationTree t;
  t.label = nts[ntPick(rng)];
  t.internal = true;
  std::uniform_int_distribution<int> kidCount(0, 3);
  const int n = kidCount(rng);
  std::uniform_int_distribution<int> kind(0, 5);
  for (int i = 0; i < n; ++i) {
    const int k = kind(rng);
    if (depth == 0 || k <= 2) {
      t.children.push_back(leafOf(terms[tPick(rng)]));
    } else if (k == 3) {
      t.children.push_back(leafOf(nts[ntPick(rng)]));
    } else {
      t.children.push_back(randomOracleTree(rng, nts, terms, depth - 1));
    }
  }
  return t;
}

}  // namespace

// ===========================================================================
// update_probabilities

TEST_CASE("probability smoothing follows the recurrence exactly") {
  HamState ham = make_state(coinGrammar());
  const SymId s = ham.scfg.findNonTerminal("s");
  const SymId a = ham.scfg.findTerminal("a");

  CHECK_THROWS_AS(update_probabilities(ham), MissingDerivation);

  ham.corpus.push_back(treeRecord("p0", nodeOf(s, {leafOf(a)})));
  update_probabilities(ham);
  const Production* rowA = findRow(ham.scfg, s, {"a"});
  const Production* rowB = findRow(ham.scfg, s, {"b"});
  REQUIRE(rowA != nullptr);
  REQUIRE(rowB != nullptr);
  // s_1 = 0.125 * 1.0 + 0.875 * 0.5 (spec example, dyadic, bit-exact)
  CHECK(rowA->probability == 0.5625);
  CHECK(rowA->smoothed == 0.5625);
  CHECK(rowB->probability == 0.4375);
  CHECK(rowB->smoothed == 0.4375);
  CHECK(rowA->probability + rowB->probability == 1.0);
  CHECK(ham.scfg.validate().empty());

  // Second update from the smoothed value: 0.125 + 0.875 * 0.5625.
  ham.corpus.push_back(treeRecord("p1", nodeOf(s, {leafOf(a)})));
  update_probabilities(ham);
  CHECK(rowA->probability == 0.6171875);
  CHECK(rowB->probability == 0.3828125);
}

TEST_CASE("a corpus ratio equal to the current value is a fixed point") {
  HamState ham = make_state(coinGrammar());
  const SymId s = ham.scfg.findNonTerminal("s");
  ham.corpus.push_back(treeRecord("p0", nodeOf(s, {leafOf(ham.scfg.findTerminal("a"))})));
  ham.corpus.push_back(treeRecord("p1", nodeOf(s, {leafOf(ham.scfg.findTerminal("b"))})));
  update_probabilities(ham);
  CHECK(findRow(ham.scfg, s, {"a"})->probability == 0.5);
  CHECK(findRow(ham.scfg, s, {"b"})->probability == 0.5);
}

TEST_CASE("heads absent from the corpus derivations stay untouched") {
  Scfg g = coinGrammar();
  const SymId other = g.internNonTerminal("other");
  g.addProduction({other, {g.internTerminal("c")}, 0.25});
  g.addProduction({other, {g.internTerminal("d")}, 0.75});
  HamState ham = make_state(std::move(g));
  const SymId s = ham.scfg.findNonTerminal("s");
  ham.corpus.push_back(treeRecord("p0", nodeOf(s, {leafOf(ham.scfg.findTerminal("a"))})));
  update_probabilities(ham);
  const Production* c = findRow(ham.scfg, ham.scfg.findNonTerminal("other"), {"c"});
  CHECK(c->probability == 0.25);
  CHECK(c->smoothed == -1.0);  // never smoothed
}

TEST_CASE("the latest record must carry a derivation") {
  HamState ham = make_state(coinGrammar());
  CorpusRecord bare;
  bare.problemId = "p0";
  ham.corpus.push_back(std::move(bare));  // sentinel tree
  CHECK_THROWS_AS(update_probabilities(ham), MissingDerivation);
}

// ===========================================================================
// add_previous_solution

TEST_CASE("previous-solution hook follows the gamma ladder") {
  HamState ham = make_state(shippedGrammar());
  Scfg& g = ham.scfg;
  const SymId ps = g.findNonTerminal("previous-solution");
  const SymId sc = g.findNonTerminal("solution-corpus");
  REQUIRE(g.productionIndices(ps).empty());

  add_previous_solution(ham, treeRecord("s1", {}, 1));
  // Empty hook: the first call owns the whole mass.
  const Production* s1 = findRow(g, ps, {"(", "s1", "<:expression:>", ")"});
  REQUIRE(s1 != nullptr);
  CHECK(s1->probability == 1.0);
  CHECK(s1->origin == Origin::Solution);
  REQUIRE(g.proceduresOf(sc).size() == 1);
  CHECK(g.proceduresOf(sc)[0]->kind == grammar::ProcKind::SolutionDefinition);
  CHECK(g.proceduresOf(sc)[0]->reservedMass == 1.0);
  CHECK(g.validate().empty());

  add_previous_solution(ham, treeRecord("s2", {}, 2));
  // {s1: 1.0} + s2 -> {s2: 0.5, s1: 0.5}, exactly (spec example).
  const Production* s2 = findRow(g, ps, {"(", "s2", "<:expression:>", "<:expression:>", ")"});
  REQUIRE(s2 != nullptr);
  CHECK(s2->probability == 0.5);
  CHECK(s1->probability == 0.5);
  CHECK(g.proceduresOf(sc).size() == 1);  // emitter added once

  add_previous_solution(ham, treeRecord("s3", {}, 1));
  CHECK(findRow(g, ps, {"(", "s3", "<:expression:>", ")"})->probability == 0.5);
  CHECK(s2->probability == 0.25);
  CHECK(s1->probability == 0.25);
  CHECK(g.validate().empty());

  CHECK_THROWS_AS(add_previous_solution(ham, treeRecord("s2", {}, 2)), DuplicateSolutionId);
}

// ===========================================================================
// learn_idioms

TEST_CASE("the pruning example yields the abstract B-A-B idiom") {
  Scfg g;
  const SymId e = g.internNonTerminal("expression");
  const SymId A = g.internNonTerminal("A");
  const SymId B = g.internNonTerminal("B");
  const SymId a = g.internTerminal("a");
  const SymId bb = g.internTerminal("bb");
  const SymId bbb = g.internTerminal("bbb");
  g.setStartSymbol(e);
  g.addProduction({e, {B, A, B}, 1.0});
  g.addProduction({A, {a}, 1.0});
  g.addProduction({B, {bb}, 0.5});
  g.addProduction({B, {bbb}, 0.5});
  HamState ham = make_state(std::move(g));
  Scfg& gg = ham.scfg;

  const DerivationTree tree =
      nodeOf(e, {nodeOf(B, {leafOf(bb)}), nodeOf(A, {leafOf(a)}), nodeOf(B, {leafOf(bbb)})});
  // The pruning-step fixture, byte for byte.
  CHECK(derivation::encode_tree(derivation::prune_one_level(tree), gg) ==
        "[Node <:expression:> [Leaf <:B:>] [Leaf <:A:>] [Leaf <:B:>]]");

  learn_idioms(ham, treeRecord("p", tree));
  const SymId family = gg.findNonTerminal("idiom-0");
  REQUIRE(family != kNoSym);
  const auto rows = gg.productionIndices(family);
  REQUIRE(rows.size() == 1);
  const Production& idiom = gg.productions()[rows[0]];
  CHECK(bodyTexts(gg, idiom) == std::vector<std::string>{"<:B:>", "<:A:>", "<:B:>"});
  CHECK(idiom.probability == 1.0);
  CHECK(idiom.origin == Origin::Idiom);

  // Hook was empty: the family alternative owns the whole mass.
  const SymId ax = gg.findNonTerminal("abstract-expression");
  const Production* alt = findRow(gg, ax, {"<:idiom-0:>"});
  REQUIRE(alt != nullptr);
  CHECK(alt->probability == 1.0);
  CHECK(alt->origin == Origin::Idiom);
  CHECK(gg.validate().empty());

  // The same record again: every form is a known idiom, nothing changes.
  const std::size_t prodCount = gg.productions().size();
  learn_idioms(ham, treeRecord("p2", tree));
  CHECK(gg.productions().size() == prodCount);
  CHECK(gg.findNonTerminal("idiom-1") == kNoSym);
}

TEST_CASE("pruning collects one abstract form per level above the cutoff") {
  Scfg g;
  const SymId e = g.internNonTerminal("expression");
  const SymId A = g.internNonTerminal("A");
  const SymId B = g.internNonTerminal("B");
  const SymId C = g.internNonTerminal("C");
  const SymId D = g.internNonTerminal("D");
  g.setStartSymbol(e);
  g.addProduction({e, {A, B}, 1.0});
  g.addProduction({A, {C, D}, 1.0});
  g.addProduction({B, {g.internTerminal("b")}, 1.0});
  g.addProduction({C, {g.internTerminal("c")}, 1.0});
  g.addProduction({D, {g.internTerminal("d")}, 1.0});
  const DerivationTree tree =
      nodeOf(e, {nodeOf(A, {nodeOf(C, {leafOf(g.findTerminal("c"))}),
                            nodeOf(D, {leafOf(g.findTerminal("d"))})}),
                 nodeOf(B, {leafOf(g.findTerminal("b"))})});

  SUBCASE("default cutoff stops at the first form of three symbols") {
    HamState ham = make_state(g);
    learn_idioms(ham, treeRecord("p", tree));
    const SymId family = ham.scfg.findNonTerminal("idiom-0");
    REQUIRE(family != kNoSym);
    const auto rows = ham.scfg.productionIndices(family);
    REQUIRE(rows.size() == 1);
    CHECK(bodyTexts(ham.scfg, ham.scfg.productions()[rows[0]]) ==
          std::vector<std::string>{"<:C:>", "<:D:>", "b"});
  }

  SUBCASE("a lower cutoff keeps pruning and collects the next level too") {
    MemoryConfig cfg;
    cfg.pruneCutoff = 1;
    HamState ham = make_state(g, cfg);
    learn_idioms(ham, treeRecord("p", tree));
    const SymId family = ham.scfg.findNonTerminal("idiom-0");
    REQUIRE(family != kNoSym);
    const auto rows = ham.scfg.productionIndices(family);
    REQUIRE(rows.size() == 2);
    CHECK(bodyTexts(ham.scfg, ham.scfg.productions()[rows[0]]) ==
          std::vector<std::string>{"<:C:>", "<:D:>", "b"});
    CHECK(bodyTexts(ham.scfg, ham.scfg.productions()[rows[1]]) ==
          std::vector<std::string>{"<:A:>", "<:B:>"});
    CHECK(ham.scfg.productions()[rows[0]].probability == 0.5);
    CHECK(ham.scfg.productions()[rows[1]].probability == 0.5);
  }
}

TEST_CASE("single-leaf expression subtrees teach no idioms") {
  HamState ham = make_state(unaryGrammar());
  const SymId e = ham.scfg.findNonTerminal("expression");
  const std::size_t prodCount = ham.scfg.productions().size();
  learn_idioms(ham, treeRecord("p", nodeOf(e, {leafOf(ham.scfg.findTerminal("x"))})));
  CHECK(ham.scfg.productions().size() == prodCount);
  CHECK(ham.scfg.findNonTerminal("idiom-0") == kNoSym);
}

TEST_CASE("later idiom families halve the mass of earlier ones") {
  HamState ham = make_state(unaryGrammar());
  Scfg& g = ham.scfg;
  std::mt19937 rng(7);
  // Depth-2 and depth-4 nestings produce distinct abstract forms.
  const DerivationTree t1 = randomUnaryTree(g, rng, 0);  // x alone: no idiom
  learn_idioms(ham, treeRecord("q0", t1));
  CHECK(g.findNonTerminal("idiom-0") == kNoSym);

  const SymId e = g.findNonTerminal("expression");
  auto wrap = [&](DerivationTree inner) {
    return nodeOf(e, {leafOf(g.findTerminal("(")), leafOf(g.findTerminal("f")),
                      std::move(inner), leafOf(g.findTerminal(")"))});
  };
  learn_idioms(ham, treeRecord("q1", wrap(nodeOf(e, {leafOf(g.findTerminal("x"))}))));
  const SymId fam0 = g.findNonTerminal("idiom-0");
  REQUIRE(fam0 != kNoSym);

  learn_idioms(ham, treeRecord("q2", wrap(wrap(nodeOf(e, {leafOf(g.findTerminal("x"))})))));
  const SymId fam1 = g.findNonTerminal("idiom-1");
  REQUIRE(fam1 != kNoSym);

  const SymId ax = g.findNonTerminal("abstract-expression");
  const Production* alt0 = findRow(g, ax, {"<:idiom-0:>"});
  const Production* alt1 = findRow(g, ax, {"<:idiom-1:>"});
  REQUIRE(alt0 != nullptr);
  REQUIRE(alt1 != nullptr);
  CHECK(alt0->probability == 0.5);
  CHECK(alt1->probability == 0.5);
  CHECK(g.validate().empty());
}

// ===========================================================================
// mine_frequent_subtrees

TEST_CASE("mining two identical trees reports the three patterns") {
  Scfg g;
  const SymId X = g.internNonTerminal("X");
  const SymId Y = g.internNonTerminal("Y");
  const SymId a = g.internTerminal("a");
  const SymId b = g.internTerminal("b");
  const DerivationTree t = nodeOf(X, {nodeOf(Y, {leafOf(a)}), leafOf(b)});
  const std::vector<DerivationTree> forest{t, t};

  const auto mined = mine_frequent_subtrees(g, forest, 2);
  REQUIRE(mined.size() == 3);
  std::vector<std::string> enc;
  for (const FrequentSubtree& f : mined) {
    CHECK(f.support == 2);
    enc.push_back(derivation::encode_tree(f.tree, g));
  }
  CHECK(enc == std::vector<std::string>{
                   "[Node <:X:> [Leaf <:Y:>] [Leaf b]]",
                   "[Node <:X:> [Node <:Y:> [Leaf a]] [Leaf b]]",
                   "[Node <:Y:> [Leaf a]]",
               });

  CHECK(mine_frequent_subtrees(g, forest, 3).empty());
  CHECK(mine_frequent_subtrees(g, {}, 2).empty());
}

TEST_CASE("occurrences inside one tree count toward support") {
  Scfg g;
  const SymId X = g.internNonTerminal("X");
  const SymId Y = g.internNonTerminal("Y");
  const SymId a = g.internTerminal("a");
  const DerivationTree t =
      nodeOf(X, {nodeOf(Y, {leafOf(a)}), nodeOf(Y, {leafOf(a)})});

  const auto mined = mine_frequent_subtrees(g, {t}, 2);
  REQUIRE(mined.size() == 1);
  CHECK(derivation::encode_tree(mined[0].tree, g) == "[Node <:Y:> [Leaf a]]");
  CHECK(mined[0].support == 2);
}

TEST_CASE("the miner agrees with the brute-force oracle on random forests") {
  Scfg g;
  const std::vector<SymId> nts{g.internNonTerminal("X"), g.internNonTerminal("Y"),
                               g.internNonTerminal("Z")};
  const std::vector<SymId> terms{g.internTerminal("a"), g.internTerminal("b")};

  for (std::uint32_t seed = 0; seed < 30; ++seed) {
    std::mt19937 rng(seed);
    std::uniform_int_distribution<int> forestSize(2, 6);
    std::vector<DerivationTree> forest;
    const int n = forestSize(rng);
    for (int i = 0; i < n; ++i) forest.push_back(randomOracleTree(rng, nts, terms, 3));

    for (std::size_t threshold : {std::size_t{2}, std::size_t{3}}) {
      std::map<std::string, std::size_t> expected;
      for (const auto& [enc, count] : oracleCounts(g, forest)) {
        if (count >= threshold) expected.emplace(enc, count);
      }
      std::map<std::string, std::size_t> got;
      for (const FrequentSubtree& f : mine_frequent_subtrees(g, forest, threshold)) {
        got.emplace(derivation::encode_tree(f.tree, g), f.support);
      }
      CHECK(got == expected);
    }
  }
}

// ===========================================================================
// mine_frequent_subprograms

TEST_CASE("frequent expression subtrees become hook productions by support") {
  HamState ham = make_state(unaryGrammar());
  Scfg& g = ham.scfg;
  const SymId e = g.findNonTerminal("expression");
  const SymId fe = g.findNonTerminal("frequent-expression");
  auto fx = [&](DerivationTree inner) {
    return nodeOf(e, {leafOf(g.findTerminal("(")), leafOf(g.findTerminal("f")),
                      std::move(inner), leafOf(g.findTerminal(")"))});
  };
  const DerivationTree fOfX = fx(nodeOf(e, {leafOf(g.findTerminal("x"))}));
  ham.corpus.push_back(treeRecord("p0", fOfX));
  ham.corpus.push_back(treeRecord("p1", fOfX));

  mine_frequent_subprograms(ham);
  auto rows = g.productionIndices(fe);
  REQUIRE(rows.size() == 3);
  // Sorted by support (all 2) then canonical encoding.
  CHECK(bodyTexts(g, g.productions()[rows[0]]) ==
        std::vector<std::string>{"(", "f", "<:expression:>", ")"});
  CHECK(bodyTexts(g, g.productions()[rows[1]]) == std::vector<std::string>{"(", "f", "x", ")"});
  CHECK(bodyTexts(g, g.productions()[rows[2]]) == std::vector<std::string>{"x"});
  for (std::size_t idx : rows) {
    CHECK(std::abs(g.productions()[idx].probability - 1.0 / 3.0) < 1e-12);
    CHECK(g.productions()[idx].origin == Origin::Mined);
  }
  CHECK(g.validate().empty());

  // A third record shifts the supports; the hook is rewritten, not appended.
  ham.corpus.push_back(treeRecord("p2", nodeOf(e, {leafOf(g.findTerminal("x"))})));
  mine_frequent_subprograms(ham);
  rows = g.productionIndices(fe);
  REQUIRE(rows.size() == 3);
  CHECK(bodyTexts(g, g.productions()[rows[0]]) == std::vector<std::string>{"x"});
  CHECK(std::abs(g.productions()[rows[0]].probability - 3.0 / 7.0) < 1e-12);
  CHECK(std::abs(g.productions()[rows[1]].probability - 2.0 / 7.0) < 1e-12);
  CHECK(g.validate().empty());
}

TEST_CASE("a lone solution with no repeats leaves the hook empty") {
  HamState ham = make_state(unaryGrammar());
  Scfg& g = ham.scfg;
  const SymId e = g.findNonTerminal("expression");
  ham.corpus.push_back(treeRecord(
      "p0", nodeOf(e, {leafOf(g.findTerminal("(")), leafOf(g.findTerminal("f")),
                       nodeOf(e, {leafOf(g.findTerminal("x"))}), leafOf(g.findTerminal(")"))})));
  mine_frequent_subprograms(ham);
  CHECK(g.productionIndices(g.findNonTerminal("frequent-expression")).empty());
}

TEST_CASE("nested expressions are counted once per node, not once per subtree") {
  HamState ham = make_state(unaryGrammar());
  Scfg& g = ham.scfg;
  const SymId e = g.findNonTerminal("expression");
  auto fx = [&](DerivationTree inner) {
    return nodeOf(e, {leafOf(g.findTerminal("(")), leafOf(g.findTerminal("f")),
                      std::move(inner), leafOf(g.findTerminal(")"))});
  };
  // ( f ( f x ) ): the one-level pattern matches at the outer and middle
  // node; a universe that re-listed nested subtrees would see it 3 times.
  ham.corpus.push_back(treeRecord("p0", fx(fx(nodeOf(e, {leafOf(g.findTerminal("x"))})))));
  mine_frequent_subprograms(ham);
  const auto rows = g.productionIndices(g.findNonTerminal("frequent-expression"));
  REQUIRE(rows.size() == 1);
  CHECK(bodyTexts(g, g.productions()[rows[0]]) ==
        std::vector<std::string>{"(", "f", "<:expression:>", ")"});
  CHECK(g.productions()[rows[0]].probability == 1.0);
}

// ===========================================================================
// full_update over the real grammar

TEST_CASE("full update after solving the first inversion problem") {
  HamState ham = make_state(shippedGrammar());
  const problems::TrainingSequence seq = shippedSeq0();
  const problems::ProblemSpec& prob = seq.problems[0];  // inv-id

  const search::SearchResult res = search::levin_search(ham.scfg, prob, {});
  REQUIRE(res.solution.has_value());
  CHECK_THROWS_AS(
      make_record(ham.scfg, prob.id, prob.arity, res.solution->programText, {}, 0.0, 0),
      MissingDerivation);
  CorpusRecord rec =
      make_record(ham.scfg, prob.id, prob.arity, res.solution->programText,
                  res.solution->derivationSteps, res.solution->p_i, res.solution->t_i);
  CHECK(ham.scfg.text(rec.tree.label) == "body");

  const std::size_t before = ham_bytes(ham);
  full_update(ham, rec);
  Scfg& g = ham.scfg;
  CHECK(g.validate().empty());
  CHECK(ham.corpus.size() == 1);
  CHECK(ham_bytes(ham) > before);

  // The call production under previous-solution.
  const Production* call = findRow(g, g.findNonTerminal("previous-solution"),
                                   {"(", "inv-id", "<:expression:>", ")"});
  REQUIRE(call != nullptr);
  CHECK(call->probability == 1.0);
  CHECK(call->origin == Origin::Solution);

  // The definition emitter on solution-corpus.
  const auto procs = g.proceduresOf(g.findNonTerminal("solution-corpus"));
  REQUIRE(procs.size() == 1);
  CHECK(procs[0]->kind == grammar::ProcKind::SolutionDefinition);

  // Smoothing pins.  definitions was applied once, through its epsilon row:
  // s_1 = 0.125 * 1 + 0.875 * 0.5 exactly; the corpus row decays.
  const SymId defs = g.findNonTerminal("definitions");
  const Production* defsEps = findRow(g, defs, {});
  const Production* defsChain = findRow(g, defs, {"<:solution-corpus:>", "<:definitions:>"});
  REQUIRE(defsEps != nullptr);
  REQUIRE(defsChain != nullptr);
  CHECK(defsEps->probability == 0.5625);
  CHECK(defsChain->probability == 0.4375);
  // body -> definitions expression is the only row of its head: stays 1.
  const Production* bodyRow =
      findRow(g, g.findNonTerminal("body"), {"<:definitions:>", "<:expression:>"});
  REQUIRE(bodyRow != nullptr);
  CHECK(bodyRow->probability == 1.0);
  // expression: the variable alternative was the 1 application among 1.
  const SymId expr = g.findNonTerminal("expression");
  const double up = 0.125 * 1.0 + 0.875 * 0.1;
  const double down = 0.875 * 0.1;
  const Production* exprVar = findRow(g, expr, {"<:variable:>"});
  const Production* exprLambda = findRow(g, expr, {"<:lambda-expression:>"});
  REQUIRE(exprVar != nullptr);
  REQUIRE(exprLambda != nullptr);
  CHECK(std::abs(exprVar->probability - up) < 1e-15);
  CHECK(std::abs(exprLambda->probability - down) < 1e-15);
  // procedure-call never appeared in the corpus: untouched, never smoothed.
  const Production* pcRow =
      findRow(g, g.findNonTerminal("procedure-call"), {"<:standard-procedure:>"});
  REQUIRE(pcRow != nullptr);
  CHECK(pcRow->probability == 0.5);
  CHECK(pcRow->smoothed == -1.0);

  // The identity body is a bare variable: nothing to abstract, nothing
  // frequent.
  CHECK(g.findNonTerminal("idiom-0") == kNoSym);
  CHECK(g.productionIndices(g.findNonTerminal("frequent-expression")).empty());

  // solution_refs shape.
  const auto refs = solution_refs(ham);
  REQUIRE(refs.size() == 1);
  CHECK(refs[0].id == "inv-id");
  CHECK(refs[0].arity == 1);
  CHECK(refs[0].callTokens ==
        std::vector<std::string>{"(", "inv-id", "<:expression:>", ")"});
  CHECK(refs[0].definitionTokens ==
        std::vector<std::string>{"(", "define", "(", "inv-id", "var0", ")", "var0", ")"});

  // Feeding the same record again must change nothing.
  const std::string frozen = grammar::grammar_text(g);
  CHECK_THROWS_AS(full_update(ham, rec), DuplicateSolutionId);
  CHECK(ham.corpus.size() == 1);
  CHECK(grammar::grammar_text(g) == frozen);

  // Serialization round trip.
  const std::string bytes = serialize(ham);
  CHECK(serialize(ham) == bytes);  // deterministic
  CHECK(ham_bytes(ham) == bytes.size());
  const HamState back = deserialize(bytes);
  CHECK(serialize(back) == bytes);
  CHECK(grammar::grammar_text(back.scfg) == frozen);
  REQUIRE(back.corpus.size() == 1);
  CHECK(back.corpus[0].problemId == "inv-id");
  CHECK(back.corpus[0].arity == 1);
  CHECK(back.corpus[0].programText == res.solution->programText);
  CHECK(back.corpus[0].p_i == res.solution->p_i);
  CHECK(back.corpus[0].t_i == res.solution->t_i);
  CHECK(derivation::encode_tree(back.corpus[0].tree, back.scfg) ==
        derivation::encode_tree(ham.corpus[0].tree, ham.scfg));
}

TEST_CASE("an updated grammar can define and call the stored solution") {
  HamState ham = make_state(shippedGrammar());
  const problems::TrainingSequence seq = shippedSeq0();
  const search::SearchResult res = search::levin_search(ham.scfg, seq.problems[0], {});
  REQUIRE(res.solution.has_value());
  full_update(ham, make_record(ham.scfg, seq.problems[0].id, seq.problems[0].arity,
                               res.solution->programText, res.solution->derivationSteps,
                               res.solution->p_i, res.solution->t_i));
  Scfg& g = ham.scfg;

  // Derive a solution for the next problem that re-uses inv-id.
  SententialForm form = search::problem_start_form(g, seq.problems[1], solution_refs(ham));
  form = applyWhere(g, form, [](const auto&) { return true; });  // body
  form = applyWhere(g, form, [](const auto& e) { return e.body.size() == 2; });  // defs chain

  // The definition emission: full mass, registers the name.
  {
    const SymId head = form.symbols[*form.leftmostNt].sym;
    CHECK(g.text(head) == "solution-corpus");
    const auto emissions = g.productionsFor(head, form.ctx);
    REQUIRE(emissions.size() == 1);
    CHECK(emissions[0].probability == 1.0);
    CHECK(emissions[0].registersSolution == "inv-id");
    std::vector<std::string> emitted;
    for (SymId s : emissions[0].body) emitted.push_back(g.text(s));
    CHECK(emitted == std::vector<std::string>{"(", "define", "(", "inv-id", "var0", ")",
                                              "var0", ")"});
    form = derivation::expand_leftmost(form, emissions[0], g);
  }

  // Once defined, a further emission for inv-id carries zero probability.
  {
    const SymId head = form.symbols[*form.leftmostNt].sym;
    CHECK(g.text(head) == "definitions");
    const auto again = g.productionsFor(g.findNonTerminal("solution-corpus"), form.ctx);
    REQUIRE(again.size() == 1);
    CHECK(again[0].probability == 0.0);
    CHECK(again[0].body.empty());
  }

  form = applyWhere(g, form, [](const auto& e) { return e.body.empty(); });  // defs end
  form = applyWhere(g, form, [&](const auto& e) {  // expression -> procedure-call
    return e.body.size() == 1 && g.text(e.body[0]) == "procedure-call";
  });
  // Both procedure-call alternatives are live now; no redistribution.
  {
    const SymId head = form.symbols[*form.leftmostNt].sym;
    CHECK(g.text(head) == "procedure-call");
    for (const grammar::Expansion& e : g.productionsFor(head, form.ctx)) {
      CHECK(e.probability == 0.5);
    }
  }
  form = applyWhere(g, form, [&](const auto& e) {
    return e.body.size() == 1 && g.text(e.body[0]) == "previous-solution";
  });
  form = applyWhere(g, form, [&](const auto& e) {  // the stored call
    return e.probability == 1.0;
  });
  form = applyWhere(g, form, [&](const auto& e) {  // expression -> variable
    return e.body.size() == 1 && g.text(e.body[0]) == "variable";
  });
  form = applyWhere(g, form, [&](const auto& e) {  // the problem parameter
    return e.body.size() == 1 && g.text(e.body[0]) == "var0";
  });
  REQUIRE(form.complete());
  CHECK(derivation::sentence_text(form, g) ==
        "( define ( inv-reciprocal var0 ) "
        "( define ( inv-id var0 ) var0 ) ( inv-id var0 ) )");
  CHECK(form.logProb < 0.0);
}

// ===========================================================================
// Randomized state evolution

TEST_CASE("randomized full updates keep the grammar valid and memory growing") {
  HamState ham = make_state(unaryGrammar());
  std::mt19937 rng(99);
  std::string lastBytes;
  for (int i = 0; i < 24; ++i) {
    const DerivationTree tree = randomUnaryTree(ham.scfg, rng, 5);
    const std::size_t before = ham_bytes(ham);
    full_update(ham, treeRecord("p" + std::to_string(i), tree));
    CHECK(ham.scfg.validate().empty());
    CHECK(ham_bytes(ham) > before);
    for (const Production& p : ham.scfg.productions()) {
      CHECK(p.probability >= 0.0);
      CHECK(p.probability <= 1.0 + 1e-12);
      if (p.smoothed >= 0.0) CHECK(p.smoothed <= 1.0 + 1e-12);
    }
    // Reload mid-stream and keep updating the reloaded state.
    if (i % 7 == 3) {
      const std::string bytes = serialize(ham);
      ham = deserialize(bytes);
      CHECK(serialize(ham) == bytes);
    }
  }
  CHECK(ham.corpus.size() == 24);
  const auto refs = solution_refs(ham);
  CHECK(refs.front().id == "p0");
  CHECK(refs.back().id == "p23");
}

// ===========================================================================
// Serialization details

TEST_CASE("serialization round-trips a fresh state and a custom config") {
  MemoryConfig cfg;
  cfg.alpha = 0.25;
  cfg.gamma = 0.75;
  cfg.idiomMass = 0.125;
  cfg.supportThreshold = 3;
  cfg.pruneCutoff = 5;
  HamState ham = make_state(shippedGrammar(), cfg);
  const std::string bytes = serialize(ham);
  const HamState back = deserialize(bytes);
  CHECK(back.config.alpha == 0.25);
  CHECK(back.config.gamma == 0.75);
  CHECK(back.config.idiomMass == 0.125);
  CHECK(back.config.supportThreshold == 3);
  CHECK(back.config.pruneCutoff == 5);
  CHECK(back.corpus.empty());
  CHECK(serialize(back) == bytes);
  CHECK(ham_bytes(ham) == bytes.size());
}

TEST_CASE("corrupt encodings are rejected") {
  HamState ham = make_state(unaryGrammar());
  const SymId e = ham.scfg.findNonTerminal("expression");
  full_update(ham, treeRecord("p0", nodeOf(e, {leafOf(ham.scfg.findTerminal("x"))})));
  const std::string bytes = serialize(ham);

  CHECK_THROWS_AS(deserialize(""), CorruptEncoding);
  CHECK_THROWS_AS(deserialize("%ham 2\n"), CorruptEncoding);
  CHECK_THROWS_AS(deserialize(bytes.substr(0, bytes.size() / 2)), CorruptEncoding);
  CHECK_THROWS_AS(deserialize(bytes + "junk\n"), CorruptEncoding);
  CHECK_THROWS_AS(deserialize(bytes.substr(0, bytes.size() - 1)), CorruptEncoding);

  std::string badConfig = bytes;
  badConfig.replace(badConfig.find("alpha"), 5, "alpah");
  CHECK_THROWS_AS(deserialize(badConfig), CorruptEncoding);

  std::string badGrammar = bytes;
  const auto at = badGrammar.find("%start");
  badGrammar.replace(at, 6, "%strat");
  CHECK_THROWS_AS(deserialize(badGrammar), CorruptEncoding);

  std::string badTree = bytes;
  const auto treeAt = badTree.find("%tree [Node");
  badTree.replace(treeAt, 11, "%tree [Node]");
  CHECK_THROWS_AS(deserialize(badTree), CorruptEncoding);
}

// ===========================================================================
// Grammar surgery used by the mining rewrite

TEST_CASE("removing a head's productions keeps other heads' rows intact") {
  Scfg g = coinGrammar();
  const SymId s = g.findNonTerminal("s");
  const SymId other = g.internNonTerminal("other");
  g.addProduction({other, {g.internTerminal("c")}, 1.0});
  g.addProduction({s, {g.internTerminal("e")}, 0.0});

  g.removeHeadProductions(s);
  CHECK(g.productionIndices(s).empty());
  const auto rows = g.productionIndices(other);
  REQUIRE(rows.size() == 1);
  CHECK(bodyTexts(g, g.productions()[rows[0]]) == std::vector<std::string>{"c"});
  CHECK(g.productions().size() == 1);
  g.removeHeadProductions(other);
  CHECK(g.productions().empty());
  g.removeHeadProductions(other);  // removing twice is a no-op
  CHECK(g.productions().empty());
}
