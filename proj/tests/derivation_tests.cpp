// Derivation-module tests: leftmost expansion with probability accounting,
// scope-aware contexts, tree construction, bottom-up pruning, and the
// canonical bracket text.

#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "ham/derivation.hpp"
#include "ham/grammar.hpp"
#include "ham/scheme.hpp"

using namespace ham;
using namespace ham::derivation;
using grammar::Expansion;
using grammar::GenerationContext;
using grammar::Scfg;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(bool(in), "missing file: ", path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Scfg shippedGrammar() {
  return grammar::load_grammar(slurp(std::string(HAM_DATA_DIR) + "/scheme.scfg"));
}

// Pick the expansion whose head matches the form's leftmost nonterminal at
// the given index (modulo the alternative count).
SententialForm expandAt(const SententialForm& form, const Scfg& g, std::size_t i) {
  auto exps = g.productionsFor(form.symbols[*form.leftmostNt].sym, form.ctx);
  REQUIRE_FALSE(exps.empty());
  return expand_leftmost(form, exps[i % exps.size()], g);
}

std::vector<std::string> tokens(const SententialForm& f, const Scfg& g) {
  std::vector<std::string> out;
  for (const Occurrence& o : f.symbols) out.push_back(g.text(o.sym));
  return out;
}

}  // namespace

TEST_CASE("expand_leftmost: splicing, probability, and errors") {
  Scfg g = grammar::load_grammar(
      "S -> A B @0.5\n"
      "S -> \"a\" @0.5\n"
      "A -> \"a\" @0.25\n"
      "A -> \"aa\" @0.75\n"
      "B -> \"b\" @1.0\n");
  GenerationContext ctx;
  SymId s = g.findNonTerminal("S");
  SymId a = g.findNonTerminal("A");

  // [S], apply S -> "a" @0.5: complete sentence, logProb = -1.
  SententialForm start = start_form(g);
  REQUIRE(start.leftmostNt == 0);
  CHECK(start.logProb == 0.0);  // zero steps = empty product = probability 1
  auto sExps = g.productionsFor(s, ctx);
  SententialForm done = expand_leftmost(start, sExps[1], g);
  CHECK(done.complete());
  CHECK(done.logProb == -1.0);
  CHECK(sentence_text(done, g) == "a");
  CHECK(tokens(done, g) == std::vector<std::string>{"a"});

  // S -> A B @0.5 then A -> "a" @0.25: ["a", B], logProb = -3 exactly.
  SententialForm ab = expand_leftmost(start, sExps[0], g);
  REQUIRE(ab.leftmostNt == 0);
  CHECK(ab.symbols.size() == 2);
  SententialForm aB = expand_leftmost(ab, g.productionsFor(a, ctx)[0], g);
  CHECK(aB.logProb == -3.0);
  REQUIRE(aB.leftmostNt == 1);
  CHECK(g.text(aB.symbols[0].sym) == "a");
  CHECK(g.text(aB.symbols[1].sym) == "B");
  CHECK_THROWS_AS(sentence_text(aB, g), IncompleteDerivation);

  // Head mismatch: applying an A-expansion when leftmost is S.
  CHECK_THROWS_AS(expand_leftmost(start, g.productionsFor(a, ctx)[0], g),
                  HeadMismatch);
  // Expanding a complete sentence.
  CHECK_THROWS_AS(expand_leftmost(done, sExps[0], g), HeadMismatch);
  // Zero probability is rejected.
  Expansion zero = sExps[0];
  zero.probability = 0.0;
  CHECK_THROWS_AS(expand_leftmost(start, zero, g), ZeroProbability);

  // The step trace records identity and applied probability.
  REQUIRE(aB.steps.size() == 2);
  CHECK(aB.steps[0].staticIndex == 0);
  CHECK(aB.steps[1].probability == 0.25);
}

TEST_CASE("scopes: binders, fresh scopes, and solution registration") {
  // half/rest mimic the shipped shape: `wrap` opens a scope, `bind`
  // registers a name visible to the trailing `use`.
  Scfg g = grammar::load_grammar(
      "top -> wrap use @1.0\n"
      "wrap -> \"{\" bind use \"}\" !scope @1.0\n"
      "bind -> \"x\" !bind @0.5\n"
      "bind -> \"y\" !bind @0.5\n"
      "%proc use variable-name @1.0\n");
  for (const char* t : {"x", "y"}) g.internTerminal(t);

  SententialForm f =
      make_start_form(g, {g.findNonTerminal("top")}, {"var0"}, {});
  CHECK(f.ctx.boundVariables == std::vector<std::string>{"var0"});

  f = expandAt(f, g, 0);  // top -> wrap use
  f = expandAt(f, g, 0);  // wrap -> { bind use } opening a fresh scope
  f = expandAt(f, g, 0);  // bind -> x, registered in the wrap scope
  // Leftmost is now the inner `use`: var0 (outer) first, then x.
  CHECK(f.ctx.boundVariables == std::vector<std::string>{"var0", "x"});
  auto inner = g.productionsFor(g.findNonTerminal("use"), f.ctx);
  REQUIRE(inner.size() == 2);
  CHECK(inner[0].probability == doctest::Approx(0.8));  // var0: outer position
  f = expand_leftmost(f, inner[1], g);  // use -> x

  // Past the closing brace the wrap scope is gone: only var0 again.
  REQUIRE_FALSE(f.complete());
  CHECK(g.text(f.symbols[*f.leftmostNt].sym) == "use");
  CHECK(f.ctx.boundVariables == std::vector<std::string>{"var0"});
  f = expandAt(f, g, 0);  // use -> var0
  CHECK(f.complete());
  CHECK(sentence_text(f, g) == "{ x x } var0");

  // Solution definitions register both a name and a defined-solution id.
  Scfg gs = grammar::load_grammar(
      "prog -> solution-corpus solution-corpus use @1.0\n"
      "%proc use variable-name @1.0\n"
      "%proc solution-corpus solution-definition @1.0\n");
  for (const char* t : {"(", ")", "define", "sqr", "var0", "*"}) gs.internTerminal(t);
  std::vector<grammar::SolutionRef> sols{
      {"sqr",
       {"(", "sqr", "<:use:>", ")"},
       1,
       {"(", "define", "(", "sqr", "var0", ")", "(", "*", "var0", "var0", ")", ")"}}};
  SententialForm sf =
      make_start_form(gs, {gs.findNonTerminal("prog")}, {"var0"}, sols);
  sf = expandAt(sf, gs, 0);  // prog -> corpus corpus use
  auto defs = gs.productionsFor(gs.findNonTerminal("solution-corpus"), sf.ctx);
  REQUIRE(defs.size() == 1);
  CHECK(defs[0].registersSolution == "sqr");
  sf = expand_leftmost(sf, defs[0], gs);
  // The definition is spliced as terminals; leftmost is the second corpus
  // occurrence, which now sees sqr as defined: zero-probability emission.
  CHECK(sf.ctx.definedSolutions == std::vector<std::string>{"sqr"});
  CHECK(sf.ctx.boundVariables == std::vector<std::string>{"var0", "sqr"});
  auto again = gs.productionsFor(gs.findNonTerminal("solution-corpus"), sf.ctx);
  REQUIRE(again.size() == 1);
  CHECK(again[0].probability == 0.0);
  CHECK_THROWS_AS(expand_leftmost(sf, again[0], gs), ZeroProbability);
}

TEST_CASE("build_tree reconstructs the leftmost derivation") {
  Scfg g = grammar::load_grammar(
      "S -> A B @1.0\n"
      "A -> \"a\" @1.0\n"
      "B -> \"b\" @1.0\n");
  GenerationContext ctx;
  SententialForm f = start_form(g);
  f = expand_leftmost(f, g.productionsFor(g.findNonTerminal("S"), ctx)[0], g);
  f = expand_leftmost(f, g.productionsFor(g.findNonTerminal("A"), ctx)[0], g);
  f = expand_leftmost(f, g.productionsFor(g.findNonTerminal("B"), ctx)[0], g);
  REQUIRE(f.complete());

  DerivationTree t = build_tree(f.steps, g);
  CHECK(encode_tree(t, g) ==
        "[Node <:S:> [Node <:A:> [Leaf a]] [Node <:B:> [Leaf b]]]");
  // frontier(build_tree(steps)) equals the derived sentence.
  CHECK(tokens(frontier(t, g), g) == tokens(f, g));
  CHECK(tree_height(t) == 2);
  CHECK(frontier_size(t) == 2);

  // Missing B's expansion: incomplete.
  std::vector<Step> missing(f.steps.begin(), f.steps.end() - 1);
  CHECK_THROWS_AS(build_tree(missing, g), IncompleteDerivation);
  // Wrong head order: B expanded before A is not a leftmost trace.
  std::vector<Step> swapped{f.steps[0], f.steps[2], f.steps[1]};
  CHECK_THROWS_AS(build_tree(swapped, g), IncompleteDerivation);
  // Extra step after completion.
  std::vector<Step> extra = f.steps;
  extra.push_back(f.steps[2]);
  CHECK_THROWS_AS(build_tree(extra, g), IncompleteDerivation);
  CHECK_THROWS_AS(build_tree({}, g), IncompleteDerivation);
}

TEST_CASE("pruning: the documented example and the depth chain") {
  // S(B("bb"), A("a"), B("bbb")) pruned one level: every depth-1 subtree is
  // a deepest internal node, so all three become nonterminal leaves.
  Scfg g = grammar::load_grammar(
      "S -> B A B @1.0\n"
      "A -> \"a\" @1.0\n"
      "B -> \"bb\" @0.5\n"
      "B -> \"bbb\" @0.5\n");
  GenerationContext ctx;
  SententialForm f = start_form(g);
  auto bExps = g.productionsFor(g.findNonTerminal("B"), ctx);
  f = expand_leftmost(f, g.productionsFor(g.findNonTerminal("S"), ctx)[0], g);
  f = expand_leftmost(f, bExps[0], g);
  f = expand_leftmost(f, g.productionsFor(g.findNonTerminal("A"), ctx)[0], g);
  f = expand_leftmost(f, bExps[1], g);

  DerivationTree t = build_tree(f.steps, g);
  CHECK(encode_tree(t, g) ==
        "[Node <:S:> [Node <:B:> [Leaf bb]] [Node <:A:> [Leaf a]] "
        "[Node <:B:> [Leaf bbb]]]");

  DerivationTree pruned = prune_one_level(t);
  CHECK(encode_tree(pruned, g) ==
        "[Node <:S:> [Leaf <:B:>] [Leaf <:A:>] [Leaf <:B:>]]");
  auto fr = frontier(pruned, g);
  CHECK(tokens(fr, g) == std::vector<std::string>{"B", "A", "B"});
  CHECK(fr.leftmostNt == 0);  // nonterminal leaves stay nonterminals

  // Height drops by exactly one per prune; a depth-d chain takes d prunes.
  Scfg chain = grammar::load_grammar(
      "X -> Y @1.0\n"
      "Y -> Z @1.0\n"
      "Z -> \"z\" @1.0\n");
  SententialForm cf = start_form(chain);
  cf = expand_leftmost(cf, chain.productionsFor(chain.findNonTerminal("X"), ctx)[0], chain);
  cf = expand_leftmost(cf, chain.productionsFor(chain.findNonTerminal("Y"), ctx)[0], chain);
  cf = expand_leftmost(cf, chain.productionsFor(chain.findNonTerminal("Z"), ctx)[0], chain);
  DerivationTree ct = build_tree(cf.steps, chain);
  int h = tree_height(ct);
  CHECK(h == 3);
  DerivationTree cur = ct;
  for (int i = 0; i < h; ++i) {
    cur = prune_one_level(cur);
    CHECK(tree_height(cur) == h - i - 1);
  }
  CHECK_FALSE(cur.internal);
  CHECK(chain.text(cur.label) == "X");
  CHECK(encode_tree(cur, chain) == "[Leaf <:X:>]");
  CHECK_THROWS_AS(prune_one_level(cur), AlreadyLeaf);
  CHECK(tokens(frontier(cur, chain), chain) == std::vector<std::string>{"X"});

  // Degenerate internal node: S("a") prunes to leaf S.
  Scfg tiny = grammar::load_grammar("S -> \"a\" @1.0\n");
  SententialForm tf = start_form(tiny);
  tf = expand_leftmost(tf, tiny.productionsFor(tiny.findNonTerminal("S"), ctx)[0], tiny);
  DerivationTree tt = build_tree(tf.steps, tiny);
  CHECK(encode_tree(prune_one_level(tt), tiny) == "[Leaf <:S:>]");
}

TEST_CASE("bracket text parses back, tolerantly") {
  Scfg g = grammar::load_grammar("S -> \"a\" @1.0\n");
  // Canonical spacing and the compressed variant give the same tree.
  const char* canonical =
      "[Node <:S:> [Node <:B:> [Leaf bb]] [Node <:A:> [Leaf a]] "
      "[Node <:B:> [Leaf bbb]]]";
  DerivationTree t1 = parse_tree(canonical, g);
  DerivationTree t2 = parse_tree(
      "[Node <:S:> [Node <:B:> [Leaf bb]] [Node <:A:> [Leaf a]] "
      "[Node<:B:>[Leaf bbb]]]",
      g);
  CHECK(encode_tree(t1, g) == canonical);
  CHECK(encode_tree(t2, g) == canonical);

  // Epsilon-expanded nodes and nonterminal leaves round-trip.
  DerivationTree t3 = parse_tree("[Node <:S:> [Leaf <:B:>] [Node <:E:>]]", g);
  CHECK(encode_tree(t3, g) == "[Node <:S:> [Leaf <:B:>] [Node <:E:>]]");
  CHECK(frontier_size(t3) == 1);

  CHECK_THROWS_AS(parse_tree("[Node S [Leaf a]]", g), ParseError);  // bare label
  CHECK_THROWS_AS(parse_tree("[Node <:S:> [Leaf a]", g), ParseError);
  CHECK_THROWS_AS(parse_tree("[Wat <:S:>]", g), ParseError);
  CHECK_THROWS_AS(parse_tree("[Node <:S:>] junk", g), ParseError);
}

TEST_CASE("shipped grammar: a full derivation is consistent and runnable") {
  Scfg g = shippedGrammar();
  // Problem-style start: ( define ( f var0 ) <body> ) with var0 pre-bound.
  std::vector<SymId> startSyms{
      g.internTerminal("("), g.internTerminal("define"), g.internTerminal("("),
      g.internTerminal("f"), g.findTerminal("var0"), g.internTerminal(")"),
      g.findNonTerminal("body"), g.internTerminal(")")};
  SententialForm f = make_start_form(g, startSyms, {"var0"}, {});
  REQUIRE(f.leftmostNt == 6);
  CHECK(f.ctx.boundVariables == std::vector<std::string>{"var0"});

  // Deterministic pseudo-walk: a few forced deep choices, then the first
  // alternative each time (which drains to terminals).
  std::size_t stepNo = 0;
  while (!f.complete()) {
    REQUIRE(f.steps.size() < 200);
    std::size_t pick = stepNo < 3 ? 3 : 0;
    f = expandAt(f, g, pick);
    ++stepNo;
  }

  // 2^logProb equals the product of applied probabilities, recomputed
  // independently, within 1e-9 relative.
  long double prod = 1.0L;
  for (const Step& s : f.steps) prod *= static_cast<long double>(s.probability);
  long double fromLog = std::exp2(static_cast<long double>(f.logProb));
  CHECK(std::abs(static_cast<double>(fromLog / prod) - 1.0) < 1e-9);

  // The tree covers the body subderivation (steps begin at <body>); its
  // frontier is the sentence between the template tokens.
  DerivationTree t = build_tree(f.steps, g);
  std::vector<std::string> all = tokens(f, g);
  std::vector<std::string> bodyTokens(all.begin() + 6, all.end() - 1);
  CHECK(tokens(frontier(t, g), g) == bodyTokens);
  std::string program = sentence_text(f, g);
  scheme::Interpreter interp;
  auto outcome = interp.evaluate(scheme::parse(program + " ( f 5 )"),
                                 scheme::ExecBudget{100000, 1000});
  CHECK(outcome.status != scheme::ExecStatus::TimeLimit);

  // Pruning the solution tree walks down to a single leaf in height steps.
  DerivationTree cur = t;
  int h = tree_height(cur);
  for (int i = 0; i < h; ++i) cur = prune_one_level(cur);
  CHECK_FALSE(cur.internal);
  CHECK(g.text(cur.label) == "body");

  // Canonical text of the full tree round-trips through the parser.
  std::string text = encode_tree(t, g);
  Scfg g2 = shippedGrammar();
  DerivationTree back = parse_tree(text, g2);
  CHECK(encode_tree(back, g2) == text);
}
