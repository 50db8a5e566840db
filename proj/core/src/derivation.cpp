#include "ham/derivation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace ham::derivation {

namespace {

void rebuildCtx(SententialForm& form) {
  if (form.complete()) {
    form.ctx.boundVariables.clear();
    form.ctx.definedSolutions.clear();
    return;
  }
  GenerationContext fresh = context_for(
      form.scopes, form.symbols[*form.leftmostNt].scope, form.ctx.availableSolutions);
  form.ctx = std::move(fresh);
}

void recomputeLeftmost(SententialForm& form, const Scfg& g, std::size_t from) {
  form.leftmostNt.reset();
  for (std::size_t i = from; i < form.symbols.size(); ++i) {
    if (g.isNonTerminal(form.symbols[i].sym)) {
      form.leftmostNt = i;
      break;
    }
  }
}

constexpr int kMaxTreeDepth = 5000;

}  // namespace

GenerationContext context_for(const std::vector<Scope>& scopes, ScopeId scope,
                              const std::vector<SolutionRef>& availableSolutions) {
  GenerationContext ctx;
  ctx.availableSolutions = availableSolutions;
  std::vector<ScopeId> chain;
  for (ScopeId at = scope; at >= 0; at = scopes[static_cast<std::size_t>(at)].parent) {
    chain.push_back(at);
  }
  std::reverse(chain.begin(), chain.end());
  for (ScopeId id : chain) {
    const Scope& s = scopes[static_cast<std::size_t>(id)];
    for (const std::string& n : s.names) {
      if (std::find(ctx.boundVariables.begin(), ctx.boundVariables.end(), n) ==
          ctx.boundVariables.end()) {
        ctx.boundVariables.push_back(n);
      }
    }
    for (const std::string& sol : s.solutions) ctx.definedSolutions.push_back(sol);
  }
  std::sort(ctx.definedSolutions.begin(), ctx.definedSolutions.end());
  ctx.definedSolutions.erase(
      std::unique(ctx.definedSolutions.begin(), ctx.definedSolutions.end()),
      ctx.definedSolutions.end());
  return ctx;
}

SententialForm start_form(const Scfg& g) {
  return make_start_form(g, {g.startSymbol()}, {}, {});
}

SententialForm make_start_form(const Scfg& g, std::vector<SymId> symbols,
                               std::vector<std::string> preboundNames,
                               std::vector<SolutionRef> availableSolutions) {
  SententialForm form;
  form.scopes[0].names = std::move(preboundNames);
  form.symbols.reserve(symbols.size());
  for (SymId s : symbols) form.symbols.push_back(Occurrence{s, kRootScope});
  form.ctx.availableSolutions = std::move(availableSolutions);
  recomputeLeftmost(form, g, 0);
  rebuildCtx(form);
  return form;
}

SententialForm expand_leftmost(const SententialForm& form, const Expansion& exp,
                               const Scfg& g) {
  if (form.complete()) {
    throw HeadMismatch("cannot expand a complete sentence");
  }
  const Occurrence at = form.symbols[*form.leftmostNt];
  if (exp.head != at.sym) {
    throw HeadMismatch("expansion head '" + g.text(exp.head) +
                       "' does not match leftmost nonterminal '" +
                       g.text(at.sym) + "'");
  }
  if (!(exp.probability > 0.0)) {
    throw ZeroProbability("expansion of '" + g.text(exp.head) +
                          "' has probability " +
                          grammar::format_probability(exp.probability));
  }

  SententialForm out = form;
  if (!exp.registersVariable.empty()) {
    out.scopes[static_cast<std::size_t>(at.scope)].names.push_back(exp.registersVariable);
  }
  if (!exp.registersSolution.empty()) {
    out.scopes[static_cast<std::size_t>(at.scope)].solutions.push_back(exp.registersSolution);
  }
  ScopeId childScope = at.scope;
  if (exp.newScope) {
    childScope = static_cast<ScopeId>(out.scopes.size());
    out.scopes.push_back(Scope{at.scope, {}, {}});
  }

  const std::size_t pos = *form.leftmostNt;
  std::vector<Occurrence> spliced;
  spliced.reserve(form.symbols.size() - 1 + exp.body.size());
  spliced.insert(spliced.end(), form.symbols.begin(),
                 form.symbols.begin() + static_cast<std::ptrdiff_t>(pos));
  for (SymId s : exp.body) spliced.push_back(Occurrence{s, childScope});
  spliced.insert(spliced.end(),
                 form.symbols.begin() + static_cast<std::ptrdiff_t>(pos) + 1,
                 form.symbols.end());
  out.symbols = std::move(spliced);

  out.logProb += std::log2(exp.probability);
  Step step;
  step.head = exp.head;
  step.body = exp.body;
  step.probability = exp.probability;
  step.staticIndex = exp.staticIndex;
  step.newScope = exp.newScope;
  step.registersVariable = exp.registersVariable;
  step.registersSolution = exp.registersSolution;
  out.steps.push_back(std::move(step));

  recomputeLeftmost(out, g, pos);
  rebuildCtx(out);
  return out;
}

std::vector<std::string> sentence_tokens(const SententialForm& form, const Scfg& g) {
  if (!form.complete()) {
    throw IncompleteDerivation("sentential form still has nonterminals");
  }
  std::vector<std::string> out;
  out.reserve(form.symbols.size());
  for (const Occurrence& o : form.symbols) out.push_back(g.text(o.sym));
  return out;
}

std::string sentence_text(const SententialForm& form, const Scfg& g) {
  if (!form.complete()) {
    throw IncompleteDerivation("sentential form still has nonterminals");
  }
  std::string out;
  for (const Occurrence& o : form.symbols) {
    if (!out.empty()) out.push_back(' ');
    out += g.text(o.sym);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trees

DerivationTree build_tree(const std::vector<Step>& steps, const Scfg& g) {
  if (steps.empty()) throw IncompleteDerivation("empty derivation");

  // Arena of nodes; pending holds unexpanded nonterminal nodes with the
  // leftmost on top (children are pushed right-to-left).
  struct BuildNode {
    SymId label;
    bool internal = false;
    std::vector<std::size_t> kids;
  };
  std::vector<BuildNode> arena;
  arena.push_back(BuildNode{steps[0].head});
  std::vector<std::size_t> pending{0};

  for (const Step& step : steps) {
    if (pending.empty()) {
      throw IncompleteDerivation("derivation has steps after the sentence completed");
    }
    std::size_t id = pending.back();
    pending.pop_back();
    if (arena[id].label != step.head) {
      throw IncompleteDerivation("step expands '" + g.text(step.head) +
                                 "' but the leftmost nonterminal is '" +
                                 g.text(arena[id].label) + "'");
    }
    arena[id].internal = true;
    std::vector<std::size_t> ntKids;
    for (SymId s : step.body) {
      std::size_t kid = arena.size();
      arena.push_back(BuildNode{s});
      arena[id].kids.push_back(kid);
      if (g.isNonTerminal(s)) ntKids.push_back(kid);
    }
    for (auto it = ntKids.rbegin(); it != ntKids.rend(); ++it) pending.push_back(*it);
  }
  if (!pending.empty()) {
    throw IncompleteDerivation("derivation ends with '" +
                               g.text(arena[pending.back()].label) +
                               "' unexpanded");
  }

  // Materialize children-last so every child exists before its parent copies
  // it (arena ids are in creation order: parents precede children).
  std::vector<DerivationTree> made(arena.size());
  for (std::size_t i = arena.size(); i-- > 0;) {
    DerivationTree t;
    t.label = arena[i].label;
    t.internal = arena[i].internal;
    t.children.reserve(arena[i].kids.size());
    for (std::size_t kid : arena[i].kids) t.children.push_back(std::move(made[kid]));
    made[i] = std::move(t);
  }
  return std::move(made[0]);
}

int tree_height(const DerivationTree& tree) {
  // Iterative: (node, depth) stack, tracking the maximum depth reached.
  int maxDepth = 0;
  std::vector<std::pair<const DerivationTree*, int>> work{{&tree, 0}};
  while (!work.empty()) {
    auto [node, depth] = work.back();
    work.pop_back();
    maxDepth = std::max(maxDepth, depth);
    for (const DerivationTree& c : node->children) work.push_back({&c, depth + 1});
  }
  return maxDepth;
}

std::size_t frontier_size(const DerivationTree& tree) {
  std::size_t n = 0;
  std::vector<const DerivationTree*> work{&tree};
  while (!work.empty()) {
    const DerivationTree* node = work.back();
    work.pop_back();
    if (!node->internal) {
      ++n;
      continue;
    }
    for (const DerivationTree& c : node->children) work.push_back(&c);
  }
  return n;
}

DerivationTree prune_one_level(const DerivationTree& tree) {
  if (!tree.internal) throw AlreadyLeaf("tree is a single leaf");

  DerivationTree out = tree;
  // Deepest level that still carries internal nodes.
  int deepest = 0;
  {
    std::vector<std::pair<const DerivationTree*, int>> work{{&out, 0}};
    while (!work.empty()) {
      auto [node, depth] = work.back();
      work.pop_back();
      if (node->internal) deepest = std::max(deepest, depth);
      for (const DerivationTree& c : node->children) work.push_back({&c, depth + 1});
    }
  }
  // Those nodes become nonterminal leaves.
  std::vector<std::pair<DerivationTree*, int>> work{{&out, 0}};
  while (!work.empty()) {
    auto [node, depth] = work.back();
    work.pop_back();
    if (node->internal && depth == deepest) {
      node->internal = false;
      node->children.clear();
      continue;
    }
    for (DerivationTree& c : node->children) work.push_back({&c, depth + 1});
  }
  return out;
}

SententialForm frontier(const DerivationTree& tree, const Scfg& g) {
  SententialForm form;
  std::vector<const DerivationTree*> work{&tree};
  while (!work.empty()) {
    const DerivationTree* node = work.back();
    work.pop_back();
    if (!node->internal) {
      form.symbols.push_back(Occurrence{node->label, kRootScope});
      continue;
    }
    for (auto it = node->children.rbegin(); it != node->children.rend(); ++it) {
      work.push_back(&*it);
    }
  }
  recomputeLeftmost(form, g, 0);
  rebuildCtx(form);
  return form;
}

// ---------------------------------------------------------------------------
// Canonical bracket text

namespace {

void encodeInto(const DerivationTree& tree, const Scfg& g, std::string& out,
                int depth) {
  if (depth > kMaxTreeDepth) throw Error("tree too deep to encode");
  const std::string& label = g.text(tree.label);
  if (label.find_first_of(" \t\n[]") != std::string::npos) {
    throw Error("token cannot appear in bracket encoding: " + label);
  }
  if (!tree.internal) {
    out += "[Leaf ";
    if (g.isNonTerminal(tree.label)) {
      out += "<:" + label + ":>";
    } else {
      out += label;
    }
    out.push_back(']');
    return;
  }
  out += "[Node <:" + label + ":>";
  for (const DerivationTree& c : tree.children) {
    out.push_back(' ');
    encodeInto(c, g, out, depth + 1);
  }
  out.push_back(']');
}

struct TreeParser {
  std::string_view text;
  std::size_t pos = 0;
  Scfg& g;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("tree text offset " + std::to_string(pos) + ": " + msg);
  }
  void skipWs() {
    while (pos < text.size() &&
           (text[pos] == ' ' || text[pos] == '\t' || text[pos] == '\n' ||
            text[pos] == '\r')) {
      ++pos;
    }
  }
  std::string_view word() {
    std::size_t start = pos;
    while (pos < text.size() && std::isalpha(static_cast<unsigned char>(text[pos]))) {
      ++pos;
    }
    return text.substr(start, pos - start);
  }
  std::string_view symbolToken() {
    std::size_t start = pos;
    while (pos < text.size() && text[pos] != ' ' && text[pos] != '\t' &&
           text[pos] != '\n' && text[pos] != '\r' && text[pos] != '[' &&
           text[pos] != ']') {
      ++pos;
    }
    if (pos == start) fail("expected a symbol");
    return text.substr(start, pos - start);
  }

  SymId internSymbol(std::string_view tok, bool mustBeNt) {
    if (tok.size() > 4 && tok.substr(0, 2) == "<:" &&
        tok.substr(tok.size() - 2) == ":>") {
      return g.internNonTerminal(tok.substr(2, tok.size() - 4));
    }
    if (mustBeNt) fail("Node label must be a <:nonterminal:>");
    return g.internTerminal(tok);
  }

  DerivationTree node(int depth) {
    if (depth > kMaxTreeDepth) fail("tree too deep");
    skipWs();
    if (pos >= text.size() || text[pos] != '[') fail("expected '['");
    ++pos;
    std::string_view kind = word();
    DerivationTree t;
    if (kind == "Leaf") {
      skipWs();
      t.label = internSymbol(symbolToken(), false);
      t.internal = false;
    } else if (kind == "Node") {
      skipWs();
      t.label = internSymbol(symbolToken(), true);
      t.internal = true;
      while (true) {
        skipWs();
        if (pos < text.size() && text[pos] == '[') {
          t.children.push_back(node(depth + 1));
        } else {
          break;
        }
      }
    } else {
      fail("expected Node or Leaf");
    }
    skipWs();
    if (pos >= text.size() || text[pos] != ']') fail("expected ']'");
    ++pos;
    return t;
  }
};

}  // namespace

std::string encode_tree(const DerivationTree& tree, const Scfg& g) {
  std::string out;
  encodeInto(tree, g, out, 0);
  return out;
}

DerivationTree parse_tree(std::string_view text, Scfg& g) {
  TreeParser p{text, 0, g};
  DerivationTree t = p.node(0);
  p.skipWs();
  if (p.pos != text.size()) p.fail("trailing characters after tree");
  return t;
}

}  // namespace ham::derivation
