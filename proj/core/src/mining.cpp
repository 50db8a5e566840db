// Frequent-subtree mining over derivation trees: level-wise pattern growth
// with apriori pruning (every subpattern of a frequent pattern is frequent),
// and the frequent-expression hook rewrite built on it.
//
// A pattern is a derivation tree whose nonterminal leaves mark abstraction
// cuts.  Occurrence lists are maintained constructively: the level-1 pattern
// of a node trivially matches there, and growing a pattern by expanding one
// cut with a node's actual one-level expansion keeps the list exact — every
// occurrence of the grown pattern is an occurrence of its parent, so no
// match is ever missed and no matcher needs to run.

#include <algorithm>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ham/memory.hpp"

namespace ham::memory {

using derivation::DerivationTree;
using grammar::kNoSym;
using grammar::Origin;
using grammar::Production;
using grammar::Scfg;
using grammar::SymId;

namespace {

// Root expanded one level: children become leaves keeping their labels.
DerivationTree oneLevel(const DerivationTree& node) {
  DerivationTree t;
  t.label = node.label;
  t.internal = true;
  t.children.reserve(node.children.size());
  for (const DerivationTree& c : node.children) {
    DerivationTree leaf;
    leaf.label = c.label;
    t.children.push_back(std::move(leaf));
  }
  return t;
}

// Data nodes sitting under the pattern's nonterminal leaves, preorder.
// Precondition: the pattern matches at `node` (holds by construction).
void cutBindings(const DerivationTree& pat, const DerivationTree& node, const Scfg& g,
                 std::vector<const DerivationTree*>& out) {
  if (!pat.internal) {
    if (g.isNonTerminal(pat.label)) out.push_back(&node);
    return;
  }
  for (std::size_t i = 0; i < pat.children.size(); ++i) {
    cutBindings(pat.children[i], node.children[i], g, out);
  }
}

// Replace the k-th nonterminal leaf (preorder) with `replacement`.
bool substituteCut(DerivationTree& pat, const Scfg& g, std::size_t& k,
                   const DerivationTree& replacement) {
  if (!pat.internal) {
    if (!g.isNonTerminal(pat.label)) return false;
    if (k == 0) {
      pat = replacement;
      return true;
    }
    --k;
    return false;
  }
  for (DerivationTree& c : pat.children) {
    if (substituteCut(c, g, k, replacement)) return true;
  }
  return false;
}

struct Pending {
  DerivationTree tree;
  std::vector<const DerivationTree*> occ;
};

void deposit(std::map<std::string, Pending>& level, const Scfg& g, DerivationTree pat,
             const DerivationTree* node) {
  std::string key = derivation::encode_tree(pat, g);
  auto [it, fresh] = level.try_emplace(std::move(key));
  if (fresh) it->second.tree = std::move(pat);
  it->second.occ.push_back(node);
}

std::vector<SymId> frontierSymbols(const DerivationTree& t, const Scfg& g) {
  derivation::SententialForm f = derivation::frontier(t, g);
  std::vector<SymId> out;
  out.reserve(f.symbols.size());
  for (const derivation::Occurrence& o : f.symbols) out.push_back(o.sym);
  return out;
}

// Expression-rooted subtrees not contained in a larger one; their node sets
// cover every expression of the derivation exactly once, so occurrence
// counts over this forest never double-count.
void collectMaximalExpressions(const DerivationTree& t, SymId expr,
                               std::vector<DerivationTree>& out) {
  if (t.internal && t.label == expr) {
    out.push_back(t);
    return;
  }
  for (const DerivationTree& c : t.children) collectMaximalExpressions(c, expr, out);
}

}  // namespace

std::vector<FrequentSubtree> mine_frequent_subtrees(
    const Scfg& g, const std::vector<DerivationTree>& trees,
    std::size_t supportThreshold) {
  const std::size_t threshold = supportThreshold == 0 ? 1 : supportThreshold;

  // Level 1: every internal node, expanded exactly one level.
  std::map<std::string, Pending> level;
  std::vector<const DerivationTree*> stack;
  for (const DerivationTree& t : trees) {
    stack.push_back(&t);
    while (!stack.empty()) {
      const DerivationTree* n = stack.back();
      stack.pop_back();
      for (const DerivationTree& c : n->children) stack.push_back(&c);
      if (n->internal) deposit(level, g, oneLevel(*n), n);
    }
  }

  std::vector<std::pair<std::string, FrequentSubtree>> found;
  while (!level.empty()) {
    std::map<std::string, Pending> next;
    for (auto& [key, pending] : level) {
      // The same occurrence can arrive via several frequent parents.
      std::sort(pending.occ.begin(), pending.occ.end());
      pending.occ.erase(std::unique(pending.occ.begin(), pending.occ.end()),
                        pending.occ.end());
      if (pending.occ.size() < threshold) continue;
      found.emplace_back(key, FrequentSubtree{pending.tree, pending.occ.size()});
      for (const DerivationTree* node : pending.occ) {
        std::vector<const DerivationTree*> bound;
        cutBindings(pending.tree, *node, g, bound);
        for (std::size_t leaf = 0; leaf < bound.size(); ++leaf) {
          if (!bound[leaf]->internal) continue;
          DerivationTree grown = pending.tree;
          std::size_t k = leaf;
          substituteCut(grown, g, k, oneLevel(*bound[leaf]));
          deposit(next, g, std::move(grown), node);
        }
      }
    }
    level = std::move(next);
  }

  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
    if (a.second.support != b.second.support) return a.second.support > b.second.support;
    return a.first < b.first;
  });
  std::vector<FrequentSubtree> out;
  out.reserve(found.size());
  for (auto& f : found) out.push_back(std::move(f.second));
  return out;
}

void mine_frequent_subprograms(HamState& ham) {
  Scfg& g = ham.scfg;
  const SymId expr = g.findNonTerminal("expression");
  const SymId fe = g.findNonTerminal(grammar::kHookFrequentExpression);

  std::vector<DerivationTree> forest;
  if (expr != kNoSym) {
    for (const CorpusRecord& rec : ham.corpus) {
      collectMaximalExpressions(rec.tree, expr, forest);
    }
  }
  const std::vector<FrequentSubtree> mined =
      mine_frequent_subtrees(g, forest, ham.config.supportThreshold);

  g.removeHeadProductions(fe);
  // Distinct patterns can share a frontier; their production is one row with
  // the supports pooled.
  std::vector<std::vector<SymId>> bodies;
  std::vector<std::size_t> supports;
  std::map<std::vector<SymId>, std::size_t> rowAt;
  for (const FrequentSubtree& f : mined) {
    if (f.tree.label != expr) continue;
    std::vector<SymId> body = frontierSymbols(f.tree, g);
    auto [it, fresh] = rowAt.try_emplace(body, bodies.size());
    if (fresh) {
      bodies.push_back(std::move(body));
      supports.push_back(f.support);
    } else {
      supports[it->second] += f.support;
    }
  }
  if (bodies.empty()) return;

  double total = 0.0;
  for (std::size_t s : supports) total += static_cast<double>(s);
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    Production p;
    p.head = fe;
    p.body = std::move(bodies[i]);
    p.probability = static_cast<double>(supports[i]) / total;
    p.origin = Origin::Mined;
    g.addProduction(std::move(p));
  }
  g.renormalizeHead(fe);
}

}  // namespace ham::memory
