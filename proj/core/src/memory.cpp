#include "ham/memory.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ham::memory {

using derivation::DerivationTree;
using grammar::kNoSym;
using grammar::Origin;
using grammar::ProcKind;
using grammar::Production;
using grammar::ProductionProcedure;
using grammar::Scfg;
using grammar::SymId;

namespace {

std::vector<std::string> splitTokens(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<SymId> frontierSymbols(const DerivationTree& t, const Scfg& g) {
  derivation::SententialForm f = derivation::frontier(t, g);
  std::vector<SymId> out;
  out.reserve(f.symbols.size());
  for (const derivation::Occurrence& o : f.symbols) out.push_back(o.sym);
  return out;
}

void collectExpressionNodes(const DerivationTree& t, SymId expr,
                            std::vector<const DerivationTree*>& out) {
  if (t.internal && t.label == expr) out.push_back(&t);
  for (const DerivationTree& c : t.children) collectExpressionNodes(c, expr, out);
}

bool isIdiomHeadName(std::string_view name) {
  constexpr std::string_view prefix = "idiom-";
  if (name.size() <= prefix.size() || name.substr(0, prefix.size()) != prefix) return false;
  for (char c : name.substr(prefix.size())) {
    if (c < '0' || c > '9') return false;
  }
  return true;
}

double staticMassOf(const Scfg& g, SymId head) {
  double procMass = 0.0;
  for (const ProductionProcedure* p : g.proceduresOf(head)) procMass += p->reservedMass;
  return 1.0 - procMass;
}

}  // namespace

HamState make_state(grammar::Scfg g, MemoryConfig config) {
  HamState ham;
  ham.scfg = std::move(g);
  ham.config = config;
  return ham;
}

CorpusRecord make_record(const grammar::Scfg& g, std::string problemId,
                         int arity, std::string programText,
                         const std::vector<derivation::Step>& steps,
                         double p_i, std::uint64_t t_i) {
  if (steps.empty()) {
    throw MissingDerivation("record '" + problemId + "' has no derivation steps");
  }
  CorpusRecord rec;
  rec.problemId = std::move(problemId);
  rec.arity = arity;
  rec.programText = std::move(programText);
  rec.tree = derivation::build_tree(steps, g);
  rec.p_i = p_i;
  rec.t_i = t_i;
  return rec;
}

std::vector<grammar::SolutionRef> solution_refs(const HamState& ham) {
  std::vector<grammar::SolutionRef> out;
  out.reserve(ham.corpus.size());
  for (const CorpusRecord& rec : ham.corpus) {
    grammar::SolutionRef ref;
    ref.id = rec.problemId;
    ref.arity = rec.arity;
    ref.callTokens.push_back("(");
    ref.callTokens.push_back(rec.problemId);
    for (int i = 0; i < rec.arity; ++i) ref.callTokens.emplace_back("<:expression:>");
    ref.callTokens.push_back(")");
    ref.definitionTokens = splitTokens(rec.programText);
    out.push_back(std::move(ref));
  }
  return out;
}

void update_probabilities(HamState& ham) {
  if (ham.corpus.empty()) {
    throw MissingDerivation("probability update needs a non-empty corpus");
  }
  if (ham.corpus.back().tree.label == kNoSym) {
    throw MissingDerivation("latest corpus record has no derivation tree");
  }
  Scfg& g = ham.scfg;
  const std::vector<Production>& prods = g.productions();

  // (head, body) -> production row.  Applications are counted from the
  // corpus derivation trees; a node whose body matches no static row under
  // its head is a procedural emission and never counts.
  std::unordered_map<SymId, std::map<std::vector<SymId>, std::size_t>> rowOf;
  for (std::size_t i = 0; i < prods.size(); ++i) {
    rowOf[prods[i].head].emplace(prods[i].body, i);
  }

  std::vector<std::uint64_t> counts(prods.size(), 0);
  std::unordered_map<SymId, std::uint64_t> headTotals;
  std::vector<const DerivationTree*> stack;
  std::vector<SymId> body;
  for (const CorpusRecord& rec : ham.corpus) {
    stack.push_back(&rec.tree);
    while (!stack.empty()) {
      const DerivationTree* n = stack.back();
      stack.pop_back();
      for (const DerivationTree& c : n->children) stack.push_back(&c);
      if (!n->internal) continue;
      auto heads = rowOf.find(n->label);
      if (heads == rowOf.end()) continue;
      body.clear();
      for (const DerivationTree& c : n->children) body.push_back(c.label);
      auto row = heads->second.find(body);
      if (row == heads->second.end()) continue;
      ++counts[row->second];
      ++headTotals[n->label];
    }
  }

  const SymId fe = g.findNonTerminal(grammar::kHookFrequentExpression);
  const double alpha = ham.config.alpha;
  for (const auto& [head, total] : headTotals) {
    // The frequent-expression hook belongs to the mining rewrite; smoothing
    // it would drag the support-proportional probabilities around.
    if (head == fe) continue;
    const double staticMass = staticMassOf(g, head);
    for (std::size_t idx : g.productionIndices(head)) {
      Production& prod = g.productions()[idx];
      const double ratio =
          staticMass * (static_cast<double>(counts[idx]) / static_cast<double>(total));
      const double prev = prod.smoothed >= 0.0 ? prod.smoothed : prod.probability;
      const double s = alpha * ratio + (1.0 - alpha) * prev;
      prod.probability = s;
      prod.smoothed = s;
    }
    g.renormalizeHead(head);
  }
}

void add_previous_solution(HamState& ham, const CorpusRecord& record) {
  Scfg& g = ham.scfg;
  const SymId ps = g.findNonTerminal(grammar::kHookPreviousSolution);
  for (std::size_t idx : g.productionIndices(ps)) {
    const Production& p = g.productions()[idx];
    if (p.body.size() >= 2 && g.text(p.body[1]) == record.problemId) {
      throw DuplicateSolutionId("solution '" + record.problemId + "' is already in memory");
    }
  }

  std::vector<SymId> body;
  body.push_back(g.internTerminal("("));
  body.push_back(g.internTerminal(record.problemId));
  const SymId expr = g.internNonTerminal("expression");
  for (int i = 0; i < record.arity; ++i) body.push_back(expr);
  body.push_back(g.internTerminal(")"));

  double oldSum = 0.0;
  for (std::size_t idx : g.productionIndices(ps)) oldSum += g.productions()[idx].probability;
  double newProbability = 1.0;
  if (oldSum > 0.0) {
    g.scaleHead(ps, (1.0 - ham.config.gamma) / oldSum);
    newProbability = ham.config.gamma;
  }
  Production call;
  call.head = ps;
  call.body = std::move(body);
  call.probability = newProbability;
  call.origin = Origin::Solution;
  g.addProduction(std::move(call));

  // The definition emitter (one procedure serves every available solution).
  const SymId sc = g.findNonTerminal(grammar::kHookSolutionCorpus);
  bool hasEmitter = false;
  for (const ProductionProcedure* p : g.proceduresOf(sc)) {
    if (p->kind == ProcKind::SolutionDefinition) hasEmitter = true;
  }
  if (!hasEmitter) {
    ProductionProcedure emitter;
    emitter.head = sc;
    emitter.kind = ProcKind::SolutionDefinition;
    emitter.reservedMass = 1.0;
    g.addProcedure(emitter);
  }
}

void learn_idioms(HamState& ham, const CorpusRecord& record) {
  Scfg& g = ham.scfg;
  const SymId expr = g.findNonTerminal("expression");
  if (expr == kNoSym) return;

  std::set<std::vector<SymId>> known;
  for (const Production& p : g.productions()) {
    if (isIdiomHeadName(g.text(p.head))) known.insert(p.body);
  }

  std::vector<const DerivationTree*> exprNodes;
  collectExpressionNodes(record.tree, expr, exprNodes);

  std::vector<std::vector<SymId>> forms;
  for (const DerivationTree* node : exprNodes) {
    DerivationTree t = *node;
    while (t.internal) {
      t = derivation::prune_one_level(t);
      std::vector<SymId> form = frontierSymbols(t, g);
      if (form.size() >= 2 && known.insert(form).second) forms.push_back(form);
      if (form.size() <= ham.config.pruneCutoff) break;
    }
  }
  if (forms.empty()) return;

  int nextIndex = 0;
  for (SymId nt : g.nonTerminals()) {
    const std::string& name = g.text(nt);
    if (!isIdiomHeadName(name)) continue;
    nextIndex = std::max(nextIndex, std::stoi(name.substr(6)) + 1);
  }
  const SymId family = g.internNonTerminal("idiom-" + std::to_string(nextIndex));
  const double share = 1.0 / static_cast<double>(forms.size());
  for (std::vector<SymId>& form : forms) {
    Production p;
    p.head = family;
    p.body = std::move(form);
    p.probability = share;
    p.origin = Origin::Idiom;
    g.addProduction(std::move(p));
  }
  g.renormalizeHead(family);

  const SymId ax = g.findNonTerminal(grammar::kHookAbstractExpression);
  double oldSum = 0.0;
  for (std::size_t idx : g.productionIndices(ax)) oldSum += g.productions()[idx].probability;
  double newProbability = 1.0;
  if (oldSum > 0.0) {
    g.scaleHead(ax, (1.0 - ham.config.idiomMass) / oldSum);
    newProbability = ham.config.idiomMass;
  }
  Production alt;
  alt.head = ax;
  alt.body = {family};
  alt.probability = newProbability;
  alt.origin = Origin::Idiom;
  g.addProduction(std::move(alt));
}

void full_update(HamState& ham, CorpusRecord record) {
  if (record.tree.label == kNoSym) {
    throw MissingDerivation("record '" + record.problemId + "' has no derivation tree");
  }
  ham.corpus.push_back(std::move(record));
  const CorpusRecord& rec = ham.corpus.back();
  try {
    add_previous_solution(ham, rec);
  } catch (...) {
    ham.corpus.pop_back();
    throw;
  }
  learn_idioms(ham, rec);
  mine_frequent_subprograms(ham);
  update_probabilities(ham);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

double parseReal(std::string_view t) {
  double v{};
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size()) {
    throw CorruptEncoding("bad real number '" + std::string(t) + "'");
  }
  return v;
}

std::uint64_t parseCount(std::string_view t) {
  std::uint64_t v{};
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size()) {
    throw CorruptEncoding("bad count '" + std::string(t) + "'");
  }
  return v;
}

int parseArity(std::string_view t) {
  int v{};
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size()) {
    throw CorruptEncoding("bad arity '" + std::string(t) + "'");
  }
  return v;
}

struct Reader {
  std::string_view data;
  std::size_t pos = 0;

  std::string_view line() {
    if (pos >= data.size()) throw CorruptEncoding("unexpected end of memory encoding");
    const std::size_t nl = data.find('\n', pos);
    if (nl == std::string_view::npos) {
      throw CorruptEncoding("unterminated line in memory encoding");
    }
    std::string_view out = data.substr(pos, nl - pos);
    pos = nl + 1;
    return out;
  }

  std::string_view block(std::size_t n) {
    if (data.size() - pos < n) throw CorruptEncoding("truncated block in memory encoding");
    std::string_view out = data.substr(pos, n);
    pos += n;
    return out;
  }

  // Rest of a line after a directive like "%text " (empty payload allowed).
  std::string_view payload(std::string_view directive) {
    std::string_view l = line();
    if (l == directive) return {};
    const std::string withSpace = std::string(directive) + " ";
    if (l.substr(0, withSpace.size()) != withSpace) {
      throw CorruptEncoding("expected " + std::string(directive) + " line");
    }
    return l.substr(withSpace.size());
  }
};

}  // namespace

std::string serialize(const HamState& ham) {
  const MemoryConfig& c = ham.config;
  std::string out = "%ham 1\n";
  out += "%config alpha " + grammar::format_probability(c.alpha);
  out += " gamma " + grammar::format_probability(c.gamma);
  out += " idiom-mass " + grammar::format_probability(c.idiomMass);
  out += " support " + std::to_string(c.supportThreshold);
  out += " prune-cutoff " + std::to_string(c.pruneCutoff);
  out += "\n";
  const std::string gtext = grammar::grammar_text(ham.scfg);
  out += "%grammar " + std::to_string(gtext.size()) + "\n";
  out += gtext;
  out += "%corpus " + std::to_string(ham.corpus.size()) + "\n";
  for (const CorpusRecord& rec : ham.corpus) {
    out += "%record " + rec.problemId + " " + std::to_string(rec.arity) + " " +
           grammar::format_probability(rec.p_i) + " " + std::to_string(rec.t_i) + "\n";
    out += "%text " + rec.programText + "\n";
    out += "%tree " + derivation::encode_tree(rec.tree, ham.scfg) + "\n";
  }
  return out;
}

HamState deserialize(std::string_view bytes) {
  Reader r{bytes};
  if (r.line() != "%ham 1") throw CorruptEncoding("not a memory encoding (bad magic)");

  const std::vector<std::string> cfg = splitTokens(r.line());
  if (cfg.size() != 11 || cfg[0] != "%config" || cfg[1] != "alpha" || cfg[3] != "gamma" ||
      cfg[5] != "idiom-mass" || cfg[7] != "support" || cfg[9] != "prune-cutoff") {
    throw CorruptEncoding("malformed %config line");
  }
  MemoryConfig config;
  config.alpha = parseReal(cfg[2]);
  config.gamma = parseReal(cfg[4]);
  config.idiomMass = parseReal(cfg[6]);
  config.supportThreshold = static_cast<std::size_t>(parseCount(cfg[8]));
  config.pruneCutoff = static_cast<std::size_t>(parseCount(cfg[10]));

  const std::vector<std::string> gheader = splitTokens(r.line());
  if (gheader.size() != 2 || gheader[0] != "%grammar") {
    throw CorruptEncoding("malformed %grammar line");
  }
  const std::string_view gtext = r.block(parseCount(gheader[1]));
  Scfg g;
  try {
    g = grammar::load_grammar(gtext);
  } catch (const Error& e) {
    throw CorruptEncoding(std::string("embedded grammar: ") + e.what());
  }

  const std::vector<std::string> cheader = splitTokens(r.line());
  if (cheader.size() != 2 || cheader[0] != "%corpus") {
    throw CorruptEncoding("malformed %corpus line");
  }
  const std::uint64_t n = parseCount(cheader[1]);
  std::vector<CorpusRecord> corpus;
  corpus.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::vector<std::string> rheader = splitTokens(r.line());
    if (rheader.size() != 5 || rheader[0] != "%record") {
      throw CorruptEncoding("malformed %record line");
    }
    CorpusRecord rec;
    rec.problemId = rheader[1];
    rec.arity = parseArity(rheader[2]);
    rec.p_i = parseReal(rheader[3]);
    rec.t_i = parseCount(rheader[4]);
    rec.programText = std::string(r.payload("%text"));
    const std::string_view treeText = r.payload("%tree");
    try {
      rec.tree = derivation::parse_tree(treeText, g);
    } catch (const Error& e) {
      throw CorruptEncoding(std::string("record tree: ") + e.what());
    }
    corpus.push_back(std::move(rec));
  }
  if (r.pos != bytes.size()) throw CorruptEncoding("trailing bytes after corpus");

  HamState ham;
  ham.scfg = std::move(g);
  ham.corpus = std::move(corpus);
  ham.config = config;
  return ham;
}

std::size_t ham_bytes(const HamState& ham) { return serialize(ham).size(); }

}  // namespace ham::memory
