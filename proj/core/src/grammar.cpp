#include "ham/grammar.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

namespace ham::grammar {

namespace {
constexpr double kSumTolerance = 1e-9;
constexpr std::size_t kPosWeightCache = 512;

// Recency weight for availableSolutions[j] of n: the newest solution owns
// half the mass, each older one half of the next newer, renormalized.
double recencyWeight(std::size_t j, std::size_t n) {
  double raw = std::pow(0.5, static_cast<double>(n - j));
  double norm = 1.0 - std::pow(0.5, static_cast<double>(n));
  return raw / norm;
}
}  // namespace

std::string_view to_string(Origin o) {
  switch (o) {
    case Origin::Initial: return "initial";
    case Origin::Solution: return "solution";
    case Origin::Idiom: return "idiom";
    case Origin::Mined: return "mined";
  }
  return "initial";
}

std::optional<Origin> origin_from_string(std::string_view s) {
  if (s == "initial") return Origin::Initial;
  if (s == "solution") return Origin::Solution;
  if (s == "idiom") return Origin::Idiom;
  if (s == "mined") return Origin::Mined;
  return std::nullopt;
}

std::string_view to_string(ProcKind k) {
  switch (k) {
    case ProcKind::IntegerLiteral: return "integer-literal";
    case ProcKind::VariableName: return "variable-name";
    case ProcKind::PreviousSolutionCall: return "previous-solution-call";
    case ProcKind::SolutionDefinition: return "solution-definition";
  }
  return "integer-literal";
}

std::optional<ProcKind> proc_kind_from_string(std::string_view s) {
  if (s == "integer-literal") return ProcKind::IntegerLiteral;
  if (s == "variable-name") return ProcKind::VariableName;
  if (s == "previous-solution-call") return ProcKind::PreviousSolutionCall;
  if (s == "solution-definition") return ProcKind::SolutionDefinition;
  return std::nullopt;
}

bool GenerationContext::isDefined(std::string_view id) const {
  return std::find(definedSolutions.begin(), definedSolutions.end(), id) !=
         definedSolutions.end();
}

// ---------------------------------------------------------------------------
// Symbol table

Scfg::Scfg() {
  hooks_[0] = internNonTerminal(kHookPreviousSolution);
  hooks_[1] = internNonTerminal(kHookSolutionCorpus);
  hooks_[2] = internNonTerminal(kHookAbstractExpression);
  hooks_[3] = internNonTerminal(kHookFrequentExpression);
  for (int i = 0; i < 7; ++i) internTerminal("var" + std::to_string(i));
  setIntegerZeta(2.0, 256);
  posWeightPrefix_.assign(kPosWeightCache + 1, 0.0);
  double acc = 0.0;
  for (std::size_t k = 1; k <= kPosWeightCache; ++k) {
    acc += 1.0 / (static_cast<double>(k) * static_cast<double>(k));
    posWeightPrefix_[k] = acc;
  }
}

SymId Scfg::internTerminal(std::string_view text) {
  std::string key(text);
  auto it = termIds_.find(key);
  if (it != termIds_.end()) return it->second;
  SymId id = static_cast<SymId>(syms_.size());
  syms_.push_back(SymEntry{key, true});
  termIds_.emplace(std::move(key), id);
  return id;
}

SymId Scfg::internNonTerminal(std::string_view name) {
  std::string key(name);
  auto it = ntIds_.find(key);
  if (it != ntIds_.end()) return it->second;
  SymId id = static_cast<SymId>(syms_.size());
  syms_.push_back(SymEntry{key, false});
  ntIds_.emplace(std::move(key), id);
  return id;
}

SymId Scfg::findTerminal(std::string_view text) const {
  auto it = termIds_.find(std::string(text));
  return it == termIds_.end() ? kNoSym : it->second;
}

SymId Scfg::findNonTerminal(std::string_view name) const {
  auto it = ntIds_.find(std::string(name));
  return it == ntIds_.end() ? kNoSym : it->second;
}

bool Scfg::isTerminal(SymId id) const {
  return id >= 0 && static_cast<std::size_t>(id) < syms_.size() &&
         syms_[static_cast<std::size_t>(id)].terminal;
}

bool Scfg::isNonTerminal(SymId id) const {
  return id >= 0 && static_cast<std::size_t>(id) < syms_.size() &&
         !syms_[static_cast<std::size_t>(id)].terminal;
}

const std::string& Scfg::text(SymId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= syms_.size()) {
    throw Error("symbol id out of range: " + std::to_string(id));
  }
  return syms_[static_cast<std::size_t>(id)].text;
}

std::size_t Scfg::terminalCount() const { return termIds_.size(); }
std::size_t Scfg::nonTerminalCount() const { return ntIds_.size(); }

std::vector<SymId> Scfg::nonTerminals() const {
  std::vector<SymId> out;
  for (std::size_t i = 0; i < syms_.size(); ++i) {
    if (!syms_[i].terminal) out.push_back(static_cast<SymId>(i));
  }
  return out;
}

void Scfg::setStartSymbol(SymId s) {
  if (!isNonTerminal(s)) throw Error("start symbol must be a nonterminal");
  start_ = s;
}

bool Scfg::isHook(SymId id) const {
  return id == hooks_[0] || id == hooks_[1] || id == hooks_[2] || id == hooks_[3];
}

// ---------------------------------------------------------------------------
// Mutation

void Scfg::addProduction(Production p) {
  if (!isNonTerminal(p.head)) throw Error("production head must be a nonterminal");
  for (SymId s : p.body) {
    if (s < 0 || static_cast<std::size_t>(s) >= syms_.size()) {
      throw Error("production body references unknown symbol id");
    }
  }
  prodIndex_[p.head].push_back(prods_.size());
  prods_.push_back(std::move(p));
}

void Scfg::addProcedure(ProductionProcedure p) {
  if (!isNonTerminal(p.head)) throw Error("procedure head must be a nonterminal");
  procIndex_[p.head].push_back(procs_.size());
  procs_.push_back(p);
}

void Scfg::scaleHead(SymId head, double factor) {
  auto it = prodIndex_.find(head);
  if (it == prodIndex_.end()) return;
  for (std::size_t idx : it->second) {
    prods_[idx].probability *= factor;
    if (prods_[idx].smoothed >= 0.0) prods_[idx].smoothed *= factor;
  }
}

void Scfg::renormalizeHead(SymId head) {
  double procMass = 0.0;
  for (const ProductionProcedure* p : proceduresOf(head)) procMass += p->reservedMass;
  double staticSum = 0.0;
  auto it = prodIndex_.find(head);
  if (it == prodIndex_.end()) return;
  for (std::size_t idx : it->second) staticSum += prods_[idx].probability;
  if (staticSum <= 0.0) return;
  scaleHead(head, (1.0 - procMass) / staticSum);
}

void Scfg::removeHeadProductions(SymId head) {
  auto it = prodIndex_.find(head);
  if (it == prodIndex_.end() || it->second.empty()) return;
  std::erase_if(prods_, [&](const Production& p) { return p.head == head; });
  prodIndex_.clear();
  for (std::size_t i = 0; i < prods_.size(); ++i) {
    prodIndex_[prods_[i].head].push_back(i);
  }
}

std::vector<std::size_t> Scfg::productionIndices(SymId head) const {
  auto it = prodIndex_.find(head);
  if (it == prodIndex_.end()) return {};
  return it->second;
}

std::vector<const ProductionProcedure*> Scfg::proceduresOf(SymId head) const {
  std::vector<const ProductionProcedure*> out;
  auto it = procIndex_.find(head);
  if (it == procIndex_.end()) return out;
  for (std::size_t idx : it->second) out.push_back(&procs_[idx]);
  return out;
}

void Scfg::setIntegerZeta(double s, int kmax) {
  intZeta_ = zeta_table(s, kmax);
  intTerms_.clear();
  intTerms_.reserve(static_cast<std::size_t>(kmax));
  for (int k = 1; k <= kmax; ++k) intTerms_.push_back(internTerminal(std::to_string(k)));
}

// ---------------------------------------------------------------------------
// Expansion

double Scfg::positionWeight(std::size_t index, std::size_t n) const {
  double norm;
  if (n < posWeightPrefix_.size()) {
    norm = posWeightPrefix_[n];
  } else {
    norm = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
      norm += 1.0 / (static_cast<double>(k) * static_cast<double>(k));
    }
  }
  double k = static_cast<double>(index + 1);
  return (1.0 / (k * k)) / norm;
}

std::vector<SymId> Scfg::mapTokens(const std::vector<std::string>& toks) const {
  std::vector<SymId> out;
  out.reserve(toks.size());
  for (const std::string& t : toks) {
    if (t.size() > 4 && t.compare(0, 2, "<:") == 0 &&
        t.compare(t.size() - 2, 2, ":>") == 0) {
      SymId nt = findNonTerminal(std::string_view(t).substr(2, t.size() - 4));
      if (nt == kNoSym) throw Error("token references unknown nonterminal: " + t);
      out.push_back(nt);
    } else {
      SymId term = findTerminal(t);
      if (term == kNoSym) throw Error("token not interned as terminal: " + t);
      out.push_back(term);
    }
  }
  return out;
}

bool Scfg::procedureEmpty(const ProductionProcedure& proc,
                          const GenerationContext& ctx) const {
  switch (proc.kind) {
    case ProcKind::IntegerLiteral:
      return intTerms_.empty();
    case ProcKind::VariableName:
      return ctx.boundVariables.empty();
    case ProcKind::PreviousSolutionCall:
    case ProcKind::SolutionDefinition:
      return ctx.availableSolutions.empty();
  }
  return true;
}

std::vector<Expansion> Scfg::expandProcedure(const ProductionProcedure& proc,
                                             const GenerationContext& ctx) const {
  std::vector<Expansion> out;
  switch (proc.kind) {
    case ProcKind::IntegerLiteral: {
      out.reserve(intTerms_.size());
      for (int k = 1; k <= intZeta_.kmax; ++k) {
        Expansion e;
        e.head = proc.head;
        e.kind = proc.kind;
        e.body.push_back(intTerms_[static_cast<std::size_t>(k) - 1]);
        e.probability = proc.reservedMass * intZeta_.p(k);
        out.push_back(std::move(e));
      }
      break;
    }
    case ProcKind::VariableName: {
      std::size_t n = ctx.boundVariables.size();
      out.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        const std::string& name = ctx.boundVariables[i];
        SymId t = findTerminal(name);
        if (t == kNoSym) throw Error("bound variable never interned: " + name);
        Expansion e;
        e.head = proc.head;
        e.kind = proc.kind;
        e.body.push_back(t);
        e.probability = proc.reservedMass * positionWeight(i, n);
        out.push_back(std::move(e));
      }
      break;
    }
    case ProcKind::PreviousSolutionCall: {
      std::size_t n = ctx.availableSolutions.size();
      out.reserve(n);
      for (std::size_t j = 0; j < n; ++j) {
        const SolutionRef& sol = ctx.availableSolutions[j];
        Expansion e;
        e.head = proc.head;
        e.kind = proc.kind;
        e.body = mapTokens(sol.callTokens);
        e.probability = proc.reservedMass * recencyWeight(j, n);
        out.push_back(std::move(e));
      }
      break;
    }
    case ProcKind::SolutionDefinition: {
      std::size_t n = ctx.availableSolutions.size();
      out.reserve(n);
      for (std::size_t j = 0; j < n; ++j) {
        const SolutionRef& sol = ctx.availableSolutions[j];
        Expansion e;
        e.head = proc.head;
        e.kind = proc.kind;
        if (ctx.isDefined(sol.id)) {
          // Already defined on this derivation path: an empty production at
          // probability zero, so a depth-first expander backtracks here.
          e.probability = 0.0;
        } else {
          e.body = mapTokens(sol.definitionTokens);
          e.probability = proc.reservedMass * recencyWeight(j, n);
          e.registersVariable = sol.id;
          e.registersSolution = sol.id;
        }
        out.push_back(std::move(e));
      }
      break;
    }
  }
  return out;
}

bool Scfg::isEmptyFor(SymId head, const GenerationContext& ctx) const {
  auto pit = prodIndex_.find(head);
  if (pit != prodIndex_.end() && !pit->second.empty()) return false;
  auto qit = procIndex_.find(head);
  if (qit != procIndex_.end()) {
    for (std::size_t idx : qit->second) {
      if (!procedureEmpty(procs_[idx], ctx)) return false;
    }
  }
  return true;
}

std::vector<Expansion> Scfg::productionsFor(SymId head,
                                            const GenerationContext& ctx) const {
  std::vector<Expansion> out;
  double dropped = 0.0;
  double keptStatic = 0.0;
  auto pit = prodIndex_.find(head);
  if (pit != prodIndex_.end()) {
    for (std::size_t idx : pit->second) {
      const Production& p = prods_[idx];
      bool dead = false;
      for (SymId s : p.body) {
        if (isHook(s) && isEmptyFor(s, ctx)) {
          dead = true;
          break;
        }
      }
      if (dead) {
        dropped += p.probability;
        continue;
      }
      Expansion e;
      e.head = p.head;
      e.prod = &p;
      e.staticIndex = static_cast<std::int64_t>(idx);
      e.body = p.body;
      e.probability = p.probability;
      e.newScope = p.newScope;
      e.bindsName = p.bindsName;
      if (p.bindsName && p.body.size() == 1 && isTerminal(p.body[0])) {
        e.registersVariable = text(p.body[0]);
      }
      keptStatic += p.probability;
      out.push_back(std::move(e));
    }
  }
  std::size_t firstProc = out.size();
  double procMass = 0.0;
  auto qit = procIndex_.find(head);
  if (qit != procIndex_.end()) {
    for (std::size_t idx : qit->second) {
      std::vector<Expansion> emitted = expandProcedure(procs_[idx], ctx);
      for (Expansion& e : emitted) {
        procMass += e.probability;
        out.push_back(std::move(e));
      }
    }
  }
  // A production mentioning an empty hook cannot derive a sentence; its mass
  // is redistributed proportionally over the surviving static alternatives
  // (or, with none, over the procedural emissions).
  if (dropped > 0.0) {
    if (keptStatic > 0.0) {
      double f = (keptStatic + dropped) / keptStatic;
      for (std::size_t i = 0; i < firstProc; ++i) out[i].probability *= f;
    } else if (procMass > 0.0) {
      double f = (procMass + dropped) / procMass;
      for (std::size_t i = firstProc; i < out.size(); ++i) out[i].probability *= f;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation

std::vector<Violation> Scfg::validate() const {
  std::vector<Violation> out;
  for (std::size_t i = 0; i < prods_.size(); ++i) {
    const Production& p = prods_[i];
    std::string where = text(p.head) + " (production " + std::to_string(i) + ")";
    if (!(p.probability >= 0.0 && p.probability <= 1.0) ||
        !std::isfinite(p.probability)) {
      out.push_back({where, "probability " + format_probability(p.probability) +
                                " outside [0, 1]"});
    }
    if (p.bindsName && (p.body.size() != 1 || !isTerminal(p.body[0]))) {
      out.push_back({where, "!bind production must have a single terminal body"});
    }
  }
  for (std::size_t i = 0; i < procs_.size(); ++i) {
    const ProductionProcedure& p = procs_[i];
    if (!(p.reservedMass >= 0.0 && p.reservedMass <= 1.0) ||
        !std::isfinite(p.reservedMass)) {
      out.push_back({text(p.head), "procedure mass " +
                                       format_probability(p.reservedMass) +
                                       " outside [0, 1]"});
    }
  }

  // Per-head sums: static probabilities plus procedural reserved mass must
  // total 1.  Heads with nothing attached at all (hook placeholders) pass.
  std::set<SymId> heads;
  for (const auto& [head, idxs] : prodIndex_) {
    if (!idxs.empty()) heads.insert(head);
  }
  for (const auto& [head, idxs] : procIndex_) {
    if (!idxs.empty()) heads.insert(head);
  }
  for (SymId head : heads) {
    double sum = 0.0;
    auto pit = prodIndex_.find(head);
    if (pit != prodIndex_.end()) {
      for (std::size_t idx : pit->second) sum += prods_[idx].probability;
    }
    auto qit = procIndex_.find(head);
    if (qit != procIndex_.end()) {
      for (std::size_t idx : qit->second) sum += procs_[idx].reservedMass;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
      out.push_back({text(head), "productions sum to " + format_probability(sum) +
                                     ", expected 1"});
    }
  }

  // Dangling references: body nonterminals with no productions, no
  // procedures, and no hook status have nothing to say at expansion time.
  std::set<SymId> reported;
  for (const Production& p : prods_) {
    for (SymId s : p.body) {
      if (!isNonTerminal(s) || isHook(s)) continue;
      if (heads.count(s) || reported.count(s)) continue;
      reported.insert(s);
      out.push_back({text(s), "nonterminal is referenced but has no productions"});
    }
  }
  return out;
}

}  // namespace ham::grammar
