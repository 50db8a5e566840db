#include "ham/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <thread>
#include <utility>

namespace ham::search {

namespace {

// Expansion-depth cap for the enumerator and expansion cap for the
// partitioner: degenerate grammars (probability-1 cycles) would otherwise
// recurse forever at constant probability.  Real derivations at practical
// horizons stay orders of magnitude below both.
constexpr int kMaxDfsDepth = 4096;
constexpr std::size_t kMaxPartitionExpansions = 10'000;
constexpr int kFrontierFactor = 8;

double elapsedSeconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Hit {
  double probability = 0.0;
  std::string text;
  std::vector<derivation::Step> steps;
  std::uint64_t t_i = 0;
};

// In-place probability-limited leftmost DFS.  State mutations are undone on
// backtrack; logProb is assigned (never re-derived by subtraction) so the
// accumulated value is bit-identical to the expand_leftmost left fold.
class Enumerator {
 public:
  Enumerator(const grammar::Scfg& g, const derivation::SententialForm& start,
             double horizon, const std::function<bool(const Candidate&)>& visit)
      : g_(g),
        horizon_(horizon),
        visit_(visit),
        scopes_(start.scopes),
        steps_(start.steps),
        logProb_(start.logProb) {
    pending_.assign(start.symbols.rbegin(), start.symbols.rend());
    ctx_.availableSolutions = start.ctx.availableSolutions;
  }

  EnumSummary run() {
    if (std::exp2(logProb_) >= horizon_) dfs(0);
    return sum_;
  }

 private:
  struct Trail {
    double logProb;
    std::size_t scopesSize;
    std::size_t namesSize;
    std::size_t solutionsSize;
  };

  bool dfs(int depth) {
    std::size_t moved = 0;
    while (!pending_.empty() && g_.isTerminal(pending_.back().sym)) {
      emitted_.push_back(pending_.back());
      pending_.pop_back();
      ++moved;
    }
    bool keepGoing = true;
    if (pending_.empty()) {
      ++sum_.visited;
      keepGoing = visit_(Candidate{emitted_, logProb_, steps_});
    } else if (depth < kMaxDfsDepth) {
      const derivation::Occurrence occ = pending_.back();
      rebuildCtx(occ.scope);
      std::vector<grammar::Expansion> exps = g_.productionsFor(occ.sym, ctx_);
      std::stable_sort(exps.begin(), exps.end(),
                       [](const grammar::Expansion& a, const grammar::Expansion& b) {
                         return a.probability > b.probability;
                       });
      for (const grammar::Expansion& e : exps) {
        if (!(e.probability > 0.0)) continue;  // zero mass: backtrack
        const double newLog = logProb_ + std::log2(e.probability);
        if (std::exp2(newLog) < horizon_) {
          // Descending order: every remaining sibling is at most as likely.
          ++sum_.horizonCutoffs;
          break;
        }
        apply(occ, e, newLog);
        keepGoing = dfs(depth + 1);
        undo(occ, e);
        if (!keepGoing) break;
      }
    }
    for (std::size_t i = 0; i < moved; ++i) {
      pending_.push_back(emitted_.back());
      emitted_.pop_back();
    }
    return keepGoing;
  }

  void apply(const derivation::Occurrence& occ, const grammar::Expansion& e,
             double newLog) {
    ++sum_.expansions;
    auto& scope = scopes_[static_cast<std::size_t>(occ.scope)];
    trail_.push_back(Trail{logProb_, scopes_.size(), scope.names.size(),
                           scope.solutions.size()});
    pending_.pop_back();
    if (!e.registersVariable.empty()) scope.names.push_back(e.registersVariable);
    if (!e.registersSolution.empty()) scope.solutions.push_back(e.registersSolution);
    derivation::ScopeId child = occ.scope;
    if (e.newScope) {
      child = static_cast<derivation::ScopeId>(scopes_.size());
      scopes_.push_back(derivation::Scope{occ.scope, {}, {}});
    }
    for (auto it = e.body.rbegin(); it != e.body.rend(); ++it) {
      pending_.push_back(derivation::Occurrence{*it, child});
    }
    derivation::Step step;
    step.head = e.head;
    step.body = e.body;
    step.probability = e.probability;
    step.staticIndex = e.staticIndex;
    step.newScope = e.newScope;
    step.registersVariable = e.registersVariable;
    step.registersSolution = e.registersSolution;
    steps_.push_back(std::move(step));
    logProb_ = newLog;
  }

  // In-place equivalent of derivation::context_for (availableSolutions are
  // fixed per derivation, so only the scope-derived fields are rebuilt; the
  // replay test pins equality with the functional path candidate by
  // candidate).
  void rebuildCtx(derivation::ScopeId scope) {
    ctx_.boundVariables.clear();
    ctx_.definedSolutions.clear();
    chain_.clear();
    for (derivation::ScopeId at = scope; at >= 0;
         at = scopes_[static_cast<std::size_t>(at)].parent) {
      chain_.push_back(at);
    }
    std::reverse(chain_.begin(), chain_.end());
    for (derivation::ScopeId id : chain_) {
      const derivation::Scope& s = scopes_[static_cast<std::size_t>(id)];
      for (const std::string& n : s.names) {
        if (std::find(ctx_.boundVariables.begin(), ctx_.boundVariables.end(),
                      n) == ctx_.boundVariables.end()) {
          ctx_.boundVariables.push_back(n);
        }
      }
      for (const std::string& sol : s.solutions) {
        ctx_.definedSolutions.push_back(sol);
      }
    }
    std::sort(ctx_.definedSolutions.begin(), ctx_.definedSolutions.end());
    ctx_.definedSolutions.erase(
        std::unique(ctx_.definedSolutions.begin(), ctx_.definedSolutions.end()),
        ctx_.definedSolutions.end());
  }

  void undo(const derivation::Occurrence& occ, const grammar::Expansion& e) {
    const Trail t = trail_.back();
    trail_.pop_back();
    pending_.resize(pending_.size() - e.body.size());
    pending_.push_back(occ);
    scopes_.resize(t.scopesSize);
    auto& scope = scopes_[static_cast<std::size_t>(occ.scope)];
    scope.names.resize(t.namesSize);
    scope.solutions.resize(t.solutionsSize);
    steps_.pop_back();
    logProb_ = t.logProb;
  }

  const grammar::Scfg& g_;
  const double horizon_;
  const std::function<bool(const Candidate&)>& visit_;
  std::vector<derivation::Occurrence> pending_;  // top of stack = leftmost
  std::vector<derivation::Occurrence> emitted_;
  std::vector<derivation::Scope> scopes_;
  std::vector<derivation::Step> steps_;
  std::vector<Trail> trail_;
  grammar::GenerationContext ctx_;
  std::vector<derivation::ScopeId> chain_;
  double logProb_;
  EnumSummary sum_;
};

}  // namespace

std::string format_event(const PhaseEvent& ev) {
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "phase=%d worker=%d trials=%llu errors=%llu cycles=%llu",
                ev.phase, ev.worker,
                static_cast<unsigned long long>(ev.trials),
                static_cast<unsigned long long>(ev.schemeErrors),
                static_cast<unsigned long long>(ev.cycles));
  return buf;
}

double probability_horizon(std::uint64_t t_q, std::uint64_t t) {
  if (t_q < 1 || t < t_q) {
    throw DomainError("probability_horizon: need t >= t_q >= 1");
  }
  return static_cast<double>(t_q) / static_cast<double>(t);
}

double cjs(double p, std::uint64_t t) {
  if (!(p > 0.0) || p > 1.0 || t == 0) {
    throw DomainError("cjs: need 0 < p <= 1 and t > 0");
  }
  return static_cast<double>(t) / p;
}

double entropy(double p) {
  if (!(p > 0.0) || p > 1.0) {
    throw DomainError("entropy: need 0 < p <= 1");
  }
  return -std::log2(p);
}

EnumSummary enumerate_dfs(const grammar::Scfg& g,
                          const derivation::SententialForm& start,
                          double horizon,
                          const std::function<bool(const Candidate&)>& visit) {
  if (!(horizon > 0.0) || horizon > 1.0) {
    throw DomainError("enumerate_dfs: need 0 < horizon <= 1");
  }
  return Enumerator(g, start, horizon, visit).run();
}

std::vector<std::vector<derivation::SententialForm>> partition_toplevel(
    const grammar::Scfg& g, const derivation::SententialForm& start,
    int nWorkers) {
  if (nWorkers < 1) throw DomainError("partition_toplevel: nWorkers must be >= 1");
  std::vector<derivation::SententialForm> frontier{start};
  const std::size_t want =
      static_cast<std::size_t>(kFrontierFactor) * static_cast<std::size_t>(nWorkers);
  std::size_t expansions = 0;
  while (frontier.size() < want && expansions < kMaxPartitionExpansions) {
    std::size_t best = frontier.size();
    for (std::size_t i = 0; i < frontier.size(); ++i) {
      if (frontier[i].complete()) continue;
      if (best == frontier.size() || frontier[i].logProb > frontier[best].logProb) {
        best = i;
      }
    }
    if (best == frontier.size()) break;  // every form is a complete sentence
    derivation::SententialForm f = std::move(frontier[best]);
    frontier.erase(frontier.begin() + static_cast<std::ptrdiff_t>(best));
    std::vector<grammar::Expansion> exps =
        g.productionsFor(f.symbols[*f.leftmostNt].sym, f.ctx);
    std::stable_sort(exps.begin(), exps.end(),
                     [](const grammar::Expansion& a, const grammar::Expansion& b) {
                       return a.probability > b.probability;
                     });
    ++expansions;
    for (const grammar::Expansion& e : exps) {
      if (!(e.probability > 0.0)) continue;
      frontier.push_back(derivation::expand_leftmost(f, e, g));
    }
    // A nonterminal with no expansion derives nothing; its form is dropped.
  }

  std::stable_sort(frontier.begin(), frontier.end(),
                   [](const derivation::SententialForm& a,
                      const derivation::SententialForm& b) {
                     return a.logProb > b.logProb;
                   });
  std::vector<std::vector<derivation::SententialForm>> out(
      static_cast<std::size_t>(nWorkers));
  std::vector<double> load(static_cast<std::size_t>(nWorkers), 0.0);
  for (derivation::SententialForm& f : frontier) {
    std::size_t w = 0;
    for (std::size_t i = 1; i < load.size(); ++i) {
      if (load[i] < load[w]) w = i;
    }
    load[w] += std::exp2(f.logProb);
    out[w].push_back(std::move(f));
  }
  return out;
}

derivation::SententialForm problem_start_form(
    grammar::Scfg& g, const problems::ProblemSpec& problem,
    const std::vector<grammar::SolutionRef>& solutions) {
  std::vector<std::string> prebound;
  prebound.reserve(static_cast<std::size_t>(problem.arity));
  for (int i = 0; i < problem.arity; ++i) {
    prebound.push_back("var" + std::to_string(i));
  }
  std::vector<std::string> tokens = problem.startTokens;
  if (tokens.empty()) {
    tokens = {"(", "define", "(", problem.id};
    tokens.insert(tokens.end(), prebound.begin(), prebound.end());
    tokens.push_back(")");
    tokens.push_back("<:" + g.text(g.startSymbol()) + ":>");
    tokens.push_back(")");
  }
  std::vector<grammar::SymId> syms;
  syms.reserve(tokens.size());
  for (const std::string& t : tokens) {
    if (t.size() >= 5 && t.starts_with("<:") && t.ends_with(":>")) {
      syms.push_back(g.internNonTerminal(t.substr(2, t.size() - 4)));
    } else {
      syms.push_back(g.internTerminal(t));
    }
  }
  return derivation::make_start_form(g, std::move(syms), std::move(prebound),
                                     solutions);
}

SearchResult levin_search(const grammar::Scfg& g,
                          const problems::ProblemSpec& problem,
                          const SearchConfig& config, const EventSink& onEvent) {
  if (config.quantum < 1 || config.initialLimit < config.quantum) {
    throw DomainError("levin_search: need initialLimit >= quantum >= 1");
  }
  if (config.maxPhases < 1) throw DomainError("levin_search: maxPhases must be >= 1");
  if (config.workers < 1) throw DomainError("levin_search: workers must be >= 1");

  const auto t0 = std::chrono::steady_clock::now();

  // Building the default start form interns the problem's tokens, so that
  // path works on a private copy of the grammar.
  std::optional<grammar::Scfg> owned;
  derivation::SententialForm start;
  if (config.startForm) {
    start = *config.startForm;
  } else {
    owned.emplace(g);
    start = problem_start_form(*owned, problem, {});
  }
  const grammar::Scfg& gg = owned ? *owned : g;

  const std::vector<std::vector<derivation::SententialForm>> parts =
      partition_toplevel(gg, start, config.workers);

  struct WorkerOut {
    std::uint64_t trials = 0, errors = 0, cycles = 0;
    std::vector<Hit> hits;
  };

  SearchResult res;
  std::uint64_t T = config.initialLimit;
  for (int k = 0; k < config.maxPhases; ++k) {
    const double horizon = probability_horizon(config.quantum, T);
    std::vector<WorkerOut> outs(static_cast<std::size_t>(config.workers));

    auto runWorker = [&](int w) {
      WorkerOut& out = outs[static_cast<std::size_t>(w)];
      scheme::Interpreter interp;
      for (const derivation::SententialForm& form :
           parts[static_cast<std::size_t>(w)]) {
        enumerate_dfs(gg, form, horizon, [&](const Candidate& c) {
          const double p = std::exp2(c.logProb);
          std::string text;
          for (const derivation::Occurrence& occ : c.tokens) {
            if (!text.empty()) text += ' ';
            text += gg.text(occ.sym);
          }
          std::uint64_t budget =
              static_cast<std::uint64_t>(p * static_cast<double>(T));
          if (budget < config.quantum) budget = config.quantum;
          const problems::CheckResult r =
              problems::check_solution(interp, text, problem, budget);
          ++out.trials;
          out.cycles += r.cycles;
          if (r.status == problems::CheckStatus::Error) ++out.errors;
          if (r.status == problems::CheckStatus::Pass) {
            out.hits.push_back(Hit{p, std::move(text), c.steps, r.cycles});
          }
          return true;
        });
      }
    };

    if (config.workers == 1) {
      runWorker(0);
    } else {
      std::vector<std::thread> threads;
      threads.reserve(static_cast<std::size_t>(config.workers));
      for (int w = 0; w < config.workers; ++w) threads.emplace_back(runWorker, w);
      for (std::thread& th : threads) th.join();
    }

    for (int w = 0; w < config.workers; ++w) {
      const WorkerOut& out = outs[static_cast<std::size_t>(w)];
      PhaseEvent ev{k, w, out.trials, out.errors, out.cycles};
      res.events.push_back(ev);
      if (onEvent) onEvent(ev);
      res.stats.trials += out.trials;
      res.stats.schemeErrors += out.errors;
      res.stats.cyclesSpent += out.cycles;
    }
    res.stats.maxCycles = T;

    // Winner: highest probability, ties broken by program text; the scan
    // order (workers ascending, discovery order within) never decides
    // between distinct candidates.
    const Hit* best = nullptr;
    for (const WorkerOut& out : outs) {
      for (const Hit& h : out.hits) {
        if (!best || h.probability > best->probability ||
            (h.probability == best->probability && h.text < best->text)) {
          best = &h;
        }
      }
    }
    if (best) {
      res.stats.wallTime = elapsedSeconds(t0);
      SolutionRecord rec;
      rec.problemId = problem.id;
      rec.programText = best->text;
      rec.derivationSteps = best->steps;
      rec.p_i = best->probability;
      rec.t_i = best->t_i;
      rec.stats = res.stats;
      res.solution = std::move(rec);
      return res;
    }
    if (T > std::numeric_limits<std::uint64_t>::max() / 2) break;
    T <<= 1;
  }
  res.stats.wallTime = elapsedSeconds(t0);
  return res;
}

}  // namespace ham::search
