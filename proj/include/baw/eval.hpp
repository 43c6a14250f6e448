#pragma once

// Semantic evaluation over the natural numbers.
//
// Ground truth is plain structural evaluation: quantifiers enumerate their
// bounded range ascending (with short-circuit) under a global cost budget.
// On existential nodes whose range is far beyond any enumeration budget the
// evaluator first tries witness-directed strategies that derive a *complete*
// candidate set from the syntactic shape of the body:
//
//   - a conjunct `v = t` (t free of v) forces the witness;
//   - conjuncts `v <= K` / `S(v) <= K` shrink the effective range;
//   - a disjunctive body yields the union of the branches' candidates;
//   - a variable occurring only as fixed-width blocks `bhat(w, W, i)` is
//     solved by forward propagation: anchored blocks plus step constraints
//     force the remaining blocks, and the packed value is the only possible
//     witness up to bits the body never reads;
//   - a conjunct that is itself an existential block formula mentioning v
//     projects v out of its solved block chain (`t(block) = v`).
//
// Every candidate a strategy produces is then *certified* by evaluating the
// original body with the candidate substituted, so truth never depends on
// the strategy analysis being right — only completeness does, and each
// strategy's completeness is a local syntactic fact (see the notes at each
// site).  When no strategy applies, the evaluator enumerates, and if the
// range exceeds the budget it raises an error rather than guessing.

#include <baw/ast.hpp>

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace baw {

using Environment = std::map<std::string, Nat>;

class eval_error : public std::runtime_error {
 public:
  explicit eval_error(const std::string& what) : std::runtime_error(what) {}
};

class budget_error : public std::runtime_error {
 public:
  budget_error(const Nat& limit, const std::string& where)
      : std::runtime_error("evaluation budget of " + limit.str() +
                           " steps exhausted in " + where) {}
};

struct CostBudget {
  Nat limit = Nat(100000000);
  Nat used = 0;
  void tick(const char* where = "quantifier enumeration") {
    ++used;
    if (used > limit) throw budget_error(limit, where);
  }
};

namespace detail {

// Shared subtrees (expansions reuse argument nodes freely) are evaluated once
// per call by caching on node identity; the environment is fixed for the
// duration of a single eval_term call.
inline Nat eval_term_memo(const TermPtr& t, const Environment& env,
                          std::map<const Term*, Nat>& cache) {
  if (!t->args.empty()) {
    auto hit = cache.find(t.get());
    if (hit != cache.end()) return hit->second;
  }
  auto ev = [&](std::size_t k) { return eval_term_memo(t->args[k], env, cache); };
  Nat out;
  switch (t->op) {
    case TermOp::zero: out = 0; break;
    case TermOp::lit: out = t->value; break;
    case TermOp::var: {
      auto it = env.find(t->name);
      if (it == env.end()) throw eval_error("unbound variable '" + t->name + "'");
      out = it->second;
      break;
    }
    case TermOp::succ: out = ev(0) + 1; break;
    case TermOp::add: out = ev(0) + ev(1); break;
    case TermOp::mul: out = ev(0) * ev(1); break;
    case TermOp::monus: out = monus(ev(0), ev(1)); break;
    case TermOp::half: out = half(ev(0)); break;
    case TermOp::len: out = len(ev(0)); break;
    case TermOp::pad: out = pad(ev(0), ev(1)); break;
    case TermOp::msp: out = msp(ev(0), ev(1)); break;
    case TermOp::smash: out = smash(ev(0), ev(1)); break;
    case TermOp::bit: out = bit(ev(0), ev(1)); break;
    case TermOp::lsp: out = lsp(ev(0), ev(1)); break;
    case TermOp::bhat: out = bhat(ev(1), ev(2), ev(0)); break;
    case TermOp::cond: out = cond(ev(0), ev(1), ev(2)); break;
    case TermOp::tmax: out = nat_max(ev(0), ev(1)); break;
    case TermOp::tmin: out = nat_min(ev(0), ev(1)); break;
    case TermOp::tpair: out = pair_code(ev(0), ev(1)); break;
    case TermOp::ell: out = ell_eps(t->eps, ev(0)); break;
    default: throw std::logic_error("eval_term: unreachable");
  }
  if (!t->args.empty()) cache.emplace(t.get(), out);
  return out;
}

}  // namespace detail

inline Nat eval_term(const TermPtr& t, const Environment& env) {
  std::map<const Term*, Nat> cache;
  return detail::eval_term_memo(t, env, cache);
}

namespace detail {

inline void flatten_and(const FormulaPtr& f, std::vector<FormulaPtr>& out) {
  if (f->op == FormulaOp::fand) {
    flatten_and(f->a, out);
    flatten_and(f->b, out);
  } else {
    out.push_back(f);
  }
}

inline bool is_var(const TermPtr& t, const std::string& name) {
  return t->op == TermOp::var && t->name == name;
}

// Every occurrence of `name` inside t must be the packed argument of a
// bhat(name, W, I) node whose width and index are free of `name`.  "ok"
// caches positive answers so shared subterms are checked once.
inline bool blocks_only_rec(const TermPtr& t, const std::string& name,
                            std::unordered_set<const Term*>& ok) {
  if (ok.count(t.get())) return true;
  bool res;
  if (t->op == TermOp::var) {
    res = t->name != name;
  } else if (t->op == TermOp::bhat && is_var(t->args[0], name)) {
    res = !contains_var(t->args[1], name) && !contains_var(t->args[2], name);
  } else {
    res = true;
    for (const auto& a : t->args)
      if (!blocks_only_rec(a, name, ok)) {
        res = false;
        break;
      }
  }
  if (res) ok.insert(t.get());
  return res;
}

inline bool blocks_only(const TermPtr& t, const std::string& name) {
  std::unordered_set<const Term*> ok;
  return blocks_only_rec(t, name, ok);
}

inline bool blocks_only(const FormulaPtr& f, const std::string& name) {
  switch (f->op) {
    case FormulaOp::eq:
    case FormulaOp::leq:
      return blocks_only(f->lhs, name) && blocks_only(f->rhs, name);
    case FormulaOp::fnot:
      return blocks_only(f->a, name);
    case FormulaOp::fand:
    case FormulaOp::forr:
    case FormulaOp::imp:
      return blocks_only(f->a, name) && blocks_only(f->b, name);
    case FormulaOp::exists:
    case FormulaOp::forall:
      if (f->var == name) return false;  // shadowing: stay out of the solver
      return blocks_only(f->bound, name) && blocks_only(f->body, name);
  }
  return false;
}

class Evaluator {
 public:
  explicit Evaluator(CostBudget& budget) : budget_(budget) {}

  bool eval(const FormulaPtr& f, const Environment& env) {
    switch (f->op) {
      case FormulaOp::eq:
        return eval_term(f->lhs, env) == eval_term(f->rhs, env);
      case FormulaOp::leq:
        return eval_term(f->lhs, env) <= eval_term(f->rhs, env);
      case FormulaOp::fnot:
        return !eval(f->a, env);
      case FormulaOp::fand:
        return eval(f->a, env) && eval(f->b, env);
      case FormulaOp::forr:
        return eval(f->a, env) || eval(f->b, env);
      case FormulaOp::imp:
        return !eval(f->a, env) || eval(f->b, env);
      case FormulaOp::exists:
        return eval_exists(f, env);
      case FormulaOp::forall:
        return eval_forall(f, env);
    }
    throw std::logic_error("eval: unreachable");
  }

  // All v <= vmax satisfying body, ascending without duplicates.
  std::vector<Nat> witnesses(const FormulaPtr& body, const std::string& v,
                             Nat vmax, const Environment& env) {
    std::vector<FormulaPtr> conj;
    flatten_and(body, conj);
    vmax = shrink_exists(conj, v, vmax, env);
    std::vector<Nat> out;
    if (auto plan = plan_for(body, v, vmax, env)) {
      std::sort(plan->begin(), plan->end());
      plan->erase(std::unique(plan->begin(), plan->end()), plan->end());
      for (const Nat& cand : *plan) {
        if (cand > vmax) continue;
        budget_.tick("witness certification");
        Environment e2 = env;
        e2[v] = cand;
        if (eval(body, e2)) out.push_back(cand);
      }
      return out;
    }
#ifdef BAW_DEBUG_FALLBACK
    if (vmax > 1000)
      std::fprintf(stderr, "[fallback] witnesses v=%s vmax=%s op=%d\n",
                   v.c_str(), vmax.str().c_str(), static_cast<int>(body->op));
#endif
    Environment e2 = env;
    for (Nat val = 0; val <= vmax; ++val) {
      budget_.tick();
      e2[v] = val;
      if (eval(body, e2)) out.push_back(val);
    }
    return out;
  }

 private:
  CostBudget& budget_;
  unsigned chain_seq_ = 0;  // distinguishes nested chains' block placeholders
  static constexpr int fork_cap = 64;
  static constexpr std::uint64_t peel_cap = 200000;

  // --- range shrinking ----------------------------------------------------

  // Existential: a top-level conjunct v <= K or S(v) <= K (K free of v)
  // restricts every witness; the conjunct itself stays in the body.
  Nat shrink_exists(const std::vector<FormulaPtr>& conj, const std::string& v,
                    Nat vmax, const Environment& env) {
    for (const auto& c : conj) {
      if (c->op != FormulaOp::leq) continue;
      if (contains_var(c->rhs, v)) continue;
      std::optional<Nat> cap;
      if (is_var(c->lhs, v)) {
        cap = eval_term(c->rhs, env);
      } else if (c->lhs->op == TermOp::succ && is_var(c->lhs->args[0], v)) {
        cap = monus(eval_term(c->rhs, env), 1);
      }
      if (cap && *cap < vmax) vmax = *cap;
    }
    return vmax;
  }

  // Universal: a guard (v <= K -> ...) or (S(v) <= K -> ...) makes every
  // value beyond the guard vacuously true.
  Nat shrink_forall(const FormulaPtr& body, const std::string& v, Nat vmax,
                    const Environment& env) {
    if (body->op != FormulaOp::imp || body->a->op != FormulaOp::leq) return vmax;
    const FormulaPtr& g = body->a;
    if (contains_var(g->rhs, v)) return vmax;
    std::optional<Nat> cap;
    if (is_var(g->lhs, v)) {
      cap = eval_term(g->rhs, env);
    } else if (g->lhs->op == TermOp::succ && is_var(g->lhs->args[0], v)) {
      cap = monus(eval_term(g->rhs, env), 1);
    }
    if (cap && *cap < vmax) vmax = *cap;
    return vmax;
  }

  // --- quantifier evaluation ---------------------------------------------

  bool eval_exists(const FormulaPtr& f, const Environment& env) {
    Nat vmax = eval_term(f->bound, env);
    std::vector<FormulaPtr> conj;
    flatten_and(f->body, conj);
    vmax = shrink_exists(conj, f->var, vmax, env);
    if (auto plan = plan_for(f->body, f->var, vmax, env)) {
      std::sort(plan->begin(), plan->end());
      plan->erase(std::unique(plan->begin(), plan->end()), plan->end());
      Environment e2 = env;
      for (const Nat& cand : *plan) {
        if (cand > vmax) continue;
        budget_.tick("witness certification");
        e2[f->var] = cand;
        if (eval(f->body, e2)) return true;
      }
      return false;
    }
#ifdef BAW_DEBUG_FALLBACK
    if (vmax > 1000)
      std::fprintf(stderr, "[fallback] exists v=%s vmax=%s\n", f->var.c_str(),
                   vmax.str().c_str());
#endif
    Environment e2 = env;
    for (Nat val = 0; val <= vmax; ++val) {
      budget_.tick();
      e2[f->var] = val;
      if (eval(f->body, e2)) return true;
    }
    return false;
  }

  bool eval_forall(const FormulaPtr& f, const Environment& env) {
    Nat vmax = eval_term(f->bound, env);
    vmax = shrink_forall(f->body, f->var, vmax, env);
    Environment e2 = env;
    for (Nat val = 0; val <= vmax; ++val) {
      budget_.tick();
      e2[f->var] = val;
      if (!eval(f->body, e2)) return false;
    }
    return true;
  }

  // --- candidate planning -------------------------------------------------

  // A returned plan is a *complete* candidate set: every witness <= vmax is
  // in it (candidates above vmax or failing certification are discarded).
  std::optional<std::vector<Nat>> plan_for(const FormulaPtr& body,
                                           const std::string& v, const Nat& vmax,
                                           const Environment& env) {
    std::vector<FormulaPtr> conj;
    flatten_and(body, conj);

    // Forced equality: witnesses(body) is a subset of witnesses of each
    // conjunct, and `v = t` has exactly one.
    for (const auto& c : conj) {
      if (c->op != FormulaOp::eq) continue;
      if (is_var(c->lhs, v) && !contains_var(c->rhs, v))
        return std::vector<Nat>{eval_term(c->rhs, env)};
      if (is_var(c->rhs, v) && !contains_var(c->lhs, v))
        return std::vector<Nat>{eval_term(c->lhs, env)};
    }

    // A disjunctive conjunct mentioning v: the union of the branches'
    // complete sets covers the conjunct, hence the body.
    for (const auto& c : conj) {
      if (c->op != FormulaOp::forr) continue;
      if (!free_vars(c).count(v)) continue;
      std::vector<FormulaPtr> branches;
      std::vector<Nat> acc;
      flatten_or(c, branches);
      bool ok = true;
      for (const auto& br : branches) {
        auto sub = plan_for(br, v, vmax, env);
        if (!sub) {
          ok = false;
          break;
        }
        acc.insert(acc.end(), sub->begin(), sub->end());
      }
      if (ok) return acc;
    }

    // A conjunct that is an existential block formula mentioning v: project
    // v out of its solved chain.
    for (const auto& c : conj) {
      if (c->op != FormulaOp::exists) continue;
      if (!free_vars(c).count(v)) continue;
      if (auto got = chain_project(c, v, env)) return got;
    }

    // The body constrains v only through fixed-width blocks: solve for the
    // packed value directly.
    bool pure_blocks = true;
    for (const auto& c : conj) {
      if (!blocks_only(c, v)) {
        pure_blocks = false;
        break;
      }
    }
    if (pure_blocks) {
      if (auto got = chain_solve(conj, v, vmax, "", env)) {
        std::vector<Nat> out;
        for (auto& pr : *got) out.push_back(pr.first);
        return out;
      }
    }
    return std::nullopt;
  }

  static void flatten_or(const FormulaPtr& f, std::vector<FormulaPtr>& out) {
    if (f->op == FormulaOp::forr) {
      flatten_or(f->a, out);
      flatten_or(f->b, out);
    } else {
      out.push_back(f);
    }
  }

  // --- chain solving ------------------------------------------------------

  struct Instance {
    FormulaPtr f;
    Environment local;        // peeled universal variables
    FormulaPtr rw;            // f with every block read replaced by a placeholder
    std::vector<Nat> blocks;  // sorted unique block indices f reads
    bool uses_target = false;
  };

  struct Rewritten {
    std::vector<Nat> unknown;  // block indices encountered
    bool ok = true;
  };

  // chain_project: body conjunct `exists w <= B (...)` containing v; solve
  // the w-chain treating v as the output of its `t(blocks) = v` equation.
  // Completeness: the chain forces w's referenced blocks from v-free
  // constraints, so any v making the conjunct true must equal the recorded
  // output of some solved path.
  std::optional<std::vector<Nat>> chain_project(const FormulaPtr& ex,
                                                const std::string& v,
                                                const Environment& env) {
    Nat wmax = eval_term(ex->bound, env);
    std::vector<FormulaPtr> conj;
    flatten_and(ex->body, conj);
    auto got = chain_solve(conj, ex->var, wmax, v, env);
    if (!got) return std::nullopt;
    std::vector<Nat> out;
    for (auto& pr : *got) {
      if (!pr.second) return std::nullopt;  // a path left v unconstrained
      out.push_back(*pr.second);
    }
    return out;
  }

  // Solve for w given the conjunct list of its body.  Returns one entry per
  // consistent assignment path: the packed value and, in target mode, the
  // forced output for the target variable.  std::nullopt means the analysis
  // does not apply (caller falls back); an empty vector is a definite "no
  // witness".
  using ChainResult = std::vector<std::pair<Nat, std::optional<Nat>>>;

  // Per-invocation chain state: uniform block width, fork count, and the
  // placeholder prefix for unresolved blocks.  The prefix is unique per
  // chain_solve call: instance evaluation can recursively start nested
  // chains, and a shared scheme like "$blk1" would conflate an inner block
  // with an outer placeholder of the same index (in particular with the
  // outer chain's projection target, wedging the inner analysis).
  struct ChainCtx {
    std::optional<Nat> width;
    int forks = 0;
    std::string prefix;
  };

  std::optional<ChainResult> chain_solve(const std::vector<FormulaPtr>& conj,
                                         const std::string& w, const Nat& wmax,
                                         const std::string& target,
                                         const Environment& env) {
    // Build atomic instances by peeling universal prefixes.
    std::vector<Instance> pending;
    for (const auto& c : conj) {
      if (!blocks_only(c, w)) return std::nullopt;
      if (!free_vars(c).count(w)) continue;  // handled at certification
      if (!expand_instances(c, env, Environment{}, pending)) return std::nullopt;
    }
    if (pending.empty()) return std::nullopt;

    ChainCtx ctx;
    ctx.prefix = "$blk" + std::to_string(++chain_seq_) + "_";
    // Rewrite each instance once up front; the solver then only shuffles the
    // known/unknown split, feeding known block values through the
    // environment.  Re-rewriting per propagation sweep would copy the (large)
    // guard formulas thousands of times.
    for (auto& inst : pending) {
      Environment merged = env;
      for (auto& kv : inst.local) merged[kv.first] = kv.second;
      RewriteState st;
      inst.rw = rewrite_formula(ctx, inst.f, w, merged, st);
      if (!st.info.ok) return std::nullopt;
      std::sort(st.info.unknown.begin(), st.info.unknown.end());
      st.info.unknown.erase(
          std::unique(st.info.unknown.begin(), st.info.unknown.end()),
          st.info.unknown.end());
      inst.blocks = std::move(st.info.unknown);
      inst.uses_target = !target.empty() && free_vars(inst.rw).count(target) != 0;
    }
    ChainResult results;
    if (!chain_run(ctx, pending, {}, std::nullopt, w, wmax, target, env, results))
      return std::nullopt;
    return results;
  }

  bool expand_instances(const FormulaPtr& f, const Environment& env,
                        Environment local, std::vector<Instance>& out) {
    if (f->op == FormulaOp::forall) {
      Environment merged = env;
      for (auto& kv : local) merged[kv.first] = kv.second;
      Nat ub = eval_term(f->bound, merged);
      Nat capped = ub;
      // A guard can make most of the range vacuous; shrink as in eval.
      capped = shrink_forall(f->body, f->var, capped, merged);
      if (capped + 1 > peel_cap) return false;
      for (Nat u = 0; u <= capped; ++u) {
        Environment next = local;
        next[f->var] = u;
        if (!expand_instances(f->body, env, next, out)) return false;
      }
      return true;
    }
    if (f->op == FormulaOp::fand) {
      return expand_instances(f->a, env, local, out) &&
             expand_instances(f->b, env, local, out);
    }
    out.push_back(Instance{f, std::move(local)});
    return true;
  }

  // State for rewriting one instance under its fixed environment.  Built
  // formulas are heavily shared DAGs (tuple/projection encodings replicate
  // each block read dozens of times); `memo` keeps the rewrite a DAG walk and
  // preserves that sharing in the output -- a naive rebuild would explode the
  // DAG into a tree and every later evaluation of the instance would pay the
  // tree size.  `cache` carries evaluated block widths/indices, which repeat
  // across reads.  Memo keys stay alive through the instance's formula.
  struct RewriteState {
    Rewritten info;
    std::map<const Term*, Nat> cache;
    std::unordered_map<const Term*, TermPtr> memo;
  };

  TermPtr rewrite_term(ChainCtx& ctx, const TermPtr& t, const std::string& w,
                       const Environment& env, RewriteState& st) {
    if (auto hit = st.memo.find(t.get()); hit != st.memo.end())
      return hit->second;
    TermPtr out;
    if (t->op == TermOp::bhat && is_var(t->args[0], w)) {
      Nat width = eval_term_memo(t->args[1], env, st.cache);
      if (ctx.width && *ctx.width != width) {
        st.info.ok = false;
        return t;
      }
      ctx.width = width;
      Nat idx = eval_term_memo(t->args[2], env, st.cache);
      st.info.unknown.push_back(idx);
      out = t_var(ctx.prefix + idx.str());
    } else if (t->op == TermOp::var && t->name == w) {
      st.info.ok = false;
      return t;
    } else if (t->args.empty()) {
      out = t;
    } else {
      std::vector<TermPtr> args;
      args.reserve(t->args.size());
      bool changed = false;
      for (const auto& a : t->args) {
        args.push_back(rewrite_term(ctx, a, w, env, st));
        changed = changed || args.back() != a;
      }
      if (changed) {
        auto fresh = std::make_shared<Term>(*t);
        fresh->args = std::move(args);
        out = fresh;
      } else {
        out = t;
      }
    }
    st.memo.emplace(t.get(), out);
    return out;
  }

  FormulaPtr rewrite_formula(ChainCtx& ctx, const FormulaPtr& f,
                             const std::string& w, const Environment& env,
                             RewriteState& st) {
    switch (f->op) {
      case FormulaOp::eq:
      case FormulaOp::leq: {
        auto out = std::make_shared<Formula>(*f);
        out->lhs = rewrite_term(ctx, f->lhs, w, env, st);
        out->rhs = rewrite_term(ctx, f->rhs, w, env, st);
        return out;
      }
      case FormulaOp::fnot: {
        auto out = std::make_shared<Formula>(*f);
        out->a = rewrite_formula(ctx, f->a, w, env, st);
        return out;
      }
      case FormulaOp::fand:
      case FormulaOp::forr:
      case FormulaOp::imp: {
        auto out = std::make_shared<Formula>(*f);
        out->a = rewrite_formula(ctx, f->a, w, env, st);
        out->b = rewrite_formula(ctx, f->b, w, env, st);
        return out;
      }
      case FormulaOp::exists:
      case FormulaOp::forall: {
        auto out = std::make_shared<Formula>(*f);
        out->bound = rewrite_term(ctx, f->bound, w, env, st);
        out->body = rewrite_formula(ctx, f->body, w, env, st);
        return out;
      }
    }
    throw std::logic_error("rewrite_formula: unreachable");
  }

  static Nat pack_blocks(const std::map<Nat, Nat>& knowns, const Nat& width) {
    Nat acc = 0;
    std::size_t wbits = checked_shift(width, "pack_blocks");
    for (const auto& kv : knowns) {
      Nat offset = kv.first * wbits;
      acc |= kv.second << checked_shift(offset, "pack_blocks");
    }
    return acc;
  }

  // Environment for one instance under the current knowns: peeled locals
  // plus values for the instance's already-known block placeholders.  The
  // still-unknown indices land in `unknown`.
  Environment instance_env(const ChainCtx& ctx, const Instance& inst,
                           const std::map<Nat, Nat>& knowns,
                           const Environment& env,
                           std::vector<Nat>& unknown) const {
    Environment merged = env;
    for (auto& kv : inst.local) merged[kv.first] = kv.second;
    unknown.clear();
    for (const Nat& idx : inst.blocks) {
      auto it = knowns.find(idx);
      if (it != knowns.end())
        merged[ctx.prefix + idx.str()] = it->second;
      else
        unknown.push_back(idx);
    }
    return merged;
  }

  bool chain_run(ChainCtx& ctx, std::vector<Instance> pending,
                 std::map<Nat, Nat> knowns, std::optional<Nat> output,
                 const std::string& w, const Nat& wmax,
                 const std::string& target, const Environment& env,
                 ChainResult& results) {
    // Phase 1: propagate to a fixpoint using only deterministic moves --
    // fully-known conjuncts certify (or record the target output), and a
    // bare block equal to a known term is forced.  Forking is deferred: a
    // conjunct that merely *constrains* a block must not be enumerated while
    // another conjunct can still force that block outright.
    std::vector<Nat> unknown;
    bool progressed = true;
    while (progressed && !pending.empty()) {
      progressed = false;
      for (std::size_t k = 0; k < pending.size(); ++k) {
        budget_.tick("block-chain propagation");
        Environment merged = instance_env(ctx, pending[k], knowns, env, unknown);
        FormulaPtr g = pending[k].rw;  // owning: g outlives the erase below
        bool has_target = pending[k].uses_target;

        if (unknown.empty()) {
          if (has_target) {
            // Output equation t(blocks) = target: blocks known, so the value
            // is forced.  Other target-bearing conjuncts wait for
            // certification.
            if (g->op == FormulaOp::eq) {
              const bool l = is_var(g->lhs, target);
              const bool r = is_var(g->rhs, target);
              if (l && !contains_var(g->rhs, target)) {
                Nat val = eval_term(g->rhs, merged);
                if (output && *output != val) return drop_path();
                output = val;
              } else if (r && !contains_var(g->lhs, target)) {
                Nat val = eval_term(g->lhs, merged);
                if (output && *output != val) return drop_path();
                output = val;
              }
            }
            pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(k));
          } else {
            if (!eval(g, merged)) return drop_path();
            pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(k));
          }
          progressed = true;
          --k;
          continue;
        }

        if (unknown.size() == 1 && !has_target && g->op == FormulaOp::eq) {
          // Direct anchor: bare block equals an evaluable term.
          const Nat idx = unknown[0];
          const std::string blk = ctx.prefix + idx.str();
          std::optional<Nat> forced;
          if (is_var(g->lhs, blk) && !contains_var(g->rhs, blk))
            forced = eval_term(g->rhs, merged);
          else if (is_var(g->rhs, blk) && !contains_var(g->lhs, blk))
            forced = eval_term(g->lhs, merged);
          if (forced) {
            Nat cap = *ctx.width == 0 ? Nat(0) : Nat(pow2(*ctx.width) - 1);
            if (*forced > cap) return drop_path();  // block cannot hold it
            knowns[idx] = *forced;
            pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(k));
            progressed = true;
            --k;
            continue;
          }
        }
        // Several unknowns, target-entangled, or not forcible here: wait.
      }
    }

    if (pending.empty()) {
      Nat packed = knowns.empty() ? Nat(0) : pack_blocks(knowns, *ctx.width);
      if (packed > wmax) return drop_path();  // minimal witness already too big
      results.emplace_back(packed, output);
      return true;
    }

    // Phase 2: the fixpoint left work.  Fork on one conjunct that constrains
    // exactly one block, enumerating that block's consistent values
    // recursively (complete by witnesses' contract).  Existential conjuncts
    // go first: their block is usually the projected output of a nested
    // chain, so the candidate set is found directly, whereas forking an
    // equation whose unknown sits under decoding terms degrades to scanning
    // the whole block range.
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < pending.size(); ++k) {
        if ((pending[k].f->op == FormulaOp::exists) != (pass == 0)) continue;
        Environment merged = instance_env(ctx, pending[k], knowns, env, unknown);
        FormulaPtr g = pending[k].rw;  // owning: g outlives the erase below
        if (unknown.size() != 1 || pending[k].uses_target) continue;
        const Nat idx = unknown[0];
        const std::string blk = ctx.prefix + idx.str();
        Nat cap = *ctx.width == 0 ? Nat(0) : Nat(pow2(*ctx.width) - 1);
        std::vector<Nat> cands = witnesses(g, blk, cap, merged);
        if (static_cast<int>(cands.size()) > fork_cap) return false;
        pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(k));
        if (++ctx.forks > 4 * fork_cap) return false;
        for (const Nat& cand : cands) {
          std::map<Nat, Nat> next = knowns;
          next[idx] = cand;
          if (!chain_run(ctx, pending, std::move(next), output, w, wmax,
                         target, env, results))
            return false;
        }
        return true;  // all continuations explored
      }
    }
    return false;  // stuck: analysis incomplete
  }

  static bool drop_path() { return true; }  // definite dead end, keep going
};

}  // namespace detail

inline bool eval_formula(const FormulaPtr& f, const Environment& env,
                         CostBudget& budget) {
  detail::Evaluator ev(budget);
  return ev.eval(f, env);
}

inline bool eval_formula(const FormulaPtr& f, const Environment& env) {
  CostBudget budget;
  return eval_formula(f, env, budget);
}

// All values v <= bound making body true, ascending.
inline std::vector<Nat> find_witnesses(const FormulaPtr& body,
                                       const std::string& var, const Nat& bound,
                                       const Environment& env,
                                       CostBudget& budget) {
  detail::Evaluator ev(budget);
  return ev.witnesses(body, var, bound, env);
}

inline std::vector<Nat> find_witnesses(const FormulaPtr& body,
                                       const std::string& var,
                                       const Nat& bound,
                                       const Environment& env) {
  CostBudget budget;
  return find_witnesses(body, var, bound, env, budget);
}

// Exactly one witness in range?
inline bool check_unique(const FormulaPtr& body, const std::string& var,
                         const Nat& bound, const Environment& env,
                         CostBudget& budget) {
  return find_witnesses(body, var, bound, env, budget).size() == 1;
}

inline bool check_unique(const FormulaPtr& body, const std::string& var,
                         const Nat& bound, const Environment& env) {
  CostBudget budget;
  return check_unique(body, var, bound, env, budget);
}

}  // namespace baw
