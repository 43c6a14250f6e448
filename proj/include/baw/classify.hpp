#pragma once

// Shape recognizers (step / iteration / accept-state / query-step schemas) and
// the class-lattice labeler: hat-Sigma/Pi indices, E/U prenex indices, prenex
// G-classes, hierarchy levels for nested iterations, and growth-family checks.

#include <baw/schema.hpp>

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

namespace baw {

// --- sharply bounded quantifier patterns ----------------------------------
//
// A bound counts as length-small when its root is len, an epsilon-power node
// ell(e, t), or a min with a length-small argument.  These are the bound
// shapes that cannot exceed a length-style term, so quantifiers over them do
// not add alternation strength.
inline bool is_sharp_bound(const TermPtr& t) {
  switch (t->op) {
    case TermOp::len:
    case TermOp::ell:
      return true;
    case TermOp::tmin:
      return is_sharp_bound(t->args[0]) || is_sharp_bound(t->args[1]);
    default:
      return false;
  }
}

inline bool is_open(const FormulaPtr& f) {
  switch (f->op) {
    case FormulaOp::eq:
    case FormulaOp::leq:
      return true;
    case FormulaOp::fnot:
      return is_open(f->a);
    case FormulaOp::fand:
    case FormulaOp::forr:
    case FormulaOp::imp:
      return is_open(f->a) && is_open(f->b);
    default:
      return false;
  }
}

inline bool is_sharply_bounded(const FormulaPtr& f) {
  switch (f->op) {
    case FormulaOp::eq:
    case FormulaOp::leq:
      return true;
    case FormulaOp::fnot:
      return is_sharply_bounded(f->a);
    case FormulaOp::fand:
    case FormulaOp::forr:
    case FormulaOp::imp:
      return is_sharply_bounded(f->a) && is_sharply_bounded(f->b);
    case FormulaOp::exists:
    case FormulaOp::forall:
      return is_sharp_bound(f->bound) && is_sharply_bounded(f->body);
  }
  return false;
}

// --- right-spine flattening ------------------------------------------------
//
// N-ary conjunctions and disjunctions are emitted as right-nested chains, so
// walking the right spine recovers the part list.  Left children stay intact
// even when they are themselves and/or nodes; only the terminal part can be
// over-flattened, which callers repair by re-folding a tail slice (re-folding
// a right spine is the identity).
inline std::vector<FormulaPtr> spine(const FormulaPtr& f, FormulaOp op) {
  std::vector<FormulaPtr> parts;
  FormulaPtr cur = f;
  while (cur->op == op) {
    parts.push_back(cur->a);
    cur = cur->b;
  }
  parts.push_back(cur);
  return parts;
}

inline FormulaPtr refold(const std::vector<FormulaPtr>& parts, std::size_t lo,
                         std::size_t hi) {
  FormulaPtr out = parts[hi - 1];
  for (std::size_t i = hi - 1; i > lo; --i) out = f_and(parts[i - 1], out);
  return out;
}

// --- hat-index recursion ---------------------------------------------------
//
// (sigma, pi) = minimal indices of the alternation classes containing f,
// counting only non-sharp quantifiers; sharp quantifiers are transparent.
inline std::pair<unsigned, unsigned> hat_indices(const FormulaPtr& f) {
  switch (f->op) {
    case FormulaOp::eq:
    case FormulaOp::leq:
      return {0, 0};
    case FormulaOp::fnot: {
      auto [s, p] = hat_indices(f->a);
      return {p, s};
    }
    case FormulaOp::fand:
    case FormulaOp::forr: {
      auto [sa, pa] = hat_indices(f->a);
      auto [sb, pb] = hat_indices(f->b);
      return {std::max(sa, sb), std::max(pa, pb)};
    }
    case FormulaOp::imp: {
      auto [sa, pa] = hat_indices(f->a);
      auto [sb, pb] = hat_indices(f->b);
      return {std::max(pa, sb), std::max(sa, pb)};
    }
    case FormulaOp::exists: {
      auto [sb, pb] = hat_indices(f->body);
      if (is_sharp_bound(f->bound)) return {sb, pb};
      unsigned s = std::min(std::max(sb, 1u), pb + 1);
      return {s, s + 1};
    }
    case FormulaOp::forall: {
      auto [sb, pb] = hat_indices(f->body);
      if (is_sharp_bound(f->bound)) return {sb, pb};
      unsigned p = std::min(std::max(pb, 1u), sb + 1);
      return {p + 1, p};
    }
  }
  return {0, 0};
}

// --- strict prenex E/U indices ---------------------------------------------
//
// E_1 / U_1 are a single bounded quantifier over an open matrix; E_{i+1} is a
// bounded exists over a U_i formula and dually, so the quantifier kinds must
// alternate strictly.  Open formulas carry index 0 on both sides.
// innermost_sharp records whether the deepest quantifier of the chain is
// sharply bounded (the side condition for the prenex G-classes).
struct PrenexInfo {
  bool prenex = false;  // quantifier chain over an open matrix
  std::optional<unsigned> e, u;
  bool innermost_sharp = false;
};

inline PrenexInfo prenex_info(const FormulaPtr& f) {
  PrenexInfo out;
  if (is_open(f)) {
    out.prenex = true;
    out.e = 0;
    out.u = 0;
    return out;
  }
  if (f->op == FormulaOp::exists || f->op == FormulaOp::forall) {
    PrenexInfo body = prenex_info(f->body);
    if (!body.prenex) return out;
    out.prenex = true;
    out.innermost_sharp =
        is_open(f->body) ? is_sharp_bound(f->bound) : body.innermost_sharp;
    if (f->op == FormulaOp::exists) {
      if (body.u) out.e = *body.u + 1;
    } else {
      if (body.e) out.u = *body.e + 1;
    }
    return out;
  }
  return out;
}

// --- growth-family (tau) checks -------------------------------------------

namespace detail {

inline bool tau_holds(const TermPtr& ell, const std::string& zvar,
                      const std::string& family) {
  auto grid = growth_grid();
  auto value = [&](const Nat& z) {
    return eval_term(ell, Environment{{zvar, z}});
  };
  if (family == "|id|") {
    for (const Nat& z : grid)
      if (value(z) > len(z)) return false;
    return true;
  }
  if (family == "p(|id|)") {
    for (unsigned d = 1; d <= 16; ++d) {
      for (Nat c = 1; c <= Nat(1) << 16; c <<= 2) {
        bool ok = true;
        for (const Nat& z : grid) {
          Nat base = len(z) + 1, p = 1;
          for (unsigned k = 0; k < d; ++k) p *= base;
          if (value(z) > c * p) {
            ok = false;
            break;
          }
        }
        if (ok) return true;
      }
    }
    return false;
  }
  if (family == "2^(p(||id||))") {
    for (unsigned d = 1; d <= 8; ++d) {
      for (Nat c = 1; c <= Nat(1) << 8; c <<= 2) {
        bool ok = true;
        for (const Nat& z : grid) {
          Nat base = lenlen(z) + 1, p = 1;
          for (unsigned k = 0; k < d; ++k) p *= base;
          // v <= 2^e iff |v| <= e + 1
          if (len(value(z)) > c * p + 1) {
            ok = false;
            break;
          }
        }
        if (ok) return true;
      }
    }
    return false;
  }
  return false;
}

}  // namespace detail

// Smallest stock family whose numeric domination test the growth term passes,
// or "none".
inline std::string tau_family(const TermPtr& ell, const std::string& zvar = "z") {
  for (const char* fam : {"|id|", "p(|id|)", "2^(p(||id||))"})
    if (detail::tau_holds(ell, zvar, fam)) return fam;
  return "none";
}

inline bool tau_dominated(const TermPtr& ell, const std::string& family,
                          const std::string& zvar = "z") {
  return detail::tau_holds(ell, zvar, family);
}

// --- matchers --------------------------------------------------------------

namespace detail {

inline void all_vars(const FormulaPtr& f, std::set<std::string>& out) {
  switch (f->op) {
    case FormulaOp::eq:
    case FormulaOp::leq:
      collect_vars(f->lhs, out);
      collect_vars(f->rhs, out);
      return;
    case FormulaOp::fnot:
      all_vars(f->a, out);
      return;
    case FormulaOp::fand:
    case FormulaOp::forr:
    case FormulaOp::imp:
      all_vars(f->a, out);
      all_vars(f->b, out);
      return;
    case FormulaOp::exists:
    case FormulaOp::forall:
      out.insert(f->var);
      collect_vars(f->bound, out);
      all_vars(f->body, out);
      return;
  }
}

// Distinct subterms in preorder; used as anti-substitution candidates.
inline void subterms_preorder(const TermPtr& t, std::vector<TermPtr>& out) {
  for (const auto& s : out)
    if (equal(s, t)) return;  // children already collected at first occurrence
  out.push_back(t);
  for (const auto& a : t->args) subterms_preorder(a, out);
}

}  // namespace detail

// Recognize the disjunction-of-clauses step shape and recover the schema.
// Substitution instances where the configuration variable was replaced by a
// term are accepted (cvar comes back empty); the successor position must be a
// variable.  eps and the certificate are not part of the formula, so the
// matcher refits a default certificate for the recovered growth term.
inline std::optional<StepSchema> match_steppable(const FormulaPtr& f,
                                                 const std::string& zvar = "z") {
  std::vector<FormulaPtr> clauses = spine(f, FormulaOp::forr);
  const std::size_t n = clauses.size();
  std::vector<TermPtr> steps;
  std::vector<FormulaPtr> guards;
  TermPtr L;
  TermPtr cpterm;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<FormulaPtr> parts = spine(clauses[i], FormulaOp::fand);
    // Clause i carries the clamped-step equation, the guard, then one
    // negation pair per earlier clause.  The guard sits in terminal position
    // only when i = 0, where it may have flattened into several spine parts;
    // re-folding the tail recovers it exactly.
    if (i == 0) {
      if (parts.size() < 2) return std::nullopt;
    } else if (parts.size() != 2 + i) {
      return std::nullopt;
    }
    const FormulaPtr& head = parts[0];
    if (head->op != FormulaOp::eq || head->lhs->op != TermOp::tmin)
      return std::nullopt;
    TermPtr ti = head->lhs->args[0];
    TermPtr Li = head->lhs->args[1];
    if (i == 0) {
      L = Li;
      cpterm = head->rhs;
      if (cpterm->op != TermOp::var) return std::nullopt;
    } else if (!equal(L, Li) || !equal(cpterm, head->rhs)) {
      return std::nullopt;
    }
    steps.push_back(ti);
    guards.push_back(i == 0 ? refold(parts, 1, parts.size()) : parts[1]);
    for (std::size_t j = 0; j < i; ++j) {
      FormulaPtr expect =
          f_or(f_not(f_eq(t_min(steps[j], L), cpterm)), f_not(guards[j]));
      if (!equal(parts[2 + j], expect)) return std::nullopt;
    }
  }
  // Final guard must be the trivial X = X; when X is a variable it names the
  // configuration variable.
  const FormulaPtr& last = guards.back();
  if (last->op != FormulaOp::eq || !equal(last->lhs, last->rhs))
    return std::nullopt;
  StepSchema s;
  s.cvar = last->lhs->op == TermOp::var ? last->lhs->name : "";
  s.cpvar = cpterm->name;
  s.zvar = zvar;
  s.steps = steps;
  s.guards = guards;
  // Recover the growth term by anti-substituting the left-nested max of the
  // starred steps out of the clamp bound.
  TermPtr maxt = star(steps[0]);
  for (std::size_t i = 1; i < n; ++i) maxt = t_max(maxt, star(steps[i]));
  s.ell = antisubstitute(L, maxt, zvar);
  if (!equal(substitute(s.ell, zvar, maxt), L)) return std::nullopt;
  if (auto cert = find_certificate(s.ell, s.eps, zvar)) s.cert = *cert;
  return s;
}

// A matched iteration: the schema plus the terms standing in the start,
// result, and step-count positions of this occurrence (variables when the
// formula is the pristine template, arbitrary terms for instances).
struct IterMatch {
  IterSchema schema;
  TermPtr C, Cp, c;
};

inline std::optional<IterMatch> match_iter(const FormulaPtr& f,
                                           const std::string& zvar = "z") {
  if (f->op != FormulaOp::exists) return std::nullopt;
  const std::string wvar = f->var;
  FormulaPtr inner = f->body;
  if (inner->op != FormulaOp::forall || inner->var == wvar) return std::nullopt;
  const std::string uvar = inner->var;

  // Packing bound: a product whose full flattening is 2m copies of
  // PAD(1, t1star).
  std::vector<TermPtr> padfs;
  {
    std::vector<TermPtr> stack{f->bound};
    while (!stack.empty()) {
      TermPtr t = stack.back();
      stack.pop_back();
      if (t->op == TermOp::mul) {
        stack.push_back(t->args[1]);
        stack.push_back(t->args[0]);
      } else {
        padfs.push_back(t);
      }
    }
    std::reverse(padfs.begin(), padfs.end());
  }
  if (padfs.size() < 2 || padfs.size() % 2 != 0) return std::nullopt;
  for (const auto& p : padfs)
    if (p->op != TermOp::pad || !equal(p->args[0], t_one()) ||
        !equal(p->args[1], padfs[0]->args[1]))
      return std::nullopt;
  TermPtr t1star = padfs[0]->args[1];
  Nat m = Nat(padfs.size() / 2);

  // Step-count bound: the epsilon-power of t1star.
  if (inner->bound->op != TermOp::ell || !equal(inner->bound->args[0], t1star))
    return std::nullopt;
  EpsilonSpec eps = inner->bound->eps;
  TermPtr Eb = inner->bound;

  std::vector<FormulaPtr> parts = spine(inner->body, FormulaOp::fand);
  if (parts.size() < 5) return std::nullopt;
  const FormulaPtr& e1 = parts[0];
  const FormulaPtr& e2 = parts[1];
  const FormulaPtr& e3 = parts[2];
  const FormulaPtr& e4 = parts[3];
  FormulaPtr e5 = refold(parts, 4, parts.size());
  if (e1->op != FormulaOp::leq || e2->op != FormulaOp::eq ||
      e3->op != FormulaOp::leq || e4->op != FormulaOp::eq)
    return std::nullopt;
  TermPtr Cterm = e1->lhs;
  TermPtr L1 = e1->rhs;
  if (e2->lhs->op != TermOp::bhat) return std::nullopt;
  if (e2->lhs->args[0]->op != TermOp::var || e2->lhs->args[0]->name != wvar)
    return std::nullopt;
  TermPtr W = e2->lhs->args[1];
  if (!equal(e2->lhs->args[2], t_zero()) || !equal(e2->rhs, Cterm))
    return std::nullopt;
  TermPtr Cpterm = e3->lhs;
  if (!equal(e3->rhs, L1)) return std::nullopt;
  if (!equal(e4->rhs, Cpterm)) return std::nullopt;

  IterMatch out;
  out.C = Cterm;
  out.Cp = Cpterm;
  IterSchema& s = out.schema;
  s.zvar = zvar;
  s.eps = eps;
  s.m = m;
  s.wvar = wvar;
  s.uvar = uvar;
  std::set<std::string> seen;
  detail::all_vars(f, seen);
  s.cvar = Cterm->op == TermOp::var ? Cterm->name : fresh_var(seen, "mC");
  s.cpvar = Cpterm->op == TermOp::var ? Cpterm->name : fresh_var(seen, "mD");

  // Final-block projection: t2 applied to bhat(w, W, min(Eb, S(c))).
  TermPtr blkS;
  {
    std::vector<TermPtr> subs;
    detail::subterms_preorder(e4->lhs, subs);
    for (const auto& t : subs) {
      if (t->op != TermOp::bhat) continue;
      if (t->args[0]->op != TermOp::var || t->args[0]->name != wvar) continue;
      if (!equal(t->args[1], W)) continue;
      const TermPtr& idx = t->args[2];
      if (idx->op != TermOp::tmin || !equal(idx->args[0], Eb)) continue;
      if (idx->args[1]->op != TermOp::succ) continue;
      blkS = t;
      out.c = idx->args[1]->args[0];
      break;
    }
  }
  if (!blkS) return std::nullopt;
  if (out.c->op == TermOp::var) s.ccvar = out.c->name;
  s.t2 = antisubstitute(e4->lhs, blkS, s.cvar);

  // Guard: anti-substitute the chained block pair.
  TermPtr idxU = t_min(t_var(uvar), out.c);
  TermPtr blkU = t_bhat(t_var(wvar), W, idxU);
  TermPtr blkSU = t_bhat(t_var(wvar), W, t_succ(idxU));
  FormulaPtr g = antisubstitute(e5, blkSU, s.cpvar);
  g = antisubstitute(g, blkU, s.cvar);
  s.guard = g;
  {
    auto fv = free_vars(s.guard);
    if (!fv.count(s.cvar) || !fv.count(s.cpvar) || fv.count(wvar) ||
        fv.count(uvar))
      return std::nullopt;
  }

  // Recover (t1, ell) from L1 = ell(t1) using W = |ell(t1star)| as the check.
  std::vector<TermPtr> cands;
  detail::subterms_preorder(L1, cands);
  for (const auto& sdt : cands) {
    if (!equal(star(sdt), t1star)) continue;
    TermPtr ell = antisubstitute(L1, sdt, zvar);
    if (!equal(substitute(ell, zvar, sdt), L1)) continue;
    if (!equal(W, t_len(substitute(ell, zvar, t1star)))) continue;
    s.t1 = sdt;
    s.ell = ell;
    break;
  }
  if (!s.t1 && equal(W, t_len(L1))) {
    // Constant growth term: t1 survives only in starred form.
    s.t1 = t1star;
    s.ell = L1;
  }
  if (!s.t1) return std::nullopt;
  if (auto cert = find_certificate(s.ell, s.eps, zvar)) s.cert = *cert;
  return out;
}

struct AcceptMatch {
  FormulaPtr inner;   // the iterable part, result variable free
  TermPtr tprime;     // accept test, a term over cpvar
  std::string cpvar;
  TermPtr bound;
  bool trivial = false;
};

inline std::optional<AcceptMatch> match_accept(const FormulaPtr& f) {
  if (f->op != FormulaOp::exists) return std::nullopt;
  if (f->body->op != FormulaOp::fand) return std::nullopt;
  std::vector<FormulaPtr> parts = spine(f->body, FormulaOp::fand);
  if (parts.size() != 2) return std::nullopt;
  const FormulaPtr& acc = parts[1];
  if (acc->op != FormulaOp::eq || !equal(acc->rhs, t_one()))
    return std::nullopt;
  AcceptMatch out;
  out.inner = parts[0];
  out.tprime = acc->lhs;
  out.cpvar = f->var;
  out.bound = f->bound;
  out.trivial = equal(out.tprime, t_one());
  return out;
}

// Query-step shape: base step formula conjoined with (Check -> oracle
// instance).  The split of the instance into oracle-over-qvar plus query term
// needs the oracle as a hint, because several subterm choices can explain the
// same instance; match_query_step unifies against the given oracle, while
// match_query_step_shape only separates the pieces visible in the formula.
struct QueryStepShape {
  StepSchema base;
  FormulaPtr check;     // open formula over the result variable
  FormulaPtr instance;  // oracle with the query term already substituted
};

struct QueryStepMatch {
  QueryStepShape shape;
  TermPtr query;      // term over base.cvar
  FormulaPtr oracle;  // formula over qvar + parameters
  std::string qvar;
};

inline std::optional<QueryStepShape> match_query_step_shape(
    const FormulaPtr& f, const std::string& zvar = "z") {
  if (f->op != FormulaOp::fand) return std::nullopt;
  std::vector<FormulaPtr> parts = spine(f, FormulaOp::fand);
  if (parts.size() != 2 || parts[1]->op != FormulaOp::imp) return std::nullopt;
  auto base = match_steppable(parts[0], zvar);
  if (!base) return std::nullopt;
  QueryStepShape out;
  out.base = *base;
  out.check = parts[1]->a;
  if (!is_open(out.check)) return std::nullopt;
  out.instance = parts[1]->b;
  return out;
}

namespace detail {

// Match inst against pattern[qvar := ?]: structural walk recording the
// subterm standing where the pattern has qvar; all occurrences must agree.
inline bool unify_query_term(const TermPtr& pat, const TermPtr& inst,
                             const std::string& qvar, TermPtr& q) {
  if (pat->op == TermOp::var && pat->name == qvar) {
    if (q && !equal(q, inst)) return false;
    if (!q) q = inst;
    return true;
  }
  if (pat->op != inst->op || pat->args.size() != inst->args.size())
    return false;
  if (pat->op == TermOp::var) return pat->name == inst->name;
  if (pat->op == TermOp::lit) return pat->value == inst->value;
  if (pat->op == TermOp::ell && !(pat->eps == inst->eps)) return false;
  for (std::size_t i = 0; i < pat->args.size(); ++i)
    if (!unify_query_term(pat->args[i], inst->args[i], qvar, q)) return false;
  return true;
}

inline bool unify_query(const FormulaPtr& pat, const FormulaPtr& inst,
                        const std::string& qvar, TermPtr& q) {
  if (pat->op != inst->op) return false;
  switch (pat->op) {
    case FormulaOp::eq:
    case FormulaOp::leq:
      return unify_query_term(pat->lhs, inst->lhs, qvar, q) &&
             unify_query_term(pat->rhs, inst->rhs, qvar, q);
    case FormulaOp::fnot:
      return unify_query(pat->a, inst->a, qvar, q);
    case FormulaOp::fand:
    case FormulaOp::forr:
    case FormulaOp::imp:
      return unify_query(pat->a, inst->a, qvar, q) &&
             unify_query(pat->b, inst->b, qvar, q);
    case FormulaOp::exists:
    case FormulaOp::forall:
      if (pat->var != inst->var) return false;
      return unify_query_term(pat->bound, inst->bound, qvar, q) &&
             unify_query(pat->body, inst->body, qvar, q);
  }
  return false;
}

}  // namespace detail

inline std::optional<QueryStepMatch> match_query_step(
    const FormulaPtr& f, const FormulaPtr& oracle,
    const std::string& qvar = "q", const std::string& zvar = "z") {
  auto shape = match_query_step_shape(f, zvar);
  if (!shape) return std::nullopt;
  TermPtr q;
  if (!detail::unify_query(oracle, shape->instance, qvar, q))
    return std::nullopt;
  if (!q) q = t_var(qvar);  // oracle ignores its query slot
  QueryStepMatch out;
  out.shape = *shape;
  out.query = q;
  out.oracle = oracle;
  out.qvar = qvar;
  return out;
}

// --- hierarchy level -------------------------------------------------------

struct DdhEntry {
  TermPtr ell;
  std::string zvar;
  std::string family;  // smallest stock growth family, or "none"
};

struct DdhReport {
  std::optional<unsigned> level;
  std::vector<DdhEntry> ells;
};

namespace detail {

inline std::optional<unsigned> ddh_level_rec(const FormulaPtr& f,
                                             std::vector<DdhEntry>& ells,
                                             int depth) {
  if (depth > 16) return std::nullopt;
  // Schema shapes take precedence over the base embedding: an open step
  // formula counts structurally as one level even though it also sits in the
  // base class.
  if (auto acc = match_accept(f))
    return ddh_level_rec(acc->inner, ells, depth + 1);
  if (auto it = match_iter(f)) {
    ells.push_back({it->schema.ell, it->schema.zvar,
                    tau_family(it->schema.ell, it->schema.zvar)});
    auto g = ddh_level_rec(it->schema.guard, ells, depth + 1);
    if (!g) return std::nullopt;
    return *g + 1;
  }
  auto level_over_guards =
      [&](const StepSchema& st) -> std::optional<unsigned> {
    ells.push_back({st.ell, st.zvar, tau_family(st.ell, st.zvar)});
    unsigned best = 0;
    for (const auto& g : st.guards) {
      auto gl = ddh_level_rec(g, ells, depth + 1);
      if (!gl) return std::nullopt;
      best = std::max(best, *gl);
    }
    return best + 1;
  };
  if (auto st = match_steppable(f)) return level_over_guards(*st);
  if (auto qs = match_query_step_shape(f)) return level_over_guards(qs->base);
  if (is_sharply_bounded(f)) return 0;
  return std::nullopt;
}

}  // namespace detail

inline DdhReport ddh_level(const FormulaPtr& f) {
  DdhReport r;
  r.level = detail::ddh_level_rec(f, r.ells, 0);
  return r;
}

// --- class membership with certificates ------------------------------------

enum class ClassKind { sigma_T, sigma_U, pi_T, pi_U };

inline std::string class_kind_name(ClassKind k) {
  switch (k) {
    case ClassKind::sigma_T: return "sigma_hat_T";
    case ClassKind::sigma_U: return "sigma_hat_U";
    case ClassKind::pi_T: return "pi_hat_T";
    case ClassKind::pi_U: return "pi_hat_U";
  }
  return "?";
}

struct InClassResult {
  bool member = false;
  std::string certificate;
};

namespace detail {

inline InClassResult in_class_impl(const FormulaPtr& f, ClassKind kind,
                                   unsigned i, const std::string& tau);

inline bool base_guard_ok(const FormulaPtr& g, unsigned i,
                          const std::string& tau, std::string& note);

// Boolean combinations: strip not/and/or/imp; every leaf must lie in the
// guard base for level i.
inline bool boolean_combo_ok(const FormulaPtr& f, unsigned i,
                             const std::string& tau, std::string& note) {
  switch (f->op) {
    case FormulaOp::fnot:
      return boolean_combo_ok(f->a, i, tau, note);
    case FormulaOp::fand:
    case FormulaOp::forr:
    case FormulaOp::imp:
      return boolean_combo_ok(f->a, i, tau, note) &&
             boolean_combo_ok(f->b, i, tau, note);
    default:
      return base_guard_ok(f, i, tau, note);
  }
}

inline bool base_guard_ok(const FormulaPtr& g, unsigned i,
                          const std::string& tau, std::string& note) {
  if (i <= 1) {
    if (is_sharply_bounded(g)) return true;
    note = "guard not sharply bounded";
    return false;
  }
  InClassResult r = in_class_impl(g, ClassKind::sigma_U, i - 1, tau);
  if (r.member) return true;
  note = "guard outside level-" + std::to_string(i - 1) + " base";
  return false;
}

// The iterable core under an accept state: an iteration tower over a step or
// query-step schema whose bottom guards lie in the boolean closure of the
// previous level, with every growth term dominated by the requested family.
inline bool core_ok(const FormulaPtr& f, unsigned i, const std::string& tau,
                    bool allow_query, std::string& chain, int depth) {
  if (depth > 16) {
    chain = "nesting too deep";
    return false;
  }
  if (auto it = match_iter(f)) {
    if (!tau_dominated(it->schema.ell, tau, it->schema.zvar)) {
      chain = "growth term outside tau";
      return false;
    }
    chain += "iter>";
    const FormulaPtr& g = it->schema.guard;
    if (match_iter(g) || match_steppable(g) ||
        (allow_query && match_query_step_shape(g)))
      return core_ok(g, i, tau, allow_query, chain, depth + 1);
    // Tower bottoms out: the guard must lie in the boolean closure of the
    // previous level, exactly as a step clause guard would.
    std::string note;
    if (boolean_combo_ok(g, i, tau, note)) {
      chain += "base";
      return true;
    }
    chain = note;
    return false;
  }
  auto finish_step = [&](const StepSchema& st, const char* tag) {
    if (!tau_dominated(st.ell, tau, st.zvar)) {
      chain = "growth term outside tau";
      return false;
    }
    chain += tag;
    std::string note;
    for (const auto& g : st.guards)
      if (!boolean_combo_ok(g, i, tau, note)) {
        chain = note;
        return false;
      }
    return true;
  };
  if (auto st = match_steppable(f)) return finish_step(*st, "step");
  if (allow_query) {
    if (auto qs = match_query_step_shape(f)) {
      InClassResult oracle =
          in_class_impl(qs->instance, ClassKind::sigma_T, i, tau);
      if (!oracle.member) {
        chain = "query instance outside sigma_hat_T level";
        return false;
      }
      return finish_step(qs->base, "query-step");
    }
  }
  chain = "core matches no iterable shape";
  return false;
}

inline InClassResult in_class_impl(const FormulaPtr& f, ClassKind kind,
                                   unsigned i, const std::string& tau) {
  InClassResult out;
  const bool pi_side = kind == ClassKind::pi_T || kind == ClassKind::pi_U;
  const bool allow_query =
      kind == ClassKind::sigma_U || kind == ClassKind::pi_U;

  // Base embedding: sharply bounded formulas sit at every level.
  if (is_sharply_bounded(f)) {
    out.member = true;
    out.certificate = "base=sharply-bounded";
    return out;
  }

  // Degenerate prenex embedding: G-class index at most i.
  PrenexInfo pre = prenex_info(f);
  if (pre.prenex && pre.innermost_sharp) {
    if (!pi_side && pre.e && *pre.e >= 1 && *pre.e - 1 <= i) {
      out.member = true;
      out.certificate = "prenex=G-class index " + std::to_string(*pre.e - 1);
      return out;
    }
    if (pi_side && pre.u && *pre.u >= 1 && *pre.u - 1 <= i) {
      out.member = true;
      out.certificate = "prenex=G-class index " + std::to_string(*pre.u - 1);
      return out;
    }
  }

  // One bounded closure quantifier (optional), then an accept-state core.
  std::vector<std::pair<FormulaPtr, bool>> attempts{{f, false}};
  if (!pi_side && f->op == FormulaOp::exists)
    attempts.push_back({f->body, true});
  if (pi_side && f->op == FormulaOp::forall)
    attempts.push_back({f->body, true});
  for (auto& [cand, peeled] : attempts) {
    auto acc = match_accept(cand);
    if (!acc) continue;
    std::string chain;
    if (core_ok(acc->inner, i, tau, allow_query, chain, 0)) {
      out.member = true;
      out.certificate = std::string("closure=") + (peeled ? "1" : "0") +
                        " accept-state core=" + chain;
      if (allow_query && chain.find("query-step") == std::string::npos)
        out.certificate += " (plain core embeds via vacuous query clause)";
      return out;
    }
    out.certificate = chain;
  }
  if (out.certificate.empty())
    out.certificate = "no accept-state decomposition";
  return out;
}

}  // namespace detail

inline InClassResult in_class(const FormulaPtr& f, ClassKind kind, unsigned i,
                              const std::string& tau = "p(|id|)") {
  return detail::in_class_impl(f, kind, i, tau);
}

// --- top-level labeling ----------------------------------------------------

struct ClassLabel {
  bool open = false;
  bool sharply_bounded = false;
  unsigned sigma_hat = 0;
  unsigned pi_hat = 0;
  std::optional<unsigned> e_index;
  std::optional<unsigned> u_index;
  std::optional<unsigned> sigma_g;
  std::optional<unsigned> pi_g;
  bool steppable = false;
  bool iteration = false;
  bool accept_state = false;
  bool trivial_accept = false;
  bool query_steppable = false;
  std::optional<unsigned> ddh;
  std::string tau = "none";
};

inline ClassLabel classify(const FormulaPtr& f) {
  ClassLabel lab;
  lab.open = is_open(f);
  lab.sharply_bounded = is_sharply_bounded(f);
  auto [s, p] = hat_indices(f);
  lab.sigma_hat = s;
  lab.pi_hat = p;
  PrenexInfo pre = prenex_info(f);
  lab.e_index = pre.e;
  lab.u_index = pre.u;
  if (pre.prenex && pre.innermost_sharp) {
    if (pre.e && *pre.e >= 1) lab.sigma_g = *pre.e - 1;
    if (pre.u && *pre.u >= 1) lab.pi_g = *pre.u - 1;
  }
  lab.steppable = match_steppable(f).has_value();
  lab.iteration = match_iter(f).has_value();
  if (auto acc = match_accept(f)) {
    lab.accept_state = true;
    lab.trivial_accept = acc->trivial;
  }
  lab.query_steppable = match_query_step_shape(f).has_value();
  DdhReport rep = ddh_level(f);
  lab.ddh = rep.level;
  if (!rep.ells.empty()) {
    auto rank = [](const std::string& fam) {
      if (fam == "|id|") return 0;
      if (fam == "p(|id|)") return 1;
      if (fam == "2^(p(||id||))") return 2;
      return 3;
    };
    std::string worst = "|id|";
    for (const auto& e : rep.ells)
      if (rank(e.family) > rank(worst)) worst = e.family;
    lab.tau = worst;
  } else if (rep.level) {
    lab.tau = "|id|";  // level 0: no growth terms used
  }
  return lab;
}

}  // namespace baw
