#pragma once

// Formula builders: step relations, bounded iterations, accept-state
// closures, the bit-counting iteration stack, comprehension / induction /
// iteration / replacement axiom instances, witness predicates, and the
// bounded-query helper.  Every builder emits the exact display shape that the
// matchers in classify.hpp recognize.

#include <baw/classify.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace baw {

struct build_error : std::runtime_error {
  explicit build_error(const std::string& m) : std::runtime_error(m) {}
};

// --- language gating -------------------------------------------------------
//
// The base language lacks the smash function; constructions that need
// smash-sized bounds are only available in the extended language.
enum class Language { L1, L2 };

inline bool uses_smash(const TermPtr& t) { return !first_sorted(t); }
inline bool uses_smash(const FormulaPtr& f) { return !first_sorted(f); }

// --- pair projections and small term helpers -------------------------------

// Blockwise projections of a paired value: both halves are read off as
// half-width blocks of the code, using the block reader itself.
inline TermPtr mk_left(const TermPtr& w) {
  TermPtr h = t_half(t_len(w));
  return t_bhat(t_bhat(w, h, t_zero()), t_monus(h, t_one()), t_zero());
}

inline TermPtr mk_right(const TermPtr& w) {
  TermPtr h = t_half(t_len(w));
  return t_bhat(t_bhat(w, h, t_one()), t_monus(h, t_one()), t_zero());
}

// j-th component of a right-nested tuple of declared arity n.
inline TermPtr mk_proj(const TermPtr& w, unsigned j, unsigned n) {
  if (j < 1 || j > n) throw build_error("mk_proj: index out of range");
  TermPtr cur = w;
  if (j == n) {
    for (unsigned k = 1; k < n; ++k) cur = mk_right(cur);
    return cur;
  }
  for (unsigned k = 1; k < j; ++k) cur = mk_right(cur);
  return mk_left(cur);
}

// Pairhood test: the low-half marker bit is set and the code is exactly two
// marker-extended halves wide.
inline FormulaPtr mk_ispair(const TermPtr& w) {
  TermPtr l = mk_left(w);
  TermPtr r = mk_right(w);
  return f_and(
      f_eq(t_bit(t_monus(t_half(t_len(w)), t_one()), w), t_one()),
      f_eq(t_add(t_mul(t_lit(2), t_len(t_max(l, r))), t_lit(2)), t_len(w)));
}

inline TermPtr mk_sq(const TermPtr& t) { return t_mul(t, t); }

// 2^|x| as a term.
inline TermPtr mk_pow2_len(const TermPtr& x) { return t_pad(t_one(), x); }

// Sequence bound bd(a, b) = 2(2a # 2b).
inline TermPtr mk_bd(const TermPtr& a, const TermPtr& b) {
  return t_mul(t_lit(2),
               t_smash(t_mul(t_lit(2), a), t_mul(t_lit(2), b)));
}

namespace detail {

inline void collect_all_vars(const FormulaPtr& f, std::set<std::string>& out) {
  all_vars(f, out);
}

}  // namespace detail

// Bounded unique existence, expanded: exists x <= t (A and
// forall u <= t (A[x := u] -> u = x)).
inline FormulaPtr f_exists_unique(const std::string& var, const TermPtr& bound,
                                  const FormulaPtr& body) {
  std::set<std::string> used;
  detail::collect_all_vars(body, used);
  collect_vars(bound, used);
  used.insert(var);
  std::string u = fresh_var(used, "u");
  FormulaPtr bu = substitute(body, var, t_var(u));
  return f_exists(var, bound,
                  f_and(body, f_forall(u, bound,
                                       f_imp(bu, f_eq(t_var(u), t_var(var))))));
}

// --- step relations --------------------------------------------------------
//
// Disjunction over clauses i: the clamped step equation min(t_i, L) = C',
// the guard B_i, and for every earlier clause the negated pair.  L is the
// growth bound applied to the left-nested max of the starred steps.  The
// final guard is normally required to be the trivial C = C; schema variants
// with a substantive last guard set require_trivial_final = false.
inline FormulaPtr build_steppable(const StepSchema& s,
                                  bool require_trivial_final = true) {
  const std::size_t n = s.steps.size();
  if (n == 0 || s.guards.size() != n)
    throw build_error("step schema: step and guard counts must match and be nonzero");
  if (!s.ell) throw build_error("step schema: missing growth term");
  if (s.cvar.empty() || s.cpvar.empty() || s.cvar == s.cpvar)
    throw build_error("step schema: configuration variables must be distinct");
  if (require_trivial_final) {
    FormulaPtr triv = f_eq(t_var(s.cvar), t_var(s.cvar));
    if (!equal(s.guards.back(), triv))
      throw build_error("step schema: final guard must be " + s.cvar + " = " +
                        s.cvar);
  }
  GrowthCertificate cert = s.cert;
  if (cert.scale == 0) {
    auto found = find_certificate(s.ell, s.eps, s.zvar);
    if (!found)
      throw build_error("step schema: no growth certificate within scale search");
    cert = *found;
  } else if (!certificate_holds(s.ell, s.eps, cert, s.zvar)) {
    throw build_error("step schema: growth certificate fails numerically");
  }

  TermPtr maxt = star(s.steps[0]);
  for (std::size_t i = 1; i < n; ++i) maxt = t_max(maxt, star(s.steps[i]));
  TermPtr L = at(s.ell, s.zvar, maxt);

  auto mineq = [&](std::size_t i) {
    return f_eq(t_min(s.steps[i], L), t_var(s.cpvar));
  };
  std::vector<FormulaPtr> clauses;
  clauses.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<FormulaPtr> parts{mineq(i), s.guards[i]};
    for (std::size_t j = 0; j < i; ++j)
      parts.push_back(f_or(f_not(mineq(j)), f_not(s.guards[j])));
    clauses.push_back(f_conj(parts));
  }
  return f_disj(clauses);
}

// --- bounded iteration -----------------------------------------------------
//
// exists w <= 2^(2m|t1*|) forall u <= ell_eps(t1*):
//   C <= ell(t1)  and  block_0(w) = C  and  C' <= ell(t1)  and
//   t2(block_{min(ell_eps(t1*), S(c))}(w)) = C'  and
//   B1(block_{min(u,c)}(w), block_{S(min(u,c))}(w), a...)
// with block width |ell(t1*)|.  The packing bound is the m-fold product of
// PAD(1, t1*) * PAD(1, t1*).  Free variables: cvar, cpvar, ccvar.
inline FormulaPtr build_iter(const IterSchema& s) {
  if (!s.t1 || !s.t2 || !s.guard || !s.ell)
    throw build_error("iteration schema: missing component");
  if (s.cvar.empty() || s.cpvar.empty() || s.ccvar.empty() || s.wvar.empty() ||
      s.uvar.empty())
    throw build_error("iteration schema: variable names must be nonempty");
  {
    std::set<std::string> names{s.cvar, s.cpvar, s.ccvar, s.wvar, s.uvar};
    if (names.size() != 5)
      throw build_error("iteration schema: variable names must be distinct");
  }
  for (const auto& bad : {s.wvar, s.uvar}) {
    std::set<std::string> fv;
    collect_vars(s.t1, fv);
    collect_vars(s.t2, fv);
    std::set<std::string> gfv = free_vars(s.guard);
    fv.insert(gfv.begin(), gfv.end());
    if (fv.count(bad))
      throw build_error("iteration schema: " + bad +
                        " is reserved for a bound variable");
  }
  if (s.m < 1) throw build_error("iteration schema: packing factor must be >= 1");
  GrowthCertificate cert = s.cert;
  if (cert.scale == 0) {
    auto found = find_certificate(s.ell, s.eps, s.zvar);
    if (!found)
      throw build_error("iteration schema: no growth certificate within scale search");
    cert = *found;
  } else if (!certificate_holds(s.ell, s.eps, cert, s.zvar)) {
    throw build_error("iteration schema: growth certificate fails numerically");
  }

  TermPtr t1star = star(s.t1);
  TermPtr Eb = t_ell(s.eps, t1star);
  TermPtr L1 = at(s.ell, s.zvar, s.t1);
  TermPtr W = t_len(at(s.ell, s.zvar, t1star));

  TermPtr factor = t_mul(t_pad(t_one(), t1star), t_pad(t_one(), t1star));
  TermPtr wb = factor;
  for (Nat k = 1; k < s.m; ++k) wb = t_mul(wb, factor);

  auto blk = [&](const TermPtr& idx) { return t_bhat(t_var(s.wvar), W, idx); };
  TermPtr idxU = t_min(t_var(s.uvar), t_var(s.ccvar));
  FormulaPtr p1 = f_leq(t_var(s.cvar), L1);
  FormulaPtr p2 = f_eq(blk(t_zero()), t_var(s.cvar));
  FormulaPtr p3 = f_leq(t_var(s.cpvar), L1);
  FormulaPtr p4 =
      f_eq(substitute(s.t2, s.cvar, blk(t_min(Eb, t_succ(t_var(s.ccvar))))),
           t_var(s.cpvar));
  FormulaPtr p5 = substitute(substitute(s.guard, s.cvar, blk(idxU)), s.cpvar,
                             blk(t_succ(idxU)));
  FormulaPtr body = f_conj({p1, p2, p3, p4, p5});
  return f_exists(s.wvar, wb, f_forall(s.uvar, Eb, body));
}

// --- accept-state closure --------------------------------------------------

// exists cpvar <= bound (F and tprime = 1), with the step count of F
// typically instantiated by the caller beforehand.
inline FormulaPtr wrap_accept(const FormulaPtr& F, const TermPtr& tprime,
                              const TermPtr& bound,
                              const std::string& cpvar = "C'") {
  return f_exists(cpvar, bound, f_and(F, f_eq(tprime, t_one())));
}

// Complement inside the hierarchy: same closure with accept test 1 - tprime.
inline FormulaPtr negate_accept(const FormulaPtr& G) {
  auto m = match_accept(G);
  if (!m) throw build_error("negate_accept: not an accept-state formula");
  return wrap_accept(m->inner, t_monus(t_one(), m->tprime), m->bound,
                     m->cpvar);
}

// --- bit counting ----------------------------------------------------------
//
// Two-level iteration: the inner level scans one stripe of half-length many
// bit positions, adding BIT(offset + stripe * halflen, v) per step; the outer
// level advances the stripe and finally projects the counter.  The counting
// configuration is the triple <stripe, offset, count>.
struct NumonesBundle {
  FormulaPtr formula;        // free vars: vvar, cpvar
  StepSchema step;
  FormulaPtr step_formula;   // B'_1
  IterSchema inner;
  FormulaPtr inner_formula;  // B''_1 (step count instantiated)
  IterSchema outer;
};

inline NumonesBundle build_numones(const std::string& vvar = "v",
                                   const std::string& cpvar = "C'") {
  NumonesBundle out;
  TermPtr v = t_var(vvar);
  TermPtr z = t_var("z");
  // Growth bound 2^(8(||z|| + 1)): every triple of counting components fits.
  TermPtr ellterm =
      mk_sq(mk_sq(mk_sq(t_mul(t_lit(2), t_pad(t_one(), t_len(z))))));
  TermPtr ellhalf_v = t_ell(EpsilonSpec::half(), v);

  TermPtr C = t_var("C");
  TermPtr p1 = mk_proj(C, 1, 3);
  TermPtr p2 = mk_proj(C, 2, 3);
  TermPtr p3 = mk_proj(C, 3, 3);
  TermPtr pos = t_add(p2, t_mul(p1, ellhalf_v));
  TermPtr tstep =
      t_pair(p1, t_pair(t_succ(p2), t_add(p3, t_bit(pos, v))));

  out.step.steps = {tstep};
  out.step.guards = {f_eq(C, C)};
  out.step.ell = ellterm;
  out.step.eps = EpsilonSpec::half();
  out.step_formula = build_steppable(out.step);

  out.inner.t1 = t_smash(v, v);
  out.inner.t2 = t_pair(t_succ(p1), t_pair(t_zero(), p3));
  out.inner.guard = out.step_formula;
  out.inner.ell = ellterm;
  out.inner.eps = EpsilonSpec::half();
  out.inner.m = 32;
  out.inner.wvar = "$iw";
  out.inner.uvar = "$iu";
  FormulaPtr inner_tpl = build_iter(out.inner);
  out.inner_formula =
      substitute(inner_tpl, out.inner.ccvar, t_monus(ellhalf_v, t_one()));

  out.outer.t1 = t_smash(v, v);
  out.outer.t2 = p3;
  out.outer.guard = out.inner_formula;
  out.outer.ell = ellterm;
  out.outer.eps = EpsilonSpec::half();
  out.outer.m = 32;
  out.outer.wvar = "$ow";
  out.outer.uvar = "$ou";
  out.outer.cpvar = cpvar;
  FormulaPtr outer_tpl = build_iter(out.outer);

  TermPtr start = t_pair(t_zero(), t_pair(t_zero(), t_zero()));
  out.formula = substitute(substitute(outer_tpl, out.outer.cvar, start),
                           out.outer.ccvar, t_len(v));
  return out;
}

// --- comprehension ---------------------------------------------------------

// The two-clause bit-defining step: x receives the truth value of A at the
// current position, with the carried bit b chained through trivial b = b
// conjuncts.  Growth bound is the constant 1.
inline FormulaPtr build_comprehension_step(const FormulaPtr& A,
                                           const std::string& bvar,
                                           const std::string& xvar) {
  FormulaPtr A0 = match_accept(A) ? negate_accept(A) : f_not(A);
  FormulaPtr bb = f_eq(t_var(bvar), t_var(bvar));
  StepSchema s;
  s.steps = {t_zero(), t_one()};
  s.guards = {f_and(A0, bb), f_and(A, bb)};
  s.ell = t_one();
  s.eps = EpsilonSpec{true, {}};
  s.cvar = bvar;
  s.cpvar = xvar;
  return build_steppable(s, /*require_trivial_final=*/false);
}

// Iterated comprehension step: exists w <= 2^(|t|+1) forall i <= |t|
// C(i, a..., BIT(i, w), BIT(S i, w)); the halved witness is the bit table.
inline FormulaPtr comprehension_iterate(const FormulaPtr& A,
                                        const std::string& ivar,
                                        const TermPtr& t) {
  std::set<std::string> used;
  detail::collect_all_vars(A, used);
  collect_vars(t, used);
  used.insert(ivar);
  std::string bvar = fresh_var(used, "b");
  std::string xvar = fresh_var(used, "x");
  std::string wvar = fresh_var(used, "w");
  FormulaPtr C = build_comprehension_step(A, bvar, xvar);
  TermPtr w = t_var(wvar);
  FormulaPtr body = substitute(C, bvar, t_bit(t_var(ivar), w));
  body = substitute(body, xvar, t_bit(t_succ(t_var(ivar)), w));
  TermPtr wb = t_pad(t_one(), t_pad(t_one(), t));
  return f_exists(wvar, wb, f_forall(ivar, t_len(t), body));
}

// Comprehension axiom instance: exists w <= t forall i < |t|
// (BIT(i, w) = 1 <-> A), with the strict bound rendered as a guard.
inline FormulaPtr build_comp_axiom(const FormulaPtr& A, const std::string& ivar,
                                   const TermPtr& t,
                                   const std::string& wvar = "w") {
  std::set<std::string> used;
  detail::collect_all_vars(A, used);
  collect_vars(t, used);
  std::string w = wvar;
  if (used.count(w)) w = fresh_var(used, wvar);
  FormulaPtr inner = f_iff(f_eq(t_bit(t_var(ivar), t_var(w)), t_one()), A);
  FormulaPtr body =
      f_imp(f_leq(t_succ(t_var(ivar)), t_len(t)), inner);
  return f_exists(w, t, f_forall(ivar, t_len(t), body));
}

// --- induction -------------------------------------------------------------

// (A(0) and forall x < ell (A(x) -> A(Sx))) -> A(ell), with the strict bound
// rendered as a guard.
inline FormulaPtr build_ind_axiom(const FormulaPtr& A, const std::string& xvar,
                                  const TermPtr& ell_inst) {
  FormulaPtr a0 = substitute(A, xvar, t_zero());
  FormulaPtr aS = substitute(A, xvar, t_succ(t_var(xvar)));
  FormulaPtr aL = substitute(A, xvar, ell_inst);
  FormulaPtr stepAll =
      f_forall(xvar, ell_inst,
               f_imp(f_leq(t_succ(t_var(xvar)), ell_inst), f_imp(A, aS)));
  return f_imp(f_and(a0, stepAll), aL);
}

// Length induction: the instance at the length of a parameter.
inline FormulaPtr build_lind_axiom(const FormulaPtr& A, const std::string& xvar,
                                   const std::string& avar) {
  return build_ind_axiom(A, xvar, t_len(t_var(avar)));
}

// --- iteration axioms ------------------------------------------------------

// The iteration axioms are exactly the accept-state closures with trivial
// accept test over an iterable core; validate and hand the instance back.
inline FormulaPtr build_iter_axiom(const FormulaPtr& G) {
  auto m = match_accept(G);
  if (!m) throw build_error("iteration axiom: not an accept-state closure");
  if (!m->trivial)
    throw build_error("iteration axiom: accept test must be trivial");
  if (!match_steppable(m->inner) && !match_iter(m->inner))
    throw build_error("iteration axiom: core is not iterable");
  return G;
}

// --- witnessed successive nomination ---------------------------------------
//
// Premise:    b <= |k| -> exists! x <= |k| A(j, a..., b, x)
// Conclusion: exists w <= bd(|k|, t) forall j < |t|
//               A(j, a..., block_j(w), block_{Sj}(w))   (width |k*|)
inline std::pair<FormulaPtr, FormulaPtr> build_wsn_instance(
    const FormulaPtr& A, const std::string& jvar, const std::string& bvar,
    const std::string& xvar, const TermPtr& k, const TermPtr& t,
    Language lang = Language::L2) {
  if (lang == Language::L1)
    throw build_error("witness collection needs the smash language");
  FormulaPtr premise =
      f_imp(f_leq(t_var(bvar), t_len(k)), f_exists_unique(xvar, t_len(k), A));

  std::set<std::string> used;
  detail::collect_all_vars(A, used);
  collect_vars(k, used);
  collect_vars(t, used);
  std::string wvar = fresh_var(used, "w");
  TermPtr W = t_len(star(k));
  TermPtr bj = t_bhat(t_var(wvar), W, t_var(jvar));
  TermPtr bSj = t_bhat(t_var(wvar), W, t_succ(t_var(jvar)));
  FormulaPtr inst = substitute(substitute(A, bvar, bj), xvar, bSj);
  FormulaPtr body = f_imp(f_leq(t_succ(t_var(jvar)), t_len(t)), inst);
  FormulaPtr conclusion = f_exists(
      wvar, mk_bd(t_len(k), t), f_forall(jvar, t_len(t), body));
  return {premise, conclusion};
}

// --- replacement -----------------------------------------------------------
//
// Premise:    forall x <= |s| exists y <= t A(x, y, a...)
// Conclusion: exists w <= bd(t*(|s|), s) forall x <= |s|
//               A(x, min(block_x(w), t), a...)   (width |t*(|s|)|)
inline std::pair<FormulaPtr, FormulaPtr> build_repl_instance(
    const FormulaPtr& A, const std::string& xvar, const std::string& yvar,
    const TermPtr& s, const TermPtr& t, Language lang = Language::L2) {
  if (lang == Language::L1)
    throw build_error("replacement needs the smash language");
  FormulaPtr premise =
      f_forall(xvar, t_len(s), f_exists(yvar, t, A));

  std::set<std::string> used;
  detail::collect_all_vars(A, used);
  collect_vars(s, used);
  collect_vars(t, used);
  std::string wvar = fresh_var(used, "w");
  TermPtr tstar_inst = substitute(star(t), xvar, t_len(s));
  TermPtr blockx = t_bhat(t_var(wvar), t_len(tstar_inst), t_var(xvar));
  FormulaPtr inst = substitute(A, yvar, t_min(blockx, t));
  FormulaPtr conclusion = f_exists(wvar, mk_bd(tstar_inst, s),
                                   f_forall(xvar, t_len(s), inst));
  return {premise, conclusion};
}

// --- witness predicates ----------------------------------------------------

struct WitnessPackage {
  FormulaPtr wit;     // over wvar + parameters
  TermPtr bound;      // witness size bound
  FormulaPtr source;  // the witnessed formula
  std::string wvar;
};

// WIT for a single formula: peel leading non-hierarchy exists quantifiers
// into pair components; everything else is its own witness (w = 0).
inline WitnessPackage build_wit(const FormulaPtr& A,
                                const std::string& wvar = "w") {
  WitnessPackage out;
  out.source = A;
  out.wvar = wvar;
  const bool peel = A->op == FormulaOp::exists && !match_accept(A);
  if (!peel) {
    out.bound = t_zero();
    out.wit = f_and(f_eq(t_var(wvar), t_zero()), A);
    return out;
  }
  std::set<std::string> used;
  detail::collect_all_vars(A, used);
  used.insert(wvar);
  std::string innerw = fresh_var(used, "w");
  WitnessPackage inner = build_wit(A->body, innerw);
  TermPtr ib = inner.bound;
  {
    // Inner bounds may mention the peeled variable (exists y <= x ...);
    // close them over its own bound so the final size bound stays a term in
    // the parameters only.  Witness sizes grow monotonically in the peeled
    // variable, so the substituted bound dominates every instance.
    std::set<std::string> bv;
    collect_vars(ib, bv);
    if (bv.count(A->var)) ib = substitute(ib, A->var, A->bound);
  }
  TermPtr w = t_var(wvar);
  // First the inner witness becomes the right component, then the witnessed
  // variable becomes the left component; both refer to the outer w.
  FormulaPtr sub = substitute(inner.wit, innerw, mk_right(w));
  sub = substitute(sub, A->var, mk_left(w));
  out.wit = f_conj({mk_ispair(w), f_leq(mk_left(w), A->bound), sub});
  out.bound = t_mul(t_lit(4), mk_sq(t_pad(t_one(), t_max(A->bound, ib))));
  return out;
}

// WIT for a cedent: fold the member list from the right, pairing each head
// witness with the rest.  Conjunctive (antecedent) cedents end in the trivial
// w = 0... = w test; disjunctive (succedent) cedents end in its negation.
inline WitnessPackage wit_cedent(const std::vector<FormulaPtr>& fs,
                                 bool conjunctive,
                                 const std::string& wvar = "w") {
  WitnessPackage acc;
  acc.wvar = wvar;
  acc.bound = t_zero();
  FormulaPtr triv = f_eq(t_var(wvar), t_var(wvar));
  acc.wit = conjunctive ? triv : f_not(triv);
  acc.source = nullptr;
  for (auto it = fs.rbegin(); it != fs.rend(); ++it) {
    std::set<std::string> used;
    detail::collect_all_vars(*it, used);
    detail::collect_all_vars(acc.wit, used);
    used.insert(wvar);
    std::string hw = fresh_var(used, "w");
    WitnessPackage head = build_wit(*it, hw);
    TermPtr w = t_var(wvar);
    FormulaPtr headw = substitute(head.wit, hw, mk_left(w));
    FormulaPtr restw = substitute(acc.wit, wvar, mk_right(w));
    WitnessPackage next;
    next.wvar = wvar;
    next.source = nullptr;
    next.wit = conjunctive
                   ? f_conj({mk_ispair(w), headw, restw})
                   : f_and(mk_ispair(w), f_or(headw, restw));
    next.bound = t_mul(
        t_lit(4), mk_sq(t_pad(t_one(), t_max(head.bound, acc.bound))));
    acc = next;
  }
  return acc;
}

// --- bounded query helper --------------------------------------------------
//
// (C(x, y) and y <= z) or (no y' <= z satisfies C(x, y') and y = z + 1).
inline FormulaPtr build_wquery(const FormulaPtr& C, const std::string& xvar,
                               const std::string& yvar,
                               const std::string& zvar) {
  (void)xvar;
  std::set<std::string> used;
  detail::collect_all_vars(C, used);
  used.insert(yvar);
  used.insert(zvar);
  std::string yp = fresh_var(used, "y");
  FormulaPtr cy = substitute(C, yvar, t_var(yp));
  return f_or(
      f_and(C, f_leq(t_var(yvar), t_var(zvar))),
      f_and(f_not(f_exists(yp, t_var(zvar), cy)),
            f_eq(t_var(yvar), t_add(t_var(zvar), t_one()))));
}

}  // namespace baw
