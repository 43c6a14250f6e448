#pragma once

// Term and formula syntax trees.  Terms cover the two-sorted signature plus a
// fixed set of defined function symbols ("sugar") that expand into the core;
// formulas are built from =, <= with the propositional connectives and
// bounded quantifiers.  Nodes are immutable and shared.

#include <baw/nat.hpp>

#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace baw {

enum class TermOp {
  zero,
  lit,    // decimal literal (sugar for a successor tower / doubling chain)
  var,
  succ,
  add,
  mul,
  monus,
  half,
  len,
  pad,
  msp,
  smash,  // two-sorted signature only
  // sugar
  bit,    // bit(i, x)
  lsp,    // lsp(x, i)
  bhat,   // bhat(w, t, x): x-th block of (value t) bits of w
  cond,   // cond(s, y, z): y if s = 0 else z
  tmax,
  tmin,
  tpair,
  ell     // ell(eps, t)
};

struct Term;
using TermPtr = std::shared_ptr<const Term>;

struct Term {
  TermOp op;
  Nat value;                 // lit
  std::string name;          // var
  EpsilonSpec eps;           // ell
  std::vector<TermPtr> args;
};

inline TermPtr mk(TermOp op, std::vector<TermPtr> args) {
  auto t = std::make_shared<Term>();
  t->op = op;
  t->args = std::move(args);
  return t;
}

inline TermPtr t_zero() { return mk(TermOp::zero, {}); }
inline TermPtr t_lit(const Nat& n) {
  if (n == 0) return t_zero();
  auto t = std::make_shared<Term>();
  t->op = TermOp::lit;
  t->value = n;
  return t;
}
inline TermPtr t_var(std::string name) {
  auto t = std::make_shared<Term>();
  t->op = TermOp::var;
  t->name = std::move(name);
  return t;
}
inline TermPtr t_succ(TermPtr a) { return mk(TermOp::succ, {std::move(a)}); }
inline TermPtr t_add(TermPtr a, TermPtr b) { return mk(TermOp::add, {std::move(a), std::move(b)}); }
inline TermPtr t_mul(TermPtr a, TermPtr b) { return mk(TermOp::mul, {std::move(a), std::move(b)}); }
inline TermPtr t_monus(TermPtr a, TermPtr b) { return mk(TermOp::monus, {std::move(a), std::move(b)}); }
inline TermPtr t_half(TermPtr a) { return mk(TermOp::half, {std::move(a)}); }
inline TermPtr t_len(TermPtr a) { return mk(TermOp::len, {std::move(a)}); }
inline TermPtr t_pad(TermPtr a, TermPtr b) { return mk(TermOp::pad, {std::move(a), std::move(b)}); }
inline TermPtr t_msp(TermPtr a, TermPtr b) { return mk(TermOp::msp, {std::move(a), std::move(b)}); }
inline TermPtr t_smash(TermPtr a, TermPtr b) { return mk(TermOp::smash, {std::move(a), std::move(b)}); }
inline TermPtr t_bit(TermPtr i, TermPtr x) { return mk(TermOp::bit, {std::move(i), std::move(x)}); }
inline TermPtr t_lsp(TermPtr x, TermPtr i) { return mk(TermOp::lsp, {std::move(x), std::move(i)}); }
inline TermPtr t_bhat(TermPtr w, TermPtr width, TermPtr index) {
  return mk(TermOp::bhat, {std::move(w), std::move(width), std::move(index)});
}
inline TermPtr t_cond(TermPtr s, TermPtr y, TermPtr z) {
  return mk(TermOp::cond, {std::move(s), std::move(y), std::move(z)});
}
inline TermPtr t_max(TermPtr a, TermPtr b) { return mk(TermOp::tmax, {std::move(a), std::move(b)}); }
inline TermPtr t_min(TermPtr a, TermPtr b) { return mk(TermOp::tmin, {std::move(a), std::move(b)}); }
inline TermPtr t_pair(TermPtr a, TermPtr b) { return mk(TermOp::tpair, {std::move(a), std::move(b)}); }
inline TermPtr t_ell(EpsilonSpec e, TermPtr a) {
  auto t = std::make_shared<Term>();
  t->op = TermOp::ell;
  t->eps = std::move(e);
  t->args = {std::move(a)};
  return t;
}

// Convenience: the literal 1 as S(0).
inline TermPtr t_one() { return t_succ(t_zero()); }

enum class FormulaOp { eq, leq, fnot, fand, forr, imp, exists, forall };

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
  FormulaOp op;
  TermPtr lhs, rhs;     // eq / leq
  FormulaPtr a, b;      // connectives (fnot uses a only)
  std::string var;      // quantifiers
  TermPtr bound;
  FormulaPtr body;
};

inline FormulaPtr f_eq(TermPtr l, TermPtr r) {
  auto f = std::make_shared<Formula>();
  f->op = FormulaOp::eq;
  f->lhs = std::move(l);
  f->rhs = std::move(r);
  return f;
}
inline FormulaPtr f_leq(TermPtr l, TermPtr r) {
  auto f = std::make_shared<Formula>();
  f->op = FormulaOp::leq;
  f->lhs = std::move(l);
  f->rhs = std::move(r);
  return f;
}
inline FormulaPtr f_not(FormulaPtr a) {
  auto f = std::make_shared<Formula>();
  f->op = FormulaOp::fnot;
  f->a = std::move(a);
  return f;
}
inline FormulaPtr f_and(FormulaPtr a, FormulaPtr b) {
  auto f = std::make_shared<Formula>();
  f->op = FormulaOp::fand;
  f->a = std::move(a);
  f->b = std::move(b);
  return f;
}
inline FormulaPtr f_or(FormulaPtr a, FormulaPtr b) {
  auto f = std::make_shared<Formula>();
  f->op = FormulaOp::forr;
  f->a = std::move(a);
  f->b = std::move(b);
  return f;
}
inline FormulaPtr f_imp(FormulaPtr a, FormulaPtr b) {
  auto f = std::make_shared<Formula>();
  f->op = FormulaOp::imp;
  f->a = std::move(a);
  f->b = std::move(b);
  return f;
}
inline FormulaPtr f_quant(FormulaOp q, std::string var, TermPtr bound, FormulaPtr body) {
  auto f = std::make_shared<Formula>();
  f->op = q;
  f->var = std::move(var);
  f->bound = std::move(bound);
  f->body = std::move(body);
  return f;
}
inline FormulaPtr f_exists(std::string var, TermPtr bound, FormulaPtr body) {
  return f_quant(FormulaOp::exists, std::move(var), std::move(bound), std::move(body));
}
inline FormulaPtr f_forall(std::string var, TermPtr bound, FormulaPtr body) {
  return f_quant(FormulaOp::forall, std::move(var), std::move(bound), std::move(body));
}
inline FormulaPtr f_iff(FormulaPtr a, FormulaPtr b) {
  return f_and(f_imp(a, b), f_imp(b, a));
}

inline FormulaPtr f_conj(const std::vector<FormulaPtr>& parts) {
  if (parts.empty()) throw std::invalid_argument("f_conj: empty");
  FormulaPtr acc = parts.back();
  for (std::size_t k = parts.size() - 1; k-- > 0;) acc = f_and(parts[k], acc);
  return acc;
}
inline FormulaPtr f_disj(const std::vector<FormulaPtr>& parts) {
  if (parts.empty()) throw std::invalid_argument("f_disj: empty");
  FormulaPtr acc = parts.back();
  for (std::size_t k = parts.size() - 1; k-- > 0;) acc = f_or(parts[k], acc);
  return acc;
}

// --- structural equality --------------------------------------------------

inline bool equal(const TermPtr& x, const TermPtr& y) {
  if (x.get() == y.get()) return true;
  if (x->op != y->op) return false;
  switch (x->op) {
    case TermOp::lit:
      return x->value == y->value;
    case TermOp::var:
      return x->name == y->name;
    case TermOp::ell:
      if (!(x->eps == y->eps)) return false;
      break;
    default:
      break;
  }
  if (x->args.size() != y->args.size()) return false;
  for (std::size_t k = 0; k < x->args.size(); ++k)
    if (!equal(x->args[k], y->args[k])) return false;
  return true;
}

inline bool equal(const FormulaPtr& x, const FormulaPtr& y) {
  if (x.get() == y.get()) return true;
  if (x->op != y->op) return false;
  switch (x->op) {
    case FormulaOp::eq:
    case FormulaOp::leq:
      return equal(x->lhs, y->lhs) && equal(x->rhs, y->rhs);
    case FormulaOp::fnot:
      return equal(x->a, y->a);
    case FormulaOp::fand:
    case FormulaOp::forr:
    case FormulaOp::imp:
      return equal(x->a, y->a) && equal(x->b, y->b);
    case FormulaOp::exists:
    case FormulaOp::forall:
      return x->var == y->var && equal(x->bound, y->bound) && equal(x->body, y->body);
  }
  return false;
}

// --- variables ------------------------------------------------------------
//
// Term walkers carry a visited set: construction keeps shared subtrees
// shared, so terms are DAGs and a plain tree walk can be exponential.

namespace detail {

inline void collect_vars_rec(const TermPtr& t, std::set<std::string>& out,
                             std::unordered_set<const Term*>& seen) {
  if (!seen.insert(t.get()).second) return;
  if (t->op == TermOp::var) out.insert(t->name);
  for (const auto& a : t->args) collect_vars_rec(a, out, seen);
}

}  // namespace detail

inline void collect_vars(const TermPtr& t, std::set<std::string>& out) {
  std::unordered_set<const Term*> seen;
  detail::collect_vars_rec(t, out, seen);
}

inline void collect_free_vars(const FormulaPtr& f, std::set<std::string>& out) {
  switch (f->op) {
    case FormulaOp::eq:
    case FormulaOp::leq:
      collect_vars(f->lhs, out);
      collect_vars(f->rhs, out);
      return;
    case FormulaOp::fnot:
      collect_free_vars(f->a, out);
      return;
    case FormulaOp::fand:
    case FormulaOp::forr:
    case FormulaOp::imp:
      collect_free_vars(f->a, out);
      collect_free_vars(f->b, out);
      return;
    case FormulaOp::exists:
    case FormulaOp::forall: {
      collect_vars(f->bound, out);
      std::set<std::string> inner;
      collect_free_vars(f->body, inner);
      inner.erase(f->var);
      out.insert(inner.begin(), inner.end());
      return;
    }
  }
}

inline std::set<std::string> free_vars(const TermPtr& t) {
  std::set<std::string> out;
  collect_vars(t, out);
  return out;
}
inline std::set<std::string> free_vars(const FormulaPtr& f) {
  std::set<std::string> out;
  collect_free_vars(f, out);
  return out;
}

namespace detail {

inline bool contains_var_rec(const TermPtr& t, const std::string& name,
                             std::unordered_set<const Term*>& clean) {
  if (clean.count(t.get())) return false;
  if (t->op == TermOp::var) return t->name == name;
  for (const auto& a : t->args)
    if (contains_var_rec(a, name, clean)) return true;
  clean.insert(t.get());
  return false;
}

}  // namespace detail

inline bool contains_var(const TermPtr& t, const std::string& name) {
  std::unordered_set<const Term*> clean;
  return detail::contains_var_rec(t, name, clean);
}

// Names starting with '$' are reserved for machine-generated variables so
// they can never collide with user input.
inline std::string fresh_var(std::set<std::string>& used, const std::string& hint = "v") {
  for (unsigned k = 0;; ++k) {
    std::string name = "$" + hint + (k ? std::to_string(k) : std::string());
    if (used.insert(name).second) return name;
  }
}

// --- substitution ---------------------------------------------------------

class capture_error : public std::runtime_error {
 public:
  explicit capture_error(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

// Pointer-memoized: shared subtrees are rewritten once and stay shared, so
// substitution preserves the DAG structure of its input.
inline TermPtr substitute_rec(const TermPtr& t, const std::string& name,
                              const TermPtr& repl,
                              std::unordered_map<const Term*, TermPtr>& memo) {
  if (t->op == TermOp::var) return t->name == name ? repl : t;
  if (t->args.empty()) return t;
  auto hit = memo.find(t.get());
  if (hit != memo.end()) return hit->second;
  bool changed = false;
  std::vector<TermPtr> args;
  args.reserve(t->args.size());
  for (const auto& a : t->args) {
    TermPtr next = substitute_rec(a, name, repl, memo);
    changed = changed || next.get() != a.get();
    args.push_back(std::move(next));
  }
  TermPtr out = t;
  if (changed) {
    auto fresh = std::make_shared<Term>(*t);
    fresh->args = std::move(args);
    out = fresh;
  }
  memo.emplace(t.get(), out);
  return out;
}

}  // namespace detail

inline TermPtr substitute(const TermPtr& t, const std::string& name, const TermPtr& repl) {
  std::unordered_map<const Term*, TermPtr> memo;
  return detail::substitute_rec(t, name, repl, memo);
}

namespace detail {

inline FormulaPtr substitute_rec(const FormulaPtr& f, const std::string& name,
                                 const TermPtr& repl,
                                 std::unordered_map<const Term*, TermPtr>& memo);

}  // namespace detail

inline FormulaPtr substitute(const FormulaPtr& f, const std::string& name, const TermPtr& repl) {
  std::unordered_map<const Term*, TermPtr> memo;
  return detail::substitute_rec(f, name, repl, memo);
}

namespace detail {

inline FormulaPtr substitute_rec(const FormulaPtr& f, const std::string& name,
                                 const TermPtr& repl,
                                 std::unordered_map<const Term*, TermPtr>& memo) {
  auto subst_t = [&](const TermPtr& t) { return substitute_rec(t, name, repl, memo); };
  switch (f->op) {
    case FormulaOp::eq:
    case FormulaOp::leq: {
      auto out = std::make_shared<Formula>(*f);
      out->lhs = subst_t(f->lhs);
      out->rhs = subst_t(f->rhs);
      return out;
    }
    case FormulaOp::fnot: {
      auto out = std::make_shared<Formula>(*f);
      out->a = substitute_rec(f->a, name, repl, memo);
      return out;
    }
    case FormulaOp::fand:
    case FormulaOp::forr:
    case FormulaOp::imp: {
      auto out = std::make_shared<Formula>(*f);
      out->a = substitute_rec(f->a, name, repl, memo);
      out->b = substitute_rec(f->b, name, repl, memo);
      return out;
    }
    case FormulaOp::exists:
    case FormulaOp::forall: {
      auto out = std::make_shared<Formula>(*f);
      out->bound = subst_t(f->bound);
      if (f->var == name) return out;  // shadowed inside the body
      std::set<std::string> body_free;
      collect_free_vars(f->body, body_free);
      if (body_free.count(name) && contains_var(repl, f->var)) {
        throw capture_error("substitute: '" + f->var +
                            "' in replacement would be captured");
      }
      out->body = substitute_rec(f->body, name, repl, memo);
      return out;
    }
  }
  throw std::logic_error("substitute: unreachable");
}

}  // namespace detail

}  // namespace baw
