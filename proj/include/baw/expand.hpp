#pragma once

// Expansion of defined function symbols into the core signature, and the
// monotone upper-bound transform that strips truncating operations.

#include <unordered_map>
#include <unordered_set>

#include <baw/ast.hpp>

namespace baw {

namespace detail {

// Literals up to this size expand to plain successor towers; larger ones to
// doubling chains (t + t, with sharing), which keep the tree logarithmic.
inline constexpr unsigned lit_tower_limit = 64;

inline TermPtr expand_lit(const Nat& n) {
  if (n == 0) return t_zero();
  if (n <= lit_tower_limit) {
    TermPtr acc = t_zero();
    for (Nat k = 0; k < n; ++k) acc = t_succ(acc);
    return acc;
  }
  if ((n & 1) == 1) return t_succ(expand_lit(n - 1));
  TermPtr h = expand_lit(n >> 1);
  return t_add(h, h);
}

// Pointer-memoized so shared subterms expand once and stay shared: the
// one-step definitions below duplicate their arguments, and without the memo
// nested sugar would blow a DAG up into an exponentially larger tree.  The
// key is the owning pointer, not the raw address: expansion memoizes interim
// wrapper nodes it allocates itself, and a raw-address key could be recycled
// by a later allocation after such a node dies.
inline TermPtr expand_rec(const TermPtr& t,
                          std::unordered_map<TermPtr, TermPtr>& memo) {
  if (auto hit = memo.find(t); hit != memo.end()) return hit->second;
  // Expand arguments first so one-step definitions below see core terms.
  std::vector<TermPtr> a;
  a.reserve(t->args.size());
  bool changed = false;
  for (const auto& arg : t->args) {
    a.push_back(expand_rec(arg, memo));
    changed = changed || a.back().get() != arg.get();
  }
  auto rebuilt = [&]() -> TermPtr {
    if (!changed) return t;
    auto out = std::make_shared<Term>(*t);
    out->args = a;
    return out;
  };
  auto again = [&](const TermPtr& u) { return expand_rec(u, memo); };
  auto one = t_one();
  TermPtr out;
  switch (t->op) {
    case TermOp::zero:
    case TermOp::var:
    case TermOp::succ:
    case TermOp::add:
    case TermOp::mul:
    case TermOp::monus:
    case TermOp::half:
    case TermOp::len:
    case TermOp::pad:
    case TermOp::msp:
    case TermOp::smash:
      out = rebuilt();
      break;
    case TermOp::lit:
      out = expand_lit(t->value);
      break;
    case TermOp::bit:
      // bit(i, x) = block 1 wide at index i of x
      out = again(t_bhat(a[1], one, a[0]));
      break;
    case TermOp::lsp: {
      // x -. msp(x,i) * 2^min(len(x), i)
      const TermPtr& x = a[0];
      const TermPtr& i = a[1];
      TermPtr two_min = t_msp(t_pad(one, x), t_monus(t_len(x), i));
      out = t_monus(x, t_mul(t_msp(x, i), two_min));
      break;
    }
    case TermOp::bhat: {
      // msp(lsp(w, S(x)*t), x*t)
      const TermPtr& w = a[0];
      const TermPtr& width = a[1];
      const TermPtr& index = a[2];
      out = again(
          t_msp(t_lsp(w, t_mul(t_succ(index), width)), t_mul(index, width)));
      break;
    }
    case TermOp::cond: {
      // (1 -. s)*y + (1 -. (1 -. s))*z
      const TermPtr& s = a[0];
      TermPtr ks = t_monus(one, s);
      out = t_add(t_mul(ks, a[1]), t_mul(t_monus(one, ks), a[2]));
      break;
    }
    case TermOp::tmax: {
      // cond(1 -. (y -. x), y, x): selector 0 when x >= y
      const TermPtr& x = a[0];
      const TermPtr& y = a[1];
      out = again(t_cond(t_monus(one, t_monus(y, x)), y, x));
      break;
    }
    case TermOp::tmin:
      out = again(t_monus(t_add(a[0], a[1]), t_max(a[0], a[1])));
      break;
    case TermOp::tpair: {
      // (2^len(M) + y) * 2^(len(M)+1) + (2^len(M) + x),  M = max(x, y)
      TermPtr m = again(t_max(a[0], a[1]));
      TermPtr block = t_pad(one, m);
      TermPtr b = t_pad(block, one);
      out = t_add(t_mul(t_add(block, a[1]), b), t_add(block, a[0]));
      break;
    }
    case TermOp::ell: {
      // msp(2^lenlen(t), (1-eps) * lenlen(t)) with the fraction product
      // expanded as a sum of msp's over the complement's one bits.
      EpsilonSpec c = eps_complement(t->eps);
      TermPtr n2 = t_len(t_len(a[0]));
      TermPtr acc = t_zero();
      bool any = false;
      for (std::size_t k = 0; k < c.bits.size(); ++k) {
        if (!c.bits[k]) continue;
        TermPtr piece = t_msp(n2, expand_lit(Nat(k + 1)));
        acc = any ? t_add(acc, piece) : piece;
        any = true;
      }
      out = t_msp(t_pad(one, t_len(a[0])), acc);
      break;
    }
  }
  if (!out) throw std::logic_error("expand_derived: unreachable");
  memo.emplace(t, out);
  return out;
}

// Pointer-memoized for the same DAG-preservation reason as expand_rec.
inline TermPtr star_core_rec(const TermPtr& t,
                             std::unordered_map<const Term*, TermPtr>& memo) {
  if (auto hit = memo.find(t.get()); hit != memo.end()) return hit->second;
  switch (t->op) {
    case TermOp::msp:
    case TermOp::monus: {
      TermPtr out = star_core_rec(t->args[0], memo);
      memo.emplace(t.get(), out);
      return out;
    }
    default: {
      if (t->args.empty()) return t;
      std::vector<TermPtr> a;
      a.reserve(t->args.size());
      bool changed = false;
      for (const auto& arg : t->args) {
        a.push_back(star_core_rec(arg, memo));
        changed = changed || a.back().get() != arg.get();
      }
      TermPtr out = t;
      if (changed) {
        auto fresh = std::make_shared<Term>(*t);
        fresh->args = a;
        out = fresh;
      }
      memo.emplace(t.get(), out);
      return out;
    }
  }
}

}  // namespace detail

// Rewrites every sugar node into the core signature
// {0, S, +, *, -., half, len, pad, msp, smash}; literals become numerals.
inline TermPtr expand_derived(const TermPtr& t) {
  std::unordered_map<TermPtr, TermPtr> memo;
  return detail::expand_rec(t, memo);
}

// Monotone majorant: on the core expansion, replace every msp and -. node by
// its first argument.  Every remaining operation is nondecreasing in each
// argument, so the result dominates the original term pointwise.
inline TermPtr star_core(const TermPtr& t) {
  std::unordered_map<const Term*, TermPtr> memo;
  return detail::star_core_rec(t, memo);
}

inline TermPtr star(const TermPtr& t) { return star_core(expand_derived(t)); }

namespace detail {

// Formula-level expansion; one term memo is threaded through the whole walk
// so terms shared across subformulas stay shared.
inline FormulaPtr expand_rec(const FormulaPtr& f,
                             std::unordered_map<TermPtr, TermPtr>& memo) {
  switch (f->op) {
    case FormulaOp::eq:
    case FormulaOp::leq: {
      auto out = std::make_shared<Formula>(*f);
      out->lhs = expand_rec(f->lhs, memo);
      out->rhs = expand_rec(f->rhs, memo);
      return out;
    }
    case FormulaOp::fnot: {
      auto out = std::make_shared<Formula>(*f);
      out->a = expand_rec(f->a, memo);
      return out;
    }
    case FormulaOp::fand:
    case FormulaOp::forr:
    case FormulaOp::imp: {
      auto out = std::make_shared<Formula>(*f);
      out->a = expand_rec(f->a, memo);
      out->b = expand_rec(f->b, memo);
      return out;
    }
    case FormulaOp::exists:
    case FormulaOp::forall: {
      auto out = std::make_shared<Formula>(*f);
      out->bound = expand_rec(f->bound, memo);
      out->body = expand_rec(f->body, memo);
      return out;
    }
  }
  throw std::logic_error("expand_derived: unreachable");
}

// True when every node reachable from t avoids smash; "clean" caches
// positive answers so shared subterms are checked once.
inline bool first_sorted_rec(const TermPtr& t,
                             std::unordered_set<const Term*>& clean) {
  if (clean.count(t.get())) return true;
  if (t->op == TermOp::smash) return false;
  for (const auto& a : t->args)
    if (!first_sorted_rec(a, clean)) return false;
  clean.insert(t.get());
  return true;
}

inline bool first_sorted_rec(const FormulaPtr& f,
                             std::unordered_set<const Term*>& clean) {
  switch (f->op) {
    case FormulaOp::eq:
    case FormulaOp::leq:
      return first_sorted_rec(f->lhs, clean) && first_sorted_rec(f->rhs, clean);
    case FormulaOp::fnot:
      return first_sorted_rec(f->a, clean);
    case FormulaOp::fand:
    case FormulaOp::forr:
    case FormulaOp::imp:
      return first_sorted_rec(f->a, clean) && first_sorted_rec(f->b, clean);
    case FormulaOp::exists:
    case FormulaOp::forall:
      return first_sorted_rec(f->bound, clean) &&
             first_sorted_rec(f->body, clean);
  }
  return true;
}

}  // namespace detail

// Formula-level expansion: map expand_derived over every term.
inline FormulaPtr expand_derived(const FormulaPtr& f) {
  std::unordered_map<TermPtr, TermPtr> memo;
  return detail::expand_rec(f, memo);
}

// True when the term stays inside the first-sorted signature (no smash).
inline bool first_sorted(const TermPtr& t) {
  std::unordered_set<const Term*> clean;
  return detail::first_sorted_rec(t, clean);
}
inline bool first_sorted(const FormulaPtr& f) {
  std::unordered_set<const Term*> clean;
  return detail::first_sorted_rec(f, clean);
}

}  // namespace baw
