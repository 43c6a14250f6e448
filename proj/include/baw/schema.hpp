#pragma once

// Schema types for step relations and bounded iteration, plus the numeric
// growth-certificate check that gates their use.

#include <baw/ast.hpp>
#include <baw/eval.hpp>
#include <baw/expand.hpp>

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace baw {

// Certifies |ell(z)| <= scale * ell_{1-eps}(h(z)) for all z, witnessed
// numerically on a doubling grid up to 2^64 (the desk-scale domain).
struct GrowthCertificate {
  Nat scale = 0;        // 0 = not yet established
  TermPtr h;            // monotone inner function of z; empty = identity
};

namespace detail {

inline std::vector<Nat> growth_grid() {
  std::vector<Nat> zs = {0, 1, 2, 3};
  for (unsigned k = 2; k <= 64; ++k) {
    zs.push_back((Nat(1) << k) - 1);
    zs.push_back(Nat(1) << k);
    zs.push_back((Nat(1) << k) + 1);
  }
  return zs;
}

}  // namespace detail

// The growth-rate side condition on a step or iteration bound: the length of
// ell(z) must be dominated, up to the certificate's scale factor, by the
// (1-eps)-compressed exponential of h(z).  Checked pointwise on the grid.
inline bool certificate_holds(const TermPtr& ell, const EpsilonSpec& eps,
                              const GrowthCertificate& cert,
                              const std::string& zvar = "z") {
  if (cert.scale == 0) return false;
  EpsilonSpec rest = eps_complement(eps);  // exponent 1-eps; may be zero
  for (const Nat& z : detail::growth_grid()) {
    Environment env{{zvar, z}};
    Nat lhs = len(eval_term(ell, env));
    Nat hz = cert.h ? eval_term(cert.h, Environment{{zvar, z}}) : z;
    Nat rhs = cert.scale * ell_eps(rest, hz);
    if (lhs > rhs) return false;
  }
  return true;
}

// Search the smallest workable scale with h = identity.
inline std::optional<GrowthCertificate> find_certificate(
    const TermPtr& ell, const EpsilonSpec& eps, const std::string& zvar = "z") {
  GrowthCertificate cert;
  cert.h = nullptr;
  for (unsigned m = 1; m <= 256; m <<= 1) {
    cert.scale = m;
    if (certificate_holds(ell, eps, cert, zvar)) {
      // tighten linearly below the first passing power of two
      for (Nat m2 = m / 2 + 1; m2 < m; ++m2) {
        GrowthCertificate probe{m2, nullptr};
        if (certificate_holds(ell, eps, probe, zvar)) return probe;
      }
      return cert;
    }
  }
  return std::nullopt;
}

// A step relation: for each clause a transition term t_i(C, a...) and a guard
// B_i(C, C', a...).  The final guard must be the trivial C = C.  ell is the
// growth bound as a term in zvar, and eps/cert certify its rate.
struct StepSchema {
  std::vector<TermPtr> steps;
  std::vector<FormulaPtr> guards;
  TermPtr ell;
  EpsilonSpec eps = EpsilonSpec::half();
  GrowthCertificate cert;
  std::string cvar = "C";
  std::string cpvar = "C'";
  std::string zvar = "z";
};

// A bounded iteration: chain steps t2-projected, guarded by a single step
// formula B1(C, C', a...); t1 feeds the growth bound, m scales the packing
// bound 2^(2m|t1*|).
struct IterSchema {
  TermPtr t1;
  TermPtr t2;           // projection, term in cvar
  FormulaPtr guard;     // B1
  TermPtr ell;
  EpsilonSpec eps = EpsilonSpec::half();
  GrowthCertificate cert;
  Nat m = 1;
  std::string cvar = "C";
  std::string cpvar = "C'";
  std::string ccvar = "c";     // free step-count variable
  std::string wvar = "$w";     // packing witness (bound)
  std::string uvar = "$u";     // chain index (bound)
  std::string zvar = "z";
};

// A query step: a step relation whose clauses additionally consult an oracle
// formula A(q, a...) through the machine's query interface.
struct QueryStepSchema {
  StepSchema base;
  FormulaPtr oracle;        // A with free vars qvar, then parameters
  std::string qvar = "q";
};

// Instantiate a one-variable template term.
inline TermPtr at(const TermPtr& tpl, const std::string& var, const TermPtr& arg) {
  return substitute(tpl, var, arg);
}

namespace detail {

// Pointer-memoized (same DAG-preservation concern as substitute): shared
// subterms are rewritten once and the rewrites stay shared.
inline TermPtr antisubstitute_rec(const TermPtr& t, const TermPtr& pat,
                                  const std::string& var,
                                  std::unordered_map<const Term*, TermPtr>& memo) {
  if (auto hit = memo.find(t.get()); hit != memo.end()) return hit->second;
  TermPtr out;
  if (equal(t, pat)) {
    out = t_var(var);
  } else if (t->args.empty()) {
    out = t;
  } else {
    std::vector<TermPtr> args;
    args.reserve(t->args.size());
    bool changed = false;
    for (const auto& a : t->args) {
      args.push_back(antisubstitute_rec(a, pat, var, memo));
      changed = changed || args.back().get() != a.get();
    }
    if (!changed) {
      out = t;
    } else {
      auto fresh = std::make_shared<Term>(*t);
      fresh->args = std::move(args);
      out = fresh;
    }
  }
  memo.emplace(t.get(), out);
  return out;
}

inline FormulaPtr antisubstitute_rec(const FormulaPtr& f, const TermPtr& pat,
                                     const std::string& var,
                                     std::unordered_map<const Term*, TermPtr>& memo) {
  auto anti_t = [&](const TermPtr& t) {
    return antisubstitute_rec(t, pat, var, memo);
  };
  switch (f->op) {
    case FormulaOp::eq:
    case FormulaOp::leq: {
      auto out = std::make_shared<Formula>(*f);
      out->lhs = anti_t(f->lhs);
      out->rhs = anti_t(f->rhs);
      return out;
    }
    case FormulaOp::fnot: {
      auto out = std::make_shared<Formula>(*f);
      out->a = antisubstitute_rec(f->a, pat, var, memo);
      return out;
    }
    case FormulaOp::fand:
    case FormulaOp::forr:
    case FormulaOp::imp: {
      auto out = std::make_shared<Formula>(*f);
      out->a = antisubstitute_rec(f->a, pat, var, memo);
      out->b = antisubstitute_rec(f->b, pat, var, memo);
      return out;
    }
    case FormulaOp::exists:
    case FormulaOp::forall: {
      auto out = std::make_shared<Formula>(*f);
      out->bound = anti_t(f->bound);
      out->body = antisubstitute_rec(f->body, pat, var, memo);
      return out;
    }
  }
  throw std::logic_error("antisubstitute: unreachable");
}

}  // namespace detail

// Replace every occurrence of a (closed) subterm by a variable: the partial
// inverse of substitution used by the matchers.  Matching is structural.
inline TermPtr antisubstitute(const TermPtr& t, const TermPtr& pat,
                              const std::string& var) {
  std::unordered_map<const Term*, TermPtr> memo;
  return detail::antisubstitute_rec(t, pat, var, memo);
}

inline FormulaPtr antisubstitute(const FormulaPtr& f, const TermPtr& pat,
                                 const std::string& var) {
  std::unordered_map<const Term*, TermPtr> memo;
  return detail::antisubstitute_rec(f, pat, var, memo);
}

}  // namespace baw
