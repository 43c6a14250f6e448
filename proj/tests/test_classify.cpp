#include <baw/build.hpp>
#include <baw/classify.hpp>
#include <baw/eval.hpp>
#include <baw/parse.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <utility>
#include <vector>

#include "schema_gen.hpp"

using namespace baw;

static FormulaPtr P(const std::string& s) { return parse_formula(s); }
static TermPtr T(const std::string& s) { return parse_term(s); }

namespace {

StepSchema basic_step() {
  StepSchema s;
  s.steps = {t_succ(t_var("C")), t_add(t_var("C"), t_var("a"))};
  s.guards = {f_leq(t_var("a"), t_var("C")), f_eq(t_var("C"), t_var("C"))};
  s.ell = t_len(t_var("z"));
  return s;
}

// A query-step display over the basic step: check the result's low bit, and
// on success require the (sharply bounded) oracle at the query C + C'.
struct QueryFixture {
  FormulaPtr step, check, oracle, instance, formula;
  TermPtr query;
};

QueryFixture query_fixture() {
  QueryFixture q;
  q.step = build_steppable(basic_step());
  q.check = f_eq(t_bit(t_zero(), t_var("C'")), t_one());
  q.oracle = f_exists("y", t_len(t_var("q")),
                      f_eq(t_add(t_var("y"), t_var("y")), t_var("q")));
  q.query = t_add(t_var("C"), t_var("C'"));
  q.instance = substitute(q.oracle, "q", q.query);
  q.formula = f_and(q.step, f_imp(q.check, q.instance));
  return q;
}

}  // namespace

TEST_CASE("sharp bounds and sharply bounded formulas") {
  CHECK(is_sharp_bound(T("len(x)")));
  CHECK(is_sharp_bound(T("ell(0.1b, x + y)")));
  CHECK(is_sharp_bound(T("min(len(x), y)")));
  CHECK(is_sharp_bound(T("min(y, len(x))")));
  CHECK_FALSE(is_sharp_bound(T("x")));
  CHECK_FALSE(is_sharp_bound(T("pad(1, x)")));
  // only len/ell roots (through min) count, not arbitrary compositions
  CHECK_FALSE(is_sharp_bound(T("half(len(x))")));

  CHECK(is_open(P("not x = 0 and (y <= 2 or x = y)")));
  CHECK_FALSE(is_open(P("exists x <= len(a) (x = 0)")));
  CHECK(is_sharply_bounded(P("x = 0")));
  CHECK(is_sharply_bounded(
      P("exists x <= len(a) (forall y <= min(len(b), 5) (x + y <= a))")));
  CHECK_FALSE(is_sharply_bounded(P("exists x <= a (x = 0)")));
}

TEST_CASE("spine flattening keeps left children intact") {
  FormulaPtr a = P("x = 0");
  FormulaPtr b = P("y = 0");
  FormulaPtr c = P("w0 = 0");
  FormulaPtr chain = f_and(f_and(a, b), f_and(c, a));
  auto parts = spine(chain, FormulaOp::fand);
  REQUIRE(parts.size() == 3);
  CHECK(equal(parts[0], f_and(a, b)));
  CHECK(equal(parts[1], c));
  CHECK(equal(parts[2], a));
  CHECK(equal(refold(parts, 0, parts.size()), chain));

  FormulaPtr rchain = f_conj({a, b, c});
  auto rparts = spine(rchain, FormulaOp::fand);
  REQUIRE(rparts.size() == 3);
  CHECK(equal(refold(rparts, 0, 3), rchain));
}

TEST_CASE("hat indices count only non-sharp alternations") {
  auto idx = [](const char* s) { return hat_indices(parse_formula(s)); };
  CHECK(idx("x = 0") == std::pair(0u, 0u));
  CHECK(idx("exists x <= a (x = 0)") == std::pair(1u, 2u));
  CHECK(idx("forall x <= a (x = 0)") == std::pair(2u, 1u));
  CHECK(idx("exists x <= a (forall y <= b (x <= y))") == std::pair(2u, 3u));
  CHECK(idx("exists x <= len(a) (x = 0)") == std::pair(0u, 0u));
  CHECK(idx("not exists x <= a (x = 0)") == std::pair(2u, 1u));
  // repeated kinds merge instead of alternating
  CHECK(idx("exists x <= a (exists y <= b (x = y))") == std::pair(1u, 2u));
  // sharp quantifiers are transparent inside a matrix
  CHECK(idx("exists x <= a (x = 0 and forall y <= len(b) (y <= x))") ==
        std::pair(1u, 2u));
  CHECK(idx("exists x <= a (x = 0) -> exists y <= b (y = 0)") ==
        std::pair(2u, 2u));
}

TEST_CASE("strict prenex indices and the sharp innermost flag") {
  PrenexInfo open = prenex_info(P("x = 0"));
  CHECK(open.prenex);
  CHECK(open.e == 0u);
  CHECK(open.u == 0u);

  PrenexInfo e1 = prenex_info(P("exists x <= a (x = 0)"));
  CHECK(e1.prenex);
  REQUIRE(e1.e.has_value());
  CHECK(*e1.e == 1);
  CHECK_FALSE(e1.u.has_value());
  CHECK_FALSE(e1.innermost_sharp);

  CHECK(prenex_info(P("exists x <= len(a) (x = 0)")).innermost_sharp);

  PrenexInfo e2 = prenex_info(P("exists x <= a (forall y <= len(b) (x <= y))"));
  CHECK(e2.prenex);
  REQUIRE(e2.e.has_value());
  CHECK(*e2.e == 2);
  CHECK_FALSE(e2.u.has_value());
  CHECK(e2.innermost_sharp);

  PrenexInfo u2 = prenex_info(P("forall x <= a (exists y <= len(b) (x <= y))"));
  REQUIRE(u2.u.has_value());
  CHECK(*u2.u == 2);
  CHECK_FALSE(u2.e.has_value());

  // strict alternation: repeated quantifier kinds get no index
  PrenexInfo ee = prenex_info(P("exists x <= a (exists y <= b (x = y))"));
  CHECK(ee.prenex);
  CHECK_FALSE(ee.e.has_value());
  CHECK_FALSE(ee.u.has_value());

  CHECK_FALSE(prenex_info(P("exists x <= a (x = 0) and y = 0")).prenex);
}

TEST_CASE("growth families order the stock terms") {
  TermPtr z = t_var("z");
  TermPtr lenz = t_len(z);
  CHECK(tau_family(lenz) == "|id|");
  CHECK(tau_family(t_half(lenz)) == "|id|");
  TermPtr lin = t_add(t_mul(t_lit(3), lenz), t_lit(5));
  CHECK(tau_family(lin) == "p(|id|)");
  CHECK(tau_family(mk_sq(t_add(lenz, t_one()))) == "p(|id|)");
  TermPtr e8 = mk_sq(mk_sq(mk_sq(t_mul(t_lit(2), t_pad(t_one(), lenz)))));
  CHECK(tau_family(e8) == "p(|id|)");
  TermPtr e16 = mk_sq(e8);
  CHECK(tau_family(e16) == "2^(p(||id||))");
  CHECK(tau_family(t_smash(z, z)) == "2^(p(||id||))");
  // a constant too wide for any stock family at z = 0
  CHECK(tau_family(t_lit(Nat(1) << 257)) == "none");

  // families are upward inclusive, and domination is per family
  CHECK(tau_dominated(lenz, "p(|id|)"));
  CHECK(tau_dominated(lin, "2^(p(||id||))"));
  CHECK_FALSE(tau_dominated(e16, "p(|id|)"));
  CHECK_FALSE(tau_dominated(lin, "|id|"));
}

TEST_CASE("step matcher rejects tampered displays") {
  StepSchema s = basic_step();
  FormulaPtr F = build_steppable(s);
  REQUIRE(match_steppable(F).has_value());

  // substantive final guard
  StepSchema bad = s;
  bad.guards.back() = f_eq(t_var("C"), t_zero());
  CHECK_FALSE(match_steppable(build_steppable(bad, false)).has_value());

  REQUIRE(F->op == FormulaOp::forr);
  FormulaPtr c0 = F->a;
  auto parts1 = spine(F->b, FormulaOp::fand);
  REQUIRE(parts1.size() == 3);

  // swapped disjuncts in the exclusion pair
  FormulaPtr pair = parts1[2];
  REQUIRE(pair->op == FormulaOp::forr);
  FormulaPtr swapped = f_or(pair->b, pair->a);
  CHECK_FALSE(
      match_steppable(f_or(c0, f_conj({parts1[0], parts1[1], swapped})))
          .has_value());

  // clamp term must repeat the shared growth bound
  FormulaPtr m1 = parts1[0];
  REQUIRE(m1->op == FormulaOp::eq);
  TermPtr clamped = m1->lhs;
  REQUIRE(clamped->op == TermOp::tmin);
  FormulaPtr m1bad = f_eq(
      t_min(clamped->args[0], t_add(clamped->args[1], t_one())), m1->rhs);
  CHECK_FALSE(
      match_steppable(f_or(c0, f_conj({m1bad, parts1[1], parts1[2]})))
          .has_value());
}

TEST_CASE("iteration matcher rejects tampered displays") {
  IterSchema s;
  s.t1 = t_var("a");
  s.t2 = t_succ(t_var("C"));
  s.guard = f_eq(t_var("C'"), t_succ(t_var("C")));
  s.ell = t_len(t_var("z"));
  s.m = 2;
  FormulaPtr F = build_iter(s);
  REQUIRE(match_iter(F).has_value());

  // packing bound must stay an even product of identical pads
  FormulaPtr odd = f_exists(
      F->var, t_mul(F->bound, t_pad(t_one(), t_var("a"))), F->body);
  CHECK_FALSE(match_iter(odd).has_value());
  FormulaPtr scaled = f_exists(F->var, t_mul(F->bound, t_lit(4)), F->body);
  CHECK_FALSE(match_iter(scaled).has_value());

  // the inner bound must be the epsilon-power of the starred start term
  REQUIRE(F->body->op == FormulaOp::forall);
  FormulaPtr flat = f_exists(
      F->var, F->bound, f_forall(F->body->var, t_lit(7), F->body->body));
  CHECK_FALSE(match_iter(flat).has_value());
}

TEST_CASE("accept matcher needs the exact two-part body") {
  FormulaPtr F = build_steppable(basic_step());
  TermPtr acc = t_bit(t_zero(), t_var("C'"));
  FormulaPtr G = wrap_accept(F, acc, t_lit(100));
  REQUIRE(match_accept(G).has_value());

  FormulaPtr G3 = f_exists(
      "C'", t_lit(100), f_conj({F, f_eq(acc, t_one()), P("0 = 0")}));
  CHECK_FALSE(match_accept(G3).has_value());

  FormulaPtr G2 =
      f_exists("C'", t_lit(100), f_and(F, f_eq(acc, t_lit(2))));
  CHECK_FALSE(match_accept(G2).has_value());

  CHECK_FALSE(
      match_accept(f_forall("C'", t_lit(100), f_and(F, f_eq(t_one(), t_one()))))
          .has_value());
}

TEST_CASE("query-step displays split into base, check, and instance") {
  QueryFixture q = query_fixture();
  auto shape = match_query_step_shape(q.formula);
  REQUIRE(shape.has_value());
  CHECK(equal(shape->check, q.check));
  CHECK(equal(shape->instance, q.instance));
  CHECK(equal(build_steppable(shape->base), q.step));

  auto qm = match_query_step(q.formula, q.oracle);
  REQUIRE(qm.has_value());
  CHECK(equal(qm->query, q.query));
  CHECK(qm->qvar == "q");

  // an oracle that ignores its query slot leaves the query generic
  FormulaPtr blind = P("exists y <= len(a) (y = 0)");
  FormulaPtr qs2 = f_and(q.step, f_imp(q.check, blind));
  auto qb = match_query_step(qs2, blind);
  REQUIRE(qb.has_value());
  CHECK(equal(qb->query, t_var("q")));

  // a mismatched oracle fails to unify
  CHECK_FALSE(match_query_step(q.formula, blind).has_value());

  // single-clause bases still split, since the left child stays intact
  StepSchema uni;
  uni.steps = {t_succ(t_var("C"))};
  uni.guards = {f_eq(t_var("C"), t_var("C"))};
  uni.ell = t_len(t_var("z"));
  FormulaPtr qs3 = f_and(build_steppable(uni), f_imp(q.check, q.instance));
  CHECK(match_query_step_shape(qs3).has_value());

  // the check must stay open
  FormulaPtr qs4 =
      f_and(q.step, f_imp(P("exists y <= a (y = 0)"), q.instance));
  CHECK_FALSE(match_query_step_shape(qs4).has_value());
}

TEST_CASE("hierarchy levels count schema nesting") {
  CHECK(ddh_level(P("x + 1 <= 5")).level == 0u);
  CHECK(ddh_level(P("exists x <= len(a) (x = 0)")).level == 0u);
  CHECK_FALSE(ddh_level(P("exists x <= a (x = a)")).level.has_value());

  FormulaPtr F = build_steppable(basic_step());
  CHECK(ddh_level(F).level == 1u);
  // accept closures are transparent
  CHECK(ddh_level(wrap_accept(F, t_one(), t_lit(64))).level == 1u);

  IterSchema it;
  it.t1 = t_var("a");
  it.t2 = t_var("C");
  it.guard = f_eq(t_var("C'"), t_succ(t_var("C")));
  it.ell = t_len(t_var("z"));
  CHECK(ddh_level(build_iter(it)).level == 1u);
  IterSchema over;
  over.t1 = t_var("a");
  over.t2 = t_var("C");
  over.guard = F;
  over.ell = t_len(t_var("z"));
  CHECK(ddh_level(build_iter(over)).level == 2u);

  CHECK(ddh_level(query_fixture().formula).level == 1u);

  DdhReport nn = ddh_level(build_numones().formula);
  REQUIRE(nn.level.has_value());
  CHECK(*nn.level == 3);
  REQUIRE(nn.ells.size() == 3);
  for (const auto& e : nn.ells) CHECK(e.family == "p(|id|)");
}

TEST_CASE("membership certificates name their route") {
  auto r1 = in_class(P("exists x <= len(a) (x + x = a)"), ClassKind::sigma_T, 0);
  CHECK(r1.member);
  CHECK(r1.certificate == "base=sharply-bounded");

  FormulaPtr pre = P("exists x <= a (forall y <= len(b) (x <= y))");
  auto r2 = in_class(pre, ClassKind::sigma_T, 1);
  CHECK(r2.member);
  CHECK(r2.certificate.find("prenex") != std::string::npos);
  CHECK_FALSE(in_class(pre, ClassKind::sigma_T, 0).member);
  // a non-sharp innermost bound blocks the prenex route at every index
  CHECK_FALSE(
      in_class(P("exists x <= a (forall y <= b (x <= y))"), ClassKind::sigma_T, 5)
          .member);

  FormulaPtr dual = P("forall x <= a (exists y <= len(b) (x <= y))");
  CHECK(in_class(dual, ClassKind::pi_T, 1).member);
  CHECK_FALSE(in_class(dual, ClassKind::sigma_T, 1).member);

  FormulaPtr F = build_steppable(basic_step());
  FormulaPtr G = wrap_accept(F, t_one(), t_lit(50));
  auto r4 = in_class(G, ClassKind::sigma_T, 1);
  CHECK(r4.member);
  CHECK(r4.certificate.find("closure=0") != std::string::npos);
  CHECK(r4.certificate.find("core=step") != std::string::npos);

  auto r5 = in_class(f_exists("b0", t_lit(10), G), ClassKind::sigma_T, 1);
  CHECK(r5.member);
  CHECK(r5.certificate.find("closure=1") != std::string::npos);

  auto r6 = in_class(G, ClassKind::sigma_U, 1);
  CHECK(r6.member);
  CHECK(r6.certificate.find("vacuous query") != std::string::npos);

  FormulaPtr Gp = f_forall("b0", t_lit(10), G);
  CHECK(in_class(Gp, ClassKind::pi_T, 1).member);
  CHECK_FALSE(in_class(Gp, ClassKind::sigma_T, 1).member);
}

TEST_CASE("guard levels force the membership index upward") {
  StepSchema hs;
  hs.cpvar = "D'";
  hs.steps = {t_succ(t_var("C"))};
  hs.guards = {f_eq(t_var("C"), t_var("C"))};
  hs.ell = t_len(t_var("z"));
  FormulaPtr H = wrap_accept(build_steppable(hs),
                             t_bit(t_zero(), t_var("D'")), t_lit(64), "D'");

  StepSchema os;
  os.steps = {t_add(t_var("C"), t_var("C")), t_succ(t_var("C"))};
  os.guards = {H, f_eq(t_var("C"), t_var("C"))};
  os.ell = t_len(t_var("z"));
  FormulaPtr G = wrap_accept(build_steppable(os), t_one(), t_lit(64));

  CHECK_FALSE(in_class(G, ClassKind::sigma_T, 1).member);
  CHECK(in_class(G, ClassKind::sigma_T, 2).member);
  DdhReport rep = ddh_level(G);
  REQUIRE(rep.level.has_value());
  CHECK(*rep.level == 2);

  // growth families gate membership regardless of index
  StepSchema fast;
  fast.steps = {t_succ(t_var("C"))};
  fast.guards = {f_eq(t_var("C"), t_var("C"))};
  fast.ell = mk_sq(mk_sq(mk_sq(
      mk_sq(t_mul(t_lit(2), t_pad(t_one(), t_len(t_var("z"))))))));
  FormulaPtr Gf = wrap_accept(build_steppable(fast), t_one(), t_lit(64));
  CHECK_FALSE(in_class(Gf, ClassKind::sigma_T, 3).member);
  CHECK(in_class(Gf, ClassKind::sigma_T, 1, "2^(p(||id||))").member);
}

TEST_CASE("query clauses separate the T and U hierarchies") {
  QueryFixture q = query_fixture();
  FormulaPtr G = wrap_accept(q.formula, t_one(), t_lit(200));

  auto u1 = in_class(G, ClassKind::sigma_U, 1);
  CHECK(u1.member);
  CHECK(u1.certificate.find("query-step") != std::string::npos);
  CHECK(u1.certificate.find("vacuous") == std::string::npos);
  CHECK_FALSE(in_class(G, ClassKind::sigma_T, 1).member);
  CHECK_FALSE(in_class(G, ClassKind::sigma_T, 4).member);

  // the oracle instance needs its own certificate at the same level
  FormulaPtr bad = f_exists(
      "y", t_var("q"), f_eq(t_add(t_var("y"), t_var("y")), t_var("q")));
  FormulaPtr qsb =
      f_and(q.step, f_imp(q.check, substitute(bad, "q", q.query)));
  CHECK_FALSE(
      in_class(wrap_accept(qsb, t_one(), t_lit(200)), ClassKind::sigma_U, 1)
          .member);
}

TEST_CASE("labels collect every recognized shape") {
  ClassLabel lo = classify(P("x = 0 or not y = 0"));
  CHECK(lo.open);
  CHECK(lo.sharply_bounded);
  CHECK(lo.ddh == 0u);
  CHECK(lo.tau == "|id|");
  CHECK(lo.sigma_hat == 0);
  CHECK_FALSE(lo.steppable);

  ClassLabel lp = classify(P("exists x <= a (forall y <= len(b) (x <= y))"));
  CHECK(lp.e_index == 2u);
  CHECK_FALSE(lp.u_index.has_value());
  CHECK(lp.sigma_g == 1u);
  CHECK_FALSE(lp.pi_g.has_value());
  CHECK(lp.sigma_hat == 1);
  CHECK(lp.pi_hat == 2);
  // non-sharp innermost bound: no G-class label
  CHECK_FALSE(classify(P("exists x <= a (forall y <= b (x <= y))"))
                  .sigma_g.has_value());

  FormulaPtr F = build_steppable(basic_step());
  ClassLabel ls = classify(F);
  CHECK(ls.steppable);
  CHECK(ls.open);
  CHECK(ls.sharply_bounded);
  CHECK_FALSE(ls.iteration);
  CHECK(ls.ddh == 1u);
  CHECK(ls.tau == "|id|");

  IterSchema it;
  it.t1 = t_var("a");
  it.t2 = t_var("C");
  it.guard = f_eq(t_var("C'"), t_succ(t_var("C")));
  it.ell = t_len(t_var("z"));
  ClassLabel li = classify(build_iter(it));
  CHECK(li.iteration);
  CHECK_FALSE(li.steppable);
  CHECK_FALSE(li.accept_state);
  CHECK(li.sigma_hat == 1);  // sharp inner forall is transparent

  ClassLabel la = classify(wrap_accept(F, t_one(), t_lit(64)));
  CHECK(la.accept_state);
  CHECK(la.trivial_accept);
  ClassLabel lb = classify(
      wrap_accept(F, t_bit(t_zero(), t_var("C'")), t_lit(64)));
  CHECK(lb.accept_state);
  CHECK_FALSE(lb.trivial_accept);

  ClassLabel lq = classify(query_fixture().formula);
  CHECK(lq.query_steppable);
  CHECK_FALSE(lq.steppable);

  ClassLabel ln = classify(build_numones().formula);
  CHECK(ln.iteration);
  CHECK(ln.ddh == 3u);
  CHECK(ln.tau == "p(|id|)");
}

TEST_CASE("random schemas round-trip and classify at their construction level") {
  for (unsigned seed = 1; seed <= 150; ++seed) {
    schema_gen::Rng rng(seed);
    schema_gen::Draw d = schema_gen::draw_formula(rng);
    CAPTURE(seed, d.is_step, d.level, d.worst_family);

    DdhReport rep = ddh_level(d.formula);
    REQUIRE(rep.level.has_value());
    CHECK(*rep.level == d.level);
    ClassLabel lab = classify(d.formula);
    CHECK(lab.ddh == d.level);
    CHECK(lab.tau == d.worst_family);

    if (d.is_step) {
      auto m = match_steppable(d.formula);
      REQUIRE(m.has_value());
      CHECK(equal(build_steppable(*m), d.formula));
      REQUIRE(m->steps.size() == d.step.steps.size());
      for (std::size_t i = 0; i < m->steps.size(); ++i) {
        CHECK(equal(m->steps[i], d.step.steps[i]));
        CHECK(equal(m->guards[i], d.step.guards[i]));
      }
      CHECK(equal(m->ell, d.step.ell));
      CHECK(m->cvar == d.step.cvar);
      CHECK(m->cpvar == d.step.cpvar);
    } else {
      auto m = match_iter(d.formula);
      REQUIRE(m.has_value());
      CHECK(equal(build_iter(m->schema), d.formula));
      CHECK(equal(m->schema.t1, d.iter.t1));
      CHECK(equal(m->schema.t2, d.iter.t2));
      CHECK(equal(m->schema.guard, d.iter.guard));
      CHECK(equal(m->schema.ell, d.iter.ell));
      CHECK(m->schema.m == d.iter.m);
      CHECK(m->schema.eps == d.iter.eps);
      REQUIRE(m->C);
      CHECK(m->C->op == TermOp::var);
      CHECK(m->C->name == d.iter.cvar);
    }

    // membership under the worst family, monotone across kinds and indices
    FormulaPtr G = wrap_accept(d.formula, t_one(), t_lit(1000));
    const std::string big = "2^(p(||id||))";
    CHECK(in_class(G, ClassKind::sigma_T, 1, big).member);
    CHECK(in_class(G, ClassKind::sigma_T, 2, big).member);
    CHECK(in_class(G, ClassKind::sigma_U, 1, big).member);
    CHECK(in_class(G, ClassKind::pi_T, 1, big).member);
    CHECK(in_class(G, ClassKind::sigma_T, 1, d.worst_family).member);
    if (d.worst_family == "p(|id|)")
      CHECK_FALSE(in_class(G, ClassKind::sigma_T, 1, "|id|").member);
    if (d.worst_family == "2^(p(||id||))")
      CHECK_FALSE(in_class(G, ClassKind::sigma_T, 1, "p(|id|)").member);
  }
}
