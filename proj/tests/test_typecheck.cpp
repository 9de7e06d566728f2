#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "kos/typecheck.hpp"

using namespace kos;
using kth::load;
using kth::parse;

namespace {
constexpr Fuel kFuel{100000};

TypeErrorKind error_kind(const CheckResult& r) {
  const TypeError* e = errored(r);
  REQUIRE(e != nullptr);
  return e->kind;
}
}  // namespace

TEST_CASE("the qualified temperature object checks and infers its declared type") {
  auto defs = load("env.kos");
  CHECK(is_ok(check(defs.ctx, parse("obj"), parse("QualifiedTemp"), kFuel)));
  InferResult ir = infer(defs.ctx, parse("obj"), kFuel);
  const Term* ty = inferred_type(ir);
  REQUIRE(ty);
  CHECK(alpha_equal(*ty, Term::constant("QualifiedTemp")));
  // the literal tuple itself checks against the qualified type
  CHECK(is_ok(check(defs.ctx, parse("<<25, p_unit25>, <prim_le(0, 25), prim_le(25, 80)>>"),
                    parse("QualifiedTemp"), kFuel)));
}

TEST_CASE("a pressure reading cannot feed the humidity slot") {
  auto defs = load("env.kos");
  InferResult ir = infer(defs.ctx, parse("combine(ku1)(p)"), kFuel);
  const TypeError* e = errored(ir);
  REQUIRE(e);
  CHECK(e->kind == TypeErrorKind::DomainMismatch);
}

TEST_CASE("refl checks only when the endpoints are convertible") {
  auto defs = load("env.kos");
  CHECK(is_ok(check(defs.ctx, Term::refl(), parse("Id(Val, 25, 25)"), kFuel)));
  CheckResult bad = check(defs.ctx, Term::refl(), parse("Id(Result, Failure, Pass)"), kFuel);
  CHECK(error_kind(bad) == TypeErrorKind::IdEndpointsUnequal);
}

TEST_CASE("batch qualification accepts Pass and rejects Failure") {
  auto defs = load("env.kos");
  CHECK(is_ok(check(defs.ctx, parse("<\"B9\", <Pass, refl>>"), parse("QualifiedBatch"), kFuel)));
  CheckResult bad =
      check(defs.ctx, parse("<\"B9\", <Failure, refl>>"), parse("QualifiedBatch"), kFuel);
  CHECK(error_kind(bad) == TypeErrorKind::IdEndpointsUnequal);
}

TEST_CASE("literals check against their base sorts") {
  Context ctx;
  CHECK(is_ok(check(ctx, Term::val(5), Term::base(BaseKind::Val), kFuel)));
  CHECK(is_ok(check(ctx, Term::id_lit("m"), Term::base(BaseKind::Id), kFuel)));
  CHECK(is_ok(check(ctx, Term::time(TimeKind::Timestamp, 1), Term::base(BaseKind::Time), kFuel)));
  InferResult ir = infer(ctx, Term::base(BaseKind::Val), kFuel);
  const Term* s = inferred_type(ir);
  REQUIRE(s);
  CHECK(alpha_equal(*s, Term::sort(Sort::data(0))));
}

TEST_CASE("formation: impredicative function space lands in Prop") {
  auto defs = load("env.kos");
  // Pi over a data-axis domain into Prop is Prop regardless of the level.
  SortResult sr = formation_sort(defs.ctx, parse("(v : Val) -> is_T(v)"), kFuel);
  REQUIRE(std::holds_alternative<Sort>(sr));
  CHECK(std::get<Sort>(sr) == Sort::prop());

  sr = formation_sort(defs.ctx, parse("(t : QualifiedTemp) -> is_T(25)"), kFuel);
  REQUIRE(std::holds_alternative<Sort>(sr));
  CHECK(std::get<Sort>(sr) == Sort::prop());
}

TEST_CASE("formation: predicative sigma with an embedded proposition") {
  auto defs = load("env.kos");
  // Hand-evaluated max rule: Val sits at data level 0, the embedded
  // proposition at 1, so the pair type lands at Data(1).
  SortResult sr = formation_sort(defs.ctx, parse("(v : Val) * is_T(v)"), kFuel);
  REQUIRE(std::holds_alternative<Sort>(sr));
  CHECK(std::get<Sort>(sr) == Sort::data(1));

  sr = formation_sort(defs.ctx, parse("Val * Time"), kFuel);
  REQUIRE(std::holds_alternative<Sort>(sr));
  CHECK(std::get<Sort>(sr) == Sort::data(0));
}

TEST_CASE("formation: identity types are propositions") {
  Context ctx;
  SortResult sr = formation_sort(ctx, parse("Id(Val, 1, 2)"), kFuel);
  REQUIRE(std::holds_alternative<Sort>(sr));
  CHECK(std::get<Sort>(sr) == Sort::prop());
}

TEST_CASE("formation: sums stay on the data axis") {
  Context ctx;
  SortResult sr = formation_sort(ctx, parse("Val + Time"), kFuel);
  REQUIRE(std::holds_alternative<Sort>(sr));
  CHECK(std::get<Sort>(sr) == Sort::data(0));
}

TEST_CASE("formation: sigma components must stay on the data axis") {
  Context ctx;
  // Quantifying a pair component over all propositions is impredicative.
  SortResult sr = formation_sort(ctx, parse("(x : Prop) * Val"), kFuel);
  const TypeError* e = std::get_if<TypeError>(&sr);
  REQUIRE(e);
  CHECK(e->kind == TypeErrorKind::UniverseViolation);

  sr = formation_sort(ctx, parse("(x : Type(1)) * Val"), kFuel);
  e = std::get_if<TypeError>(&sr);
  REQUIRE(e);
  CHECK(e->kind == TypeErrorKind::UniverseViolation);

  // A data universe as component is fine predicatively: it lives one level up.
  sr = formation_sort(ctx, parse("(x : Data(1)) * Val"), kFuel);
  REQUIRE(std::holds_alternative<Sort>(sr));
  CHECK(std::get<Sort>(sr) == Sort::data(2));
}

TEST_CASE("formation: Pi over universes lands at the max logical level") {
  Context ctx;
  SortResult sr = formation_sort(ctx, parse("(a : Type(2)) -> Type(3)"), kFuel);
  REQUIRE(std::holds_alternative<Sort>(sr));
  CHECK(std::get<Sort>(sr) == Sort::type(4));  // Type(3) : Type(4)
}

TEST_CASE("prop embeds one way into the data axis") {
  auto defs = load("env.kos");
  // A proposition can be used where a Data(1) classifier is expected...
  CHECK(is_ok(check(defs.ctx, parse("is_T(25)"), Term::sort(Sort::data(1)), kFuel)));
  // ...but plain data types are not propositions.
  CheckResult bad = check(defs.ctx, parse("Val"), Term::sort(Sort::prop()), kFuel);
  CHECK(errored(bad));
}

TEST_CASE("check_context accepts the corpus modules") {
  CHECK(is_ok(check_context(Context{}, kFuel)));
  auto defs = load("env.kos");
  CHECK(is_ok(check_context(defs.ctx, kFuel)));
  auto bearing = load("bearing.kos");
  CHECK(is_ok(check_context(bearing.ctx, kFuel)));
}

TEST_CASE("check_context reports the first offending entry") {
  Context ctx;
  ctx.declare("good", Term::base(BaseKind::Val));
  ctx.declare("x", Term::app(Term::val(1), Term::val(2)));
  CheckResult cr = check_context(ctx, kFuel);
  const TypeError* e = errored(cr);
  REQUIRE(e);
  CHECK(e->kind == TypeErrorKind::NotAFunction);
  REQUIRE(e->context_index);
  CHECK(*e->context_index == 1);
}

TEST_CASE("primitive predicate synthesis follows the decision procedure") {
  Context ctx;
  // an 82 degree reading is not at or under an 80 degree bound
  auto r1 = synth_prim_proof(ctx, PrimTag::LeVal, {Term::val(82), Term::val(80)}, kFuel);
  CHECK(std::holds_alternative<PrimRefuted>(r1));
  // 120 kPa against a 110 kPa ceiling
  auto r2 = synth_prim_proof(ctx, PrimTag::LeVal, {Term::val(120), Term::val(110)}, kFuel);
  CHECK(std::holds_alternative<PrimRefuted>(r2));
  // reflexive bound
  auto r3 = synth_prim_proof(ctx, PrimTag::LeVal, {Term::val(25), Term::val(25)}, kFuel);
  const Term* proof = std::get_if<Term>(&r3);
  REQUIRE(proof);
  // the emitted witness re-checks by evaluation
  Term goal = prim_positive_type(PrimTag::LeVal, {Term::val(25), Term::val(25)});
  CHECK(is_ok(check(ctx, *proof, goal, kFuel)));
}

TEST_CASE("prim synthesis is Unknown on non-literal arguments") {
  Context ctx;
  auto r = synth_prim_proof(ctx, PrimTag::LeVal, {Term::var(0), Term::val(1)}, kFuel);
  CHECK(std::holds_alternative<PrimUnknown>(r));
}

TEST_CASE("registry membership decides through the context") {
  Context ctx;
  ctx.add_registry("equip", {"M03"});
  auto yes =
      synth_prim_proof(ctx, PrimTag::InSet, {Term::id_lit("M03"), Term::id_lit("equip")}, kFuel);
  CHECK(std::get_if<Term>(&yes));
  auto no =
      synth_prim_proof(ctx, PrimTag::InSet, {Term::id_lit("M04"), Term::id_lit("equip")}, kFuel);
  CHECK(std::holds_alternative<PrimRefuted>(no));
  auto unknown =
      synth_prim_proof(ctx, PrimTag::InSet, {Term::id_lit("M03"), Term::id_lit("nope")}, kFuel);
  CHECK(std::holds_alternative<PrimUnknown>(unknown));
}

TEST_CASE("forged primitive witnesses are rejected") {
  Context ctx;
  Term forged = Term::prim(PrimTag::LeVal, false, {Term::val(82), Term::val(80)});
  InferResult ir = infer(ctx, forged, kFuel);
  const TypeError* e = errored(ir);
  REQUIRE(e);
  CHECK(e->kind == TypeErrorKind::InvalidPrimProof);
}

TEST_CASE("refuting witnesses inhabit the negation") {
  Context ctx;
  Term refuter = Term::prim(PrimTag::LeVal, true, {Term::val(82), Term::val(80)});
  Term goal = Term::arrow(prim_positive_type(PrimTag::LeVal, {Term::val(82), Term::val(80)}),
                          Term::empty());
  CHECK(is_ok(check(ctx, refuter, goal, kFuel)));
}

TEST_CASE("two primitive witnesses of one proposition are convertible") {
  Context ctx;
  Term a = Term::prim(PrimTag::LeVal, false, {Term::val(3), Term::val(5)});
  Term b = Term::prim(PrimTag::LeVal, false,
                      {Term::proj1(Term::pair(Term::val(3), Term::val(0))), Term::val(5)});
  CHECK(conv_equal(a, b, ctx, kFuel) == Conv::Equal);
}

TEST_CASE("accepted terms keep their type after normalization") {
  auto defs = load("env.kos");
  for (const char* src : {"obj", "combine(ku1)(ku2)", "p1(p1(obj))", "good_batch"}) {
    Term t = parse(src);
    InferResult ir = infer(defs.ctx, t, kFuel);
    const Term* ty = inferred_type(ir);
    REQUIRE(ty);
    NormalizeResult nr = normalize(t, defs.ctx, kFuel);
    REQUIRE_FALSE(nr.exhausted);
    CHECK(is_ok(check(defs.ctx, nr.term, *ty, kFuel)));
  }
}

TEST_CASE("unknown surfaces uniformly on fuel exhaustion") {
  auto defs = load("env.kos");
  Term tuple = parse("<<25, p_unit25>, <prim_le(0, 25), prim_le(25, 80)>>");
  CHECK(out_of_budget(check(defs.ctx, tuple, parse("QualifiedTemp"), Fuel{2})));
  CHECK(out_of_budget(infer(defs.ctx, parse("combine(ku1)(ku2)"), Fuel{1})));
}

TEST_CASE("unbound names are reported") {
  Context ctx;
  InferResult ir = infer(ctx, Term::constant("ghost"), kFuel);
  const TypeError* e = errored(ir);
  REQUIRE(e);
  CHECK(e->kind == TypeErrorKind::UnboundVariable);
  ir = infer(ctx, Term::var(3), kFuel);
  e = errored(ir);
  REQUIRE(e);
  CHECK(e->kind == TypeErrorKind::UnboundVariable);
}

TEST_CASE("eliminators demand the right scrutinee shapes") {
  Context ctx;
  InferResult not_pair = infer(ctx, Term::proj1(Term::val(1)), kFuel);
  REQUIRE(errored(not_pair));
  CHECK(errored(not_pair)->kind == TypeErrorKind::NotAPair);

  Term cs = Term::case_of(Term::val(1), "x", Term::val(0), "y", Term::val(0));
  InferResult not_sum = infer(ctx, cs, kFuel);
  REQUIRE(errored(not_sum));
  CHECK(errored(not_sum)->kind == TypeErrorKind::NotASum);

  InferResult not_fn = infer(ctx, Term::app(Term::val(1), Term::val(2)), kFuel);
  REQUIRE(errored(not_fn));
  CHECK(errored(not_fn)->kind == TypeErrorKind::NotAFunction);
}
