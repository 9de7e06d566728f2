#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "kos/kernel.hpp"
#include "kos/runtime.hpp"
#include "kos/search.hpp"

using namespace kos;
using namespace kos::kernel;
using kth::load;
using kth::parse;

namespace {

const Budget kBudget{};

Event alarm_event(const surface::LoadedDefs& defs, std::uint64_t reading) {
  return instantiate(defs.events.at("e_stop"), Term::val(reading));
}

KernelState scheduled(const surface::LoadedDefs& defs, Event e) {
  KernelState st = rt::initial_state(defs);
  ScheduleResult r = schedule(st, defs.ctx, std::move(e), kBudget);
  REQUIRE(std::holds_alternative<KernelState>(r));
  return std::get<KernelState>(std::move(r));
}

}  // namespace

TEST_CASE("an over-temperature alarm commits the stop transition") {
  auto defs = load("temperature.kos");
  KernelState st = scheduled(defs, alarm_event(defs, 82));
  Digest before = state_hash(st);

  StepResult sr = kstep(st, defs.ctx, kBudget, &defs.events);
  auto* tr = std::get_if<Transitioned>(&sr);
  REQUIRE(tr);
  CHECK(tr->record.clock_after == 1);
  CHECK(tr->record.clock_before == 0);
  CHECK(tr->record.state_before == before);
  CHECK(tr->record.state_after == state_hash(tr->state));
  CHECK(state_hash(tr->state) != before);

  const KnowledgeItem* stopped = tr->state.item("status_stopped");
  REQUIRE(stopped);
  CHECK(stopped->status == ItemStatus::Active);
  const KnowledgeItem* running = tr->state.item("status_running");
  REQUIRE(running);
  CHECK(running->status == ItemStatus::Invalidated);
}

TEST_CASE("an unsafe pump reading is rejected and rolls back") {
  auto defs = load("pump.kos");
  Event e = instantiate(defs.events.at("pump_reading"), Term::val(120));
  KernelState st = scheduled(defs, std::move(e));
  Digest before = state_hash(st);

  StepResult sr = kstep(st, defs.ctx, kBudget, &defs.events);
  auto* rej = std::get_if<Rejected>(&sr);
  REQUIRE(rej);
  CHECK(rej->reason == RejectReason::PreRefuted);
  CHECK(state_hash(rej->state) == before);
  CHECK(verify_id(st, rej->state) == Identity::Equal);
  CHECK(rej->state.pending().empty());  // the offending event is dropped
}

TEST_CASE("a safe pump reading commits") {
  auto defs = load("pump.kos");
  Event e = instantiate(defs.events.at("pump_reading"), Term::val(90));
  KernelState st = scheduled(defs, std::move(e));
  StepResult sr = kstep(st, defs.ctx, kBudget, &defs.events);
  REQUIRE(std::holds_alternative<Transitioned>(sr));
}

TEST_CASE("an empty pending queue is quiescent") {
  auto defs = load("temperature.kos");
  KernelState st = rt::initial_state(defs);
  StepResult sr = kstep(st, defs.ctx, kBudget);
  CHECK(std::holds_alternative<Quiescent>(sr));
}

TEST_CASE("schedule appends FIFO and leaves knowledge untouched") {
  auto defs = load("pump.kos");
  KernelState st = rt::initial_state(defs);
  Digest before = state_hash(st);

  // oracle: plain list append semantics
  std::vector<std::uint64_t> order = {90, 91, 92};
  KernelState cur = st;
  for (std::uint64_t v : order) {
    ScheduleResult r =
        schedule(cur, defs.ctx, instantiate(defs.events.at("pump_reading"), Term::val(v)), kBudget);
    REQUIRE(std::holds_alternative<KernelState>(r));
    cur = std::get<KernelState>(std::move(r));
  }
  REQUIRE(cur.pending().size() == order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto* v = cur.pending()[i].args.as<node::ValLit>();
    REQUIRE(v);
    CHECK(v->value == Nat(order[i]));
  }
  CHECK(state_hash(cur) == before);
  CHECK(now(cur) == now(st));
}

TEST_CASE("schedule rejects ill-typed payloads") {
  auto defs = load("pump.kos");
  KernelState st = rt::initial_state(defs);
  Event e = instantiate(defs.events.at("pump_reading"), Term::id_lit("not-a-val"));
  ScheduleResult r = schedule(st, defs.ctx, std::move(e), kBudget);
  auto* err = std::get_if<KernelError>(&r);
  REQUIRE(err);
  CHECK(err->reason == RejectReason::IllTypedPayload);
}

TEST_CASE("tick steps the clock and nothing else") {
  auto defs = load("temperature.kos");
  KernelState st = rt::initial_state(defs);
  st.set_clock(5);
  KernelState t1 = tick(st);
  CHECK(t1.clock() == 6);
  CHECK(t1.knowledge().size() == st.knowledge().size());
  CHECK(tick(t1).clock() == 7);
}

TEST_CASE("projections are pure") {
  auto defs = load("temperature.kos");
  KernelState st = rt::initial_state(defs);
  CHECK(now(st) == 0);
  CHECK(get_knowledge(st).count("status_running") == 1);
  KernelState after =
      scheduled(defs, instantiate(defs.events.at("log_reading"), Term::val(10)));
  CHECK(now(after) == now(st));
}

TEST_CASE("unify merges consistent facts") {
  auto defs = load("env.kos");
  KernelState st;
  KnowledgeItem item{"fresh_reading", parse("<25, p_unit25>"), parse("TempC"), 0,
                     ItemStatus::Active, std::nullopt};
  UnifyResult r = unify(st, defs.ctx, item, kBudget);
  auto* merged = std::get_if<Merged>(&r);
  REQUIRE(merged);
  CHECK(merged->state.item("fresh_reading"));
  CHECK(merged->state.item("fresh_reading")->status == ItemStatus::Active);
  CHECK(state_hash(merged->state) != state_hash(st));
}

TEST_CASE("unify quarantines a fact refuted by a standing axiom") {
  // Toy three-axiom base: P holds, and a standing axiom refutes it.
  Context ctx;
  ctx.declare("P", Term::sort(Sort::prop()));
  ctx.declare("p0", Term::constant("P"));
  ctx.declare("no_p", Term::arrow(Term::constant("P"), Term::empty()));

  KernelState st;
  KnowledgeItem item{"witness", Term::constant("p0"), Term::constant("P"), 0,
                     ItemStatus::Active, std::nullopt};
  UnifyResult r = unify(st, ctx, item, Budget{10000, 3, 1000});
  auto* q = std::get_if<Quarantined>(&r);
  REQUIRE(q);
  const KnowledgeItem* stored = q->state.item("witness");
  REQUIRE(stored);
  CHECK(stored->status == ItemStatus::Invalidated);
  REQUIRE(stored->refutation);
  // the refutation inhabits Empty over the extended base
  Context view = state_context(ctx, st);
  view.define("witness", item.term, item.type);
  CHECK(is_ok(check(view, *q->state.item("witness")->refutation, Term::empty(), Fuel{10000})));

  // Independent oracle: exhaustively apply axioms to the hypotheses, depth 3.
  bool oracle_found = false;
  std::vector<Term> pool = {Term::constant("p0"), Term::constant("no_p"),
                            Term::constant("witness")};
  for (const Term& f : pool)
    for (const Term& x : pool) {
      Term cand = Term::app(f, x);
      if (is_ok(check(view, cand, Term::empty(), Fuel{10000}))) oracle_found = true;
    }
  CHECK(oracle_found);
}

TEST_CASE("unify with no fuel is Unknown and leaves the state alone") {
  auto defs = load("env.kos");
  KernelState st;
  Digest before = state_hash(st);
  KnowledgeItem item{"r1", parse("<25, p_unit25>"), parse("TempC"), 0, ItemStatus::Active,
                     std::nullopt};
  UnifyResult r = unify(st, defs.ctx, item, Budget{0, 4, 1000});
  CHECK(std::holds_alternative<UnifyUnknown>(r));
  CHECK(state_hash(st) == before);
}

TEST_CASE("verify_id distinguishes states by digest") {
  auto defs = load("temperature.kos");
  KernelState st = rt::initial_state(defs);
  CHECK(verify_id(st, st) == Identity::Equal);
  CHECK(verify_id(st, tick(st)) == Identity::NotEqual);
}

TEST_CASE("state digests are canonical") {
  KernelState a, b;
  // insertion order does not matter; the map is ordered by id
  KnowledgeItem x{"x", Term::val(1), Term::base(BaseKind::Val), 1, ItemStatus::Active, {}};
  KnowledgeItem y{"y", Term::val(2), Term::base(BaseKind::Val), 1, ItemStatus::Active, {}};
  a.put_item(x);
  a.put_item(y);
  b.put_item(y);
  b.put_item(x);
  CHECK(state_hash(a) == state_hash(b));

  // stored terms hash alpha-invariantly
  KernelState c, d;
  c.put_item({"f", Term::lam("x", std::nullopt, Term::var(0)),
              Term::arrow(Term::base(BaseKind::Val), Term::base(BaseKind::Val)), 0,
              ItemStatus::Active, {}});
  d.put_item({"f", Term::lam("renamed", std::nullopt, Term::var(0)),
              Term::arrow(Term::base(BaseKind::Val), Term::base(BaseKind::Val)), 0,
              ItemStatus::Active, {}});
  CHECK(state_hash(c) == state_hash(d));
}

TEST_CASE("preservation: every active item re-typechecks after a transition") {
  auto defs = load("temperature.kos");
  KernelState st = scheduled(defs, alarm_event(defs, 82));
  StepResult sr = kstep(st, defs.ctx, kBudget, &defs.events);
  auto* tr = std::get_if<Transitioned>(&sr);
  REQUIRE(tr);
  Context view = state_context(defs.ctx, tr->state);
  for (const auto& [id, item] : tr->state.knowledge()) {
    if (item.status != ItemStatus::Active) continue;
    CHECK(is_ok(check(defs.ctx, item.term, item.type, Fuel{100000})));
    (void)view;
  }
}

TEST_CASE("monotonicity: merged facts stay active across unrelated transitions") {
  auto defs = load("temperature.kos");
  KernelState st = rt::initial_state(defs);
  UnifyResult u = unify(st, defs.ctx,
                        KnowledgeItem{"note", Term::val(7), Term::base(BaseKind::Val), 0,
                                      ItemStatus::Active, std::nullopt},
                        kBudget);
  auto* merged = std::get_if<Merged>(&u);
  REQUIRE(merged);
  KernelState cur = merged->state;
  for (std::uint64_t v : {10, 20, 30}) {
    ScheduleResult r =
        schedule(cur, defs.ctx, instantiate(defs.events.at("log_reading"), Term::val(v)), kBudget);
    REQUIRE(std::holds_alternative<KernelState>(r));
    cur = std::get<KernelState>(std::move(r));
    StepResult sr = kstep(cur, defs.ctx, kBudget, &defs.events);
    auto* tr = std::get_if<Transitioned>(&sr);
    REQUIRE(tr);
    cur = tr->state;
    REQUIRE(cur.item("note"));
    CHECK(cur.item("note")->status == ItemStatus::Active);
  }
}

TEST_CASE("clock-suffixed ids keep repeated commits distinct") {
  auto defs = load("temperature.kos");
  KernelState cur = rt::initial_state(defs);
  for (std::uint64_t v : {10, 20}) {
    ScheduleResult r =
        schedule(cur, defs.ctx, instantiate(defs.events.at("log_reading"), Term::val(v)), kBudget);
    cur = std::get<KernelState>(std::move(r));
    StepResult sr = kstep(cur, defs.ctx, kBudget, &defs.events);
    cur = std::get<Transitioned>(std::move(sr)).state;
  }
  CHECK(cur.item("reading_1"));
  CHECK(cur.item("reading_2"));
}

TEST_CASE("an invalid passport is rejected as missing") {
  auto defs = load("pump.kos");
  Event e = instantiate(defs.events.at("pump_reading"), Term::val(90), Term::val(1));
  KernelState st = scheduled(defs, std::move(e));
  Digest before = state_hash(st);
  StepResult sr = kstep(st, defs.ctx, kBudget, &defs.events);
  auto* rej = std::get_if<Rejected>(&sr);
  REQUIRE(rej);
  CHECK(rej->reason == RejectReason::MissingPreProof);
  CHECK(state_hash(rej->state) == before);
}

TEST_CASE("a valid explicit passport is honored") {
  auto defs = load("pump.kos");
  Term prf = Term::pair(Term::prim(PrimTag::LeVal, false, {Term::val(20), Term::val(90)}),
                        Term::prim(PrimTag::LeVal, false, {Term::val(90), Term::val(110)}));
  Event e = instantiate(defs.events.at("pump_reading"), Term::val(90), prf);
  KernelState st = scheduled(defs, std::move(e));
  StepResult sr = kstep(st, defs.ctx, kBudget, &defs.events);
  CHECK(std::holds_alternative<Transitioned>(sr));
}

TEST_CASE("an add colliding with a bound name is rejected") {
  auto defs = load("temperature.kos");
  KernelState st = scheduled(defs, alarm_event(defs, 82));
  StepResult first = kstep(st, defs.ctx, kBudget, &defs.events);
  KernelState stopped = std::get<Transitioned>(std::move(first)).state;

  // replaying the same stop against an already-stopped state: the running
  // evidence is gone, so the precondition atom is missing
  ScheduleResult r = schedule(stopped, defs.ctx, alarm_event(defs, 85), kBudget);
  KernelState again = std::get<KernelState>(std::move(r));
  StepResult sr = kstep(again, defs.ctx, kBudget, &defs.events);
  auto* rej = std::get_if<Rejected>(&sr);
  REQUIRE(rej);
  CHECK(rej->reason == RejectReason::MissingPreProof);
}

TEST_CASE("budget exhaustion rejects without state change") {
  auto defs = load("temperature.kos");
  KernelState st = scheduled(defs, alarm_event(defs, 82));
  Digest before = state_hash(st);
  StepResult sr = kstep(st, defs.ctx, Budget{2, 64, 1000}, &defs.events);
  auto* rej = std::get_if<Rejected>(&sr);
  REQUIRE(rej);
  CHECK(rej->reason == RejectReason::BudgetExhausted);
  CHECK(state_hash(rej->state) == before);
}

TEST_CASE("transition records chain") {
  TransitionRecord r1;
  r1.seq = 1;
  r1.event_name = "a";
  seal_record(r1, Digest::zero());
  CHECK(r1.chain == chain_hash(Digest::zero(), r1));

  TransitionRecord r2;
  r2.seq = 2;
  r2.event_name = "b";
  seal_record(r2, r1.chain);
  CHECK(r2.prev_chain == r1.chain);
  CHECK(r2.chain != r1.chain);
  // the second chain hash covers the first record through prev_chain
  TransitionRecord r2_alt = r2;
  seal_record(r2_alt, Digest::zero());
  CHECK(r2_alt.chain != r2.chain);
}

TEST_CASE("evolutionary consistency: no Empty inhabitant after transitions") {
  auto defs = load("temperature.kos");
  KernelState cur = rt::initial_state(defs);
  for (std::uint64_t v : {10, 82}) {
    Event e = v > 80 ? alarm_event(defs, v)
                     : instantiate(defs.events.at("log_reading"), Term::val(v));
    ScheduleResult r = schedule(cur, defs.ctx, std::move(e), kBudget);
    cur = std::get<KernelState>(std::move(r));
    StepResult sr = kstep(cur, defs.ctx, kBudget, &defs.events);
    auto* tr = std::get_if<Transitioned>(&sr);
    REQUIRE(tr);
    cur = tr->state;
    search::SearchOutcome o = search::search_proof(defs.ctx, cur.active_items(),
                                                   Term::empty(), Budget{10000, 4, 1000});
    CHECK_FALSE(search::found(o));
  }
}

TEST_CASE("determinism: one event sequence, one final digest") {
  auto defs = load("temperature.kos");
  auto run_once = [&]() {
    KernelState cur = rt::initial_state(defs);
    for (std::uint64_t v : {10, 95, 20, 82, 30}) {
      ScheduleResult r = schedule(
          cur, defs.ctx, instantiate(defs.events.at("log_reading"), Term::val(v)), kBudget);
      cur = std::get<KernelState>(std::move(r));
      StepResult sr = kstep(cur, defs.ctx, kBudget, &defs.events);
      if (auto* tr = std::get_if<Transitioned>(&sr))
        cur = tr->state;
      else
        cur = std::get<Rejected>(sr).state;
    }
    return state_hash(cur).hex();
  };
  std::string first = run_once();
  for (int i = 0; i < 4; ++i) CHECK(run_once() == first);
}
