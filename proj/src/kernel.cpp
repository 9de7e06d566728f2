#include "kos/kernel.hpp"

#include <algorithm>

#include "kos/search.hpp"

namespace kos::kernel {

namespace {

// Standing consistency budget for refutation searches run on every knowledge
// extension during a transition.
constexpr Budget kConsistencyBudget{10'000, 4, 1000};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_str(std::string& out, const std::string& s) {
  put_u64(out, s.size());
  out += s;
}
void put_digest(std::string& out, const Digest& d) {
  out.append(reinterpret_cast<const char*>(d.bytes.data()), d.bytes.size());
}

std::string trace_bytes(const std::vector<ReductionStep>& trace) {
  std::string out;
  for (const ReductionStep& s : trace) {
    out.push_back(static_cast<char>(s.rule));
    out.push_back(s.aux ? 1 : 0);
    put_u64(out, s.position.size());
    for (std::uint32_t p : s.position) put_u64(out, p);
    put_digest(out, s.before);
    put_digest(out, s.after);
  }
  return out;
}

}  // namespace

const char* reject_reason_name(RejectReason r) {
  switch (r) {
    case RejectReason::MissingPreProof: return "MissingPreProof";
    case RejectReason::PreRefuted: return "PreRefuted";
    case RejectReason::PostViolated: return "PostViolated";
    case RejectReason::IllTypedPayload: return "IllTypedPayload";
    case RejectReason::BudgetExhausted: return "BudgetExhausted";
  }
  return "?";
}

Event instantiate(const EventDef& def, Term args, std::optional<Term> prf) {
  return Event{def.name, std::move(args), def.args_type, def.pre_fn,
               def.post_fn, def.op, std::move(prf)};
}

// ---------------------------------------------------------------------------
// KernelState
// ---------------------------------------------------------------------------

const KnowledgeItem* KernelState::item(std::string_view id) const {
  auto it = knowledge_.find(std::string(id));
  return it == knowledge_.end() ? nullptr : &it->second;
}

std::vector<KnowledgeItem> KernelState::active_items() const {
  std::vector<KnowledgeItem> out;
  for (const auto& [id, item] : knowledge_)
    if (item.status == ItemStatus::Active) out.push_back(item);
  return out;
}

void KernelState::put_item(KnowledgeItem item) { knowledge_[item.id] = std::move(item); }

std::optional<Event> KernelState::pop_pending() {
  if (pending_.empty()) return std::nullopt;
  Event e = std::move(pending_.front());
  pending_.pop_front();
  return e;
}

Context state_context(const Context& defs, const KernelState& state) {
  Context ctx = defs;
  for (const auto& [id, item] : state.knowledge()) {
    if (item.status != ItemStatus::Active) continue;  // invalidated items are not premises
    ctx.define(id, item.term, item.type);
  }
  return ctx;
}

Digest state_hash(const KernelState& state) {
  std::string bytes = "kstate/v1";
  put_u64(bytes, state.clock());
  for (const auto& [id, item] : state.knowledge()) {
    put_str(bytes, id);
    bytes.push_back(item.status == ItemStatus::Active ? 0 : 1);
    put_u64(bytes, item.committed_at);
    put_digest(bytes, term_hash(item.term));
    put_digest(bytes, term_hash(item.type));
    if (item.refutation)
      put_digest(bytes, term_hash(*item.refutation));
  }
  return sha256(bytes);
}

Identity verify_id(const KernelState& a, const KernelState& b) {
  return state_hash(a) == state_hash(b) ? Identity::Equal : Identity::NotEqual;
}

// ---------------------------------------------------------------------------
// Transition records
// ---------------------------------------------------------------------------

std::string record_core_bytes(const TransitionRecord& r) {
  std::string out = "krecord/v1";
  put_u64(out, r.seq);
  put_str(out, r.event_name);
  put_digest(out, r.args_digest);
  put_digest(out, r.state_before);
  put_digest(out, r.state_after);
  put_u64(out, r.clock_before);
  put_u64(out, r.clock_after);
  put_digest(out, r.pre_proof);
  put_digest(out, r.post_proof);
  put_digest(out, r.trace_digest);
  return out;
}

Digest chain_hash(const Digest& prev_chain, const TransitionRecord& r) {
  DigestBuilder b;
  b.update(prev_chain);
  b.update(record_core_bytes(r));
  return b.finish();
}

void seal_record(TransitionRecord& r, const Digest& prev_chain) {
  r.prev_chain = prev_chain;
  r.chain = chain_hash(prev_chain, r);
}

// ---------------------------------------------------------------------------
// Obligation synthesis
// ---------------------------------------------------------------------------

namespace {

bool is_literal_term(const Term& t) {
  return t.is<node::ValLit>() || t.is<node::TimeLit>() || t.is<node::IdLit>();
}

Obligation ob_found(Term proof) { return {ObligationStatus::Found, std::move(proof), Term()}; }
Obligation ob_refuted(Term refuter) {
  return {ObligationStatus::Refuted, std::move(refuter), Term()};
}
Obligation ob_missing(Term goal) { return {ObligationStatus::Missing, Term(), std::move(goal)}; }
Obligation ob_unknown() { return {ObligationStatus::Unknown, Term(), Term()}; }

// Chase an application spine; returns the head constant and arguments.
const node::Const* app_spine(const Term& t, std::vector<Term>& args) {
  const Term* cur = &t;
  while (const auto* app = cur->as<node::App>()) {
    args.push_back(app->arg);
    cur = &app->fn;
  }
  std::reverse(args.begin(), args.end());
  return cur->as<node::Const>();
}

struct Synth {
  const Context& view;
  FuelState& fuel;

  // Propositional components decompose; bare data (sort Data 0) does not.
  bool conjunction_shape(const Term& component) {
    SortResult sr = formation_sort(view, {}, component, fuel);
    const Sort* s = std::get_if<Sort>(&sr);
    if (!s) return false;
    return !(s->is_data() && s->level == 0);
  }

  Obligation atom_lookup(const Term& goal) {
    for (const Context::Entry& e : view.entries()) {
      Conv cv = conv_equal(e.type, goal, view, fuel);
      if (cv == Conv::Unknown) return ob_unknown();
      if (cv == Conv::Equal) return ob_found(Term::constant(e.name));
    }
    return ob_missing(goal);
  }

  Obligation refute_positive_atom(const Term& goal, const Term& atom) {
    // goal = atom -> Empty; a positive decision refutes the refutation goal
    // via \h. h witness, a negative decision proves it directly.
    std::vector<Term> args;
    const node::Const* head = app_spine(atom, args);
    std::optional<PrimTag> tag;
    if (head) tag = prim_tag_for_const(head->name);
    if (const auto* id = atom.as<node::IdType>()) {
      if (is_literal_term(id->lhs) && is_literal_term(id->rhs)) {
        tag = PrimTag::EqVal;
        args = {id->lhs, id->rhs};
      }
    }
    if (!tag || args.size() != 2) return ob_missing(goal);
    std::vector<Term> norm;
    for (const Term& a : args) {
      NormalizeResult nr = normalize(a, view, fuel);
      if (nr.exhausted) return ob_unknown();
      norm.push_back(nr.term);
    }
    std::optional<bool> verdict = prim_decide(view, *tag, norm);
    if (!verdict) return ob_missing(goal);
    if (!*verdict) return ob_found(Term::prim(*tag, true, norm));
    Term positive = Term::prim(*tag, false, norm);
    return ob_refuted(
        Term::lam("h", goal, Term::app(Term::var(0), shift(positive, 1))));
  }

  Obligation synth(const Term& goal_in) {
    if (fuel.exhausted) return ob_unknown();
    NormalizeResult nr = normalize(goal_in, view, fuel);
    if (nr.exhausted) return ob_unknown();
    const Term goal = nr.term;
    using namespace node;

    if (const auto* sg = goal.as<Sigma>()) {
      bool dependent = free_vars(sg->snd_type).count(0) > 0;
      // Only conjunctions decompose. A dependent pair or a tuple over bare
      // data sorts is a fact shape: its witnesses come from the knowledge
      // base, never from synthesis.
      if (dependent || !conjunction_shape(sg->fst_type) ||
          !conjunction_shape(shift(sg->snd_type, -1)))
        return atom_lookup(goal);
      Obligation a = synth(sg->fst_type);
      if (a.status == ObligationStatus::Unknown || a.status == ObligationStatus::Missing)
        return a;
      if (a.status == ObligationStatus::Refuted)
        return ob_refuted(Term::lam(
            "p", goal, Term::app(shift(a.proof, 1), Term::proj1(Term::var(0)))));
      Obligation b = synth(shift(sg->snd_type, -1));
      if (b.status == ObligationStatus::Unknown || b.status == ObligationStatus::Missing)
        return b;
      if (b.status == ObligationStatus::Refuted)
        return ob_refuted(Term::lam(
            "p", goal, Term::app(shift(b.proof, 1), Term::proj2(Term::var(0)))));
      return ob_found(Term::pair(a.proof, b.proof));
    }

    if (const auto* id = goal.as<IdType>()) {
      Conv cv = conv_equal(id->lhs, id->rhs, view, fuel);
      if (cv == Conv::Unknown) return ob_unknown();
      if (cv == Conv::Equal) {
        if (is_literal_term(id->lhs) && is_literal_term(id->rhs))
          return ob_found(Term::prim(PrimTag::EqVal, false, {id->lhs, id->rhs}));
        return ob_found(Term::refl());
      }
      NormalizeResult nl = normalize(id->lhs, view, fuel);
      NormalizeResult nrr = normalize(id->rhs, view, fuel);
      if (nl.exhausted || nrr.exhausted) return ob_unknown();
      if (is_literal_term(nl.term) && is_literal_term(nrr.term))
        return ob_refuted(Term::prim(PrimTag::EqVal, true, {nl.term, nrr.term}));
      return ob_missing(goal);
    }

    if (const auto* pi = goal.as<Pi>()) {
      bool to_empty = pi->codomain.is<Empty>();
      if (to_empty) return refute_positive_atom(goal, pi->domain);
      return ob_missing(goal);
    }

    if (const auto* sm = goal.as<Sum>()) {
      Obligation l = synth(sm->left);
      if (l.status == ObligationStatus::Found)
        return ob_found(Term::inl(l.proof, sm->right));
      if (l.status == ObligationStatus::Unknown) return l;
      Obligation r = synth(sm->right);
      if (r.status == ObligationStatus::Found)
        return ob_found(Term::inr(r.proof, sm->left));
      if (r.status == ObligationStatus::Unknown) return r;
      if (l.status == ObligationStatus::Refuted && r.status == ObligationStatus::Refuted) {
        Term refuter = Term::lam(
            "s", goal,
            Term::case_of(Term::var(0), "x", Term::app(shift(l.proof, 2), Term::var(0)), "y",
                          Term::app(shift(r.proof, 2), Term::var(0))));
        return ob_refuted(refuter);
      }
      return ob_missing(goal);
    }

    if (goal.is<Empty>()) return ob_missing(goal);

    // Primitive predicate application on literals.
    {
      std::vector<Term> args;
      const Const* head = app_spine(goal, args);
      if (head && args.size() == 2) {
        if (auto tag = prim_tag_for_const(head->name)) {
          PrimSynthResult pr = synth_prim_proof(view, *tag, args, fuel);
          if (const Term* proof = std::get_if<Term>(&pr)) return ob_found(*proof);
          if (std::holds_alternative<PrimRefuted>(pr)) {
            std::vector<Term> norm;
            for (const Term& a : args) {
              NormalizeResult n = normalize(a, view, fuel);
              if (n.exhausted) return ob_unknown();
              norm.push_back(n.term);
            }
            return ob_refuted(Term::prim(*tag, true, norm));
          }
          if (fuel.exhausted) return ob_unknown();
          return ob_missing(goal);
        }
      }
    }

    // Atom: a declared axiom or an Active knowledge item of this exact type.
    return atom_lookup(goal);
  }
};

}  // namespace

Obligation synthesize_obligation(const Context& view, const Term& goal, FuelState& fuel) {
  Synth s{view, fuel};
  return s.synth(goal);
}

// ---------------------------------------------------------------------------
// Kernel operators
// ---------------------------------------------------------------------------

KernelState tick(const KernelState& state) {
  KernelState next = state;
  next.set_clock(state.clock() + 1);
  return next;
}

ScheduleResult schedule(const KernelState& state, const Context& defs, Event e,
                        const Budget& budget) {
  FuelState fuel(Fuel{budget.fuel});
  Context view = state_context(defs, state);
  CheckResult cr = check(view, {}, e.args, e.args_type, fuel);
  if (const auto* te = std::get_if<TypeError>(&cr))
    return KernelError{RejectReason::IllTypedPayload,
                       "event args do not check: " + te->message};
  if (std::holds_alternative<BudgetOut>(cr))
    return KernelError{RejectReason::BudgetExhausted, "fuel exhausted while checking args"};
  KernelState next = state;
  next.push_pending(std::move(e));
  return next;
}

namespace {

struct OpFailure {
  RejectReason reason;
  std::string detail;
};

// Consistency gate for one candidate item against the active base: Merge or
// Quarantine by bounded refutation search; Unknown bubbles up as a failure.
std::variant<KnowledgeItem, OpFailure> consistency_gate(const Context& defs,
                                                        const KernelState& st,
                                                        KnowledgeItem item,
                                                        const Budget& budget) {
  std::vector<KnowledgeItem> facts = st.active_items();
  facts.push_back(item);
  search::SearchDetail det =
      search::search_proof_detail(defs, facts, Term::empty(), budget);
  if (det.status == search::SearchStatus::Budget)
    return OpFailure{RejectReason::BudgetExhausted,
                     "consistency search exhausted its budget for item " + item.id};
  if (det.status == search::SearchStatus::Found) {
    item.status = ItemStatus::Invalidated;
    item.refutation = det.witness;
  }
  return item;
}

}  // namespace

StepResult kstep(const KernelState& state, const Context& defs, const Budget& budget,
                 const std::map<std::string, EventDef>* events) {
  if (state.pending().empty()) return Quiescent{};

  KernelState base = state;
  Event e = *base.pop_pending();  // rejected events are dropped and logged by the caller

  auto reject = [&](RejectReason reason, std::string detail) {
    return Rejected{reason, std::move(detail), base, e};
  };

  FuelState fuel(Fuel{budget.fuel});
  Context view = state_context(defs, base);
  std::vector<ReductionStep> op_trace;

  // Payload well-typedness.
  {
    CheckResult cr = check(view, {}, e.args, e.args_type, fuel);
    if (const auto* te = std::get_if<TypeError>(&cr))
      return reject(RejectReason::IllTypedPayload, "args: " + te->message);
    if (std::holds_alternative<BudgetOut>(cr))
      return reject(RejectReason::BudgetExhausted, "args check ran out of fuel");
  }

  // Pre: verify the passport, or synthesize one for decidable goals.
  NormalizeResult pre_goal = normalize(Term::app(e.pre_fn, e.args), view, fuel);
  if (pre_goal.exhausted)
    return reject(RejectReason::BudgetExhausted, "precondition normalization ran out of fuel");
  for (auto& s : pre_goal.trace) op_trace.push_back(std::move(s));

  Term pre_proof;
  if (e.prf) {
    CheckResult cr = check(view, {}, *e.prf, pre_goal.term, fuel);
    if (const auto* te = std::get_if<TypeError>(&cr))
      return reject(RejectReason::MissingPreProof,
                    "supplied proof does not check: " + te->message);
    if (std::holds_alternative<BudgetOut>(cr))
      return reject(RejectReason::BudgetExhausted, "proof check ran out of fuel");
    pre_proof = *e.prf;
  } else {
    Obligation ob = synthesize_obligation(view, pre_goal.term, fuel);
    switch (ob.status) {
      case ObligationStatus::Found: pre_proof = ob.proof; break;
      case ObligationStatus::Refuted:
        return reject(RejectReason::PreRefuted, "precondition refuted");
      case ObligationStatus::Missing:
        return reject(RejectReason::MissingPreProof,
                      "no proof for precondition atom: missing fact");
      case ObligationStatus::Unknown:
        return reject(RejectReason::BudgetExhausted, "precondition synthesis ran out of fuel");
    }
  }

  // Op: apply the declarative effect.
  KernelState next = base;
  std::uint64_t clock_after = base.clock() + std::max<std::uint64_t>(1, e.op.clock_increment);
  next.set_clock(clock_after);

  for (const std::string& id : e.op.invalidates) {
    const KnowledgeItem* old = next.item(id);
    if (!old) return reject(RejectReason::IllTypedPayload, "invalidate: unknown item " + id);
    KnowledgeItem updated = *old;
    updated.status = ItemStatus::Invalidated;
    updated.refutation = pre_proof;  // warrant of the superseding event
    next.put_item(std::move(updated));
  }

  for (const EffectAdd& add : e.op.adds) {
    std::string id = add.id_stem;
    if (add.clock_suffix) id += "_" + std::to_string(clock_after);
    if (next.item(id) || defs.lookup(id))
      return reject(RejectReason::IllTypedPayload, "add: id already bound: " + id);
    NormalizeResult ty = normalize(Term::app(add.type_fn, e.args), view, fuel);
    if (ty.exhausted) return reject(RejectReason::BudgetExhausted, "add type evaluation");
    NormalizeResult tm = normalize(Term::app(add.term_fn, e.args), view, fuel);
    if (tm.exhausted) return reject(RejectReason::BudgetExhausted, "add term evaluation");
    for (auto& s : ty.trace) op_trace.push_back(std::move(s));
    for (auto& s : tm.trace) op_trace.push_back(std::move(s));

    CheckResult cr = check(view, {}, tm.term, ty.term, fuel);
    if (const auto* te = std::get_if<TypeError>(&cr))
      return reject(RejectReason::IllTypedPayload, "add " + id + ": " + te->message);
    if (std::holds_alternative<BudgetOut>(cr))
      return reject(RejectReason::BudgetExhausted, "add check ran out of fuel");

    KnowledgeItem item{id, tm.term, ty.term, clock_after, ItemStatus::Active, std::nullopt};
    auto gated = consistency_gate(defs, next, std::move(item), kConsistencyBudget);
    if (const auto* fail = std::get_if<OpFailure>(&gated))
      return reject(fail->reason, fail->detail);
    next.put_item(std::get<KnowledgeItem>(std::move(gated)));
  }

  for (const EffectEnqueue& enq : e.op.enqueues) {
    if (!events || !events->count(enq.event))
      return reject(RejectReason::IllTypedPayload, "enqueue: unknown event " + enq.event);
    NormalizeResult av = normalize(Term::app(enq.args_fn, e.args), view, fuel);
    if (av.exhausted) return reject(RejectReason::BudgetExhausted, "enqueue args evaluation");
    for (auto& s : av.trace) op_trace.push_back(std::move(s));
    next.push_pending(instantiate(events->at(enq.event), av.term));
  }

  // Post: judged under the new state view.
  Context next_view = state_context(defs, next);
  NormalizeResult post_goal = normalize(Term::app(e.post_fn, e.args), next_view, fuel);
  if (post_goal.exhausted)
    return reject(RejectReason::BudgetExhausted, "postcondition normalization ran out of fuel");
  for (auto& s : post_goal.trace) op_trace.push_back(std::move(s));

  Term post_proof;
  {
    Obligation ob = synthesize_obligation(next_view, post_goal.term, fuel);
    switch (ob.status) {
      case ObligationStatus::Found: post_proof = ob.proof; break;
      case ObligationStatus::Refuted:
        return reject(RejectReason::PostViolated, "postcondition refuted on candidate state");
      case ObligationStatus::Missing:
        return reject(RejectReason::PostViolated, "postcondition not provable on candidate state");
      case ObligationStatus::Unknown:
        return reject(RejectReason::BudgetExhausted, "postcondition synthesis ran out of fuel");
    }
  }

  TransitionRecord rec;
  rec.event_name = e.name;
  rec.args_digest = term_hash(e.args);
  rec.state_before = state_hash(state);
  rec.state_after = state_hash(next);
  rec.clock_before = state.clock();
  rec.clock_after = clock_after;
  rec.pre_proof = term_hash(pre_proof);
  rec.post_proof = term_hash(post_proof);
  rec.trace_digest = sha256(trace_bytes(op_trace));

  return Transitioned{std::move(next), std::move(rec), std::move(e),
                      std::move(pre_proof), std::move(post_proof), std::move(op_trace)};
}

StepResult kstep(const KernelState& state, const Context& defs, const Budget& budget) {
  return kstep(state, defs, budget, nullptr);
}

UnifyResult unify(const KernelState& state, const Context& defs, KnowledgeItem item,
                  const Budget& budget) {
  FuelState fuel(Fuel{budget.fuel});
  Context view = state_context(defs, state);
  if (state.item(item.id) || defs.lookup(item.id))
    return KernelError{RejectReason::IllTypedPayload, "id already bound: " + item.id};
  CheckResult cr = check(view, {}, item.term, item.type, fuel);
  if (const auto* te = std::get_if<TypeError>(&cr))
    return KernelError{RejectReason::IllTypedPayload, "item does not check: " + te->message};
  if (std::holds_alternative<BudgetOut>(cr)) return UnifyUnknown{};

  std::vector<KnowledgeItem> facts = state.active_items();
  item.committed_at = state.clock();
  item.status = ItemStatus::Active;
  item.refutation = std::nullopt;
  facts.push_back(item);
  search::SearchDetail det = search::search_proof_detail(defs, facts, Term::empty(), budget);
  if (det.status == search::SearchStatus::Budget) return UnifyUnknown{};
  KernelState next = state;
  if (det.status == search::SearchStatus::Found) {
    item.status = ItemStatus::Invalidated;
    item.refutation = det.witness;
    next.put_item(std::move(item));
    return Quarantined{std::move(next), *det.witness};
  }
  next.put_item(std::move(item));
  return Merged{std::move(next)};
}

}  // namespace kos::kernel
