#include "kos/search.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>

namespace kos::search {

namespace {

using Clock = std::chrono::steady_clock;

bool is_literal_term(const Term& t) {
  return t.is<node::ValLit>() || t.is<node::TimeLit>() || t.is<node::IdLit>();
}

const node::Const* app_spine(const Term& t, std::vector<Term>& args) {
  const Term* cur = &t;
  while (const auto* app = cur->as<node::App>()) {
    args.push_back(app->arg);
    cur = &app->fn;
  }
  std::reverse(args.begin(), args.end());
  return cur->as<node::Const>();
}

// Rigid head symbol of a (possibly binder-open) type, used to prune
// hopeless eliminations. Unfoldable constants and variable heads are
// flexible; everything else is rigid and must match the goal's head.
struct HeadSym {
  enum class Kind : std::uint8_t {
    Flexible, ConstName, SortT, BaseT, SigmaT, SumT, PiT, IdT, EmptyT, LitT
  };
  Kind kind = Kind::Flexible;
  std::string name;
};

HeadSym head_symbol(const Term& t, const Context& ctx) {
  using namespace node;
  const Term* cur = &t;
  while (const auto* app = cur->as<App>()) cur = &app->fn;
  const auto& p = cur->payload();
  if (const auto* c = std::get_if<Const>(&p)) {
    const Context::Entry* e = ctx.lookup(c->name);
    if (e && e->body) return {HeadSym::Kind::Flexible, ""};
    return {HeadSym::Kind::ConstName, c->name};
  }
  if (std::holds_alternative<SortTerm>(p)) return {HeadSym::Kind::SortT, ""};
  if (std::holds_alternative<BaseType>(p)) return {HeadSym::Kind::BaseT, ""};
  if (std::holds_alternative<Sigma>(p)) return {HeadSym::Kind::SigmaT, ""};
  if (std::holds_alternative<Sum>(p)) return {HeadSym::Kind::SumT, ""};
  if (std::holds_alternative<Pi>(p)) return {HeadSym::Kind::PiT, ""};
  if (std::holds_alternative<IdType>(p)) return {HeadSym::Kind::IdT, ""};
  if (std::holds_alternative<Empty>(p)) return {HeadSym::Kind::EmptyT, ""};
  if (std::holds_alternative<ValLit>(p) || std::holds_alternative<TimeLit>(p) ||
      std::holds_alternative<IdLit>(p))
    return {HeadSym::Kind::LitT, ""};
  return {HeadSym::Kind::Flexible, ""};
}

bool heads_compatible(const HeadSym& a, const HeadSym& b) {
  if (a.kind == HeadSym::Kind::Flexible || b.kind == HeadSym::Kind::Flexible) return true;
  if (a.kind != b.kind) return false;
  if (a.kind == HeadSym::Kind::ConstName) return a.name == b.name;
  return true;
}

void harvest_literals(const Term& t, std::vector<Term>& out, std::set<Digest>& seen) {
  if (is_literal_term(t)) {
    Digest d = term_hash(t);
    if (seen.insert(d).second) out.push_back(t);
    return;
  }
  std::size_t n = child_count(t);
  for (std::uint32_t i = 0; i < n; ++i) {
    auto c = child_at(t, i);
    if (c) harvest_literals(*c, out, seen);
  }
}

// Goal-directed candidate enumerator. Candidate families are tried in a
// fixed order (context atoms, literals, goal-shape introductions, fact
// eliminations), each recursing in deterministic order, so the first proof
// found is a function of the goal and the base only — budgets merely
// truncate the walk.
class Enumerator {
 public:
  Enumerator(const Context& ctx, const Budget& budget)
      : ctx_(ctx),
        fuel_(Fuel{budget.fuel}),
        depth_limit_(budget.depth),
        deadline_(Clock::now() + std::chrono::milliseconds(budget.timeout_ms)) {}

  // Search a closed proof of `goal`. Checks every candidate with the
  // typechecker before accepting it.
  SearchDetail run(const Term& goal) {
    std::set<Digest> seen;
    harvest_literals(goal, literals_, seen);
    NormalizeResult g = normalize(goal, ctx_, fuel_);
    if (g.exhausted) return {SearchStatus::Budget, std::nullopt};
    harvest_literals(g.term, literals_, seen);

    std::optional<Term> found;
    Locals locals;
    proofs(g.term, locals, depth_limit_, [&](const Term& cand) {
      if (!charge()) return false;
      CheckResult cr = check(ctx_, {}, cand, g.term, fuel_);
      if (std::holds_alternative<BudgetOut>(cr)) {
        truncated_ = true;
        return false;
      }
      if (is_ok(cr)) {
        found = cand;
        return true;
      }
      return false;
    });
    if (std::getenv("KOS_SEARCH_DEBUG")) {
      std::fprintf(stderr,
                   "[search] fuel_left=%llu yields=%llu dead=%zu truncated=%d found=%d\n",
                   static_cast<unsigned long long>(fuel_.remaining),
                   static_cast<unsigned long long>(yield_count_), candidates_.size(),
                   truncated_ ? 1 : 0, found ? 1 : 0);
    }
    if (found) return {SearchStatus::Found, found};
    if (truncated_ || fuel_.exhausted) return {SearchStatus::Budget, std::nullopt};
    return {SearchStatus::Exhausted, std::nullopt};
  }

 private:
  using Yield = std::function<bool(const Term&)>;

  bool charge() {
    if (Clock::now() > deadline_) {
      truncated_ = true;
      return false;
    }
    if (!fuel_.take()) {
      truncated_ = true;
      return false;
    }
    return true;
  }

  Conv conv(const Term& a, const Term& b) {
    Conv c = conv_equal(a, b, ctx_, fuel_);
    if (c == Conv::Unknown) truncated_ = true;
    return c;
  }

  // Normal form of a context entry's type, computed once.
  const Term* entry_nf(std::size_t i) {
    if (entry_nf_.size() != ctx_.entries().size())
      entry_nf_.resize(ctx_.entries().size());
    if (!entry_nf_[i]) {
      NormalizeResult nr = normalize(ctx_.entries()[i].type, ctx_, fuel_);
      if (nr.exhausted) {
        truncated_ = true;
        return nullptr;
      }
      entry_nf_[i] = nr.term;
    }
    return &*entry_nf_[i];
  }

  // Local binders then global entries, in declaration order. Matching is by
  // normal-form alpha equality against the (already normal) goal.
  bool atoms(const Term& goal, Locals& locals, const Yield& yield) {
    for (std::size_t i = 0; i < locals.size(); ++i) {
      std::uint32_t idx = static_cast<std::uint32_t>(locals.size() - 1 - i);
      Term ty = shift(locals[i], static_cast<std::int32_t>(locals.size() - i));
      if (conv(ty, goal) == Conv::Equal && yield(Term::var(idx))) return true;
      if (truncated_) return false;
    }
    const auto& entries = ctx_.entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const Term* nf = entry_nf(i);
      if (!nf) return false;
      if (alpha_equal(*nf, goal) && yield(Term::constant(entries[i].name))) return true;
    }
    return false;
  }

  bool literal_candidates(const Term& goal, const Yield& yield) {
    const auto* base = goal.as<node::BaseType>();
    if (!base) return false;
    for (const Term& lit : literals_) {
      bool kind_ok = (base->kind == BaseKind::Val && lit.is<node::ValLit>()) ||
                     (base->kind == BaseKind::Time && lit.is<node::TimeLit>()) ||
                     (base->kind == BaseKind::Id && lit.is<node::IdLit>());
      if (kind_ok && yield(lit)) return true;
    }
    return false;
  }

  // Eliminations: walk every hypothesis (locals and globals), consuming Pi by
  // searched arguments, Sigma by projections, Sum by case analysis.
  bool eliminations(const Term& goal, Locals& locals, std::uint32_t depth, const Yield& yield) {
    for (std::size_t i = 0; i < locals.size(); ++i) {
      std::uint32_t idx = static_cast<std::uint32_t>(locals.size() - 1 - i);
      Term ty = shift(locals[i], static_cast<std::int32_t>(locals.size() - i));
      if (derive(Term::var(idx), ty, goal, locals, depth, yield, 0)) return true;
      if (truncated_) return false;
    }
    const auto& entries = ctx_.entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const Term* nf = entry_nf(i);
      if (!nf) return false;
      if (derive(Term::constant(entries[i].name), *nf, goal, locals, depth, yield, 0))
        return true;
      if (truncated_) return false;
    }
    return false;
  }

  bool derive(Term head, Term head_type, const Term& goal, Locals& locals, std::uint32_t depth,
              const Yield& yield, int elim_steps) {
    if (elim_steps > 0) {
      NormalizeResult nf = normalize(head_type, ctx_, fuel_);
      if (nf.exhausted) {
        truncated_ = true;
        return false;
      }
      head_type = nf.term;
      if (alpha_equal(head_type, goal) && yield(head)) return true;
    }
    if (depth == 0) {
      truncated_ = true;
      return false;
    }
    if (elim_steps >= 6) return false;  // spine length guard
    WhnfResult w = whnf(head_type, ctx_, fuel_);
    if (w.exhausted) {
      truncated_ = true;
      return false;
    }
    if (const auto* pi = w.term.as<node::Pi>()) {
      // Only descend when the spine's ultimate result can match the goal;
      // otherwise searching arguments is a blind (often cyclic) walk.
      const Term* result = &pi->codomain;
      while (const auto* next = result->as<node::Pi>()) result = &next->codomain;
      if (!heads_compatible(head_symbol(*result, ctx_), head_symbol(goal, ctx_)))
        return false;
      return proofs(pi->domain, locals, depth - 1, [&](const Term& arg) {
        Term next_ty = substitute(pi->codomain, arg);
        return derive(Term::app(head, arg), next_ty, goal, locals, depth, yield,
                      elim_steps + 1);
      });
    }
    if (const auto* sg = w.term.as<node::Sigma>()) {
      Term fst = Term::proj1(head);
      if (derive(fst, sg->fst_type, goal, locals, depth, yield, elim_steps + 1)) return true;
      if (truncated_) return false;
      Term snd_ty = substitute(sg->snd_type, fst);
      return derive(Term::proj2(head), snd_ty, goal, locals, depth, yield, elim_steps + 1);
    }
    if (const auto* sm = w.term.as<node::Sum>(); sm && elim_steps == 0) {
      // case(h, x. l, y. r): both branches must prove the (shifted) goal.
      Term shifted = shift(goal, 1);
      locals.push_back(sm->left);
      bool stop = proofs(shifted, locals, depth - 1, [&](const Term& l) {
        locals.pop_back();
        locals.push_back(sm->right);
        bool inner = proofs(shifted, locals, depth - 1, [&](const Term& r) {
          return yield(Term::case_of(head, "x", l, "y", r));
        });
        locals.pop_back();
        locals.push_back(sm->left);
        return inner;
      });
      locals.pop_back();
      return stop;
    }
    return false;
  }

  // Negative primitive witnesses for goals of the form Atom -> Empty.
  bool negative_prim(const Term& domain, const Yield& yield) {
    std::vector<Term> args;
    const node::Const* head = app_spine(domain, args);
    std::optional<PrimTag> tag;
    if (head) tag = prim_tag_for_const(head->name);
    if (const auto* id = domain.as<node::IdType>()) {
      tag = PrimTag::EqVal;
      args = {id->lhs, id->rhs};
    }
    if (!tag || args.size() != 2) return false;
    std::vector<Term> norm;
    for (const Term& a : args) {
      NormalizeResult nr = normalize(a, ctx_, fuel_);
      if (nr.exhausted) {
        truncated_ = true;
        return false;
      }
      norm.push_back(nr.term);
    }
    std::optional<bool> verdict = prim_decide(ctx_, *tag, norm);
    if (verdict && !*verdict) return yield(Term::prim(*tag, true, norm));
    return false;
  }

  // Memoizing wrapper: a closed goal whose candidate space was fully explored
  // with zero yields has none at any depth; skip it on re-encounter.
  bool proofs(const Term& goal_in, Locals& locals, std::uint32_t depth, const Yield& yield) {
    if (!charge()) return false;
    NormalizeResult nr = normalize(goal_in, ctx_, fuel_);
    if (nr.exhausted) {
      truncated_ = true;
      return false;
    }
    const Term goal = nr.term;
    bool closed = locals.empty() || free_vars(goal).empty();
    Digest gh;
    if (closed) {
      gh = term_hash(goal);
      if (auto it = candidates_.find(gh); it != candidates_.end()) {
        for (const Term& c : it->second) {
          if (!charge()) return false;
          ++yield_count_;
          if (yield(c)) return true;
        }
        return false;
      }
    }
    bool trunc_before = truncated_;
    std::vector<Term> collected;
    bool cacheable = closed;
    bool stop = proofs_core(goal, locals, depth, [&](const Term& cand) {
      ++yield_count_;
      if (cacheable && collected.size() < 4096)
        collected.push_back(cand);
      else
        cacheable = false;
      return yield(cand);
    });
    // Cache only complete, untruncated explorations; they are
    // consumer-independent, so replay preserves the enumeration order.
    if (!stop && cacheable && !truncated_ && !trunc_before)
      candidates_.emplace(gh, std::move(collected));
    return stop;
  }

  bool proofs_core(const Term& goal, Locals& locals, std::uint32_t depth, const Yield& yield) {
    using namespace node;

    // 1. hypotheses and declared facts
    if (atoms(goal, locals, yield)) return true;
    if (truncated_) return false;

    // 2. literals for base-typed slots
    if (literal_candidates(goal, yield)) return true;

    // 3. introductions directed by the goal head
    if (const auto* id = goal.as<IdType>()) {
      Conv cv = conv(id->lhs, id->rhs);
      if (cv == Conv::Equal && yield(Term::refl())) return true;
      if (truncated_) return false;
    }
    {
      std::vector<Term> args;
      const Const* head = app_spine(goal, args);
      if (head && args.size() == 2) {
        if (auto tag = prim_tag_for_const(head->name)) {
          PrimSynthResult pr = synth_prim_proof(ctx_, *tag, args, fuel_);
          if (const Term* proof = std::get_if<Term>(&pr)) {
            if (yield(*proof)) return true;
          }
          if (fuel_.exhausted) {
            truncated_ = true;
            return false;
          }
        }
      }
    }
    if (const auto* sg = goal.as<Sigma>()) {
      if (depth == 0) {
        truncated_ = true;
        return false;
      }
      bool stop = proofs(sg->fst_type, locals, depth - 1, [&](const Term& a) {
        return proofs(substitute(sg->snd_type, a), locals, depth - 1, [&](const Term& b) {
          return yield(Term::pair(a, b));
        });
      });
      if (stop) return true;
      if (truncated_) return false;
    }
    if (const auto* pi = goal.as<Pi>()) {
      if (pi->codomain.is<Empty>() && negative_prim(pi->domain, yield)) return true;
      if (truncated_) return false;
      if (depth == 0) {
        truncated_ = true;
        return false;
      }
      locals.push_back(pi->domain);
      bool stop = proofs(pi->codomain, locals, depth - 1, [&](const Term& body) {
        return yield(Term::lam("x", pi->domain, body));
      });
      locals.pop_back();
      if (stop) return true;
      if (truncated_) return false;
    }
    if (const auto* sm = goal.as<Sum>()) {
      if (depth == 0) {
        truncated_ = true;
        return false;
      }
      bool stop = proofs(sm->left, locals, depth - 1, [&](const Term& a) {
        return yield(Term::inl(a, sm->right));
      });
      if (stop) return true;
      if (truncated_) return false;
      stop = proofs(sm->right, locals, depth - 1, [&](const Term& b) {
        return yield(Term::inr(b, sm->left));
      });
      if (stop) return true;
      if (truncated_) return false;
    }

    // 4. eliminations of hypotheses
    return eliminations(goal, locals, depth, yield);
  }

  const Context& ctx_;
  FuelState fuel_;
  std::uint32_t depth_limit_;
  Clock::time_point deadline_;
  bool truncated_ = false;
  std::uint64_t yield_count_ = 0;
  std::vector<Term> literals_;
  std::vector<std::optional<Term>> entry_nf_;
  std::map<Digest, std::vector<Term>> candidates_;  // closed-goal candidate lists
};

Context facts_context(const Context& defs, const std::vector<KnowledgeItem>& facts) {
  Context ctx = defs;
  std::vector<const KnowledgeItem*> ordered;
  ordered.reserve(facts.size());
  for (const KnowledgeItem& f : facts) ordered.push_back(&f);
  std::sort(ordered.begin(), ordered.end(),
            [](const KnowledgeItem* a, const KnowledgeItem* b) { return a->id < b->id; });
  for (const KnowledgeItem* f : ordered) {
    if (f->status == kernel::ItemStatus::Active) ctx.define(f->id, f->term, f->type);
  }
  return ctx;
}

}  // namespace

SearchDetail search_proof_detail(const Context& defs, const std::vector<KnowledgeItem>& facts,
                                 const Term& goal, const Budget& budget) {
  Context ctx = facts_context(defs, facts);
  Enumerator direct(ctx, budget);
  SearchDetail d = direct.run(goal);
  if (d.status == SearchStatus::Found || d.status == SearchStatus::Budget) return d;

  // No proof in the candidate space: attempt a refutation at the same budget.
  Enumerator refuter(ctx, budget);
  SearchDetail r = refuter.run(Term::arrow(goal, Term::empty()));
  if (r.status == SearchStatus::Found) return {SearchStatus::Refuted, r.witness};
  if (r.status == SearchStatus::Budget) return {SearchStatus::Budget, std::nullopt};
  return {SearchStatus::Exhausted, std::nullopt};
}

SearchOutcome search_proof(const Context& defs, const std::vector<KnowledgeItem>& facts,
                           const Term& goal, const Budget& budget) {
  SearchDetail d = search_proof_detail(defs, facts, goal, budget);
  switch (d.status) {
    case SearchStatus::Found: return Found{*d.witness};
    case SearchStatus::Refuted: return Refuted{*d.witness};
    case SearchStatus::Exhausted:
    case SearchStatus::Budget: return Unknown{};
  }
  return Unknown{};
}

// ---------------------------------------------------------------------------
// Root cause synthesis
// ---------------------------------------------------------------------------

namespace {

// Dig through nested pairs for the leading literal (e.g. a machine id inside
// a refined machine record).
std::optional<Term> leading_literal(const Context& ctx, Term t, Fuel fuel) {
  FuelState fs(fuel);
  for (int i = 0; i < 8; ++i) {
    NormalizeResult nr = normalize(t, ctx, fs);
    if (nr.exhausted) return std::nullopt;
    if (is_literal_term(nr.term)) return nr.term;
    if (nr.term.is<node::Pair>()) {
      t = Term::proj1(nr.term);
      continue;
    }
    return std::nullopt;
  }
  return std::nullopt;
}

bool type_matches(const Context& ctx, const Term& item_type, const std::string& const_name,
                  Fuel fuel) {
  if (!ctx.contains(const_name)) return false;
  return conv_equal(item_type, Term::constant(const_name), ctx, fuel) == Conv::Equal;
}

struct AnomalyKey {
  std::uint64_t time = ~0ull;
  std::string machine;
  std::string id;
  bool operator<(const AnomalyKey& o) const {
    return std::tie(time, machine, id) < std::tie(o.time, o.machine, o.id);
  }
};

}  // namespace

RootCauseResult build_root_cause(const Context& defs, const std::vector<KnowledgeItem>& facts,
                                 const KnowledgeItem& failure, const Budget& budget) {
  Context ctx = facts_context(defs, facts);
  Fuel f{budget.fuel};

  if (failure.status != kernel::ItemStatus::Active || !type_matches(ctx, failure.type, "FailEvt", f))
    return NotFound{};
  if (!ctx.contains("causal_proof")) return NotFound{};

  // Deterministic anomaly order: earliest time, then machine id, then item id.
  std::vector<std::pair<AnomalyKey, const KnowledgeItem*>> anomalies;
  for (const KnowledgeItem& it : facts) {
    if (it.status != kernel::ItemStatus::Active) continue;
    if (!type_matches(ctx, it.type, "Anomaly", f)) continue;
    AnomalyKey key;
    key.id = it.id;
    Term self = Term::constant(it.id);
    if (auto t = leading_literal(ctx, Term::proj2(Term::proj2(Term::proj2(self))), f)) {
      if (const auto* tl = t->as<node::TimeLit>()) key.time = tl->millis;
    }
    if (auto m = leading_literal(ctx, Term::proj1(self), f)) {
      if (const auto* sl = m->as<node::IdLit>()) key.machine = sl->value;
    }
    anomalies.emplace_back(key, &it);
  }
  std::sort(anomalies.begin(), anomalies.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  bool budget_hit = false;
  for (const auto& [key, anomaly] : anomalies) {
    Term goal = Term::app(Term::app(Term::constant("causal_proof"), Term::constant(anomaly->id)),
                          Term::constant(failure.id));
    SearchDetail det = search_proof_detail(defs, facts, goal, budget);
    if (det.status == SearchStatus::Budget) {
      budget_hit = true;
      continue;
    }
    if (det.status != SearchStatus::Found) continue;

    RootCauseReport report;
    report.failure = failure;
    report.anomaly = *anomaly;
    report.causal_proof = *det.witness;
    report.report_term = Term::pair(Term::constant(failure.id),
                                    Term::pair(Term::constant(anomaly->id), *det.witness));

    // The assembled tuple must re-check against the report type.
    if (ctx.contains("RootCauseReport")) {
      CheckResult cr = check(ctx, report.report_term, Term::constant("RootCauseReport"),
                             Fuel{budget.fuel});
      if (!is_ok(cr)) continue;
    }

    // Extract the process step referenced by the causal proof, if any.
    std::function<void(const Term&)> find_step = [&](const Term& t) {
      if (report.step) return;
      if (const auto* c = t.as<node::Const>()) {
        for (const KnowledgeItem& it : facts) {
          if (it.id == c->name && it.status == kernel::ItemStatus::Active &&
              type_matches(ctx, it.type, "ProcStep", f)) {
            report.step = it;
            return;
          }
        }
      }
      std::size_t n = child_count(t);
      for (std::uint32_t i = 0; i < n; ++i) {
        auto ch = child_at(t, i);
        if (ch) find_step(*ch);
      }
    };
    find_step(report.causal_proof);
    return report;
  }
  if (budget_hit) return Unknown{};
  return NotFound{};
}

// ---------------------------------------------------------------------------
// Counterfactuals
// ---------------------------------------------------------------------------

ContribResult counterfactual_contrib(const Context& defs,
                                     const std::vector<KnowledgeItem>& facts,
                                     const std::string& removed_id, const Term& goal,
                                     const Budget& budget) {
  bool present = std::any_of(facts.begin(), facts.end(),
                             [&](const KnowledgeItem& f) { return f.id == removed_id; });
  if (!present) return PreconditionUnproven{};

  SearchDetail full = search_proof_detail(defs, facts, goal, budget);
  if (full.status != SearchStatus::Found) return PreconditionUnproven{};

  std::vector<KnowledgeItem> shadow;
  shadow.reserve(facts.size());
  for (const KnowledgeItem& f : facts)
    if (f.id != removed_id) shadow.push_back(f);

  SearchDetail det = search_proof_detail(defs, shadow, goal, budget);
  switch (det.status) {
    case SearchStatus::Found: return Contribution::Redundant;
    case SearchStatus::Refuted:
    case SearchStatus::Exhausted: return Contribution::Necessary;
    case SearchStatus::Budget: return Contribution::Unknown;
  }
  return Contribution::Unknown;
}

std::vector<KnowledgeItem> shadow_substitute(const std::vector<KnowledgeItem>& facts,
                                             const std::string& id, const Term& new_term) {
  std::vector<KnowledgeItem> shadow = facts;
  for (KnowledgeItem& f : shadow)
    if (f.id == id) f.term = new_term;
  return shadow;
}

// ---------------------------------------------------------------------------
// Watchers
// ---------------------------------------------------------------------------

Term replace_const(const Term& t, std::string_view name, const Term& replacement) {
  if (const auto* c = t.as<node::Const>()) {
    if (c->name == name) return replacement;
    return t;
  }
  std::size_t n = child_count(t);
  Term out = t;
  for (std::uint32_t i = 0; i < n; ++i) {
    auto ch = child_at(out, i);
    if (!ch) continue;
    Term replaced = replace_const(*ch, name, replacement);
    if (!replaced.same_node(*ch)) out = *with_child(out, i, replaced);
  }
  return out;
}

namespace {

// Guard helper percent_gt(x, y, pct): holds iff x * 100 > y * pct, decided on
// evaluated literals with a le_val witness over the scaled values.
std::optional<bool> eval_guard(const Context& ctx, const Term& guard, FuelState& fuel) {
  std::vector<Term> args;
  const node::Const* head = app_spine(guard, args);
  if (head && head->name == "percent_gt" && args.size() == 3) {
    Nat vals[3];
    for (int i = 0; i < 3; ++i) {
      NormalizeResult nr = normalize(args[i], ctx, fuel);
      if (nr.exhausted) return std::nullopt;
      const auto* v = nr.term.as<node::ValLit>();
      if (!v) return std::nullopt;
      vals[i] = v->value;
    }
    return vals[0] * 100 > vals[1] * vals[2];
  }
  kernel::Obligation ob = kernel::synthesize_obligation(ctx, guard, fuel);
  if (ob.status == kernel::ObligationStatus::Found) return true;
  if (ob.status == kernel::ObligationStatus::Unknown) return std::nullopt;
  return false;
}

}  // namespace

std::vector<kernel::Event> run_watchers(const kernel::KernelState& state, const Context& defs,
                                        const std::map<std::string, kernel::EventDef>& events,
                                        const std::vector<Watcher>& watchers,
                                        const Budget& budget,
                                        std::vector<WatcherEmission>* emissions) {
  std::vector<kernel::Event> out;
  Context ctx = kernel::state_context(defs, state);
  FuelState fuel(Fuel{budget.fuel});
  Fuel per_check{budget.fuel};

  for (const Watcher& w : watchers) {
    auto defit = events.find(w.emit_event);
    if (defit == events.end()) continue;

    std::vector<const kernel::KnowledgeItem*> subjects, partners;
    for (const auto& [id, item] : state.knowledge()) {
      if (item.status != kernel::ItemStatus::Active) continue;
      if (type_matches(ctx, item.type, w.subject_type, per_check)) subjects.push_back(&item);
      if (type_matches(ctx, item.type, w.partner_type, per_check)) partners.push_back(&item);
    }

    for (const auto* s : subjects) {
      for (const auto* p : partners) {
        Term skey = replace_const(w.subject_key, "subject", Term::constant(s->id));
        Term pkey = replace_const(w.partner_key, "partner", Term::constant(p->id));
        NormalizeResult sk = normalize(skey, ctx, fuel);
        NormalizeResult pk = normalize(pkey, ctx, fuel);
        if (sk.exhausted || pk.exhausted) return out;
        if (!is_literal_term(sk.term) || !is_literal_term(pk.term)) continue;
        if (!alpha_equal(sk.term, pk.term)) continue;  // unification failed: no emission
        Term match_proof = Term::prim(PrimTag::EqVal, false, {sk.term, pk.term});

        if (w.guard) {
          Term guard = replace_const(
              replace_const(*w.guard, "subject", Term::constant(s->id)), "partner",
              Term::constant(p->id));
          std::optional<bool> verdict = eval_guard(ctx, guard, fuel);
          if (!verdict || !*verdict) continue;  // failed guards stay silent
        }

        Term args = replace_const(
            replace_const(w.emit_args, "subject", Term::constant(s->id)), "partner",
            Term::constant(p->id));
        out.push_back(kernel::instantiate(defit->second, args));
        if (emissions)
          emissions->push_back(
              WatcherEmission{w.name, s->id, p->id, w.emit_event, args, match_proof});
      }
    }
  }
  return out;
}

}  // namespace kos::search
