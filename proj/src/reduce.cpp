#include "kos/reduce.hpp"

#include <random>
#include <stdexcept>

namespace kos {

const char* rule_name(Rule r) {
  switch (r) {
    case Rule::Beta: return "beta";
    case Rule::IotaSplit: return "iota_split";
    case Rule::IotaCase: return "iota_case";
    case Rule::IotaId: return "iota_id";
    case Rule::IotaJ: return "iota_j";
    case Rule::Delta: return "delta";
    case Rule::Zeta: return "zeta";
  }
  return "?";
}

namespace {
bool is_aux(Rule r) { return r == Rule::Delta || r == Rule::Zeta; }

bool is_literal(const Term& t) {
  return t.is<node::ValLit>() || t.is<node::TimeLit>() || t.is<node::IdLit>();
}
}  // namespace

// ---------------------------------------------------------------------------
// Child slots
// ---------------------------------------------------------------------------

std::size_t child_count(const Term& t) {
  using namespace node;
  const Payload& p = t.payload();
  if (std::holds_alternative<Lam>(p)) return 2;  // slot 0 = annot (may be absent), 1 = body
  if (std::holds_alternative<App>(p) || std::holds_alternative<Pair>(p) ||
      std::holds_alternative<Split>(p) || std::holds_alternative<Inl>(p) ||
      std::holds_alternative<Inr>(p) || std::holds_alternative<Pi>(p) ||
      std::holds_alternative<Sigma>(p) || std::holds_alternative<Sum>(p))
    return 2;
  if (std::holds_alternative<Case>(p) || std::holds_alternative<IdType>(p) ||
      std::holds_alternative<Let>(p))
    return 3;
  if (const auto* pr = std::get_if<PrimProof>(&p)) return pr->operands.size();
  return 0;
}

std::optional<Term> child_at(const Term& t, std::uint32_t slot) {
  using namespace node;
  const Payload& p = t.payload();
  if (const auto* x = std::get_if<Lam>(&p)) {
    if (slot == 0) return x->annot;
    if (slot == 1) return x->body;
  } else if (const auto* x = std::get_if<App>(&p)) {
    if (slot == 0) return x->fn;
    if (slot == 1) return x->arg;
  } else if (const auto* x = std::get_if<Pair>(&p)) {
    if (slot == 0) return x->fst;
    if (slot == 1) return x->snd;
  } else if (const auto* x = std::get_if<Split>(&p)) {
    if (slot == 0) return x->scrutinee;
    if (slot == 1) return x->body;
  } else if (const auto* x = std::get_if<Inl>(&p)) {
    if (slot == 0) return x->payload;
    if (slot == 1) return x->other;
  } else if (const auto* x = std::get_if<Inr>(&p)) {
    if (slot == 0) return x->payload;
    if (slot == 1) return x->other;
  } else if (const auto* x = std::get_if<Case>(&p)) {
    if (slot == 0) return x->scrutinee;
    if (slot == 1) return x->left;
    if (slot == 2) return x->right;
  } else if (const auto* x = std::get_if<Pi>(&p)) {
    if (slot == 0) return x->domain;
    if (slot == 1) return x->codomain;
  } else if (const auto* x = std::get_if<Sigma>(&p)) {
    if (slot == 0) return x->fst_type;
    if (slot == 1) return x->snd_type;
  } else if (const auto* x = std::get_if<Sum>(&p)) {
    if (slot == 0) return x->left;
    if (slot == 1) return x->right;
  } else if (const auto* x = std::get_if<IdType>(&p)) {
    if (slot == 0) return x->carrier;
    if (slot == 1) return x->lhs;
    if (slot == 2) return x->rhs;
  } else if (const auto* x = std::get_if<Let>(&p)) {
    if (slot == 0) return x->bound;
    if (slot == 1) return x->bound_type;
    if (slot == 2) return x->body;
  } else if (const auto* x = std::get_if<PrimProof>(&p)) {
    if (slot < x->operands.size()) return x->operands[slot];
  }
  return std::nullopt;
}

std::optional<Term> with_child(const Term& t, std::uint32_t slot, const Term& r) {
  using namespace node;
  const Payload& p = t.payload();
  if (const auto* x = std::get_if<Lam>(&p)) {
    if (slot == 0) return Term::lam(x->name, r, x->body);
    if (slot == 1) return Term::lam(x->name, x->annot, r);
  } else if (const auto* x = std::get_if<App>(&p)) {
    if (slot == 0) return Term::app(r, x->arg);
    if (slot == 1) return Term::app(x->fn, r);
  } else if (const auto* x = std::get_if<Pair>(&p)) {
    if (slot == 0) return Term::pair(r, x->snd);
    if (slot == 1) return Term::pair(x->fst, r);
  } else if (const auto* x = std::get_if<Split>(&p)) {
    if (slot == 0) return Term::split(r, x->name_fst, x->name_snd, x->body);
    if (slot == 1) return Term::split(x->scrutinee, x->name_fst, x->name_snd, r);
  } else if (const auto* x = std::get_if<Inl>(&p)) {
    if (slot == 0) return Term::inl(r, x->other);
    if (slot == 1) return Term::inl(x->payload, r);
  } else if (const auto* x = std::get_if<Inr>(&p)) {
    if (slot == 0) return Term::inr(r, x->other);
    if (slot == 1) return Term::inr(x->payload, r);
  } else if (const auto* x = std::get_if<Case>(&p)) {
    if (slot == 0) return Term::case_of(r, x->name_left, x->left, x->name_right, x->right);
    if (slot == 1) return Term::case_of(x->scrutinee, x->name_left, r, x->name_right, x->right);
    if (slot == 2) return Term::case_of(x->scrutinee, x->name_left, x->left, x->name_right, r);
  } else if (const auto* x = std::get_if<Pi>(&p)) {
    if (slot == 0) return Term::pi(x->name, r, x->codomain);
    if (slot == 1) return Term::pi(x->name, x->domain, r);
  } else if (const auto* x = std::get_if<Sigma>(&p)) {
    if (slot == 0) return Term::sigma(x->name, r, x->snd_type);
    if (slot == 1) return Term::sigma(x->name, x->fst_type, r);
  } else if (const auto* x = std::get_if<Sum>(&p)) {
    if (slot == 0) return Term::sum(r, x->right);
    if (slot == 1) return Term::sum(x->left, r);
  } else if (const auto* x = std::get_if<IdType>(&p)) {
    if (slot == 0) return Term::id_type(r, x->lhs, x->rhs);
    if (slot == 1) return Term::id_type(x->carrier, r, x->rhs);
    if (slot == 2) return Term::id_type(x->carrier, x->lhs, r);
  } else if (const auto* x = std::get_if<Let>(&p)) {
    if (slot == 0) return Term::let_in(x->name, r, x->bound_type, x->body);
    if (slot == 1) return Term::let_in(x->name, x->bound, r, x->body);
    if (slot == 2) return Term::let_in(x->name, x->bound, x->bound_type, r);
  } else if (const auto* x = std::get_if<PrimProof>(&p)) {
    if (slot < x->operands.size()) {
      std::vector<Term> ops = x->operands;
      ops[slot] = r;
      return Term::prim(x->tag, x->refuting, std::move(ops));
    }
  }
  return std::nullopt;
}

std::optional<Term> subterm_at(const Term& t, const TermPath& path) {
  Term cur = t;
  for (std::uint32_t slot : path) {
    auto c = child_at(cur, slot);
    if (!c) return std::nullopt;
    cur = *c;
  }
  return cur;
}

// ---------------------------------------------------------------------------
// Root contraction
// ---------------------------------------------------------------------------

namespace {

// App(App(J, p), base) with p == refl collapses to base.
bool is_j_redex(const node::App& app) {
  const auto* inner = app.fn.as<node::App>();
  if (!inner) return false;
  const auto* head = inner->fn.as<node::Const>();
  return head && head->name == kConstJ && inner->arg.is<node::Refl>();
}

}  // namespace

std::optional<std::pair<Term, Rule>> contract_root(const Term& t, const Context& ctx) {
  using namespace node;
  const Payload& p = t.payload();

  if (const auto* app = std::get_if<App>(&p)) {
    if (const auto* lam = app->fn.as<Lam>())
      return std::make_pair(substitute(lam->body, app->arg), Rule::Beta);
    if (is_j_redex(*app)) return std::make_pair(app->arg, Rule::IotaJ);
    return std::nullopt;
  }
  if (const auto* sp = std::get_if<Split>(&p)) {
    if (const auto* pr = sp->scrutinee.as<Pair>()) {
      Term step1 = substitute(sp->body, pr->fst, 1);
      return std::make_pair(substitute(step1, pr->snd, 0), Rule::IotaSplit);
    }
    return std::nullopt;
  }
  if (const auto* cs = std::get_if<Case>(&p)) {
    if (const auto* l = cs->scrutinee.as<Inl>())
      return std::make_pair(substitute(cs->left, l->payload), Rule::IotaCase);
    if (const auto* r = cs->scrutinee.as<Inr>())
      return std::make_pair(substitute(cs->right, r->payload), Rule::IotaCase);
    return std::nullopt;
  }
  if (const auto* pp = std::get_if<PrimProof>(&p)) {
    // A resolved identity judgment collapses to its canonical witness.
    if (pp->tag == PrimTag::EqVal && !pp->refuting && pp->operands.size() == 2 &&
        is_literal(pp->operands[0]) && alpha_equal(pp->operands[0], pp->operands[1]))
      return std::make_pair(Term::refl(), Rule::IotaId);
    return std::nullopt;
  }
  if (const auto* c = std::get_if<Const>(&p)) {
    if (const Context::Entry* e = ctx.lookup(c->name); e && e->body)
      return std::make_pair(*e->body, Rule::Delta);
    return std::nullopt;
  }
  if (const auto* lt = std::get_if<Let>(&p))
    return std::make_pair(substitute(lt->body, lt->bound), Rule::Zeta);
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Leftmost-outermost search
// ---------------------------------------------------------------------------

namespace {

bool find_redex(const Term& t, const Context& ctx, TermPath& path) {
  if (contract_root(t, ctx)) return true;
  std::size_t n = child_count(t);
  for (std::uint32_t i = 0; i < n; ++i) {
    auto c = child_at(t, i);
    if (!c) continue;  // absent annotation slot
    path.push_back(i);
    if (find_redex(*c, ctx, path)) return true;
    path.pop_back();
  }
  return false;
}

// Rebuild t with the subterm at `path` contracted; returns the rule applied.
std::optional<std::pair<Term, Rule>> contract_at(const Term& t, const Context& ctx,
                                                 const TermPath& path, std::size_t i = 0) {
  if (i == path.size()) return contract_root(t, ctx);
  auto c = child_at(t, path[i]);
  if (!c) return std::nullopt;
  auto sub = contract_at(*c, ctx, path, i + 1);
  if (!sub) return std::nullopt;
  auto rebuilt = with_child(t, path[i], sub->first);
  if (!rebuilt) return std::nullopt;
  return std::make_pair(*rebuilt, sub->second);
}

void collect_redexes(const Term& t, const Context& ctx, TermPath& cur,
                     std::vector<TermPath>& out) {
  if (contract_root(t, ctx)) out.push_back(cur);
  std::size_t n = child_count(t);
  for (std::uint32_t i = 0; i < n; ++i) {
    auto c = child_at(t, i);
    if (!c) continue;
    cur.push_back(i);
    collect_redexes(*c, ctx, cur, out);
    cur.pop_back();
  }
}

}  // namespace

std::optional<std::pair<Term, ReductionStep>> step_once(const Term& t, const Context& ctx) {
  TermPath path;
  if (!find_redex(t, ctx, path)) return std::nullopt;
  auto contracted = contract_at(t, ctx, path);
  if (!contracted) throw std::logic_error("step_once: located redex failed to contract");
  ReductionStep step;
  step.rule = contracted->second;
  step.position = path;
  step.before = term_hash(t);
  step.after = term_hash(contracted->first);
  step.aux = is_aux(step.rule);
  return std::make_pair(contracted->first, std::move(step));
}

std::vector<TermPath> redex_positions(const Term& t, const Context& ctx) {
  std::vector<TermPath> out;
  TermPath cur;
  collect_redexes(t, ctx, cur, out);
  return out;
}

NormalizeResult normalize(const Term& t, const Context& ctx, FuelState& fuel) {
  NormalizeResult res;
  res.term = t;
  for (;;) {
    auto next = step_once(res.term, ctx);
    if (!next) return res;
    if (!fuel.take()) {
      res.exhausted = true;
      return res;
    }
    res.term = next->first;
    res.trace.push_back(std::move(next->second));
  }
}

NormalizeResult normalize(const Term& t, const Context& ctx, Fuel fuel) {
  FuelState fs(fuel);
  return normalize(t, ctx, fs);
}

NormalizeResult normalize_random(const Term& t, const Context& ctx, Fuel fuel,
                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FuelState fs(fuel);
  NormalizeResult res;
  res.term = t;
  for (;;) {
    std::vector<TermPath> redexes = redex_positions(res.term, ctx);
    if (redexes.empty()) return res;
    if (!fs.take()) {
      res.exhausted = true;
      return res;
    }
    const TermPath& pick = redexes[rng() % redexes.size()];
    auto contracted = contract_at(res.term, ctx, pick);
    if (!contracted) throw std::logic_error("normalize_random: redex failed to contract");
    ReductionStep step;
    step.rule = contracted->second;
    step.position = pick;
    step.before = term_hash(res.term);
    step.after = term_hash(contracted->first);
    step.aux = is_aux(step.rule);
    res.term = contracted->first;
    res.trace.push_back(std::move(step));
  }
}

// ---------------------------------------------------------------------------
// Weak head normal form
// ---------------------------------------------------------------------------

WhnfResult whnf(const Term& t, const Context& ctx, FuelState& fuel) {
  Term cur = t;
  for (;;) {
    using namespace node;
    if (const auto* c = cur.as<Const>()) {
      const Context::Entry* e = ctx.lookup(c->name);
      if (e && e->body) {
        if (!fuel.take()) return {true, cur};
        cur = *e->body;
        continue;
      }
      return {false, cur};
    }
    if (const auto* lt = cur.as<Let>()) {
      if (!fuel.take()) return {true, cur};
      cur = substitute(lt->body, lt->bound);
      continue;
    }
    if (const auto* app = cur.as<App>()) {
      WhnfResult head = whnf(app->fn, ctx, fuel);
      if (head.exhausted) return {true, Term::app(head.term, app->arg)};
      if (const auto* lam = head.term.as<Lam>()) {
        if (!fuel.take()) return {true, Term::app(head.term, app->arg)};
        cur = substitute(lam->body, app->arg);
        continue;
      }
      if (const auto* inner = head.term.as<App>()) {
        const auto* j = inner->fn.as<Const>();
        if (j && j->name == kConstJ) {
          WhnfResult prf = whnf(inner->arg, ctx, fuel);
          if (prf.exhausted)
            return {true, Term::app(Term::app(inner->fn, prf.term), app->arg)};
          if (prf.term.is<Refl>()) {
            if (!fuel.take()) return {true, cur};
            cur = app->arg;
            continue;
          }
        }
      }
      return {false, Term::app(head.term, app->arg)};
    }
    if (const auto* sp = cur.as<Split>()) {
      WhnfResult scrut = whnf(sp->scrutinee, ctx, fuel);
      if (scrut.exhausted)
        return {true, Term::split(scrut.term, sp->name_fst, sp->name_snd, sp->body)};
      if (const auto* pr = scrut.term.as<Pair>()) {
        if (!fuel.take()) return {true, cur};
        cur = substitute(substitute(sp->body, pr->fst, 1), pr->snd, 0);
        continue;
      }
      return {false, Term::split(scrut.term, sp->name_fst, sp->name_snd, sp->body)};
    }
    if (const auto* cs = cur.as<Case>()) {
      WhnfResult scrut = whnf(cs->scrutinee, ctx, fuel);
      if (scrut.exhausted)
        return {true, Term::case_of(scrut.term, cs->name_left, cs->left, cs->name_right,
                                    cs->right)};
      if (const auto* l = scrut.term.as<Inl>()) {
        if (!fuel.take()) return {true, cur};
        cur = substitute(cs->left, l->payload);
        continue;
      }
      if (const auto* r = scrut.term.as<Inr>()) {
        if (!fuel.take()) return {true, cur};
        cur = substitute(cs->right, r->payload);
        continue;
      }
      return {false, Term::case_of(scrut.term, cs->name_left, cs->left, cs->name_right,
                                   cs->right)};
    }
    if (const auto* pp = cur.as<PrimProof>()) {
      if (pp->tag == PrimTag::EqVal && !pp->refuting && pp->operands.size() == 2 &&
          is_literal(pp->operands[0]) && alpha_equal(pp->operands[0], pp->operands[1])) {
        if (!fuel.take()) return {true, cur};
        cur = Term::refl();
        continue;
      }
      return {false, cur};
    }
    return {false, cur};
  }
}

WhnfResult whnf(const Term& t, const Context& ctx, Fuel fuel) {
  FuelState fs(fuel);
  return whnf(t, ctx, fs);
}

// ---------------------------------------------------------------------------
// Conversion
// ---------------------------------------------------------------------------

namespace {

// Compare normal forms. Lam annotations are ignored (they are redundant under
// conversion); eta expands a lone Lam side on the fly.
Conv cmp_nf(const Term& a, const Term& b, const Context& ctx, FuelState& fuel);

Conv cmp_eta(const node::Lam& lam, const Term& other, const Context& ctx, FuelState& fuel) {
  Term expanded = Term::app(shift(other, 1), Term::var(0));
  // The expansion can itself expose a redex (e.g. a J head); settle it first.
  WhnfResult w = whnf(expanded, ctx, fuel);
  if (w.exhausted) return Conv::Unknown;
  return cmp_nf(lam.body, w.term, ctx, fuel);
}

Conv both(Conv x, Conv y) {
  if (x == Conv::NotEqual || y == Conv::NotEqual) return Conv::NotEqual;
  if (x == Conv::Unknown || y == Conv::Unknown) return Conv::Unknown;
  return Conv::Equal;
}

Conv cmp_nf(const Term& a, const Term& b, const Context& ctx, FuelState& fuel) {
  using namespace node;
  if (a.same_node(b)) return Conv::Equal;

  const auto* la = a.as<Lam>();
  const auto* lb = b.as<Lam>();
  if (la && lb) return cmp_nf(la->body, lb->body, ctx, fuel);
  if (la) return cmp_eta(*la, b, ctx, fuel);
  if (lb) return cmp_eta(*lb, a, ctx, fuel);

  const Payload& pa = a.payload();
  const Payload& pb = b.payload();
  if (pa.index() != pb.index()) return Conv::NotEqual;

  std::size_t n = child_count(a);
  if (n != child_count(b)) return Conv::NotEqual;

  // Compare non-child payload fields structurally first.
  if (const auto* x = std::get_if<Var>(&pa)) {
    return x->index == std::get<Var>(pb).index ? Conv::Equal : Conv::NotEqual;
  }
  if (const auto* x = std::get_if<Const>(&pa)) {
    return x->name == std::get<Const>(pb).name ? Conv::Equal : Conv::NotEqual;
  }
  if (const auto* x = std::get_if<SortTerm>(&pa)) {
    return x->sort == std::get<SortTerm>(pb).sort ? Conv::Equal : Conv::NotEqual;
  }
  if (const auto* x = std::get_if<BaseType>(&pa)) {
    return x->kind == std::get<BaseType>(pb).kind ? Conv::Equal : Conv::NotEqual;
  }
  if (const auto* x = std::get_if<ValLit>(&pa)) {
    return x->value == std::get<ValLit>(pb).value ? Conv::Equal : Conv::NotEqual;
  }
  if (const auto* x = std::get_if<TimeLit>(&pa)) {
    const auto& y = std::get<TimeLit>(pb);
    return (x->kind == y.kind && x->millis == y.millis) ? Conv::Equal : Conv::NotEqual;
  }
  if (const auto* x = std::get_if<IdLit>(&pa)) {
    return x->value == std::get<IdLit>(pb).value ? Conv::Equal : Conv::NotEqual;
  }
  if (const auto* x = std::get_if<PrimProof>(&pa)) {
    const auto& y = std::get<PrimProof>(pb);
    if (x->tag != y.tag || x->refuting != y.refuting ||
        x->operands.size() != y.operands.size())
      return Conv::NotEqual;
  }
  if (std::holds_alternative<Refl>(pa) || std::holds_alternative<Empty>(pa)) return Conv::Equal;

  Conv acc = Conv::Equal;
  for (std::uint32_t i = 0; i < n; ++i) {
    auto ca = child_at(a, i);
    auto cb = child_at(b, i);
    if (ca.has_value() != cb.has_value()) {
      // Absent vs present Lam annotation slot: ignored by conversion.
      continue;
    }
    if (!ca) continue;
    acc = both(acc, cmp_nf(*ca, *cb, ctx, fuel));
    if (acc == Conv::NotEqual) return acc;
  }
  return acc;
}

}  // namespace

Conv conv_equal(const Term& a, const Term& b, const Context& ctx, FuelState& fuel) {
  if (alpha_equal(a, b)) return Conv::Equal;
  NormalizeResult na = normalize(a, ctx, fuel);
  if (na.exhausted) return Conv::Unknown;
  NormalizeResult nb = normalize(b, ctx, fuel);
  if (nb.exhausted) return Conv::Unknown;
  return cmp_nf(na.term, nb.term, ctx, fuel);
}

Conv conv_equal(const Term& a, const Term& b, const Context& ctx, Fuel fuel) {
  FuelState fs(fuel);
  return conv_equal(a, b, ctx, fs);
}

// ---------------------------------------------------------------------------
// Trace replay
// ---------------------------------------------------------------------------

std::optional<Term> replay_trace(const Term& start, const std::vector<ReductionStep>& trace,
                                 const Context& ctx) {
  Term cur = start;
  for (const ReductionStep& step : trace) {
    if (term_hash(cur) != step.before) return std::nullopt;
    auto contracted = contract_at(cur, ctx, step.position);
    if (!contracted || contracted->second != step.rule) return std::nullopt;
    if (term_hash(contracted->first) != step.after) return std::nullopt;
    cur = contracted->first;
  }
  return cur;
}

}  // namespace kos
