#include "kos/typecheck.hpp"

#include <algorithm>
#include <stdexcept>

namespace kos {

const char* type_error_kind_name(TypeErrorKind k) {
  switch (k) {
    case TypeErrorKind::UnboundVariable: return "UnboundVariable";
    case TypeErrorKind::NotAFunction: return "NotAFunction";
    case TypeErrorKind::DomainMismatch: return "DomainMismatch";
    case TypeErrorKind::NotAPair: return "NotAPair";
    case TypeErrorKind::NotASum: return "NotASum";
    case TypeErrorKind::UniverseViolation: return "UniverseViolation";
    case TypeErrorKind::IdEndpointsUnequal: return "IdEndpointsUnequal";
    case TypeErrorKind::Mismatch: return "Mismatch";
    case TypeErrorKind::CannotInfer: return "CannotInfer";
    case TypeErrorKind::InvalidPrimProof: return "InvalidPrimProof";
  }
  return "?";
}

namespace {

TypeError err(TypeErrorKind kind, std::string msg) {
  return TypeError{kind, std::move(msg), std::nullopt, std::nullopt, std::nullopt};
}

// Logical-axis level at which a sort's inhabitants can be observed:
// Type i stays at i; Data i observes at i+1; a proposition embeds through
// Data 1 and observes at 2.
std::uint32_t logical_level(const Sort& s) {
  if (s.is_type()) return s.level;
  if (s.is_data()) return s.level + 1;
  return 2;
}

// Data-axis level for predicative Sigma/Sum components; Prop embeds at 1,
// logical universes are rejected.
std::optional<std::uint32_t> data_level(const Sort& s) {
  if (s.is_data()) return s.level;
  if (s.is_prop()) return 1;
  return std::nullopt;
}

class Checker {
 public:
  Checker(const Context& ctx, FuelState& fuel) : ctx_(ctx), fuel_(fuel) {}

  InferResult infer(const Locals& locals, const Term& t) {
    using namespace node;
    const Payload& p = t.payload();

    if (const auto* v = std::get_if<Var>(&p)) {
      if (v->index >= locals.size())
        return err(TypeErrorKind::UnboundVariable,
                   "variable index " + std::to_string(v->index) + " out of scope");
      return shift(locals[locals.size() - 1 - v->index],
                   static_cast<std::int32_t>(v->index) + 1);
    }
    if (const auto* c = std::get_if<Const>(&p)) {
      if (is_builtin_const(c->name)) {
        if (auto ty = builtin_const_type(c->name)) return *ty;
        return err(TypeErrorKind::CannotInfer,
                   "identity eliminator must be applied to a proof and a body");
      }
      if (const Context::Entry* e = ctx_.lookup(c->name)) return e->type;
      return err(TypeErrorKind::UnboundVariable, "unknown constant " + c->name);
    }
    if (const auto* app = std::get_if<App>(&p)) return infer_app(locals, t, *app);
    if (const auto* lam = std::get_if<Lam>(&p)) {
      if (!lam->annot)
        return err(TypeErrorKind::CannotInfer, "unannotated lambda needs an expected type");
      SortResult sr = formation(locals, *lam->annot);
      if (const auto* e = std::get_if<TypeError>(&sr)) return *e;
      if (std::holds_alternative<BudgetOut>(sr)) return BudgetOut{};
      Locals inner = locals;
      inner.push_back(*lam->annot);
      InferResult body = infer(inner, lam->body);
      if (const Term* bt = std::get_if<Term>(&body))
        return Term::pi(lam->name, *lam->annot, *bt);
      return body;
    }
    if (const auto* pr = std::get_if<Pair>(&p)) {
      InferResult a = infer(locals, pr->fst);
      const Term* at = std::get_if<Term>(&a);
      if (!at) return a;
      InferResult b = infer(locals, pr->snd);
      const Term* bt = std::get_if<Term>(&b);
      if (!bt) return b;
      return Term::product(*at, *bt);
    }
    if (const auto* sp = std::get_if<Split>(&p)) {
      auto comps = scrutinee_sigma(locals, sp->scrutinee);
      if (const auto* e = std::get_if<TypeError>(&comps)) return *e;
      if (std::holds_alternative<BudgetOut>(comps)) return BudgetOut{};
      auto [a, b] = std::get<std::pair<Term, Term>>(comps);
      Locals inner = locals;
      inner.push_back(a);
      inner.push_back(b);
      InferResult body = infer(inner, sp->body);
      const Term* bt = std::get_if<Term>(&body);
      if (!bt) return body;
      // Strengthen the motive by replacing the bound components with
      // projections of the scrutinee.
      Term step1 = substitute(*bt, Term::proj1(sp->scrutinee), 1);
      return substitute(step1, Term::proj2(sp->scrutinee), 0);
    }
    if (const auto* il = std::get_if<Inl>(&p)) {
      SortResult sr = formation(locals, il->other);
      if (const auto* e = std::get_if<TypeError>(&sr)) return *e;
      if (std::holds_alternative<BudgetOut>(sr)) return BudgetOut{};
      InferResult a = infer(locals, il->payload);
      const Term* at = std::get_if<Term>(&a);
      if (!at) return a;
      return Term::sum(*at, il->other);
    }
    if (const auto* ir = std::get_if<Inr>(&p)) {
      SortResult sr = formation(locals, ir->other);
      if (const auto* e = std::get_if<TypeError>(&sr)) return *e;
      if (std::holds_alternative<BudgetOut>(sr)) return BudgetOut{};
      InferResult a = infer(locals, ir->payload);
      const Term* at = std::get_if<Term>(&a);
      if (!at) return a;
      return Term::sum(ir->other, *at);
    }
    if (const auto* cs = std::get_if<Case>(&p)) {
      auto comps = scrutinee_sum(locals, cs->scrutinee);
      if (const auto* e = std::get_if<TypeError>(&comps)) return *e;
      if (std::holds_alternative<BudgetOut>(comps)) return BudgetOut{};
      auto [a, b] = std::get<std::pair<Term, Term>>(comps);
      Locals la = locals;
      la.push_back(a);
      InferResult c1 = infer(la, cs->left);
      const Term* c1t = std::get_if<Term>(&c1);
      if (!c1t) return c1;
      Locals lb = locals;
      lb.push_back(b);
      InferResult c2 = infer(lb, cs->right);
      const Term* c2t = std::get_if<Term>(&c2);
      if (!c2t) return c2;
      if (free_vars(*c1t).count(0) || free_vars(*c2t).count(0))
        return err(TypeErrorKind::Mismatch, "case branches must not depend on the bound payload");
      Term r1 = shift(*c1t, -1);
      Term r2 = shift(*c2t, -1);
      Conv cv = conv_equal(r1, r2, ctx_, fuel_);
      if (cv == Conv::Unknown) return BudgetOut{};
      if (cv == Conv::NotEqual) {
        TypeError e = err(TypeErrorKind::Mismatch, "case branches disagree on the result type");
        e.inferred = r1;
        e.expected = r2;
        return e;
      }
      return r1;
    }
    if (std::holds_alternative<Refl>(p))
      return err(TypeErrorKind::CannotInfer, "refl needs an expected identity type");
    if (const auto* pi = std::get_if<Pi>(&p)) {
      SortResult sa = formation(locals, pi->domain);
      if (const auto* e = std::get_if<TypeError>(&sa)) return *e;
      if (std::holds_alternative<BudgetOut>(sa)) return BudgetOut{};
      Locals inner = locals;
      inner.push_back(pi->domain);
      SortResult sb = formation(inner, pi->codomain);
      if (const auto* e = std::get_if<TypeError>(&sb)) return *e;
      if (std::holds_alternative<BudgetOut>(sb)) return BudgetOut{};
      Sort a = std::get<Sort>(sa);
      Sort b = std::get<Sort>(sb);
      if (b.is_prop()) return Term::sort(Sort::prop());  // impredicative
      return Term::sort(Sort::type(std::max(logical_level(a), logical_level(b))));
    }
    if (const auto* sg = std::get_if<Sigma>(&p)) {
      Locals inner = locals;
      inner.push_back(sg->fst_type);
      return pairwise_data_sort(locals, sg->fst_type, inner, sg->snd_type, "dependent sum");
    }
    if (const auto* sm = std::get_if<Sum>(&p))
      return pairwise_data_sort(locals, sm->left, locals, sm->right, "sum type");
    if (const auto* id = std::get_if<IdType>(&p)) {
      SortResult sa = formation(locals, id->carrier);
      if (const auto* e = std::get_if<TypeError>(&sa)) return *e;
      if (std::holds_alternative<BudgetOut>(sa)) return BudgetOut{};
      CheckResult cl = check(locals, id->lhs, id->carrier);
      if (!is_ok(cl)) return lift(cl);
      CheckResult cr = check(locals, id->rhs, id->carrier);
      if (!is_ok(cr)) return lift(cr);
      return Term::sort(Sort::prop());
    }
    if (const auto* st = std::get_if<SortTerm>(&p)) return Term::sort(st->sort.classifier());
    if (std::holds_alternative<BaseType>(p)) return Term::sort(Sort::data(0));
    if (std::holds_alternative<ValLit>(p)) return Term::base(BaseKind::Val);
    if (std::holds_alternative<TimeLit>(p)) return Term::base(BaseKind::Time);
    if (std::holds_alternative<IdLit>(p)) return Term::base(BaseKind::Id);
    if (const auto* lt = std::get_if<Let>(&p)) {
      SortResult sr = formation(locals, lt->bound_type);
      if (const auto* e = std::get_if<TypeError>(&sr)) return *e;
      if (std::holds_alternative<BudgetOut>(sr)) return BudgetOut{};
      CheckResult cb = check(locals, lt->bound, lt->bound_type);
      if (!is_ok(cb)) return lift(cb);
      // Let is judgmentally its own expansion (zeta).
      return infer(locals, substitute(lt->body, lt->bound));
    }
    if (const auto* pp = std::get_if<PrimProof>(&p)) return infer_prim(locals, *pp);
    if (std::holds_alternative<Empty>(p)) return Term::sort(Sort::prop());
    return err(TypeErrorKind::CannotInfer, "unhandled term form");
  }

  CheckResult check(const Locals& locals, const Term& t, const Term& expected) {
    using namespace node;
    WhnfResult we = whnf(expected, ctx_, fuel_);
    if (we.exhausted) return BudgetOut{};
    const Term& e = we.term;

    if (const auto* lam = t.as<Lam>()) {
      const auto* pi = e.as<Pi>();
      if (!pi) {
        TypeError te = err(TypeErrorKind::Mismatch, "lambda checked against a non-function type");
        te.expected = e;
        return te;
      }
      if (lam->annot) {
        Conv cv = conv_equal(*lam->annot, pi->domain, ctx_, fuel_);
        if (cv == Conv::Unknown) return BudgetOut{};
        if (cv == Conv::NotEqual) {
          TypeError te = err(TypeErrorKind::DomainMismatch,
                             "lambda annotation disagrees with the expected domain");
          te.inferred = *lam->annot;
          te.expected = pi->domain;
          return te;
        }
      }
      Locals inner = locals;
      inner.push_back(pi->domain);
      return check(inner, lam->body, pi->codomain);
    }
    if (const auto* pr = t.as<Pair>()) {
      const auto* sg = e.as<Sigma>();
      if (!sg) {
        TypeError te = err(TypeErrorKind::Mismatch, "pair checked against a non-pair type");
        te.expected = e;
        return te;
      }
      CheckResult c1 = check(locals, pr->fst, sg->fst_type);
      if (!is_ok(c1)) return c1;
      return check(locals, pr->snd, substitute(sg->snd_type, pr->fst));
    }
    if (const auto* il = t.as<Inl>()) {
      if (const auto* sm = e.as<Sum>()) {
        Conv cv = conv_equal(il->other, sm->right, ctx_, fuel_);
        if (cv == Conv::Unknown) return BudgetOut{};
        if (cv == Conv::NotEqual) {
          TypeError te = err(TypeErrorKind::Mismatch, "inl annotation disagrees with the sum");
          te.inferred = il->other;
          te.expected = sm->right;
          return te;
        }
        return check(locals, il->payload, sm->left);
      }
    }
    if (const auto* ir = t.as<Inr>()) {
      if (const auto* sm = e.as<Sum>()) {
        Conv cv = conv_equal(ir->other, sm->left, ctx_, fuel_);
        if (cv == Conv::Unknown) return BudgetOut{};
        if (cv == Conv::NotEqual) {
          TypeError te = err(TypeErrorKind::Mismatch, "inr annotation disagrees with the sum");
          te.inferred = ir->other;
          te.expected = sm->left;
          return te;
        }
        return check(locals, ir->payload, sm->right);
      }
    }
    if (t.is<Refl>()) {
      const auto* id = e.as<IdType>();
      if (!id) {
        TypeError te = err(TypeErrorKind::Mismatch, "refl checked against a non-identity type");
        te.expected = e;
        return te;
      }
      Conv cv = conv_equal(id->lhs, id->rhs, ctx_, fuel_);
      if (cv == Conv::Unknown) return BudgetOut{};
      if (cv == Conv::NotEqual) {
        TypeError te = err(TypeErrorKind::IdEndpointsUnequal,
                           "identity endpoints are not convertible");
        te.inferred = id->lhs;
        te.expected = id->rhs;
        return te;
      }
      return CheckOk{};
    }
    if (const auto* lt = t.as<Let>()) {
      SortResult sr = formation(locals, lt->bound_type);
      if (const auto* er = std::get_if<TypeError>(&sr)) return *er;
      if (std::holds_alternative<BudgetOut>(sr)) return BudgetOut{};
      CheckResult cb = check(locals, lt->bound, lt->bound_type);
      if (!is_ok(cb)) return cb;
      return check(locals, substitute(lt->body, lt->bound), expected);
    }
    if (const auto* cs = t.as<Case>()) {
      auto comps = scrutinee_sum(locals, cs->scrutinee);
      if (const auto* er = std::get_if<TypeError>(&comps)) {
        // A decided injection whose payload only checks (e.g. refl) is
        // validated through its contractum, mirroring the iota rule.
        if (const auto* il = cs->scrutinee.as<Inl>())
          return check(locals, substitute(cs->left, il->payload), expected);
        if (const auto* irj = cs->scrutinee.as<Inr>())
          return check(locals, substitute(cs->right, irj->payload), expected);
        return *er;
      }
      if (std::holds_alternative<BudgetOut>(comps)) return BudgetOut{};
      auto [a, b] = std::get<std::pair<Term, Term>>(comps);
      Locals la = locals;
      la.push_back(a);
      CheckResult c1 = check(la, cs->left, shift(e, 1));
      if (!is_ok(c1)) return c1;
      Locals lb = locals;
      lb.push_back(b);
      return check(lb, cs->right, shift(e, 1));
    }
    if (const auto* sp = t.as<Split>()) {
      auto comps = scrutinee_sigma(locals, sp->scrutinee);
      if (const auto* er = std::get_if<TypeError>(&comps)) {
        if (const auto* pr = sp->scrutinee.as<Pair>()) {
          Term contractum = substitute(substitute(sp->body, pr->fst, 1), pr->snd, 0);
          return check(locals, contractum, expected);
        }
        return *er;
      }
      if (std::holds_alternative<BudgetOut>(comps)) return BudgetOut{};
      auto [a, b] = std::get<std::pair<Term, Term>>(comps);
      Locals inner = locals;
      inner.push_back(a);
      inner.push_back(b);
      return check(inner, sp->body, shift(e, 2));
    }
    if (const auto* app = t.as<App>()) {
      // Identity elimination in check mode: validate the proof, check the
      // body against the expectation.
      if (const auto* inner = app->fn.as<App>()) {
        if (const auto* j = inner->fn.as<Const>(); j && j->name == kConstJ) {
          if (!inner->arg.is<Refl>()) {
            InferResult pt = infer(locals, inner->arg);
            if (const auto* er = std::get_if<TypeError>(&pt)) return *er;
            if (std::holds_alternative<BudgetOut>(pt)) return BudgetOut{};
            WhnfResult w = whnf(std::get<Term>(pt), ctx_, fuel_);
            if (w.exhausted) return BudgetOut{};
            if (!w.term.is<IdType>()) {
              TypeError te = err(TypeErrorKind::DomainMismatch,
                                 "identity eliminator expects an identity proof");
              te.inferred = w.term;
              return te;
            }
          }
          return check(locals, app->arg, expected);
        }
      }
      // A beta redex checks through its contractum once the argument fits
      // the annotation (or any inferable type when unannotated).
      if (const auto* lam = app->fn.as<Lam>()) {
        if (lam->annot) {
          CheckResult ca = check(locals, app->arg, *lam->annot);
          if (!is_ok(ca)) return ca;
        } else {
          InferResult ia = infer(locals, app->arg);
          if (const auto* er = std::get_if<TypeError>(&ia)) return *er;
          if (std::holds_alternative<BudgetOut>(ia)) return BudgetOut{};
        }
        return check(locals, substitute(lam->body, app->arg), expected);
      }
    }

    InferResult ir = infer(locals, t);
    if (const auto* er = std::get_if<TypeError>(&ir)) return *er;
    if (std::holds_alternative<BudgetOut>(ir)) return BudgetOut{};
    const Term& inferred = std::get<Term>(ir);
    return convertible(inferred, expected);
  }

  // conv with the one-way sort coercions (Prop -> Data 1 -> Type i+1).
  CheckResult convertible(const Term& inferred, const Term& expected) {
    Conv cv = conv_equal(inferred, expected, ctx_, fuel_);
    if (cv == Conv::Unknown) return BudgetOut{};
    if (cv == Conv::Equal) return CheckOk{};
    WhnfResult wi = whnf(inferred, ctx_, fuel_);
    WhnfResult we = whnf(expected, ctx_, fuel_);
    if (wi.exhausted || we.exhausted) return BudgetOut{};
    const auto* si = wi.term.as<node::SortTerm>();
    const auto* se = we.term.as<node::SortTerm>();
    if (si && se && sort_coerces(si->sort, se->sort)) return CheckOk{};
    TypeError te = err(TypeErrorKind::Mismatch, "inferred type does not match the expected type");
    te.inferred = inferred;
    te.expected = expected;
    return te;
  }

  SortResult formation(const Locals& locals, const Term& ty) {
    InferResult ir = infer(locals, ty);
    if (const auto* e = std::get_if<TypeError>(&ir)) return *e;
    if (std::holds_alternative<BudgetOut>(ir)) return BudgetOut{};
    WhnfResult w = whnf(std::get<Term>(ir), ctx_, fuel_);
    if (w.exhausted) return BudgetOut{};
    if (const auto* st = w.term.as<node::SortTerm>()) return st->sort;
    TypeError te = err(TypeErrorKind::UniverseViolation, "expression is not a type");
    te.inferred = w.term;
    return te;
  }

 private:
  InferResult lift(const CheckResult& r) {
    if (const auto* e = std::get_if<TypeError>(&r)) return *e;
    return BudgetOut{};
  }

  InferResult infer_app(const Locals& locals, const Term& whole, const node::App& app) {
    using namespace node;
    // Identity elimination: J applied to a proof and a body. A literal refl
    // is accepted as-is; it proves a reflexive identity the eliminator
    // discards anyway.
    if (const auto* inner = app.fn.as<App>()) {
      if (const auto* j = inner->fn.as<Const>(); j && j->name == kConstJ) {
        if (!inner->arg.is<Refl>()) {
          InferResult pt = infer(locals, inner->arg);
          const Term* p = std::get_if<Term>(&pt);
          if (!p) return pt;
          WhnfResult w = whnf(*p, ctx_, fuel_);
          if (w.exhausted) return BudgetOut{};
          if (!w.term.is<IdType>()) {
            TypeError te = err(TypeErrorKind::DomainMismatch,
                               "identity eliminator expects an identity proof");
            te.inferred = w.term;
            return te;
          }
        }
        return infer(locals, app.arg);
      }
    }
    if (const auto* j = app.fn.as<Const>(); j && j->name == kConstJ)
      return err(TypeErrorKind::CannotInfer,
                 "identity eliminator must be applied to a proof and a body");

    InferResult ft = infer(locals, app.fn);
    const Term* f = std::get_if<Term>(&ft);
    if (!f) return ft;
    WhnfResult w = whnf(*f, ctx_, fuel_);
    if (w.exhausted) return BudgetOut{};
    const auto* pi = w.term.as<Pi>();
    if (!pi) {
      TypeError te = err(TypeErrorKind::NotAFunction, "application head is not a function");
      te.inferred = w.term;
      return te;
    }
    CheckResult ca = check(locals, app.arg, pi->domain);
    if (const auto* e = std::get_if<TypeError>(&ca)) {
      TypeError te = *e;
      te.kind = TypeErrorKind::DomainMismatch;
      if (te.message.empty()) te.message = "argument does not fit the function domain";
      return te;
    }
    if (std::holds_alternative<BudgetOut>(ca)) return BudgetOut{};
    (void)whole;
    return substitute(pi->codomain, app.arg);
  }

  InferResult infer_prim(const Locals& locals, const node::PrimProof& pp) {
    const PrimPredicate& pred = prim_predicate(pp.tag);
    if (pp.operands.size() != pred.arity)
      return err(TypeErrorKind::InvalidPrimProof, "primitive witness has wrong arity");
    std::vector<Term> norm;
    norm.reserve(pp.operands.size());
    for (const Term& op : pp.operands) {
      // Operands live under the ambient binders but must close to literals.
      NormalizeResult nr = normalize(op, ctx_, fuel_);
      if (nr.exhausted) return BudgetOut{};
      norm.push_back(nr.term);
    }
    std::optional<bool> verdict = prim_decide(ctx_, pp.tag, norm);
    if (!verdict)
      return err(TypeErrorKind::InvalidPrimProof,
                 "primitive witness operands are not decidable literals");
    if (*verdict == pp.refuting)
      return err(TypeErrorKind::InvalidPrimProof,
                 "primitive witness contradicts its decision procedure");
    Term positive = prim_positive_type(pp.tag, pp.operands);
    (void)locals;
    if (pp.refuting) return Term::arrow(positive, Term::empty());
    return positive;
  }

  using Components = std::variant<std::pair<Term, Term>, TypeError, BudgetOut>;

  Components scrutinee_sigma(const Locals& locals, const Term& scrutinee) {
    InferResult ir = infer(locals, scrutinee);
    if (const auto* e = std::get_if<TypeError>(&ir)) return *e;
    if (std::holds_alternative<BudgetOut>(ir)) return BudgetOut{};
    WhnfResult w = whnf(std::get<Term>(ir), ctx_, fuel_);
    if (w.exhausted) return BudgetOut{};
    if (const auto* sg = w.term.as<node::Sigma>())
      return std::make_pair(sg->fst_type, sg->snd_type);
    TypeError te = err(TypeErrorKind::NotAPair, "split scrutinee is not a dependent pair");
    te.inferred = w.term;
    return te;
  }

  Components scrutinee_sum(const Locals& locals, const Term& scrutinee) {
    InferResult ir = infer(locals, scrutinee);
    if (const auto* e = std::get_if<TypeError>(&ir)) return *e;
    if (std::holds_alternative<BudgetOut>(ir)) return BudgetOut{};
    WhnfResult w = whnf(std::get<Term>(ir), ctx_, fuel_);
    if (w.exhausted) return BudgetOut{};
    if (const auto* sm = w.term.as<node::Sum>()) return std::make_pair(sm->left, sm->right);
    TypeError te = err(TypeErrorKind::NotASum, "case scrutinee is not a sum");
    te.inferred = w.term;
    return te;
  }

  InferResult pairwise_data_sort(const Locals& la, const Term& a, const Locals& lb,
                                 const Term& b, const char* what) {
    SortResult sa = formation(la, a);
    if (const auto* e = std::get_if<TypeError>(&sa)) return *e;
    if (std::holds_alternative<BudgetOut>(sa)) return BudgetOut{};
    SortResult sb = formation(lb, b);
    if (const auto* e = std::get_if<TypeError>(&sb)) return *e;
    if (std::holds_alternative<BudgetOut>(sb)) return BudgetOut{};
    auto da = data_level(std::get<Sort>(sa));
    auto db = data_level(std::get<Sort>(sb));
    if (!da || !db)
      return err(TypeErrorKind::UniverseViolation,
                 std::string(what) + " components must stay on the data axis");
    return Term::sort(Sort::data(std::max(*da, *db)));
  }

  const Context& ctx_;
  FuelState& fuel_;
};

}  // namespace

InferResult infer(const Context& ctx, const Locals& locals, const Term& t, FuelState& fuel) {
  return Checker(ctx, fuel).infer(locals, t);
}

InferResult infer(const Context& ctx, const Term& t, Fuel fuel) {
  FuelState fs(fuel);
  return Checker(ctx, fs).infer({}, t);
}

CheckResult check(const Context& ctx, const Locals& locals, const Term& t,
                  const Term& expected, FuelState& fuel) {
  return Checker(ctx, fuel).check(locals, t, expected);
}

CheckResult check(const Context& ctx, const Term& t, const Term& expected, Fuel fuel) {
  FuelState fs(fuel);
  return Checker(ctx, fs).check({}, t, expected);
}

SortResult formation_sort(const Context& ctx, const Locals& locals, const Term& ty,
                          FuelState& fuel) {
  return Checker(ctx, fuel).formation(locals, ty);
}

SortResult formation_sort(const Context& ctx, const Term& ty, Fuel fuel) {
  FuelState fs(fuel);
  return Checker(ctx, fs).formation({}, ty);
}

CheckResult check_context(const Context& ctx, Fuel fuel) {
  FuelState fs(fuel);
  Context prefix;
  for (const auto& [name, members] : ctx.registries()) prefix.add_registry(name, members);
  const auto& entries = ctx.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const Context::Entry& e = entries[i];
    Checker chk(prefix, fs);
    SortResult sr = chk.formation({}, e.type);
    if (const auto* te = std::get_if<TypeError>(&sr)) {
      TypeError out = *te;
      out.context_index = i;
      return out;
    }
    if (std::holds_alternative<BudgetOut>(sr)) return BudgetOut{};
    if (e.body) {
      CheckResult cr = chk.check({}, *e.body, e.type);
      if (const auto* te = std::get_if<TypeError>(&cr)) {
        TypeError out = *te;
        out.context_index = i;
        return out;
      }
      if (std::holds_alternative<BudgetOut>(cr)) return BudgetOut{};
    }
    if (e.body)
      prefix.define(e.name, *e.body, e.type);
    else
      prefix.declare(e.name, e.type);
  }
  return CheckOk{};
}

// ---------------------------------------------------------------------------
// Primitive predicates
// ---------------------------------------------------------------------------

const PrimPredicate& prim_predicate(PrimTag tag) {
  static const PrimPredicate kPreds[] = {
      {PrimTag::LeVal, 2, "nat_le"},
      {PrimTag::EqVal, 2, "lit_eq"},
      {PrimTag::LeTime, 2, "time_le"},
      {PrimTag::InSet, 2, "registry_member"},
  };
  return kPreds[static_cast<std::size_t>(tag)];
}

std::optional<PrimTag> prim_tag_for_const(std::string_view name) {
  if (name == kConstLeVal) return PrimTag::LeVal;
  if (name == kConstLeTime) return PrimTag::LeTime;
  if (name == kConstInSet) return PrimTag::InSet;
  return std::nullopt;
}

std::optional<bool> prim_decide(const Context& ctx, PrimTag tag,
                                const std::vector<Term>& ops) {
  using namespace node;
  if (ops.size() != prim_predicate(tag).arity) return std::nullopt;
  switch (tag) {
    case PrimTag::LeVal: {
      const auto* a = ops[0].as<ValLit>();
      const auto* b = ops[1].as<ValLit>();
      if (!a || !b) return std::nullopt;
      return a->value <= b->value;
    }
    case PrimTag::EqVal: {
      const Payload& pa = ops[0].payload();
      const Payload& pb = ops[1].payload();
      if (pa.index() != pb.index()) return std::nullopt;
      if (std::holds_alternative<ValLit>(pa) || std::holds_alternative<TimeLit>(pa) ||
          std::holds_alternative<IdLit>(pa))
        return alpha_equal(ops[0], ops[1]);
      return std::nullopt;
    }
    case PrimTag::LeTime: {
      const auto* a = ops[0].as<TimeLit>();
      const auto* b = ops[1].as<TimeLit>();
      if (!a || !b || a->kind != b->kind) return std::nullopt;
      return a->millis <= b->millis;
    }
    case PrimTag::InSet: {
      const auto* x = ops[0].as<IdLit>();
      const auto* reg = ops[1].as<IdLit>();
      if (!x || !reg) return std::nullopt;
      const std::set<std::string>* members = ctx.registry(reg->value);
      if (!members) return std::nullopt;
      return members->count(x->value) > 0;
    }
  }
  return std::nullopt;
}

Term prim_positive_type(PrimTag tag, const std::vector<Term>& ops) {
  using namespace node;
  switch (tag) {
    case PrimTag::LeVal:
      return Term::app(Term::app(Term::constant(std::string(kConstLeVal)), ops[0]), ops[1]);
    case PrimTag::LeTime:
      return Term::app(Term::app(Term::constant(std::string(kConstLeTime)), ops[0]), ops[1]);
    case PrimTag::InSet:
      return Term::app(Term::app(Term::constant(std::string(kConstInSet)), ops[0]), ops[1]);
    case PrimTag::EqVal: {
      Term carrier = Term::base(BaseKind::Val);
      if (ops[0].is<TimeLit>()) carrier = Term::base(BaseKind::Time);
      if (ops[0].is<IdLit>()) carrier = Term::base(BaseKind::Id);
      return Term::id_type(carrier, ops[0], ops[1]);
    }
  }
  throw std::logic_error("bad prim tag");
}

PrimSynthResult synth_prim_proof(const Context& ctx, PrimTag tag,
                                 const std::vector<Term>& args, FuelState& fuel) {
  std::vector<Term> norm;
  norm.reserve(args.size());
  for (const Term& a : args) {
    NormalizeResult nr = normalize(a, ctx, fuel);
    if (nr.exhausted) return PrimUnknown{};
    norm.push_back(nr.term);
  }
  std::optional<bool> verdict = prim_decide(ctx, tag, norm);
  if (!verdict) return PrimUnknown{};
  if (!*verdict) return PrimRefuted{};
  return Term::prim(tag, false, std::move(norm));
}

PrimSynthResult synth_prim_proof(const Context& ctx, PrimTag tag,
                                 const std::vector<Term>& args, Fuel fuel) {
  FuelState fs(fuel);
  return synth_prim_proof(ctx, tag, args, fs);
}

}  // namespace kos
