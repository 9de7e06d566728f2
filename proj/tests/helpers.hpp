#pragma once

#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "kos/runtime.hpp"
#include "kos/surface.hpp"

namespace kth {

using namespace kos;

inline std::string corpus(const std::string& name) {
  return std::string(KOS_CORPUS_DIR) + "/" + name;
}

inline surface::LoadedDefs load(const std::string& name) {
  surface::LoadResult lr = surface::load_defs_file(corpus(name), Fuel{1'000'000});
  if (!lr.defs) {
    std::string msg = "corpus load failed: " + name;
    for (const auto& d : lr.diagnostics) msg += "\n  " + surface::render_diagnostic(d);
    throw std::runtime_error(msg);
  }
  return std::move(*lr.defs);
}

inline Term parse(const std::string& src) {
  surface::ExprParseResult r = surface::parse_expr(src);
  if (!r.term) throw std::runtime_error("expr parse failed: " + src);
  return *r.term;
}

inline std::string tmp_path(const std::string& stem) {
  static std::mt19937_64 rng(std::random_device{}());
  return "/tmp/kos_test_" + stem + "_" + std::to_string(rng()) + ".tmp";
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

// In-memory log storage: the independent oracle for persistence tests.
class MemWal : public rt::WalStorage {
 public:
  bool append_line(const std::string& line) override {
    lines.push_back(line);
    return true;
  }
  std::vector<std::string> lines;
};

// ---------------------------------------------------------------------------
// Seeded well-typed term generator for the metatheory suites. Every emitted
// (term, type) pair checks in base_context(); generation is intro-directed
// with redex wrappers layered on top.
// ---------------------------------------------------------------------------
class TermGen {
 public:
  explicit TermGen(std::uint64_t seed) : rng_(seed) {
    ctx_.define("two", Term::val(2), Term::base(BaseKind::Val));
    ctx_.define("idv",
                Term::lam("v", Term::base(BaseKind::Val), Term::var(0)),
                Term::arrow(Term::base(BaseKind::Val), Term::base(BaseKind::Val)));
    ctx_.declare("Pax", Term::sort(Sort::prop()));
    ctx_.declare("pax", Term::constant("Pax"));
  }

  const Context& ctx() const { return ctx_; }

  std::pair<Term, Term> well_typed(int size) {
    Term ty = gen_type(1);
    Term t = gen_term(ty, size);
    return {t, ty};
  }

  Term gen_type(int depth) {
    int pick = depth <= 0 ? int(rng_() % 3) : int(rng_() % 7);
    switch (pick) {
      case 0: return Term::base(BaseKind::Val);
      case 1: return Term::base(BaseKind::Time);
      case 2: {
        Nat n(static_cast<std::uint64_t>(rng_() % 50));
        return Term::id_type(Term::base(BaseKind::Val), Term::val(n), Term::val(n));
      }
      case 3: return Term::product(gen_type(depth - 1), gen_type(depth - 1));
      case 4: return Term::sum(gen_type(depth - 1), gen_type(depth - 1));
      case 5: return Term::arrow(gen_type(depth - 1), gen_type(depth - 1));
      default: return Term::constant("Pax");
    }
  }

  Term gen_term(const Term& ty, int budget) {
    Term core = intro(ty, budget);
    int wraps = budget > 0 ? int(rng_() % 3) : 0;
    for (int i = 0; i < wraps; ++i) core = wrap(core, ty, budget - 1);
    return core;
  }

 private:
  Term intro(const Term& ty, int budget) {
    using namespace node;
    if (const auto* b = ty.as<BaseType>()) {
      if (b->kind == BaseKind::Val) {
        if (budget > 0 && rng_() % 4 == 0) return Term::constant("two");
        return Term::val(Nat(static_cast<std::uint64_t>(rng_() % 100)));
      }
      if (b->kind == BaseKind::Time)
        return Term::time(rng_() % 2 ? TimeKind::Timestamp : TimeKind::Duration,
                          rng_() % 100000);
      return Term::id_lit("id" + std::to_string(rng_() % 10));
    }
    if (const auto* id = ty.as<IdType>()) {
      // endpoints are equal by construction
      if (budget > 0 && rng_() % 2 == 0) return Term::prim(PrimTag::EqVal, false, {id->lhs, id->rhs});
      return Term::refl();
    }
    if (const auto* sg = ty.as<Sigma>()) {
      Term fst = gen_term(sg->fst_type, budget - 1);
      return Term::pair(fst, gen_term(shift(sg->snd_type, -1), budget - 1));
    }
    if (const auto* sm = ty.as<Sum>()) {
      if (rng_() % 2) return Term::inl(gen_term(sm->left, budget - 1), sm->right);
      return Term::inr(gen_term(sm->right, budget - 1), sm->left);
    }
    if (const auto* pi = ty.as<Pi>()) {
      Term cod = shift(pi->codomain, -1);
      if (rng_() % 3 == 0 && alpha_equal(pi->domain, cod))
        return Term::lam("x", pi->domain, Term::var(0));
      Term body = gen_term(cod, budget - 1);  // closed body stays valid under the binder
      return Term::lam("x", pi->domain, body);
    }
    if (ty.is<Const>()) return Term::constant("pax");
    return Term::val(0);
  }

  // Wrap a well-typed term in a redex that evaluates back to it.
  Term wrap(const Term& t, const Term& ty, int budget) {
    switch (rng_() % 6) {
      case 0:  // identity application
        return Term::app(Term::lam("x", ty, Term::var(0)), t);
      case 1: {  // constant function discarding a generated argument
        Term aty = gen_type(0);
        Term arg = gen_term(aty, std::max(0, budget - 1));
        return Term::app(Term::lam("y", aty, shift(t, 1)), arg);
      }
      case 2: {  // let binding
        Term aty = gen_type(0);
        Term bound = gen_term(aty, std::max(0, budget - 1));
        return Term::let_in("z", bound, aty, shift(t, 1));
      }
      case 3: {  // first projection of a pair
        Term oty = gen_type(0);
        Term other = gen_term(oty, std::max(0, budget - 1));
        return Term::proj1(Term::pair(t, other));
      }
      case 4: {  // case on a decided injection
        Term oty = gen_type(0);
        Term payload = gen_term(oty, std::max(0, budget - 1));
        Term scrut = rng_() % 2 ? Term::inl(payload, oty) : Term::inr(payload, oty);
        return Term::case_of(scrut, "l", shift(t, 1), "r", shift(t, 1));
      }
      default: {  // identity elimination on a computed reflexivity witness
        Nat n(static_cast<std::uint64_t>(rng_() % 30));
        Term prf = Term::prim(PrimTag::EqVal, false, {Term::val(n), Term::val(n)});
        return Term::app(Term::app(Term::constant(std::string(kConstJ)), prf), t);
      }
    }
  }

  std::mt19937_64 rng_;
  Context ctx_;
};

}  // namespace kth
