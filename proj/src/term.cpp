#include "kos/term.hpp"

#include <sstream>
#include <stdexcept>

namespace kos {

Sort Sort::classifier() const {
  switch (axis) {
    case Axis::Prop: return Sort::type(1);
    case Axis::Type: return Sort::type(level + 1);
    case Axis::Data: return Sort::data(level + 1);
  }
  throw std::logic_error("bad sort axis");
}

std::string Sort::str() const {
  switch (axis) {
    case Axis::Prop: return "Prop";
    case Axis::Type: return "Type(" + std::to_string(level) + ")";
    case Axis::Data: return "Data(" + std::to_string(level) + ")";
  }
  return "?";
}

bool sort_coerces(const Sort& from, const Sort& to) {
  if (from == to) return true;
  // Prop -> Data 1
  if (from.is_prop() && to == Sort::data(1)) return true;
  // Data i -> Type i+1 (observation), transitively Prop -> Data 1 -> Type 2
  if (from.is_prop() && to == Sort::type(2)) return true;
  if (from.is_data() && to.is_type() && to.level == from.level + 1) return true;
  // Data i : Data i+1 and Data i : Type i+1 are classification facts, not
  // element coercions; nothing else is admitted.
  return false;
}

const char* base_kind_name(BaseKind k) {
  switch (k) {
    case BaseKind::Val: return "Val";
    case BaseKind::Time: return "Time";
    case BaseKind::Id: return "ID";
  }
  return "?";
}

const char* prim_tag_name(PrimTag t) {
  switch (t) {
    case PrimTag::LeVal: return "le";
    case PrimTag::EqVal: return "eq";
    case PrimTag::LeTime: return "le_t";
    case PrimTag::InSet: return "in";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Term construction
// ---------------------------------------------------------------------------

namespace {
node::BoxPtr boxed(node::Payload p) {
  return std::make_shared<const node::Box>(node::Box{std::move(p)});
}
}  // namespace

Term::Term() : box_(boxed(node::Empty{})) {}

Term Term::var(std::uint32_t index) { return Term(boxed(node::Var{index})); }
Term Term::constant(std::string name) { return Term(boxed(node::Const{std::move(name)})); }
Term Term::lam(std::string name, std::optional<Term> annot, Term body) {
  return Term(boxed(node::Lam{std::move(name), std::move(annot), std::move(body)}));
}
Term Term::app(Term fn, Term arg) { return Term(boxed(node::App{std::move(fn), std::move(arg)})); }
Term Term::pair(Term fst, Term snd) {
  return Term(boxed(node::Pair{std::move(fst), std::move(snd)}));
}
Term Term::split(Term scrutinee, std::string n1, std::string n2, Term body) {
  return Term(
      boxed(node::Split{std::move(scrutinee), std::move(n1), std::move(n2), std::move(body)}));
}
Term Term::inl(Term payload, Term other) {
  return Term(boxed(node::Inl{std::move(payload), std::move(other)}));
}
Term Term::inr(Term payload, Term other) {
  return Term(boxed(node::Inr{std::move(payload), std::move(other)}));
}
Term Term::case_of(Term scrutinee, std::string nl, Term left, std::string nr, Term right) {
  return Term(boxed(node::Case{std::move(scrutinee), std::move(nl), std::move(left),
                               std::move(nr), std::move(right)}));
}
Term Term::refl() { return Term(boxed(node::Refl{})); }
Term Term::pi(std::string name, Term domain, Term codomain) {
  return Term(boxed(node::Pi{std::move(name), std::move(domain), std::move(codomain)}));
}
Term Term::sigma(std::string name, Term fst, Term snd) {
  return Term(boxed(node::Sigma{std::move(name), std::move(fst), std::move(snd)}));
}
Term Term::sum(Term l, Term r) { return Term(boxed(node::Sum{std::move(l), std::move(r)})); }
Term Term::id_type(Term carrier, Term lhs, Term rhs) {
  return Term(boxed(node::IdType{std::move(carrier), std::move(lhs), std::move(rhs)}));
}
Term Term::sort(Sort s) { return Term(boxed(node::SortTerm{s})); }
Term Term::base(BaseKind k) { return Term(boxed(node::BaseType{k})); }
Term Term::val(Nat v) { return Term(boxed(node::ValLit{std::move(v)})); }
Term Term::time(TimeKind k, std::uint64_t ms) { return Term(boxed(node::TimeLit{k, ms})); }
Term Term::id_lit(std::string v) { return Term(boxed(node::IdLit{std::move(v)})); }
Term Term::let_in(std::string name, Term bound, Term bound_type, Term body) {
  return Term(boxed(node::Let{std::move(name), std::move(bound), std::move(bound_type),
                              std::move(body)}));
}
Term Term::prim(PrimTag tag, bool refuting, std::vector<Term> operands) {
  return Term(boxed(node::PrimProof{tag, refuting, std::move(operands)}));
}
Term Term::empty() { return Term(boxed(node::Empty{})); }

Term Term::arrow(Term domain, Term codomain) {
  return pi("_", std::move(domain), shift(codomain, 1));
}
Term Term::product(Term fst, Term snd) {
  return sigma("_", std::move(fst), shift(snd, 1));
}
Term Term::proj1(Term p) { return split(std::move(p), "x", "y", Term::var(1)); }
Term Term::proj2(Term p) { return split(std::move(p), "x", "y", Term::var(0)); }

// ---------------------------------------------------------------------------
// shift / substitute
// ---------------------------------------------------------------------------

namespace {

template <typename F>
Term map_children(const Term& t, std::uint32_t depth, const F& f) {
  using namespace node;
  const Payload& p = t.payload();
  if (const auto* n = std::get_if<Lam>(&p)) {
    std::optional<Term> annot;
    if (n->annot) annot = f(*n->annot, depth);
    return Term::lam(n->name, std::move(annot), f(n->body, depth + 1));
  }
  if (const auto* n = std::get_if<App>(&p)) return Term::app(f(n->fn, depth), f(n->arg, depth));
  if (const auto* n = std::get_if<Pair>(&p))
    return Term::pair(f(n->fst, depth), f(n->snd, depth));
  if (const auto* n = std::get_if<Split>(&p))
    return Term::split(f(n->scrutinee, depth), n->name_fst, n->name_snd, f(n->body, depth + 2));
  if (const auto* n = std::get_if<Inl>(&p)) return Term::inl(f(n->payload, depth), f(n->other, depth));
  if (const auto* n = std::get_if<Inr>(&p)) return Term::inr(f(n->payload, depth), f(n->other, depth));
  if (const auto* n = std::get_if<Case>(&p))
    return Term::case_of(f(n->scrutinee, depth), n->name_left, f(n->left, depth + 1),
                         n->name_right, f(n->right, depth + 1));
  if (const auto* n = std::get_if<Pi>(&p))
    return Term::pi(n->name, f(n->domain, depth), f(n->codomain, depth + 1));
  if (const auto* n = std::get_if<Sigma>(&p))
    return Term::sigma(n->name, f(n->fst_type, depth), f(n->snd_type, depth + 1));
  if (const auto* n = std::get_if<Sum>(&p)) return Term::sum(f(n->left, depth), f(n->right, depth));
  if (const auto* n = std::get_if<IdType>(&p))
    return Term::id_type(f(n->carrier, depth), f(n->lhs, depth), f(n->rhs, depth));
  if (const auto* n = std::get_if<Let>(&p))
    return Term::let_in(n->name, f(n->bound, depth), f(n->bound_type, depth),
                        f(n->body, depth + 1));
  if (const auto* n = std::get_if<PrimProof>(&p)) {
    std::vector<Term> ops;
    ops.reserve(n->operands.size());
    for (const Term& op : n->operands) ops.push_back(f(op, depth));
    return Term::prim(n->tag, n->refuting, std::move(ops));
  }
  return t;  // leaf
}

bool is_leaf_for_vars(const Term& t) {
  using namespace node;
  const Payload& p = t.payload();
  return std::holds_alternative<Const>(p) || std::holds_alternative<Refl>(p) ||
         std::holds_alternative<SortTerm>(p) || std::holds_alternative<BaseType>(p) ||
         std::holds_alternative<ValLit>(p) || std::holds_alternative<TimeLit>(p) ||
         std::holds_alternative<IdLit>(p) || std::holds_alternative<Empty>(p);
}

Term shift_rec(const Term& t, std::int32_t delta, std::uint32_t cutoff) {
  if (const auto* v = t.as<node::Var>()) {
    if (v->index < cutoff) return t;
    if (delta < 0 && v->index < cutoff + static_cast<std::uint32_t>(-delta))
      throw std::logic_error("shift: index underflow (dangling variable)");
    return Term::var(static_cast<std::uint32_t>(static_cast<std::int64_t>(v->index) + delta));
  }
  if (is_leaf_for_vars(t)) return t;
  return map_children(t, cutoff, [delta](const Term& c, std::uint32_t d) {
    return shift_rec(c, delta, d);
  });
}

Term subst_rec(const Term& t, const Term& repl, std::uint32_t target) {
  if (const auto* v = t.as<node::Var>()) {
    if (v->index == target) return shift_rec(repl, static_cast<std::int32_t>(target), 0);
    if (v->index > target) return Term::var(v->index - 1);
    return t;
  }
  if (is_leaf_for_vars(t)) return t;
  // map_children passes the adjusted binder depth; the target index grows by
  // the number of binders crossed. We recover the increment from the depth
  // delta, so seed with depth = target.
  return map_children(t, target, [&repl](const Term& c, std::uint32_t d) {
    return subst_rec(c, repl, d);
  });
}

}  // namespace

Term shift(const Term& t, std::int32_t delta, std::uint32_t cutoff) {
  if (delta == 0) return t;
  return shift_rec(t, delta, cutoff);
}

Term substitute(const Term& target, const Term& replacement, std::uint32_t binder_depth) {
  return subst_rec(target, replacement, binder_depth);
}

// ---------------------------------------------------------------------------
// alpha equality
// ---------------------------------------------------------------------------

bool alpha_equal(const Term& a, const Term& b) {
  using namespace node;
  if (a.same_node(b)) return true;
  const Payload& pa = a.payload();
  const Payload& pb = b.payload();
  if (pa.index() != pb.index()) return false;

  if (const auto* x = std::get_if<Var>(&pa)) return x->index == std::get<Var>(pb).index;
  if (const auto* x = std::get_if<Const>(&pa)) return x->name == std::get<Const>(pb).name;
  if (const auto* x = std::get_if<Lam>(&pa)) {
    const auto& y = std::get<Lam>(pb);
    if (x->annot.has_value() != y.annot.has_value()) return false;
    if (x->annot && !alpha_equal(*x->annot, *y.annot)) return false;
    return alpha_equal(x->body, y.body);
  }
  if (const auto* x = std::get_if<App>(&pa)) {
    const auto& y = std::get<App>(pb);
    return alpha_equal(x->fn, y.fn) && alpha_equal(x->arg, y.arg);
  }
  if (const auto* x = std::get_if<Pair>(&pa)) {
    const auto& y = std::get<Pair>(pb);
    return alpha_equal(x->fst, y.fst) && alpha_equal(x->snd, y.snd);
  }
  if (const auto* x = std::get_if<Split>(&pa)) {
    const auto& y = std::get<Split>(pb);
    return alpha_equal(x->scrutinee, y.scrutinee) && alpha_equal(x->body, y.body);
  }
  if (const auto* x = std::get_if<Inl>(&pa)) {
    const auto& y = std::get<Inl>(pb);
    return alpha_equal(x->payload, y.payload) && alpha_equal(x->other, y.other);
  }
  if (const auto* x = std::get_if<Inr>(&pa)) {
    const auto& y = std::get<Inr>(pb);
    return alpha_equal(x->payload, y.payload) && alpha_equal(x->other, y.other);
  }
  if (const auto* x = std::get_if<Case>(&pa)) {
    const auto& y = std::get<Case>(pb);
    return alpha_equal(x->scrutinee, y.scrutinee) && alpha_equal(x->left, y.left) &&
           alpha_equal(x->right, y.right);
  }
  if (std::holds_alternative<Refl>(pa)) return true;
  if (const auto* x = std::get_if<Pi>(&pa)) {
    const auto& y = std::get<Pi>(pb);
    return alpha_equal(x->domain, y.domain) && alpha_equal(x->codomain, y.codomain);
  }
  if (const auto* x = std::get_if<Sigma>(&pa)) {
    const auto& y = std::get<Sigma>(pb);
    return alpha_equal(x->fst_type, y.fst_type) && alpha_equal(x->snd_type, y.snd_type);
  }
  if (const auto* x = std::get_if<Sum>(&pa)) {
    const auto& y = std::get<Sum>(pb);
    return alpha_equal(x->left, y.left) && alpha_equal(x->right, y.right);
  }
  if (const auto* x = std::get_if<IdType>(&pa)) {
    const auto& y = std::get<IdType>(pb);
    return alpha_equal(x->carrier, y.carrier) && alpha_equal(x->lhs, y.lhs) &&
           alpha_equal(x->rhs, y.rhs);
  }
  if (const auto* x = std::get_if<SortTerm>(&pa)) return x->sort == std::get<SortTerm>(pb).sort;
  if (const auto* x = std::get_if<BaseType>(&pa)) return x->kind == std::get<BaseType>(pb).kind;
  if (const auto* x = std::get_if<ValLit>(&pa)) return x->value == std::get<ValLit>(pb).value;
  if (const auto* x = std::get_if<TimeLit>(&pa)) {
    const auto& y = std::get<TimeLit>(pb);
    return x->kind == y.kind && x->millis == y.millis;
  }
  if (const auto* x = std::get_if<IdLit>(&pa)) return x->value == std::get<IdLit>(pb).value;
  if (const auto* x = std::get_if<Let>(&pa)) {
    const auto& y = std::get<Let>(pb);
    return alpha_equal(x->bound, y.bound) && alpha_equal(x->bound_type, y.bound_type) &&
           alpha_equal(x->body, y.body);
  }
  if (const auto* x = std::get_if<PrimProof>(&pa)) {
    const auto& y = std::get<PrimProof>(pb);
    if (x->tag != y.tag || x->refuting != y.refuting || x->operands.size() != y.operands.size())
      return false;
    for (std::size_t i = 0; i < x->operands.size(); ++i)
      if (!alpha_equal(x->operands[i], y.operands[i])) return false;
    return true;
  }
  return std::holds_alternative<Empty>(pa);
}

// ---------------------------------------------------------------------------
// free variables
// ---------------------------------------------------------------------------

namespace {
void free_vars_rec(const Term& t, std::uint32_t depth, std::set<std::uint32_t>& out) {
  if (const auto* v = t.as<node::Var>()) {
    if (v->index >= depth) out.insert(v->index - depth);
    return;
  }
  if (is_leaf_for_vars(t)) return;
  map_children(t, depth, [&out](const Term& c, std::uint32_t d) {
    free_vars_rec(c, d, out);
    return c;
  });
}
}  // namespace

std::set<std::uint32_t> free_vars(const Term& t) {
  std::set<std::uint32_t> out;
  free_vars_rec(t, 0, out);
  return out;
}

// ---------------------------------------------------------------------------
// canonical serialization and hashing
// ---------------------------------------------------------------------------

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

}  // namespace

void canonical_bytes(const Term& t, std::string& out) {
  using namespace node;
  const Payload& p = t.payload();
  out.push_back(static_cast<char>(p.index()));

  if (const auto* x = std::get_if<Var>(&p)) {
    put_u32(out, x->index);
  } else if (const auto* x = std::get_if<Const>(&p)) {
    put_str(out, x->name);
  } else if (const auto* x = std::get_if<Lam>(&p)) {
    out.push_back(x->annot ? 1 : 0);
    if (x->annot) canonical_bytes(*x->annot, out);
    canonical_bytes(x->body, out);
  } else if (const auto* x = std::get_if<App>(&p)) {
    canonical_bytes(x->fn, out);
    canonical_bytes(x->arg, out);
  } else if (const auto* x = std::get_if<Pair>(&p)) {
    canonical_bytes(x->fst, out);
    canonical_bytes(x->snd, out);
  } else if (const auto* x = std::get_if<Split>(&p)) {
    canonical_bytes(x->scrutinee, out);
    canonical_bytes(x->body, out);
  } else if (const auto* x = std::get_if<Inl>(&p)) {
    canonical_bytes(x->payload, out);
    canonical_bytes(x->other, out);
  } else if (const auto* x = std::get_if<Inr>(&p)) {
    canonical_bytes(x->payload, out);
    canonical_bytes(x->other, out);
  } else if (const auto* x = std::get_if<Case>(&p)) {
    canonical_bytes(x->scrutinee, out);
    canonical_bytes(x->left, out);
    canonical_bytes(x->right, out);
  } else if (std::holds_alternative<Refl>(p)) {
    // tag only
  } else if (const auto* x = std::get_if<Pi>(&p)) {
    canonical_bytes(x->domain, out);
    canonical_bytes(x->codomain, out);
  } else if (const auto* x = std::get_if<Sigma>(&p)) {
    canonical_bytes(x->fst_type, out);
    canonical_bytes(x->snd_type, out);
  } else if (const auto* x = std::get_if<Sum>(&p)) {
    canonical_bytes(x->left, out);
    canonical_bytes(x->right, out);
  } else if (const auto* x = std::get_if<IdType>(&p)) {
    canonical_bytes(x->carrier, out);
    canonical_bytes(x->lhs, out);
    canonical_bytes(x->rhs, out);
  } else if (const auto* x = std::get_if<SortTerm>(&p)) {
    out.push_back(static_cast<char>(x->sort.axis));
    put_u32(out, x->sort.level);
  } else if (const auto* x = std::get_if<BaseType>(&p)) {
    out.push_back(static_cast<char>(x->kind));
  } else if (const auto* x = std::get_if<ValLit>(&p)) {
    put_str(out, x->value.str());
  } else if (const auto* x = std::get_if<TimeLit>(&p)) {
    out.push_back(static_cast<char>(x->kind));
    put_u64(out, x->millis);
  } else if (const auto* x = std::get_if<IdLit>(&p)) {
    put_str(out, x->value);
  } else if (const auto* x = std::get_if<Let>(&p)) {
    canonical_bytes(x->bound, out);
    canonical_bytes(x->bound_type, out);
    canonical_bytes(x->body, out);
  } else if (const auto* x = std::get_if<PrimProof>(&p)) {
    out.push_back(static_cast<char>(x->tag));
    out.push_back(x->refuting ? 1 : 0);
    put_u32(out, static_cast<std::uint32_t>(x->operands.size()));
    for (const Term& op : x->operands) canonical_bytes(op, out);
  }
  // Empty: tag only
}

Digest term_hash(const Term& t) {
  std::string bytes;
  bytes.reserve(256);
  canonical_bytes(t, bytes);
  return sha256(bytes);
}

// ---------------------------------------------------------------------------
// Context
// ---------------------------------------------------------------------------

const Context::Entry* Context::lookup(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return nullptr;
  return &entries_[it->second];
}

bool Context::declare(std::string name, Term type) {
  if (index_.count(name)) return false;
  index_.emplace(name, entries_.size());
  entries_.push_back(Entry{std::move(name), std::move(type), std::nullopt});
  return true;
}

bool Context::define(std::string name, Term body, Term type) {
  if (index_.count(name)) return false;
  index_.emplace(name, entries_.size());
  entries_.push_back(Entry{std::move(name), std::move(type), std::move(body)});
  return true;
}

void Context::add_registry(std::string name, std::set<std::string> members) {
  registries_[std::move(name)] = std::move(members);
}

const std::set<std::string>* Context::registry(std::string_view name) const {
  auto it = registries_.find(std::string(name));
  if (it == registries_.end()) return nullptr;
  return &it->second;
}

// ---------------------------------------------------------------------------
// Built-in constants
// ---------------------------------------------------------------------------

bool is_builtin_const(std::string_view name) {
  return name == kConstLeVal || name == kConstLeTime || name == kConstInSet ||
         name == kConstAbsurd || name == kConstJ;
}

std::optional<Term> builtin_const_type(std::string_view name) {
  auto pred2 = [](BaseKind k) {
    return Term::pi("a", Term::base(k),
                    Term::pi("b", Term::base(k), Term::sort(Sort::prop())));
  };
  if (name == kConstLeVal) return pred2(BaseKind::Val);
  if (name == kConstLeTime) return pred2(BaseKind::Time);
  if (name == kConstInSet)
    return Term::pi("x", Term::base(BaseKind::Id),
                    Term::pi("reg", Term::base(BaseKind::Id), Term::sort(Sort::prop())));
  if (name == kConstAbsurd)
    return Term::pi("P", Term::sort(Sort::prop()),
                    Term::pi("contra", Term::empty(), Term::var(1)));
  // J has no standalone Pi type; applications are typed structurally.
  return std::nullopt;
}

}  // namespace kos
