#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "kos/digest.hpp"

namespace kos {

using Nat = boost::multiprecision::cpp_int;  // Val literals, non-negative by construction

// ---------------------------------------------------------------------------
// Sorts: a logical axis (Prop, Type i) and a data axis (Data i).
//   Prop : Type 1,   Type i : Type i+1,   Data i : Data i+1 and Data i : Type i+1.
//   Prop embeds one-way into Data 1; the reverse is never allowed.
// ---------------------------------------------------------------------------
struct Sort {
  enum class Axis : std::uint8_t { Prop, Type, Data };
  Axis axis = Axis::Prop;
  std::uint32_t level = 0;  // Type levels start at 1, Data levels at 0

  static Sort prop() { return {Axis::Prop, 0}; }
  static Sort type(std::uint32_t i) { return {Axis::Type, i}; }
  static Sort data(std::uint32_t i) { return {Axis::Data, i}; }

  bool is_prop() const { return axis == Axis::Prop; }
  bool is_type() const { return axis == Axis::Type; }
  bool is_data() const { return axis == Axis::Data; }

  // The sort classifying this sort.
  Sort classifier() const;

  bool operator==(const Sort&) const = default;
  std::string str() const;
};

// One-way coercion chain: Prop -> Data 1 -> Type 2, Data i -> Type i+1.
bool sort_coerces(const Sort& from, const Sort& to);

enum class BaseKind : std::uint8_t { Val, Time, Id };
enum class TimeKind : std::uint8_t { Timestamp, Duration };
enum class PrimTag : std::uint8_t { LeVal, EqVal, LeTime, InSet };

const char* base_kind_name(BaseKind k);
const char* prim_tag_name(PrimTag t);

namespace node {
struct Box;
using BoxPtr = std::shared_ptr<const Box>;
}  // namespace node

// Immutable, shareable term value. Copies are cheap handle copies; payloads
// are defined right below the class.
class Term {
 public:
  Term();  // defaults to Empty; prefer the factory functions below

  const auto& payload() const;
  template <typename T>
  const T* as() const;
  template <typename T>
  bool is() const;

  bool same_node(const Term& other) const { return box_ == other.box_; }

  // -- factories ------------------------------------------------------------
  static Term var(std::uint32_t index);
  static Term constant(std::string name);
  static Term lam(std::string name, std::optional<Term> annot, Term body);
  static Term app(Term fn, Term arg);
  static Term pair(Term fst, Term snd);
  static Term split(Term scrutinee, std::string n1, std::string n2, Term body);
  static Term inl(Term payload, Term other);
  static Term inr(Term payload, Term other);
  static Term case_of(Term scrutinee, std::string nl, Term left, std::string nr, Term right);
  static Term refl();
  static Term pi(std::string name, Term domain, Term codomain);
  static Term sigma(std::string name, Term fst, Term snd);
  static Term sum(Term l, Term r);
  static Term id_type(Term carrier, Term lhs, Term rhs);
  static Term sort(Sort s);
  static Term base(BaseKind k);
  static Term val(Nat v);
  static Term val(std::uint64_t v) { return val(Nat(v)); }
  static Term time(TimeKind k, std::uint64_t ms);
  static Term id_lit(std::string v);
  static Term let_in(std::string name, Term bound, Term bound_type, Term body);
  static Term prim(PrimTag tag, bool refuting, std::vector<Term> operands);
  static Term empty();

  // Non-dependent sugar.
  static Term arrow(Term domain, Term codomain);  // Pi with unused binder
  static Term product(Term fst, Term snd);        // Sigma with unused binder
  static Term proj1(Term p);                      // split(p, x.y.x)
  static Term proj2(Term p);                      // split(p, x.y.y)

 private:
  explicit Term(node::BoxPtr box) : box_(std::move(box)) {}
  node::BoxPtr box_;
};

namespace node {

// Bound variables are de Bruijn indices; `name` fields on binders are
// surface hints only and never affect equality or digests.
struct Var { std::uint32_t index; };
struct Const { std::string name; };
struct Lam {
  std::string name;
  std::optional<Term> annot;  // domain; optional so surface "\x. t" parses
  Term body;                  // one binder
};
struct App { Term fn, arg; };
struct Pair { Term fst, snd; };
struct Split {
  Term scrutinee;
  std::string name_fst, name_snd;
  Term body;  // two binders: index 1 = fst, index 0 = snd
};
struct Inl { Term payload, other; };  // other = annotation for the missing branch type
struct Inr { Term payload, other; };
struct Case {
  Term scrutinee;
  std::string name_left;
  Term left;  // one binder
  std::string name_right;
  Term right;  // one binder
};
struct Refl {};
struct Pi {
  std::string name;
  Term domain;
  Term codomain;  // one binder
};
struct Sigma {
  std::string name;
  Term fst_type;
  Term snd_type;  // one binder
};
struct Sum { Term left, right; };
struct IdType { Term carrier, lhs, rhs; };
struct SortTerm { Sort sort; };
struct BaseType { BaseKind kind; };
struct ValLit { Nat value; };
struct TimeLit { TimeKind kind; std::uint64_t millis; };
struct IdLit { std::string value; };
struct Let {
  std::string name;
  Term bound;
  Term bound_type;
  Term body;  // one binder
};
// Opaque decidable-predicate witness. `refuting = true` inhabits
// (positive form) -> Empty instead of the positive form itself.
struct PrimProof {
  PrimTag tag;
  bool refuting;
  std::vector<Term> operands;
};
struct Empty {};

using Payload =
    std::variant<Var, Const, Lam, App, Pair, Split, Inl, Inr, Case, Refl, Pi, Sigma, Sum,
                 IdType, SortTerm, BaseType, ValLit, TimeLit, IdLit, Let, PrimProof, Empty>;

struct Box {
  Payload v;
};

}  // namespace node

inline const auto& Term::payload() const { return box_->v; }

template <typename T>
const T* Term::as() const {
  return std::get_if<T>(&box_->v);
}

template <typename T>
bool Term::is() const {
  return std::holds_alternative<T>(box_->v);
}

// ---------------------------------------------------------------------------
// Structural operations
// ---------------------------------------------------------------------------

// Shift free variables >= cutoff by delta (delta may be negative).
Term shift(const Term& t, std::int32_t delta, std::uint32_t cutoff = 0);

// Capture-avoiding substitution of `replacement` for the variable bound at
// `binder_depth` (default: the innermost binder, index 0). Free variables
// above the target index are renumbered down by one.
// Throws std::logic_error if renumbering would underflow (malformed input).
Term substitute(const Term& target, const Term& replacement, std::uint32_t binder_depth = 0);

// True iff a and b are identical up to bound-variable naming. With the
// nameless representation this is structural equality that ignores hints.
bool alpha_equal(const Term& a, const Term& b);

std::set<std::uint32_t> free_vars(const Term& t);

// Canonical serialization: tag bytes plus payloads, binder names excluded.
// Equal for alpha-equal terms; stable across runs and platforms.
void canonical_bytes(const Term& t, std::string& out);
Digest term_hash(const Term& t);

// ---------------------------------------------------------------------------
// Context: ordered global declarations and definitions, plus the named
// literal registries that back the InSet predicate.
// ---------------------------------------------------------------------------
class Context {
 public:
  struct Entry {
    std::string name;
    Term type;
    std::optional<Term> body;  // present for Def entries; those unfold by delta
  };

  const std::vector<Entry>& entries() const { return entries_; }
  const Entry* lookup(std::string_view name) const;
  bool contains(std::string_view name) const { return lookup(name) != nullptr; }

  // Returns false (no change) when the name is already taken.
  bool declare(std::string name, Term type);
  bool define(std::string name, Term body, Term type);

  void add_registry(std::string name, std::set<std::string> members);
  const std::set<std::string>* registry(std::string_view name) const;
  const std::map<std::string, std::set<std::string>>& registries() const { return registries_; }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::map<std::string, std::set<std::string>> registries_;
};

// Built-in constants available in every context: the primitive predicate
// heads (le_val, le_time, in_set), the Empty eliminator `absurd`, and the
// identity eliminator head `J` (typed structurally at application sites).
bool is_builtin_const(std::string_view name);
std::optional<Term> builtin_const_type(std::string_view name);

inline constexpr std::string_view kConstLeVal = "le_val";
inline constexpr std::string_view kConstLeTime = "le_time";
inline constexpr std::string_view kConstInSet = "in_set";
inline constexpr std::string_view kConstAbsurd = "absurd";
inline constexpr std::string_view kConstJ = "J";

}  // namespace kos
