#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kos/reduce.hpp"
#include "kos/term.hpp"

namespace kos {

enum class TypeErrorKind {
  UnboundVariable,
  NotAFunction,
  DomainMismatch,
  NotAPair,
  NotASum,
  UniverseViolation,
  IdEndpointsUnequal,
  Mismatch,
  CannotInfer,
  InvalidPrimProof,
};

const char* type_error_kind_name(TypeErrorKind k);

struct TypeError {
  TypeErrorKind kind;
  std::string message;
  std::optional<Term> inferred;
  std::optional<Term> expected;
  // Index of the offending entry when raised by check_context.
  std::optional<std::size_t> context_index;
};

struct BudgetOut {};  // fuel exhausted; answer is Unknown
struct CheckOk {};

using InferResult = std::variant<Term, TypeError, BudgetOut>;
using SortResult = std::variant<Sort, TypeError, BudgetOut>;
using CheckResult = std::variant<CheckOk, TypeError, BudgetOut>;

inline bool is_ok(const CheckResult& r) { return std::holds_alternative<CheckOk>(r); }
inline const Term* inferred_type(const InferResult& r) { return std::get_if<Term>(&r); }
inline const TypeError* errored(const InferResult& r) { return std::get_if<TypeError>(&r); }
inline const TypeError* errored(const CheckResult& r) { return std::get_if<TypeError>(&r); }
inline bool out_of_budget(const InferResult& r) { return std::holds_alternative<BudgetOut>(r); }
inline bool out_of_budget(const CheckResult& r) { return std::holds_alternative<BudgetOut>(r); }

// Local binder telescope: types of bound variables, innermost binder last.
using Locals = std::vector<Term>;

// Bidirectional checking. Introduction forms check against an expected type;
// elimination forms and leaves infer. Conversion shares the same fuel pool as
// reduction, so Unknown surfaces uniformly on exhaustion.
InferResult infer(const Context& ctx, const Term& t, Fuel fuel);
InferResult infer(const Context& ctx, const Locals& locals, const Term& t, FuelState& fuel);

CheckResult check(const Context& ctx, const Term& t, const Term& expected, Fuel fuel);
CheckResult check(const Context& ctx, const Locals& locals, const Term& t,
                  const Term& expected, FuelState& fuel);

// Sort of a type expression under the universe discipline:
//   Pi into Prop is Prop regardless of the domain level (impredicative);
//   Pi over universes lands at the max logical level;
//   Sigma and Sum are predicative on the data axis, with Prop components
//   embedded one level up; Id lands in Prop.
SortResult formation_sort(const Context& ctx, const Term& ty, Fuel fuel);
SortResult formation_sort(const Context& ctx, const Locals& locals, const Term& ty,
                          FuelState& fuel);

// Each entry must be well-sorted under the preceding prefix; Def bodies must
// check against their declared types. The first offender is reported with its
// index.
CheckResult check_context(const Context& ctx, Fuel fuel);

// ---------------------------------------------------------------------------
// Primitive decidable predicates
// ---------------------------------------------------------------------------

struct PrimPredicate {
  PrimTag tag;
  std::uint32_t arity;
  std::string decision_id;  // stable identifier of the decision procedure
};

const PrimPredicate& prim_predicate(PrimTag tag);
std::optional<PrimTag> prim_tag_for_const(std::string_view name);

// Decide a predicate on normalized literal operands; nullopt when the
// operands are not decidable literals (or a registry is missing).
std::optional<bool> prim_decide(const Context& ctx, PrimTag tag,
                                const std::vector<Term>& ops);

// The classifier a (positive) primitive witness inhabits; refuting witnesses
// inhabit positive -> Empty.
Term prim_positive_type(PrimTag tag, const std::vector<Term>& ops);

struct PrimRefuted {};
struct PrimUnknown {};
using PrimSynthResult = std::variant<Term, PrimRefuted, PrimUnknown>;

// Evaluate the predicate on the (normalized) arguments and emit a checkable
// witness; Refuted when the literal comparison is false; Unknown on
// non-literal args or fuel exhaustion.
PrimSynthResult synth_prim_proof(const Context& ctx, PrimTag tag,
                                 const std::vector<Term>& args, Fuel fuel);
PrimSynthResult synth_prim_proof(const Context& ctx, PrimTag tag,
                                 const std::vector<Term>& args, FuelState& fuel);

}  // namespace kos
