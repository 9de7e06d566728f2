#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kos/budget.hpp"
#include "kos/digest.hpp"
#include "kos/reduce.hpp"
#include "kos/term.hpp"
#include "kos/typecheck.hpp"

namespace kos::kernel {

enum class ItemStatus : std::uint8_t { Active, Invalidated };

// One verified fact. Invalidated items keep their refutation (or the warrant
// of the event that superseded them) and never serve as premises again.
struct KnowledgeItem {
  std::string id;
  Term term;
  Term type;
  std::uint64_t committed_at = 0;
  ItemStatus status = ItemStatus::Active;
  std::optional<Term> refutation;
};

// Declarative event effect: add/invalidate/enqueue lists plus the clock
// increment. The *_fn fields are one-argument functions of the event args,
// evaluated to normal form when the transition applies.
struct EffectAdd {
  std::string id_stem;
  bool clock_suffix = false;  // append "_<clock>" so repeated commits stay unique
  Term type_fn;
  Term term_fn;
};

struct EffectEnqueue {
  std::string event;
  Term args_fn;
};

struct EventOp {
  std::vector<EffectAdd> adds;
  std::vector<std::string> invalidates;
  std::vector<EffectEnqueue> enqueues;
  std::uint64_t clock_increment = 1;
};

// Event schema as declared in a definitions module.
struct EventDef {
  std::string name;
  std::string arg_name;
  Term args_type;
  Term pre_fn;   // \args. Prop — judged under the knowledge view
  Term post_fn;  // \args. Prop — judged under the *new* state's view
  EventOp op;
};

// Instantiated event quintuple <Args, Pre, Op, Post, Prf>.
struct Event {
  std::string name;
  Term args;
  Term args_type;
  Term pre_fn;
  Term post_fn;
  EventOp op;
  std::optional<Term> prf;  // precondition passport; synthesized when absent
};

Event instantiate(const EventDef& def, Term args, std::optional<Term> prf = std::nullopt);

// ---------------------------------------------------------------------------
// Kernel state <K, TS, P>
// ---------------------------------------------------------------------------
class KernelState {
 public:
  const std::map<std::string, KnowledgeItem>& knowledge() const { return knowledge_; }
  std::uint64_t clock() const { return clock_; }
  const std::deque<Event>& pending() const { return pending_; }

  const KnowledgeItem* item(std::string_view id) const;
  std::vector<KnowledgeItem> active_items() const;

  // Internal mutators used by the kernel operators below; states handed to
  // callers are value snapshots.
  void put_item(KnowledgeItem item);
  void set_clock(std::uint64_t c) { clock_ = c; }
  void push_pending(Event e) { pending_.push_back(std::move(e)); }
  std::optional<Event> pop_pending();

 private:
  std::map<std::string, KnowledgeItem> knowledge_;
  std::uint64_t clock_ = 0;
  std::deque<Event> pending_;
};

// Projections (pure).
inline const std::map<std::string, KnowledgeItem>& get_knowledge(const KernelState& s) {
  return s.knowledge();
}
inline std::uint64_t now(const KernelState& s) { return s.clock(); }

// View of the state for judgments: the definitions context extended with
// every Active knowledge item as an unfoldable definition.
Context state_context(const Context& defs, const KernelState& state);

// Canonical digest over clock and knowledge (ordered by id). The pending
// queue is transient scheduling state and deliberately not covered, so a
// rejected (dropped) event leaves the digest unchanged.
Digest state_hash(const KernelState& state);

enum class Identity : std::uint8_t { Equal, NotEqual };
Identity verify_id(const KernelState& a, const KernelState& b);

// ---------------------------------------------------------------------------
// Transition record (one causal log entry)
// ---------------------------------------------------------------------------
struct TransitionRecord {
  std::uint64_t seq = 0;  // assigned by the log writer
  std::string event_name;
  Digest args_digest;
  Digest state_before;
  Digest state_after;
  std::uint64_t clock_before = 0;
  std::uint64_t clock_after = 0;
  Digest pre_proof;
  Digest post_proof;
  Digest trace_digest;
  Digest prev_chain;
  Digest chain;
};

// Canonical byte image of a record (chain fields excluded).
std::string record_core_bytes(const TransitionRecord& r);
// chain = H(prev_chain || core bytes); genesis prev_chain is all zeros.
Digest chain_hash(const Digest& prev_chain, const TransitionRecord& r);
void seal_record(TransitionRecord& r, const Digest& prev_chain);

// ---------------------------------------------------------------------------
// Transition
// ---------------------------------------------------------------------------
enum class RejectReason : std::uint8_t {
  MissingPreProof,
  PreRefuted,
  PostViolated,
  IllTypedPayload,
  BudgetExhausted,
};
const char* reject_reason_name(RejectReason r);

struct Transitioned {
  KernelState state;
  TransitionRecord record;
  Event event;
  Term pre_proof;
  Term post_proof;
  std::vector<ReductionStep> op_trace;  // reflexivity witness for the op evaluation
};
struct Quiescent {};
struct Rejected {
  RejectReason reason;
  std::string detail;
  KernelState state;  // input state with the offending event dropped; digest-equal
  std::optional<Event> event;
};
using StepResult = std::variant<Transitioned, Quiescent, Rejected>;

// Peek-verify-reduce-confirm on the head pending event. Never throws on bad
// events; all failures roll back to a digest-equal state. The events map is
// needed only when the op enqueues derived events.
StepResult kstep(const KernelState& state, const Context& defs, const Budget& budget);
StepResult kstep(const KernelState& state, const Context& defs, const Budget& budget,
                 const std::map<std::string, EventDef>* events);

struct KernelError {
  RejectReason reason;
  std::string detail;
};
using ScheduleResult = std::variant<KernelState, KernelError>;

// Append a well-formed event to the pending queue; knowledge and clock are
// untouched.
ScheduleResult schedule(const KernelState& state, const Context& defs, Event e,
                        const Budget& budget);

// Clock stepping only; the commit path consumes events itself.
KernelState tick(const KernelState& state);

struct Merged { KernelState state; };
struct Quarantined {
  KernelState state;
  Term refutation;
};
struct UnifyUnknown {};
using UnifyResult = std::variant<Merged, Quarantined, UnifyUnknown, KernelError>;

// Consistency-checked knowledge extension: a bounded refutation search for
// Empty decides Merge vs Quarantine; budget exhaustion leaves the state
// untouched.
UnifyResult unify(const KernelState& state, const Context& defs, KnowledgeItem item,
                  const Budget& budget);

// ---------------------------------------------------------------------------
// Obligation synthesis (shared by kstep and the runtime elaborator)
// ---------------------------------------------------------------------------
enum class ObligationStatus : std::uint8_t { Found, Refuted, Missing, Unknown };
struct Obligation {
  ObligationStatus status;
  Term proof;         // Found: proof of the goal; Refuted: proof of goal -> Empty
  Term missing_goal;  // Missing: the smallest unsatisfied atom (the dependency)
};

// Goal-directed synthesis over the knowledge view: conjunctions split,
// primitive predicates decide, identity goals resolve by conversion, other
// atoms match declared axioms or Active items by type.
Obligation synthesize_obligation(const Context& view, const Term& goal, FuelState& fuel);

}  // namespace kos::kernel
