#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kos/budget.hpp"
#include "kos/kernel.hpp"
#include "kos/term.hpp"

namespace kos::search {

using kernel::KnowledgeItem;

struct Found { Term proof; };
struct Refuted { Term counterproof; };  // checks against goal -> Empty
struct Unknown {};
using SearchOutcome = std::variant<Found, Refuted, Unknown>;

inline const Found* found(const SearchOutcome& o) { return std::get_if<Found>(&o); }
inline const Refuted* refuted(const SearchOutcome& o) { return std::get_if<Refuted>(&o); }
inline bool unknown(const SearchOutcome& o) { return std::holds_alternative<Unknown>(o); }

// Budgeted proof construction. Candidates are enumerated goal-directedly in
// increasing structural size with a fixed tag order, so results are
// deterministic and monotone in the budget. Found proofs re-check against the
// goal before they are returned; Refuted counterproofs check against
// goal -> Empty.
SearchOutcome search_proof(const Context& defs, const std::vector<KnowledgeItem>& facts,
                           const Term& goal, const Budget& budget);

// Internal verdict with the exhausted/budget distinction build_root_cause
// needs; search_proof folds Exhausted into Unknown.
enum class SearchStatus : std::uint8_t { Found, Refuted, Exhausted, Budget };
struct SearchDetail {
  SearchStatus status;
  std::optional<Term> witness;
};
SearchDetail search_proof_detail(const Context& defs, const std::vector<KnowledgeItem>& facts,
                                 const Term& goal, const Budget& budget);

// ---------------------------------------------------------------------------
// Root-cause synthesis over the failure/anomaly/step schema
// ---------------------------------------------------------------------------
//
// Expects the definitions module to provide constants FailEvt, Anomaly,
// ProcStep, causal_proof (a two-argument type family: anomaly then failure)
// and RootCauseReport = (f : FailEvt) * (a : Anomaly) * causal_proof a f.
struct RootCauseReport {
  KnowledgeItem failure;
  KnowledgeItem anomaly;
  std::optional<KnowledgeItem> step;  // extracted from the causal proof when present
  Term causal_proof;
  Term report_term;  // full tuple; re-checks against RootCauseReport
};
struct NotFound {};
using RootCauseResult = std::variant<RootCauseReport, NotFound, Unknown>;

// Scans Active anomalies in deterministic order (earliest time, then machine
// id, then item id) and searches a causal proof for each against the failure.
RootCauseResult build_root_cause(const Context& defs, const std::vector<KnowledgeItem>& facts,
                                 const KnowledgeItem& failure, const Budget& budget);

// ---------------------------------------------------------------------------
// Counterfactual contribution
// ---------------------------------------------------------------------------
enum class Contribution : std::uint8_t { Necessary, Redundant, Unknown };
struct PreconditionUnproven {};  // goal not provable from the full fact base
using ContribResult = std::variant<Contribution, PreconditionUnproven>;

// Shadow-state evaluation: remove one fact and re-run the search. The live
// fact list is never mutated.
ContribResult counterfactual_contrib(const Context& defs,
                                     const std::vector<KnowledgeItem>& facts,
                                     const std::string& removed_id, const Term& goal,
                                     const Budget& budget);

// Shadow edit for what-if evaluation with a substituted literal value.
std::vector<KnowledgeItem> shadow_substitute(const std::vector<KnowledgeItem>& facts,
                                             const std::string& id, const Term& new_term);

// ---------------------------------------------------------------------------
// Cross-domain watchers
// ---------------------------------------------------------------------------
//
// A watcher joins newly Active items of `subject_type` against Active items
// of `partner_type` on key equality, synthesizes the match proof, evaluates
// the optional guard, and emits a derived event. In key/guard/emit
// expressions the constants `subject` and `partner` stand for the matched
// item ids.
struct Watcher {
  std::string name;
  std::string subject_type;
  std::string partner_type;
  Term subject_key;
  Term partner_key;
  std::optional<Term> guard;  // e.g. percent_gt(x, y, 20): holds iff x*100 > y*20
  std::string emit_event;
  Term emit_args;
};

struct WatcherEmission {
  std::string watcher;
  std::string subject_id;
  std::string partner_id;
  std::string event;
  Term args;
  Term match_proof;
};

// Failed guards and missing partners emit nothing, silently.
std::vector<kernel::Event> run_watchers(const kernel::KernelState& state, const Context& defs,
                                        const std::map<std::string, kernel::EventDef>& events,
                                        const std::vector<Watcher>& watchers,
                                        const Budget& budget,
                                        std::vector<WatcherEmission>* emissions = nullptr);

// Replace every occurrence of constant `name` (e.g. the watcher's `subject`
// placeholder) by `replacement`.
Term replace_const(const Term& t, std::string_view name, const Term& replacement);

}  // namespace kos::search
