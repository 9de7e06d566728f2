#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "kos/term.hpp"

namespace kos {

// Reduction rules. Delta (definition unfolding) and Zeta (let inlining) are
// recorded in traces but flagged auxiliary; they do not count as core logical
// steps even though they consume fuel like everything else.
enum class Rule : std::uint8_t { Beta, IotaSplit, IotaCase, IotaId, IotaJ, Delta, Zeta };

const char* rule_name(Rule r);

// Path into a term: child slot indices from the root.
using TermPath = std::vector<std::uint32_t>;

struct ReductionStep {
  Rule rule;
  TermPath position;
  Digest before;  // digest of the whole term before this step
  Digest after;   // digest after
  bool aux = false;
};

struct Fuel {
  std::uint64_t steps = 1'000'000;
};

// Mutable fuel pool shared across a reduction/conversion/checking run.
struct FuelState {
  std::uint64_t remaining = 0;
  bool exhausted = false;

  explicit FuelState(Fuel f) : remaining(f.steps) {}
  bool take() {
    if (exhausted) return false;
    if (remaining == 0) {
      exhausted = true;
      return false;
    }
    --remaining;
    return true;
  }
};

// Child slot access used by positions; out-of-range access returns nullopt.
std::size_t child_count(const Term& t);
std::optional<Term> child_at(const Term& t, std::uint32_t slot);
std::optional<Term> with_child(const Term& t, std::uint32_t slot, const Term& replacement);
std::optional<Term> subterm_at(const Term& t, const TermPath& path);

// Contract a redex at the root of t, if any. Pure rule application; no
// congruence search.
std::optional<std::pair<Term, Rule>> contract_root(const Term& t, const Context& ctx);

// Leftmost-outermost one-step reduction. Returns the contracted whole term
// plus the step record, or nullopt if t is in normal form.
std::optional<std::pair<Term, ReductionStep>> step_once(const Term& t, const Context& ctx);

struct NormalizeResult {
  bool exhausted = false;
  Term term;  // normal form, or the partial term on exhaustion
  std::vector<ReductionStep> trace;
};

NormalizeResult normalize(const Term& t, const Context& ctx, Fuel fuel);
NormalizeResult normalize(const Term& t, const Context& ctx, FuelState& fuel);

// All redex positions in t, in deterministic (leftmost-outermost-first)
// order. Used by the seeded random strategy.
std::vector<TermPath> redex_positions(const Term& t, const Context& ctx);

// Normalization picking a uniformly random redex each step (seeded).
// Strategy-independence of normal forms is a tested system property.
NormalizeResult normalize_random(const Term& t, const Context& ctx, Fuel fuel,
                                 std::uint64_t seed);

struct WhnfResult {
  bool exhausted = false;
  Term term;
};

// Reduce only until the head constructor is exposed.
WhnfResult whnf(const Term& t, const Context& ctx, Fuel fuel);
WhnfResult whnf(const Term& t, const Context& ctx, FuelState& fuel);

enum class Conv : std::uint8_t { Equal, NotEqual, Unknown };

// Decidable conversion: normalize both sides, then alpha-compare with
// eta-expansion applied during comparison. Unknown only on fuel exhaustion.
Conv conv_equal(const Term& a, const Term& b, const Context& ctx, Fuel fuel);
Conv conv_equal(const Term& a, const Term& b, const Context& ctx, FuelState& fuel);

// Re-apply a recorded trace step by step, verifying rule, position and both
// digests. Returns the final term, or nullopt on any mismatch.
std::optional<Term> replay_trace(const Term& start, const std::vector<ReductionStep>& trace,
                                 const Context& ctx);

}  // namespace kos
