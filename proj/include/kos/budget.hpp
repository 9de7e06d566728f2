#pragma once

#include <cstdint>

namespace kos {

// Resource vector bounding every search, check and unification:
// fuel = reduction steps, depth = recursion depth, timeout = wall clock.
// Exhaustion yields the deterministic Unknown outcome, never divergence.
struct Budget {
  std::uint64_t fuel = 1'000'000;
  std::uint32_t depth = 64;
  std::uint64_t timeout_ms = 5000;
};

}  // namespace kos
