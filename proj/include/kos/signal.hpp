#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace kos::rt {

// One raw environment signal, not yet carrying any proof. Sequence numbers
// are strictly increasing within a stream; wall time is evidence only and
// never drives logical order.
struct RawSignal {
  std::uint64_t sequence = 0;
  std::string kind;
  nlohmann::json payload;  // opaque bytes (hex string) or structured record
  std::uint64_t wall_time_ms = 0;
};

}  // namespace kos::rt
