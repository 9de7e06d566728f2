#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace kos {

// 256-bit content digest. Used for term identity, state snapshots and the
// hash chain in the transition log.
struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  bool operator==(const Digest&) const = default;
  auto operator<=>(const Digest&) const = default;

  std::string hex() const;
  static Digest parse_hex(std::string_view hex);  // throws std::invalid_argument
  static Digest zero() { return Digest{}; }
};

Digest sha256(std::string_view data);

// Incremental builder for composite digests (chain = H(prev || payload)).
class DigestBuilder {
 public:
  DigestBuilder();
  ~DigestBuilder();
  DigestBuilder(const DigestBuilder&) = delete;
  DigestBuilder& operator=(const DigestBuilder&) = delete;

  void update(std::string_view data);
  void update(const Digest& d);
  Digest finish();

 private:
  void* ctx_;
};

}  // namespace kos
