#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace vtfeed::tlsh {

inline constexpr std::size_t kBodyBytes = 32;
inline constexpr std::size_t kBuckets = kBodyBytes * 4;
inline constexpr std::size_t kHexLength = 2 * (3 + kBodyBytes);  // 70, without the "T1" prefix
/// Raw distances at or above this map to 1.0 in normalized_distance.
inline constexpr int kNormalizationCap = 300;

/// Decoded TLSH digest (128 buckets, 1-byte checksum).
///
/// Header bytes are stored with their nibbles swapped back, as the upstream encoder writes them
/// swapped. `body` keeps the wire order of the hex string; every byte packs four 2-bit buckets.
struct Digest {
  std::uint8_t checksum = 0;
  std::uint8_t lvalue = 0;
  std::uint8_t q1ratio = 0;  // 4 bits
  std::uint8_t q2ratio = 0;  // 4 bits
  std::array<std::uint8_t, kBodyBytes> body{};

  /// Bucket value in {0,1,2,3}; bucket 0 is the lowest two bits of the last body byte.
  int bucket(std::size_t i) const noexcept {
    return (body[kBodyBytes - 1 - i / 4] >> (2 * (i % 4))) & 3;
  }

  friend bool operator==(const Digest&, const Digest&) = default;
};

/// Accepts 70 hex chars, or 72 with a leading "T1" (any case). Throws InvalidDigest.
Digest parse_digest(std::string_view hex);

/// Uppercase hex, optionally with the "T1" prefix.
std::string encode_digest(const Digest& d, bool with_prefix = true);

/// Upstream TLSH scoring with the length component included.
int distance(const Digest& a, const Digest& b) noexcept;

/// A true metric with bound(a, b) <= distance(a, b) for every pair: plain L1 over buckets,
/// circular differences of the header fields and checksum inequality. Used to prune
/// vantage-point tree searches, where distance() itself breaks the triangle inequality.
int bound(const Digest& a, const Digest& b) noexcept;

/// min(distance, kNormalizationCap) / kNormalizationCap.
double normalized_distance(const Digest& a, const Digest& b) noexcept;

}  // namespace vtfeed::tlsh
