#include "vtfeed/tlsh.hpp"

#include <cstdlib>

#include "vtfeed/error.hpp"

namespace vtfeed::tlsh {

namespace {

constexpr int kLengthMult = 12;
constexpr int kQRatioMult = 12;

constexpr std::uint8_t swap_nibbles(std::uint8_t b) { return static_cast<std::uint8_t>((b << 4) | (b >> 4)); }

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

int circular_diff(int x, int y, int range) {
  const int d = std::abs(x - y);
  return d < range - d ? d : range - d;
}

// Per-byte body distance: sum over the four 2-bit buckets of |a-b|, with a difference of 3 scored 6.
struct ByteDiffTable {
  std::array<std::array<std::uint8_t, 256>, 256> v{};
  std::array<std::array<std::uint8_t, 256>, 256> l1{};
  ByteDiffTable() {
    for (int a = 0; a < 256; ++a) {
      for (int b = 0; b < 256; ++b) {
        int sum = 0;
        int plain = 0;
        for (int k = 0; k < 4; ++k) {
          const int d = std::abs(((a >> (2 * k)) & 3) - ((b >> (2 * k)) & 3));
          sum += d == 3 ? 6 : d;
          plain += d;
        }
        v[a][b] = static_cast<std::uint8_t>(sum);
        l1[a][b] = static_cast<std::uint8_t>(plain);
      }
    }
  }
};

const ByteDiffTable& byte_diff() {
  static const ByteDiffTable table;
  return table;
}

}  // namespace

Digest parse_digest(std::string_view hex) {
  if (hex.size() == kHexLength + 2 && (hex[0] == 'T' || hex[0] == 't') && hex[1] == '1') {
    hex.remove_prefix(2);
  }
  if (hex.size() != kHexLength) {
    throw InvalidDigest("TLSH digest must be 70 hex chars (optionally prefixed with T1), got " +
                        std::to_string(hex.size()));
  }
  std::array<std::uint8_t, 3 + kBodyBytes> raw{};
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const int hi = hex_value(hex[2 * i]);
    const int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw InvalidDigest("TLSH digest contains non-hex characters");
    raw[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  Digest d;
  d.checksum = swap_nibbles(raw[0]);
  d.lvalue = swap_nibbles(raw[1]);
  d.q1ratio = raw[2] >> 4;
  d.q2ratio = raw[2] & 0x0F;
  for (std::size_t i = 0; i < kBodyBytes; ++i) d.body[i] = raw[3 + i];
  return d;
}

std::string encode_digest(const Digest& d, bool with_prefix) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out = with_prefix ? "T1" : "";
  auto put = [&](std::uint8_t b) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0x0F]);
  };
  put(swap_nibbles(d.checksum));
  put(swap_nibbles(d.lvalue));
  put(static_cast<std::uint8_t>((d.q1ratio << 4) | (d.q2ratio & 0x0F)));
  for (auto b : d.body) put(b);
  return out;
}

int distance(const Digest& a, const Digest& b) noexcept {
  int diff = 0;

  const int ldiff = circular_diff(a.lvalue, b.lvalue, 256);
  diff += ldiff <= 1 ? ldiff : ldiff * kLengthMult;

  const int q1diff = circular_diff(a.q1ratio, b.q1ratio, 16);
  diff += q1diff <= 1 ? q1diff : (q1diff - 1) * kQRatioMult;
  const int q2diff = circular_diff(a.q2ratio, b.q2ratio, 16);
  diff += q2diff <= 1 ? q2diff : (q2diff - 1) * kQRatioMult;

  if (a.checksum != b.checksum) ++diff;

  const auto& table = byte_diff().v;
  for (std::size_t i = 0; i < kBodyBytes; ++i) diff += table[a.body[i]][b.body[i]];
  return diff;
}

int bound(const Digest& a, const Digest& b) noexcept {
  int diff = circular_diff(a.lvalue, b.lvalue, 256) + circular_diff(a.q1ratio, b.q1ratio, 16) +
             circular_diff(a.q2ratio, b.q2ratio, 16) + (a.checksum != b.checksum);
  const auto& table = byte_diff().l1;
  for (std::size_t i = 0; i < kBodyBytes; ++i) diff += table[a.body[i]][b.body[i]];
  return diff;
}

double normalized_distance(const Digest& a, const Digest& b) noexcept {
  const int d = distance(a, b);
  return d >= kNormalizationCap ? 1.0 : static_cast<double>(d) / kNormalizationCap;
}

}  // namespace vtfeed::tlsh
