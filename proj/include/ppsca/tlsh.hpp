// Copyright 2026 The ppsca Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Trend Micro Locality Sensitive Hash, 128-bucket / 1-byte-checksum variant.
//
// The construction follows the published reference implementation:
// a 5-byte sliding window feeds six Pearson-hashed byte triplets into 256
// counters (only the first 128 are used), the counters are bucketed into
// 2-bit codes by their quartiles, and a header records a rolling checksum,
// a log-bucketed length and two quartile ratios.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "ppsca/common.hpp"

namespace ppsca {

namespace tlsh_detail {

// Pearson's permutation table as used by the reference TLSH.
inline constexpr std::array<std::uint8_t, 256> kPearson = {
    1,   87,  49,  12,  176, 178, 102, 166, 121, 193, 6,   84,  249, 230, 44,  163,
    14,  197, 213, 181, 161, 85,  218, 80,  64,  239, 24,  226, 236, 142, 38,  200,
    110, 177, 104, 103, 141, 253, 255, 50,  77,  101, 81,  18,  45,  96,  31,  222,
    25,  107, 190, 70,  86,  237, 240, 34,  72,  242, 20,  214, 244, 227, 149, 235,
    97,  234, 57,  22,  60,  250, 82,  175, 208, 5,   127, 199, 111, 62,  135, 248,
    174, 169, 211, 58,  66,  154, 106, 195, 245, 171, 17,  187, 182, 179, 0,   243,
    132, 56,  148, 75,  128, 133, 158, 100, 130, 126, 91,  13,  153, 246, 216, 219,
    119, 68,  223, 78,  83,  88,  201, 99,  122, 11,  92,  32,  136, 114, 52,  10,
    138, 30,  48,  183, 156, 35,  61,  26,  143, 74,  251, 94,  129, 162, 63,  152,
    170, 7,   115, 167, 241, 206, 3,   150, 55,  59,  151, 220, 90,  53,  23,  131,
    125, 173, 15,  238, 79,  95,  89,  16,  105, 137, 225, 224, 217, 160, 37,  123,
    118, 73,  2,   157, 46,  116, 9,   145, 134, 228, 207, 212, 202, 215, 69,  229,
    27,  188, 67,  124, 168, 252, 42,  4,   29,  108, 21,  247, 19,  205, 39,  203,
    233, 40,  186, 147, 198, 192, 155, 33,  164, 191, 98,  204, 165, 180, 117, 76,
    140, 36,  210, 172, 41,  54,  159, 8,   185, 232, 113, 196, 231, 47,  146, 120,
    51,  65,  28,  144, 254, 221, 93,  189, 194, 139, 112, 43,  71,  109, 184, 209,
};

constexpr std::uint8_t pearson(std::uint8_t salt, std::uint8_t i, std::uint8_t j,
                               std::uint8_t k) {
  std::uint8_t h = kPearson[salt];
  h = kPearson[h ^ i];
  h = kPearson[h ^ j];
  return kPearson[h ^ k];
}

// Per-byte distance between two 4-code bytes; a code gap of 3 scores 6.
constexpr std::array<std::array<std::uint8_t, 256>, 256> make_pair_table() {
  std::array<std::array<std::uint8_t, 256>, 256> t{};
  for (int a = 0; a < 256; ++a) {
    for (int b = 0; b < 256; ++b) {
      int total = 0;
      for (int s = 0; s < 8; s += 2) {
        int d = ((a >> s) & 3) - ((b >> s) & 3);
        if (d < 0) d = -d;
        total += (d == 3) ? 6 : d;
      }
      t[a][b] = static_cast<std::uint8_t>(total);
    }
  }
  return t;
}

inline constexpr auto kPairDiff = make_pair_table();

inline int mod_diff(int x, int y, int range) {
  const int dl = y > x ? y - x : x - y;
  const int dr = range - dl;
  return dl > dr ? dr : dl;
}

inline std::uint8_t length_capture(std::size_t len) {
  const double l = std::log(static_cast<double>(len));
  int i;
  if (len <= 656) {
    i = static_cast<int>(std::floor(l / 0.4054651));
  } else if (len <= 3199) {
    i = static_cast<int>(std::floor(l / 0.26236426 - 8.72777));
  } else {
    i = static_cast<int>(std::floor(l / 0.095310180 - 62.5472));
  }
  return static_cast<std::uint8_t>(i & 0xFF);
}

inline std::uint8_t swap_nibbles(std::uint8_t b) {
  return static_cast<std::uint8_t>((b << 4) | (b >> 4));
}

}  // namespace tlsh_detail

struct TlshDigest {
  static constexpr std::size_t kBuckets = 128;
  static constexpr std::size_t kCodeBytes = 32;
  static constexpr std::size_t kSerializedBytes = 35;
  static constexpr std::size_t kHexChars = 70;
  static constexpr std::size_t kMinInput = 50;

  std::uint8_t checksum = 0;
  std::uint8_t lvalue = 0;
  std::uint8_t q1_ratio = 0;  // 4 bits
  std::uint8_t q2_ratio = 0;  // 4 bits
  // codes[i] holds buckets 4i..4i+3, bucket 4i+j at bits 2j.
  std::array<std::uint8_t, kCodeBytes> codes{};

  int bucket_code(std::size_t bucket) const {
    return (codes[bucket / 4] >> (2 * (bucket % 4))) & 3;
  }

  void set_bucket_code(std::size_t bucket, int code) {
    auto& byte = codes[bucket / 4];
    const int shift = static_cast<int>(2 * (bucket % 4));
    byte = static_cast<std::uint8_t>((byte & ~(3 << shift)) | ((code & 3) << shift));
  }

  // Reference byte layout: nibble-swapped header, code bytes reversed.
  std::array<std::uint8_t, kSerializedBytes> to_bytes() const {
    std::array<std::uint8_t, kSerializedBytes> out{};
    out[0] = tlsh_detail::swap_nibbles(checksum);
    out[1] = tlsh_detail::swap_nibbles(lvalue);
    out[2] = static_cast<std::uint8_t>((q1_ratio << 4) | (q2_ratio & 0x0F));
    for (std::size_t i = 0; i < kCodeBytes; ++i) {
      out[3 + i] = codes[kCodeBytes - 1 - i];
    }
    return out;
  }

  static TlshDigest from_bytes(std::span<const std::uint8_t> b) {
    if (b.size() != kSerializedBytes) {
      throw FormatError("tlsh digest must be 35 bytes");
    }
    TlshDigest d;
    d.checksum = tlsh_detail::swap_nibbles(b[0]);
    d.lvalue = tlsh_detail::swap_nibbles(b[1]);
    d.q1_ratio = static_cast<std::uint8_t>(b[2] >> 4);
    d.q2_ratio = static_cast<std::uint8_t>(b[2] & 0x0F);
    for (std::size_t i = 0; i < kCodeBytes; ++i) {
      d.codes[kCodeBytes - 1 - i] = b[3 + i];
    }
    return d;
  }

  std::string hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string s;
    s.reserve(kHexChars);
    for (auto byte : to_bytes()) {
      s.push_back(kDigits[byte >> 4]);
      s.push_back(kDigits[byte & 0x0F]);
    }
    return s;
  }

  // Accepts 70 hex chars in either case, optionally prefixed by "T1".
  static TlshDigest parse(std::string_view text) {
    if (text.size() == kHexChars + 2 && (text[0] == 'T' || text[0] == 't') &&
        text[1] == '1') {
      text.remove_prefix(2);
    }
    if (text.size() != kHexChars) {
      throw ParseError("tlsh digest must be 70 hex characters, got " +
                       std::to_string(text.size()));
    }
    auto nibble = [](char c) -> int {
      if (c >= '0' && c <= '9') return c - '0';
      if (c >= 'a' && c <= 'f') return c - 'a' + 10;
      if (c >= 'A' && c <= 'F') return c - 'A' + 10;
      throw ParseError(std::string("invalid hex character '") + c + "'");
    };
    std::array<std::uint8_t, kSerializedBytes> raw{};
    for (std::size_t i = 0; i < kSerializedBytes; ++i) {
      raw[i] = static_cast<std::uint8_t>((nibble(text[2 * i]) << 4) |
                                         nibble(text[2 * i + 1]));
    }
    return from_bytes(raw);
  }

  friend bool operator==(const TlshDigest&, const TlshDigest&) = default;
};

// Returns nullopt when the input is shorter than 50 bytes or lacks the
// byte diversity TLSH needs (half the buckets empty, or a zero third
// quartile). Callers skip such functions.
inline std::optional<TlshDigest> tlsh_digest(std::span<const std::uint8_t> data) {
  using tlsh_detail::pearson;
  if (data.size() < TlshDigest::kMinInput) return std::nullopt;

  std::array<std::uint32_t, 256> counts{};
  std::uint8_t checksum = 0;
  std::array<std::uint8_t, 5> window{};
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t j = i % 5;
    window[j] = data[i];
    if (i < 4) continue;
    const auto w0 = window[j];
    const auto w1 = window[(j + 4) % 5];
    const auto w2 = window[(j + 3) % 5];
    const auto w3 = window[(j + 2) % 5];
    const auto w4 = window[(j + 1) % 5];
    checksum = pearson(0, w0, w1, checksum);
    ++counts[pearson(2, w0, w1, w2)];
    ++counts[pearson(3, w0, w1, w3)];
    ++counts[pearson(5, w0, w2, w3)];
    ++counts[pearson(7, w0, w2, w4)];
    ++counts[pearson(11, w0, w1, w4)];
    ++counts[pearson(13, w0, w3, w4)];
  }

  std::array<std::uint32_t, TlshDigest::kBuckets> sorted{};
  std::copy_n(counts.begin(), TlshDigest::kBuckets, sorted.begin());
  std::sort(sorted.begin(), sorted.end());
  const std::uint32_t q1 = sorted[31];
  const std::uint32_t q2 = sorted[63];
  const std::uint32_t q3 = sorted[95];
  if (q3 == 0) return std::nullopt;

  std::size_t nonzero = 0;
  for (std::size_t b = 0; b < TlshDigest::kBuckets; ++b) {
    if (counts[b] > 0) ++nonzero;
  }
  if (nonzero <= TlshDigest::kBuckets / 2) return std::nullopt;

  TlshDigest d;
  for (std::size_t b = 0; b < TlshDigest::kBuckets; ++b) {
    const auto k = counts[b];
    int code = 0;
    if (q3 < k) {
      code = 3;
    } else if (q2 < k) {
      code = 2;
    } else if (q1 < k) {
      code = 1;
    }
    d.set_bucket_code(b, code);
  }
  d.checksum = checksum;
  d.lvalue = tlsh_detail::length_capture(data.size());
  // float arithmetic mirrors the reference so boundary cases agree.
  d.q1_ratio = static_cast<std::uint8_t>(
      static_cast<std::uint32_t>(static_cast<float>(q1 * 100) / static_cast<float>(q3)) %
      16);
  d.q2_ratio = static_cast<std::uint8_t>(
      static_cast<std::uint32_t>(static_cast<float>(q2 * 100) / static_cast<float>(q3)) %
      16);
  return d;
}

inline std::optional<TlshDigest> tlsh_digest(std::string_view text) {
  return tlsh_digest(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline int tlsh_body_distance(const TlshDigest& a, const TlshDigest& b) {
  int diff = 0;
  for (std::size_t i = 0; i < TlshDigest::kCodeBytes; ++i) {
    diff += tlsh_detail::kPairDiff[a.codes[i]][b.codes[i]];
  }
  return diff;
}

// Full TLSH distance including the length term.
inline int tlsh_distance(const TlshDigest& a, const TlshDigest& b) {
  using tlsh_detail::mod_diff;
  int diff = 0;
  const int ldiff = mod_diff(a.lvalue, b.lvalue, 256);
  if (ldiff == 1) {
    diff = 1;
  } else if (ldiff > 1) {
    diff = ldiff * 12;
  }
  const int q1diff = mod_diff(a.q1_ratio, b.q1_ratio, 16);
  diff += q1diff <= 1 ? q1diff : (q1diff - 1) * 12;
  const int q2diff = mod_diff(a.q2_ratio, b.q2_ratio, 16);
  diff += q2diff <= 1 ? q2diff : (q2diff - 1) * 12;
  if (a.checksum != b.checksum) ++diff;
  return diff + tlsh_body_distance(a, b);
}

}  // namespace ppsca
