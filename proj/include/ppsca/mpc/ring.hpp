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

// Arithmetic over Z_2^64 with fixed-point encoding. Unsigned wrap-around is
// the ring; two's complement gives the signed reading.

#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "ppsca/common.hpp"

namespace ppsca::mpc {

using Ring = std::uint64_t;
using RingVec = std::vector<Ring>;

inline constexpr int kFracBits = 16;

inline Ring encode(double x, int f = kFracBits) {
  const double scaled = std::nearbyint(std::ldexp(x, f));
  if (!(std::fabs(scaled) < 9.2e18)) throw Error("fixed-point encode overflow");
  return static_cast<Ring>(static_cast<std::int64_t>(scaled));
}

inline double decode(Ring v, int f = kFracBits) {
  return std::ldexp(static_cast<double>(static_cast<std::int64_t>(v)), -f);
}

struct Share {
  Ring value = 0;
  int party = 0;
};

// s0 uniform, s1 = x - s0.
inline std::pair<Ring, Ring> share(Ring x, Rng& rng) {
  const Ring s0 = rng.next();
  return {s0, x - s0};
}

inline Ring reconstruct(Ring s0, Ring s1) { return s0 + s1; }

inline std::pair<RingVec, RingVec> share(const RingVec& x, Rng& rng) {
  RingVec s0(x.size()), s1(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) std::tie(s0[i], s1[i]) = share(x[i], rng);
  return {std::move(s0), std::move(s1)};
}

inline RingVec reconstruct(const RingVec& s0, const RingVec& s1) {
  if (s0.size() != s1.size()) throw Error("share length mismatch");
  RingVec out(s0.size());
  for (std::size_t i = 0; i < s0.size(); ++i) out[i] = s0[i] + s1[i];
  return out;
}

inline Share add_shares(Share a, Share b) {
  if (a.party != b.party) throw Error("cannot add shares held by different parties");
  return {a.value + b.value, a.party};
}

inline RingVec add(const RingVec& a, const RingVec& b) {
  if (a.size() != b.size()) throw Error("ring vector length mismatch");
  RingVec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

inline RingVec sub(const RingVec& a, const RingVec& b) {
  if (a.size() != b.size()) throw Error("ring vector length mismatch");
  RingVec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

// Row-major (m x k) * (k x n), accumulated into `out` (m x n).
inline void matmul_acc(const Ring* a, const Ring* b, Ring* out, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    Ring* row = out + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Ring s = a[i * k + p];
      if (s == 0) continue;
      const Ring* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += s * brow[j];
    }
  }
}

inline RingVec matmul(const RingVec& a, const RingVec& b, std::size_t m, std::size_t k, std::size_t n) {
  if (a.size() != m * k || b.size() != k * n) throw Error("matmul shape mismatch");
  RingVec out(m * n, 0);
  matmul_acc(a.data(), b.data(), out.data(), m, k, n);
  return out;
}

// Local probabilistic truncation of one party's share. Off by at most one
// unit in the last place unless the shares wrap, which for |x| < 2^l
// happens with probability about 2^(l+1-64).
inline Ring truncate_share(Ring s, int party, int f = kFracBits) {
  if (party == 0) return static_cast<Ring>(static_cast<std::int64_t>(s) >> f);
  const auto neg = static_cast<std::int64_t>(Ring{0} - s);
  return Ring{0} - static_cast<Ring>(neg >> f);
}

inline void truncate_shares(RingVec& v, int party, int f = kFracBits) {
  for (auto& s : v) s = truncate_share(s, party, f);
}

inline RingVec encode(const std::vector<double>& x, int f = kFracBits) {
  RingVec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = encode(x[i], f);
  return out;
}

inline std::vector<double> decode(const RingVec& v, int f = kFracBits) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = decode(v[i], f);
  return out;
}

}  // namespace ppsca::mpc
