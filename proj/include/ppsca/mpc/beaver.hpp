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

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ppsca/common.hpp"
#include "ppsca/embedding.hpp"
#include "ppsca/mpc/ring.hpp"
#include "ppsca/mpc/wire.hpp"

namespace ppsca::mpc {

enum class TripleKind : std::uint8_t { elementwise = 0, matrix = 1 };

// Elementwise triples have length m; matrix triples are (m x k)(k x n).
struct TripleShape {
  TripleKind kind = TripleKind::elementwise;
  std::uint64_t m = 1;
  std::uint64_t k = 1;
  std::uint64_t n = 1;

  static TripleShape elementwise(std::uint64_t len) { return {TripleKind::elementwise, len, 1, 1}; }
  static TripleShape matrix(std::uint64_t m, std::uint64_t k, std::uint64_t n) {
    return {TripleKind::matrix, m, k, n};
  }

  std::size_t a_size() const { return kind == TripleKind::elementwise ? m : m * k; }
  std::size_t b_size() const { return kind == TripleKind::elementwise ? m : k * n; }
  std::size_t c_size() const { return kind == TripleKind::elementwise ? m : m * n; }

  friend bool operator==(const TripleShape&, const TripleShape&) = default;
};

// One party's shares of (a, b, c). Usable exactly once.
class BeaverTriple {
 public:
  BeaverTriple() = default;
  BeaverTriple(TripleShape shape, RingVec a, RingVec b, RingVec c)
      : shape_(shape), a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {}

  const TripleShape& shape() const { return shape_; }
  const RingVec& a() const { return a_; }
  const RingVec& b() const { return b_; }
  const RingVec& c() const { return c_; }
  bool consumed() const { return consumed_; }

  void consume() {
    if (consumed_) throw ProtocolError("Beaver triple reused");
    consumed_ = true;
  }

  friend bool operator==(const BeaverTriple& x, const BeaverTriple& y) {
    return x.shape_ == y.shape_ && x.a_ == y.a_ && x.b_ == y.b_ && x.c_ == y.c_;
  }

 private:
  TripleShape shape_;
  RingVec a_, b_, c_;
  bool consumed_ = false;
};

struct PartyContext {
  int party = 0;  // 0 client, 1 server
  Channel* channel = nullptr;
};

// Both parties reveal `mine`; returns the sum. Party 1 always speaks first
// so the two directions strictly alternate.
inline RingVec open_sum(PartyContext& ctx, const RingVec& mine) {
  ByteWriter w;
  put_ring(w, mine);
  Frame out{MsgType::eps_delta_open, w.take()};
  auto receive = [&] {
    const auto f = ctx.channel->expect(MsgType::eps_delta_open);
    if (f.payload.size() != mine.size() * 8) throw ProtocolError("opening has the wrong length");
    ByteReader r(f.payload, "opening");
    return get_ring(r, mine.size());
  };
  RingVec theirs;
  if (ctx.party == 1) {
    ctx.channel->send(out);
    theirs = receive();
  } else {
    theirs = receive();
    ctx.channel->send(out);
  }
  return add(mine, theirs);
}

// [x][y] = [c] + eps[b] + delta[a] + eps*delta (public term added by party 0).
inline RingVec beaver_mul(PartyContext& ctx, const RingVec& x, const RingVec& y, BeaverTriple& t) {
  if (t.shape().kind != TripleKind::elementwise || t.shape().m != x.size() || y.size() != x.size()) {
    throw ProtocolError("triple shape does not fit the multiplication");
  }
  t.consume();
  const std::size_t n = x.size();
  RingVec masked(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    masked[i] = x[i] - t.a()[i];
    masked[n + i] = y[i] - t.b()[i];
  }
  const auto opened = open_sum(ctx, masked);
  RingVec z(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Ring eps = opened[i];
    const Ring del = opened[n + i];
    z[i] = t.c()[i] + eps * t.b()[i] + del * t.a()[i];
    if (ctx.party == 0) z[i] += eps * del;
  }
  return z;
}

inline Ring beaver_mul(PartyContext& ctx, Ring x, Ring y, BeaverTriple& t) {
  return beaver_mul(ctx, RingVec{x}, RingVec{y}, t)[0];
}

// Shares of X (m x k) times W (k x n) with one masked opening of E = X - A
// and D = W - B. With `truncate`, rescales by 2^-f afterwards.
inline RingVec private_matmul(PartyContext& ctx, const RingVec& x, const RingVec& w, std::size_t m,
                              std::size_t k, std::size_t n, BeaverTriple& t, bool truncate = true,
                              int f = kFracBits) {
  if (t.shape() != TripleShape::matrix(m, k, n) || x.size() != m * k || w.size() != k * n) {
    throw ProtocolError("triple shape does not fit the matmul");
  }
  t.consume();
  RingVec masked(m * k + k * n);
  for (std::size_t i = 0; i < m * k; ++i) masked[i] = x[i] - t.a()[i];
  for (std::size_t i = 0; i < k * n; ++i) masked[m * k + i] = w[i] - t.b()[i];
  const auto opened = open_sum(ctx, masked);
  const Ring* e = opened.data();
  const Ring* d = opened.data() + m * k;
  RingVec z = t.c();
  matmul_acc(e, t.b().data(), z.data(), m, k, n);
  matmul_acc(t.a().data(), d, z.data(), m, k, n);
  if (ctx.party == 0) matmul_acc(e, d, z.data(), m, k, n);
  if (truncate) truncate_shares(z, ctx.party, f);
  return z;
}

inline RingVec private_square(PartyContext& ctx, const RingVec& x, BeaverTriple& t, int f = kFracBits) {
  auto z = beaver_mul(ctx, x, x, t);
  truncate_shares(z, ctx.party, f);
  return z;
}

// ---------------------------------------------------------------------------
// Trusted dealer
//
// Triple file: "PPSTRPL1" u32 version u64 seed u8 party
//              u64 count { u8 kind u64 m u64 k u64 n }
//              per triple: a, b, c as u64 sequences

inline constexpr std::string_view kTripleMagic = "PPSTRPL1";
inline constexpr std::uint32_t kTripleVersion = 1;

struct TripleFile {
  std::uint64_t seed = 0;
  int party = 0;
  std::vector<BeaverTriple> triples;

  std::vector<TripleShape> shapes() const {
    std::vector<TripleShape> out;
    for (const auto& t : triples) out.push_back(t.shape());
    return out;
  }

  std::vector<std::uint8_t> serialize() const {
    ByteWriter w;
    w.magic(kTripleMagic);
    w.u32(kTripleVersion);
    w.u64(seed);
    w.u8(static_cast<std::uint8_t>(party));
    w.u64(triples.size());
    for (const auto& t : triples) {
      w.u8(static_cast<std::uint8_t>(t.shape().kind));
      w.u64(t.shape().m);
      w.u64(t.shape().k);
      w.u64(t.shape().n);
    }
    for (const auto& t : triples) {
      put_ring(w, t.a());
      put_ring(w, t.b());
      put_ring(w, t.c());
    }
    return w.take();
  }

  static TripleFile deserialize(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes, "triple file");
    r.expect_magic(kTripleMagic);
    if (const auto v = r.u32(); v != kTripleVersion) {
      throw FormatError("triple file: unsupported version " + std::to_string(v));
    }
    TripleFile f;
    f.seed = r.u64();
    f.party = r.u8();
    if (f.party > 1) throw FormatError("triple file: bad party byte");
    const auto count = r.count(25);
    std::vector<TripleShape> shapes;
    std::size_t words = 0;
    for (std::uint64_t i = 0; i < count; ++i) {
      TripleShape s;
      const auto kind = r.u8();
      if (kind > 1) throw FormatError("triple file: bad triple kind");
      s.kind = static_cast<TripleKind>(kind);
      s.m = r.u64();
      s.k = r.u64();
      s.n = r.u64();
      if (s.m > (1u << 24) || s.k > (1u << 24) || s.n > (1u << 24)) {
        throw FormatError("triple file: implausible shape");
      }
      words += s.a_size() + s.b_size() + s.c_size();
      shapes.push_back(s);
    }
    if (r.remaining() != words * 8) throw FormatError("triple file: payload size mismatch");
    for (const auto& s : shapes) {
      auto a = get_ring(r, s.a_size());
      auto b = get_ring(r, s.b_size());
      auto c = get_ring(r, s.c_size());
      f.triples.emplace_back(s, std::move(a), std::move(b), std::move(c));
    }
    return f;
  }
};

namespace dealer_detail {

// Freivalds check of C = A*B over the ring, three random vectors.
inline bool product_holds(const RingVec& a, const RingVec& b, const RingVec& c, const TripleShape& s, Rng& rng) {
  if (s.kind == TripleKind::elementwise) {
    for (std::size_t i = 0; i < s.m; ++i) {
      if (c[i] != a[i] * b[i]) return false;
    }
    return true;
  }
  for (int rep = 0; rep < 3; ++rep) {
    RingVec r(s.n);
    for (auto& v : r) v = rng.next();
    const auto br = matmul(b, r, s.k, s.n, 1);
    const auto abr = matmul(a, br, s.m, s.k, 1);
    const auto cr = matmul(c, r, s.m, s.n, 1);
    if (abr != cr) return false;
  }
  return true;
}

}  // namespace dealer_detail

// Deterministic from the seed; each file carries only its party's shares.
inline std::pair<TripleFile, TripleFile> dealer_generate(std::uint64_t seed, const std::vector<TripleShape>& shapes) {
  if (shapes.empty()) throw ConfigError("dealer needs at least one triple shape");
  Rng rng(mix64(seed ^ 0x6465616c6572ull));
  Rng check(mix64(seed ^ 0x636865636bull));
  TripleFile f0, f1;
  f0.seed = f1.seed = seed;
  f0.party = 0;
  f1.party = 1;
  for (const auto& s : shapes) {
    RingVec a(s.a_size()), b(s.b_size());
    for (auto& v : a) v = rng.next();
    for (auto& v : b) v = rng.next();
    RingVec c;
    if (s.kind == TripleKind::elementwise) {
      c.resize(s.m);
      for (std::size_t i = 0; i < s.m; ++i) c[i] = a[i] * b[i];
    } else {
      c = matmul(a, b, s.m, s.k, s.n);
    }
    auto [a0, a1] = share(a, rng);
    auto [b0, b1] = share(b, rng);
    auto [c0, c1] = share(c, rng);
    if (!dealer_detail::product_holds(reconstruct(a0, a1), reconstruct(b0, b1), reconstruct(c0, c1), s, check)) {
      throw Error("dealer produced an inconsistent triple");
    }
    f0.triples.emplace_back(s, std::move(a0), std::move(b0), std::move(c0));
    f1.triples.emplace_back(s, std::move(a1), std::move(b1), std::move(c1));
  }
  return {std::move(f0), std::move(f1)};
}

// Triples one embedding session consumes: a matrix triple per batch, plus
// an elementwise triple per batch for the square activation.
inline std::vector<TripleShape> consumption_plan(const ModelRef& model, std::size_t n_functions,
                                                 std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  const std::size_t batches = (n_functions + batch_size - 1) / batch_size;
  std::vector<TripleShape> out;
  for (std::size_t b = 0; b < batches; ++b) {
    out.push_back(TripleShape::matrix(batch_size, model.vocab, model.dim));
    if (model.activation == Activation::square) out.push_back(TripleShape::elementwise(batch_size * model.dim));
  }
  return out;
}

// Hands out triples in file order, checking shapes.
class TripleStore {
 public:
  TripleStore() = default;
  explicit TripleStore(TripleFile file) : file_(std::move(file)) {}

  BeaverTriple& next(const TripleShape& expected) {
    if (cursor_ >= file_.triples.size()) throw ProtocolError("Beaver triples exhausted");
    auto& t = file_.triples[cursor_];
    if (t.shape() != expected) throw ProtocolError("next triple has an unexpected shape");
    ++cursor_;
    return t;
  }

  std::size_t remaining() const { return file_.triples.size() - cursor_; }
  std::uint64_t seed() const { return file_.seed; }
  int party() const { return file_.party; }

  // Checks that the remaining triples cover a plan, in order.
  bool covers(const std::vector<TripleShape>& plan) const {
    if (remaining() < plan.size()) return false;
    for (std::size_t i = 0; i < plan.size(); ++i) {
      if (file_.triples[cursor_ + i].shape() != plan[i]) return false;
    }
    return true;
  }

 private:
  TripleFile file_;
  std::size_t cursor_ = 0;
};

}  // namespace ppsca::mpc
