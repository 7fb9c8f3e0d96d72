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

// Private embedding session. The client holds the feature vectors X, the
// server holds the projection W; each input is trivially shared (the other
// party's share is zero) and all mixing happens inside the Beaver openings.
//
//   C: HELLO            S: HELLO
//   per batch:
//   C: BATCH_HEADER     S: EPS_DELTA_OPEN   C: EPS_DELTA_OPEN
//   [square:            S: EPS_DELTA_OPEN   C: EPS_DELTA_OPEN]
//                       S: RESULT_SHARE
//   C: BYE
//
// Batches are zero-padded to a fixed row count so every message length
// depends only on public shapes.

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ppsca/embedding.hpp"
#include "ppsca/mpc/beaver.hpp"
#include "ppsca/mpc/ring.hpp"
#include "ppsca/mpc/wire.hpp"

namespace ppsca::mpc {

inline constexpr std::uint32_t kProtocolVersion = 1;

struct Hello {
  std::uint32_t version = kProtocolVersion;
  std::uint32_t vocab = 0;
  std::uint32_t dim = 0;
  std::uint32_t frac_bits = kFracBits;
  std::uint32_t batch_size = 0;
  std::uint64_t batches = 0;
  Activation activation = Activation::identity;
  std::uint64_t dealer_seed = 0;

  std::vector<std::uint8_t> serialize() const {
    ByteWriter w;
    w.u32(version);
    w.u32(vocab);
    w.u32(dim);
    w.u32(frac_bits);
    w.u32(batch_size);
    w.u64(batches);
    w.u8(static_cast<std::uint8_t>(activation));
    w.u64(dealer_seed);
    return w.take();
  }

  static Hello parse(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes, "hello");
    Hello h;
    h.version = r.u32();
    h.vocab = r.u32();
    h.dim = r.u32();
    h.frac_bits = r.u32();
    h.batch_size = r.u32();
    h.batches = r.u64();
    const auto act = r.u8();
    if (act > 1) throw ProtocolError("hello: unknown activation");
    h.activation = static_cast<Activation>(act);
    h.dealer_seed = r.u64();
    if (!r.done()) throw ProtocolError("hello: trailing bytes");
    return h;
  }

  friend bool operator==(const Hello&, const Hello&) = default;
};

inline std::vector<std::uint8_t> text_payload(std::string_view s) { return {s.begin(), s.end()}; }

// Tells the peer why the session ends, then throws.
[[noreturn]] inline void abort_session(Channel& ch, const std::string& why) {
  try {
    ch.send(MsgType::abort, text_payload(why));
  } catch (const std::exception&) {
  }
  throw ProtocolError(why);
}

// Fractional bits must leave headroom in 64 bits for products and sums.
inline void check_frac_bits(int f) {
  if (f < 8 || f > 24) throw ConfigError("fixed-point fraction bits must be in [8, 24]");
}

// Feature vectors for the client side; rejects inputs that would embed to
// zero before anything is sent.
inline std::vector<std::vector<double>> client_features(const std::vector<std::vector<std::string>>& tokens,
                                                        std::uint32_t vocab) {
  std::vector<std::vector<double>> out;
  for (const auto& t : tokens) {
    if (t.empty()) throw Error("cannot embed an empty token sequence");
    auto x = feature_vector(t, vocab);
    if (is_zero_vector(x)) throw Error("feature vector is zero");
    out.push_back(std::move(x));
  }
  return out;
}

// Client party. Returns L2-normalized embeddings, one per token list.
inline std::vector<EmbeddingVector> mpc_embed_client(Channel& ch, const ModelRef& model,
                                                     const std::vector<std::vector<std::string>>& tokens,
                                                     TripleStore& triples, std::size_t batch_size,
                                                     int frac_bits = kFracBits) {
  const auto features = client_features(tokens, model.vocab);
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  check_frac_bits(frac_bits);
  Hello hello;
  hello.frac_bits = static_cast<std::uint32_t>(frac_bits);
  hello.vocab = model.vocab;
  hello.dim = model.dim;
  hello.batch_size = static_cast<std::uint32_t>(batch_size);
  hello.batches = (features.size() + batch_size - 1) / batch_size;
  hello.activation = model.activation;
  hello.dealer_seed = triples.seed();
  if (!triples.covers(consumption_plan(model, features.size(), batch_size))) {
    throw ProtocolError("client triples do not cover this session");
  }

  ch.send(MsgType::hello, hello.serialize());
  const auto reply = Hello::parse(ch.expect(MsgType::hello).payload);
  if (reply != hello) throw ProtocolError("server disagrees on session parameters");

  PartyContext ctx{0, &ch};
  const std::size_t V = model.vocab, D = model.dim, B = batch_size;
  const RingVec zero_w(V * D, 0);
  std::vector<EmbeddingVector> out;
  for (std::uint64_t b = 0; b < hello.batches; ++b) {
    ByteWriter hw;
    hw.u64(b);
    hw.u64(B);
    ch.send(MsgType::batch_header, hw.take());

    RingVec x(B * V, 0);
    const std::size_t first = b * B;
    const std::size_t rows = std::min(B, features.size() - first);
    for (std::size_t r = 0; r < rows; ++r) {
      const auto& f = features[first + r];
      for (std::size_t c = 0; c < V; ++c) x[r * V + c] = encode(f[c], frac_bits);
    }
    auto z = private_matmul(ctx, x, zero_w, B, V, D, triples.next(TripleShape::matrix(B, V, D)), true, frac_bits);
    if (model.activation == Activation::square) {
      z = private_square(ctx, z, triples.next(TripleShape::elementwise(B * D)), frac_bits);
    }
    const auto res = ch.expect(MsgType::result_share);
    if (res.payload.size() != B * D * 8) throw ProtocolError("result share has the wrong length");
    ByteReader rr(res.payload, "result share");
    const auto y = decode(reconstruct(z, get_ring(rr, B * D)), frac_bits);
    for (std::size_t r = 0; r < rows; ++r) {
      out.push_back(l2_normalize(std::vector<double>(y.begin() + static_cast<std::ptrdiff_t>(r * D),
                                                     y.begin() + static_cast<std::ptrdiff_t>((r + 1) * D))));
    }
  }
  ch.send(MsgType::bye);
  return out;
}

// Produces the server's triple store for a session, or throws.
using TripleProvider = std::function<TripleStore(const Hello&)>;

// W as V x D ring matrix (the transpose of the D x V projection).
inline RingVec encode_weights(const ModelWeights& w, int frac_bits = kFracBits) {
  const std::size_t V = w.vocab(), D = w.dim();
  RingVec out(V * D);
  for (std::size_t d = 0; d < D; ++d) {
    for (std::size_t v = 0; v < V; ++v) out[v * D + d] = encode(static_cast<double>(w.at(d, v)), frac_bits);
  }
  return out;
}

// Server party. `first` is the already-received HELLO when the caller
// dispatched on it. Aborts the peer on any error.
inline void mpc_embed_server(Channel& ch, const ModelWeights& weights, const RingVec& encoded_w,
                             const TripleProvider& provider, std::optional<Frame> first = std::nullopt,
                             int frac_bits = kFracBits) {
  auto fail = [&](const std::string& why) { abort_session(ch, why); };
  Frame hf = first ? std::move(*first) : ch.recv();
  if (hf.type != MsgType::hello) fail("expected HELLO");
  Hello hello;
  try {
    hello = Hello::parse(hf.payload);
  } catch (const std::exception& e) {
    abort_session(ch, e.what());
  }
  if (hello.version != kProtocolVersion) fail("protocol version mismatch");
  if (hello.vocab != weights.vocab() || hello.dim != weights.dim() || hello.frac_bits != static_cast<std::uint32_t>(frac_bits) ||
      hello.activation != weights.activation()) {
    fail("model shape mismatch");
  }
  if (hello.batch_size == 0 || hello.batch_size > 4096) fail("unsupported batch size");
  TripleStore triples;
  try {
    triples = provider(hello);
  } catch (const std::exception& e) {
    abort_session(ch, std::string("triples unavailable: ") + e.what());
  }
  const std::size_t V = hello.vocab, D = hello.dim, B = hello.batch_size;
  if (!triples.covers(consumption_plan(weights.ref(), hello.batches * B, B))) fail("server triples do not cover this session");
  ch.send(MsgType::hello, hello.serialize());

  PartyContext ctx{1, &ch};
  const RingVec zero_x(B * V, 0);
  for (std::uint64_t b = 0; b < hello.batches; ++b) {
    const auto h = ch.expect(MsgType::batch_header);
    ByteReader hr(h.payload, "batch header");
    if (hr.u64() != b || hr.u64() != B) fail("unexpected batch header");
    auto z = private_matmul(ctx, zero_x, encoded_w, B, V, D, triples.next(TripleShape::matrix(B, V, D)), true,
                            frac_bits);
    if (weights.activation() == Activation::square) {
      z = private_square(ctx, z, triples.next(TripleShape::elementwise(B * D)), frac_bits);
    }
    ByteWriter w;
    put_ring(w, z);
    ch.send(MsgType::result_share, w.take());
  }
  ch.expect(MsgType::bye);
}

}  // namespace ppsca::mpc
