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

#include <gtest/gtest.h>

#include <cmath>
#include <exception>
#include <thread>

#include "ppsca/mpc/beaver.hpp"
#include "ppsca/mpc/ring.hpp"
#include "ppsca/mpc/session.hpp"
#include "ppsca/mpc/wire.hpp"

namespace ppsca::mpc {
namespace {

constexpr double kUlp = 0x1.0p-16;

// Runs party 1 on a thread and party 0 inline over one in-memory pipe.
template <typename F0, typename F1>
auto run_pair(F0 party0, F1 party1) {
  auto [c0, c1] = MemoryPipe::make();
  decltype(party1(*c1)) r1{};
  std::exception_ptr e1;
  std::thread t([&] {
    try {
      r1 = party1(*c1);
    } catch (...) {
      e1 = std::current_exception();
      c1->close();
    }
  });
  decltype(party0(*c0)) r0{};
  try {
    r0 = party0(*c0);
  } catch (...) {
    c0->close();
    t.join();
    throw;
  }
  t.join();
  if (e1) std::rethrow_exception(e1);
  return std::pair{std::move(r0), std::move(r1)};
}

// Triple with chosen plaintext a, b, c split with fresh randomness.
std::pair<BeaverTriple, BeaverTriple> split_triple(const TripleShape& s, const RingVec& a, const RingVec& b,
                                                   const RingVec& c, Rng& rng) {
  auto [a0, a1] = share(a, rng);
  auto [b0, b1] = share(b, rng);
  auto [c0, c1] = share(c, rng);
  return {BeaverTriple(s, a0, b0, c0), BeaverTriple(s, a1, b1, c1)};
}

double grid_value(Rng& rng, double bound) {
  const auto lim = static_cast<std::int64_t>(bound / kUlp);
  return static_cast<double>(rng.range(-lim, lim)) * kUlp;
}

// ---------------------------------------------------------------------------
// Sharing

TEST(Share, Examples) {
  Rng rng(1);
  const auto [z0, z1] = share(Ring{0}, rng);
  EXPECT_EQ(z0 + z1, Ring{0});
  EXPECT_EQ(Ring{3} - Ring{10}, ~Ring{0} - 6);  // 2^64 - 7
  const auto [s0, s1] = share(Ring{3}, rng);
  EXPECT_EQ(s1, Ring{3} - s0);
  EXPECT_EQ(reconstruct(s0, s1), Ring{3});
}

TEST(Share, HundredThousandReconstructions) {
  Rng rng(2);
  std::set<Ring> first_shares;
  for (int i = 0; i < 100000; ++i) {
    const Ring x = rng.next();
    const auto [s0, s1] = share(x, rng);
    ASSERT_EQ(reconstruct(s0, s1), x);
    if (i < 1000) first_shares.insert(s0);
  }
  EXPECT_EQ(first_shares.size(), 1000u);
}

TEST(Share, EncodeDecode) {
  EXPECT_EQ(encode(1.5), Ring{98304});
  EXPECT_EQ(encode(-1.0), Ring{0} - 65536);
  EXPECT_DOUBLE_EQ(decode(encode(-2.25)), -2.25);
  EXPECT_DOUBLE_EQ(decode(encode(0.75, 8), 8), 0.75);
  EXPECT_THROW(encode(1e300), Error);
  EXPECT_THROW(encode(std::nan("")), Error);
}

TEST(AddShares, LocalAddition) {
  Rng rng(3);
  const auto [x0, x1] = share(Ring{7}, rng);
  const auto [o0, o1] = share(Ring{0}, rng);
  EXPECT_EQ(add_shares({x0, 0}, {o0, 0}).value + add_shares({x1, 1}, {o1, 1}).value, Ring{7});
  const auto [a0, a1] = share(Ring{3}, rng);
  const auto [b0, b1] = share(Ring{5}, rng);
  EXPECT_EQ(reconstruct(add_shares({a0, 0}, {b0, 0}).value, add_shares({a1, 1}, {b1, 1}).value), Ring{8});
  EXPECT_THROW(add_shares({1, 0}, {1, 1}), Error);

  RingVec x(5000), y(5000);
  for (auto& v : x) v = rng.next();
  for (auto& v : y) v = rng.next();
  auto [xs0, xs1] = share(x, rng);
  auto [ys0, ys1] = share(y, rng);
  EXPECT_EQ(reconstruct(add(xs0, ys0), add(xs1, ys1)), add(x, y));
  EXPECT_EQ(reconstruct(sub(xs0, ys0), sub(xs1, ys1)), sub(x, y));
}

// ---------------------------------------------------------------------------
// Beaver multiplication

TEST(BeaverMul, HandExample) {
  Rng rng(4);
  const auto s = TripleShape::elementwise(1);
  auto [t0, t1] = split_triple(s, {1}, {2}, {2}, rng);
  const auto [x0, x1] = share(Ring{3}, rng);
  const auto [y0, y1] = share(Ring{4}, rng);
  auto [z0, z1] = run_pair(
      [&](Channel& ch) {
        PartyContext ctx{0, &ch};
        return beaver_mul(ctx, x0, y0, t0);
      },
      [&](Channel& ch) {
        PartyContext ctx{1, &ch};
        return beaver_mul(ctx, x1, y1, t1);
      });
  EXPECT_EQ(z0 + z1, Ring{12});
  EXPECT_TRUE(t0.consumed());
  EXPECT_TRUE(t1.consumed());
}

TEST(BeaverMul, OneMessageEachWay) {
  auto [f0, f1] = dealer_generate(5, {TripleShape::elementwise(3)});
  auto [c0, c1] = MemoryPipe::make();
  RecordingChannel r0(*c0), r1(*c1);
  std::thread t([&] {
    PartyContext ctx{1, &r1};
    beaver_mul(ctx, RingVec{1, 2, 3}, RingVec{0, 0, 0}, f1.triples[0]);
  });
  PartyContext ctx{0, &r0};
  const auto z0 = beaver_mul(ctx, RingVec{0, 0, 0}, RingVec{0, 0, 0}, f0.triples[0]);
  t.join();
  ASSERT_EQ(r0.transcript().size(), 2u);
  ASSERT_EQ(r1.transcript().size(), 2u);
  EXPECT_EQ(r0.transcript()[0].direction, Direction::received);
  EXPECT_EQ(r1.transcript()[0].direction, Direction::sent);
  EXPECT_EQ(r0.transcript()[0].length, 48u);
  (void)z0;
}

TEST(BeaverMul, TenThousandScalarProducts) {
  const int n = 10000;
  std::vector<TripleShape> shapes(n, TripleShape::elementwise(1));
  auto [f0, f1] = dealer_generate(6, shapes);
  Rng rng(6);
  RingVec x(n), y(n), x0(n), x1(n), y0(n), y1(n);
  for (int i = 0; i < n; ++i) {
    x[i] = rng.next();
    y[i] = i % 50 == 0 ? 0 : rng.next();
    std::tie(x0[i], x1[i]) = share(x[i], rng);
    std::tie(y0[i], y1[i]) = share(y[i], rng);
  }
  auto [z0, z1] = run_pair(
      [&](Channel& ch) {
        PartyContext ctx{0, &ch};
        RingVec z(n);
        for (int i = 0; i < n; ++i) z[i] = beaver_mul(ctx, x0[i], y0[i], f0.triples[i]);
        return z;
      },
      [&](Channel& ch) {
        PartyContext ctx{1, &ch};
        RingVec z(n);
        for (int i = 0; i < n; ++i) z[i] = beaver_mul(ctx, x1[i], y1[i], f1.triples[i]);
        return z;
      });
  for (int i = 0; i < n; ++i) {
    ASSERT_EQ(z0[i] + z1[i], x[i] * y[i]) << i;
    if (y[i] == 0) { ASSERT_EQ(z0[i] + z1[i], Ring{0}); }
  }
}

TEST(BeaverMul, TripleReuseIsRejected) {
  BeaverTriple t(TripleShape::elementwise(1), {0}, {0}, {0});
  t.consume();
  try {
    t.consume();
    FAIL() << "second consume succeeded";
  } catch (const ProtocolError& e) {
    EXPECT_STREQ(e.what(), "Beaver triple reused");
  }
  auto [c0, c1] = MemoryPipe::make();
  PartyContext ctx{0, c0.get()};
  EXPECT_THROW(beaver_mul(ctx, Ring{1}, Ring{1}, t), ProtocolError);
}

TEST(BeaverMul, ShapeMismatch) {
  auto [c0, c1] = MemoryPipe::make();
  PartyContext ctx{0, c0.get()};
  BeaverTriple t(TripleShape::elementwise(2), {0, 0}, {0, 0}, {0, 0});
  EXPECT_THROW(beaver_mul(ctx, RingVec{1}, RingVec{1}, t), ProtocolError);
  EXPECT_FALSE(t.consumed());
}

// ---------------------------------------------------------------------------
// Truncation and fixed point

TEST(Truncate, Examples) {
  Rng rng(7);
  const Ring p = encode(1.5) * encode(2.0);
  const auto [s0, s1] = share(p, rng);
  EXPECT_NEAR(decode(truncate_share(s0, 0) + truncate_share(s1, 1)), 3.0, kUlp);
  const auto [z0, z1] = share(encode(0.0), rng);
  EXPECT_NEAR(decode(truncate_share(z0, 0) + truncate_share(z1, 1)), 0.0, kUlp);
}

TEST(Truncate, TenThousandProductsWithinTwoUlp) {
  Rng rng(8);
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    const double x = grid_value(rng, 8.0), y = grid_value(rng, 8.0);
    const auto [s0, s1] = share(encode(x) * encode(y), rng);
    const double got = decode(truncate_share(s0, 0) + truncate_share(s1, 1));
    worst = std::max(worst, std::abs(got - x * y));
  }
  EXPECT_LE(worst, 2 * kUlp);
}

TEST(FracBits, Range) {
  EXPECT_THROW(check_frac_bits(7), ConfigError);
  EXPECT_THROW(check_frac_bits(25), ConfigError);
  EXPECT_NO_THROW(check_frac_bits(8));
  EXPECT_NO_THROW(check_frac_bits(24));
}

// ---------------------------------------------------------------------------
// Private matmul and square

struct MatmulCase {
  std::size_t m, k, n;
  std::vector<double> x, w;
};

std::vector<double> real_matmul(const MatmulCase& c) {
  std::vector<double> out(c.m * c.n, 0.0);
  for (std::size_t i = 0; i < c.m; ++i)
    for (std::size_t p = 0; p < c.k; ++p)
      for (std::size_t j = 0; j < c.n; ++j) out[i * c.n + j] += c.x[i * c.k + p] * c.w[p * c.n + j];
  return out;
}

// X is split between both parties; W likewise.
std::vector<double> private_matmul_run(const MatmulCase& c, std::uint64_t seed) {
  Rng rng(seed);
  auto [f0, f1] = dealer_generate(seed, {TripleShape::matrix(c.m, c.k, c.n)});
  auto [x0, x1] = share(encode(c.x), rng);
  auto [w0, w1] = share(encode(c.w), rng);
  auto [z0, z1] = run_pair(
      [&](Channel& ch) {
        PartyContext ctx{0, &ch};
        return private_matmul(ctx, x0, w0, c.m, c.k, c.n, f0.triples[0]);
      },
      [&](Channel& ch) {
        PartyContext ctx{1, &ch};
        return private_matmul(ctx, x1, w1, c.m, c.k, c.n, f1.triples[0]);
      });
  return decode(reconstruct(z0, z1));
}

TEST(PrivateMatmul, IdentityAndZero) {
  Rng rng(9);
  MatmulCase id{4, 4, 4, {}, std::vector<double>(16, 0.0)};
  for (int i = 0; i < 4; ++i) id.w[i * 4 + i] = 1.0;
  for (int i = 0; i < 16; ++i) id.x.push_back(grid_value(rng, 100.0));
  const auto got = private_matmul_run(id, 10);
  for (int i = 0; i < 16; ++i) EXPECT_NEAR(got[i], id.x[i], kUlp);

  MatmulCase zero{3, 5, 2, std::vector<double>(15, 0.0), {}};
  for (int i = 0; i < 10; ++i) zero.w.push_back(grid_value(rng, 4.0));
  for (double v : private_matmul_run(zero, 11)) EXPECT_NEAR(v, 0.0, kUlp);
}

TEST(PrivateMatmul, RandomShapesAgainstRealOracle) {
  Rng rng(12);
  double worst = 0;
  for (int trial = 0; trial < 300; ++trial) {
    MatmulCase c;
    if (trial == 0) {
      c.m = 8, c.k = 16, c.n = 4;
    } else {
      c.m = rng.range(1, 8), c.k = rng.range(1, 24), c.n = rng.range(1, 8);
    }
    for (std::size_t i = 0; i < c.m * c.k; ++i) c.x.push_back(rng.uniform() * 4 - 2);
    for (std::size_t i = 0; i < c.k * c.n; ++i) c.w.push_back(rng.uniform() * 4 - 2);
    const auto got = private_matmul_run(c, 100 + trial);
    const auto want = real_matmul(c);
    for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
  }
  EXPECT_LE(worst, 0x1.0p-8);
}

TEST(PrivateMatmul, RejectsWrongTriple) {
  auto [c0, c1] = MemoryPipe::make();
  PartyContext ctx{0, c0.get()};
  auto [f0, f1] = dealer_generate(1, {TripleShape::matrix(2, 2, 2)});
  EXPECT_THROW(private_matmul(ctx, RingVec(6), RingVec(6), 2, 3, 2, f0.triples[0]), ProtocolError);
}

std::vector<double> private_square_run(const std::vector<double>& x, std::uint64_t seed) {
  Rng rng(seed);
  auto [f0, f1] = dealer_generate(seed, {TripleShape::elementwise(x.size())});
  auto [x0, x1] = share(encode(x), rng);
  auto [z0, z1] = run_pair(
      [&](Channel& ch) {
        PartyContext ctx{0, &ch};
        return private_square(ctx, x0, f0.triples[0]);
      },
      [&](Channel& ch) {
        PartyContext ctx{1, &ch};
        return private_square(ctx, x1, f1.triples[0]);
      });
  return decode(reconstruct(z0, z1));
}

TEST(PrivateSquare, ExamplesAndOracle) {
  const auto ex = private_square_run({1.5, 0.0}, 13);
  EXPECT_NEAR(ex[0], 2.25, 0x1.0p-15);
  EXPECT_NEAR(ex[1], 0.0, 0x1.0p-15);
  Rng rng(14);
  std::vector<double> x(2000);
  for (auto& v : x) v = rng.uniform() * 16 - 8;
  const auto got = private_square_run(x, 15);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(got[i], x[i] * x[i], 0x1.0p-8);
}

// ---------------------------------------------------------------------------
// Dealer and triple files

TEST(Dealer, TriplesAreProducts) {
  const std::vector<TripleShape> shapes = {TripleShape::elementwise(50), TripleShape::matrix(3, 7, 5),
                                           TripleShape::matrix(1, 1, 1), TripleShape::elementwise(1)};
  auto [f0, f1] = dealer_generate(42, shapes);
  EXPECT_EQ(f0.party, 0);
  EXPECT_EQ(f1.party, 1);
  EXPECT_EQ(f0.shapes(), shapes);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto& s = shapes[i];
    const auto a = reconstruct(f0.triples[i].a(), f1.triples[i].a());
    const auto b = reconstruct(f0.triples[i].b(), f1.triples[i].b());
    const auto c = reconstruct(f0.triples[i].c(), f1.triples[i].c());
    if (s.kind == TripleKind::elementwise) {
      for (std::size_t j = 0; j < s.m; ++j) EXPECT_EQ(c[j], a[j] * b[j]);
    } else {
      EXPECT_EQ(c, matmul(a, b, s.m, s.k, s.n));
    }
    EXPECT_NE(f0.triples[i].a(), a);
  }
}

TEST(Dealer, DeterministicAndValidated) {
  const std::vector<TripleShape> shapes = {TripleShape::matrix(2, 3, 4)};
  EXPECT_EQ(dealer_generate(1, shapes).first.serialize(), dealer_generate(1, shapes).first.serialize());
  EXPECT_EQ(dealer_generate(1, shapes).second.serialize(), dealer_generate(1, shapes).second.serialize());
  EXPECT_NE(dealer_generate(1, shapes).first.serialize(), dealer_generate(2, shapes).first.serialize());
  EXPECT_THROW(dealer_generate(1, {}), ConfigError);
}

TEST(Dealer, ConsumptionPlan) {
  ModelRef m;
  const auto p = consumption_plan(m, 100, 32);
  ASSERT_EQ(p.size(), 4u);
  for (const auto& s : p) EXPECT_EQ(s, TripleShape::matrix(32, 4096, 128));
  m.activation = Activation::square;
  const auto q = consumption_plan(m, 100, 32);
  ASSERT_EQ(q.size(), 8u);
  EXPECT_EQ(q[1], TripleShape::elementwise(32 * 128));
  EXPECT_TRUE(consumption_plan(m, 0, 8).empty());
  EXPECT_THROW(consumption_plan(m, 1, 0), ConfigError);
}

TEST(TripleFileFormat, RoundTripAndCorruption) {
  auto [f0, f1] = dealer_generate(3, {TripleShape::elementwise(4), TripleShape::matrix(2, 2, 3)});
  const auto bytes = f1.serialize();
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 8), "PPSTRPL1");
  const auto back = TripleFile::deserialize(bytes);
  EXPECT_EQ(back.seed, 3u);
  EXPECT_EQ(back.party, 1);
  ASSERT_EQ(back.triples.size(), 2u);
  EXPECT_EQ(back.triples[0], f1.triples[0]);
  EXPECT_EQ(back.triples[1], f1.triples[1]);
  EXPECT_EQ(back.serialize(), bytes);
  for (std::size_t cut = 0; cut < bytes.size(); cut += 7) {
    EXPECT_THROW(TripleFile::deserialize(std::span(bytes.data(), cut)), FormatError) << cut;
  }
  auto bad = bytes;
  bad[20] = 2;  // party byte
  EXPECT_THROW(TripleFile::deserialize(bad), FormatError);
  bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(TripleFile::deserialize(bad), FormatError);
}

TEST(TripleStoreTest, OrderAndExhaustion) {
  auto [f0, f1] = dealer_generate(3, {TripleShape::elementwise(4), TripleShape::matrix(2, 2, 3)});
  TripleStore store(f0);
  EXPECT_TRUE(store.covers({TripleShape::elementwise(4), TripleShape::matrix(2, 2, 3)}));
  EXPECT_FALSE(store.covers({TripleShape::matrix(2, 2, 3)}));
  EXPECT_THROW(store.next(TripleShape::elementwise(5)), ProtocolError);
  store.next(TripleShape::elementwise(4));
  store.next(TripleShape::matrix(2, 2, 3));
  EXPECT_EQ(store.remaining(), 0u);
  EXPECT_THROW(store.next(TripleShape::elementwise(4)), ProtocolError);
}

// ---------------------------------------------------------------------------
// Wire framing

TEST(Wire, FrameHeader) {
  const auto h = encode_frame_header(MsgType::result_share, 1024);
  ASSERT_EQ(h.size(), kFrameHeader);
  EXPECT_EQ(std::string(h.begin(), h.begin() + 4), "PPS1");
  EXPECT_EQ(h[4], 4);
  EXPECT_EQ(h[5], 0);
  EXPECT_EQ(h[6], 4);  // 1024 little-endian
  const auto [t, n] = decode_frame_header(h);
  EXPECT_EQ(t, MsgType::result_share);
  EXPECT_EQ(n, 1024u);
  auto bad = h;
  bad[0] = 'Q';
  EXPECT_THROW(decode_frame_header(bad), FormatError);
  bad = h;
  bad[4] = 99;
  EXPECT_THROW(decode_frame_header(bad), ProtocolError);
  EXPECT_THROW(decode_frame_header(encode_frame_header(MsgType::hello, kMaxPayload + 1)), ProtocolError);
}

TEST(Wire, AbortBecomesError) {
  auto [a, b] = MemoryPipe::make();
  a->send(MsgType::abort, text_payload("bye now"));
  try {
    b->expect(MsgType::hello);
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("bye now"), std::string::npos);
  }
  a->send(MsgType::bye);
  EXPECT_THROW(b->expect(MsgType::hello), ProtocolError);
  a->close();
  EXPECT_THROW(b->recv(), ProtocolError);
}

// ---------------------------------------------------------------------------
// Embedding sessions

struct Model {
  ModelWeights w;
  RingVec encoded;
  explicit Model(Activation act, std::uint64_t seed = 7) {
    ModelRef r;
    r.seed = seed;
    r.activation = act;
    w = ModelWeights::generate(r);
    encoded = encode_weights(w);
  }
};

const Model& model(Activation act) {
  static const Model id(Activation::identity), sq(Activation::square);
  return act == Activation::square ? sq : id;
}

// Records every byte one side writes.
class CapturingChannel : public Channel {
 public:
  explicit CapturingChannel(Channel& inner) : inner_(&inner) {}
  void write_bytes(std::span<const std::uint8_t> b) override {
    bytes.insert(bytes.end(), b.begin(), b.end());
    inner_->write_bytes(b);
  }
  void read_bytes(std::uint8_t* dst, std::size_t n) override { inner_->read_bytes(dst, n); }
  void close() override { inner_->close(); }
  std::vector<std::uint8_t> bytes;

 private:
  Channel* inner_;
};

struct SessionResult {
  std::vector<EmbeddingVector> out;
  SessionTranscript client, server;
  std::vector<std::uint8_t> server_bytes;
};

SessionResult session(const Model& m, const std::vector<std::vector<std::string>>& tokens, std::size_t batch,
                      std::uint64_t seed, int f = kFracBits) {
  auto [t0, t1] = dealer_generate(seed, consumption_plan(m.w.ref(), tokens.size(), batch));
  SessionResult res;
  const RingVec enc = f == kFracBits ? RingVec{} : encode_weights(m.w, f);
  const RingVec& w_enc = f == kFracBits ? m.encoded : enc;
  auto [client_out, server_ok] = run_pair(
      [&](Channel& ch) {
        RecordingChannel rec(ch);
        TripleStore store(std::move(t0));
        auto out = mpc_embed_client(rec, m.w.ref(), tokens, store, batch, f);
        EXPECT_EQ(store.remaining(), 0u);
        res.client = rec.transcript();
        return out;
      },
      [&](Channel& ch) {
        CapturingChannel cap(ch);
        RecordingChannel rec(cap);
        mpc_embed_server(rec, m.w, w_enc, [&](const Hello&) { return TripleStore(std::move(t1)); }, std::nullopt, f);
        res.server = rec.transcript();
        res.server_bytes = cap.bytes;
        return true;
      });
  EXPECT_TRUE(server_ok);
  res.out = std::move(client_out);
  return res;
}

std::vector<std::vector<std::string>> random_token_lists(Rng& rng, std::size_t n) {
  static const std::vector<std::string> vocab = {"int", "if", "(", ")", "{", "}", "return", "x", "y", "+", "*",
                                                 "for", "while", ";", "=", "0", "1", "buf", "len", "->"};
  std::vector<std::vector<std::string>> out(n);
  for (auto& t : out) {
    const auto len = rng.range(5, 120);
    for (int i = 0; i < len; ++i) t.push_back(rng.pick(vocab) + (rng.chance(0.3) ? std::to_string(rng.below(40)) : ""));
  }
  return out;
}

class SessionByActivation : public ::testing::TestWithParam<Activation> {};

TEST_P(SessionByActivation, MatchesPlaintextEmbedding) {
  const auto& m = model(GetParam());
  Rng rng(20);
  const auto tokens = random_token_lists(rng, 11);
  const auto res = session(m, tokens, 4, 21);
  ASSERT_EQ(res.out.size(), tokens.size());
  double worst = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto want = embed_plain(tokens[i], m.w);
    for (std::size_t d = 0; d < want.dim(); ++d) worst = std::max(worst, std::abs(res.out[i].values[d] - want.values[d]));
  }
  EXPECT_LE(worst, 0x1.0p-8);
}

TEST_P(SessionByActivation, TranscriptsAreMirrorImages) {
  const auto& m = model(GetParam());
  Rng rng(22);
  const auto res = session(m, random_token_lists(rng, 5), 2, 23);
  ASSERT_EQ(res.client.size(), res.server.size());
  for (std::size_t i = 0; i < res.client.size(); ++i) {
    EXPECT_NE(res.client[i].direction, res.server[i].direction);
    EXPECT_EQ(res.client[i].type, res.server[i].type);
    EXPECT_EQ(res.client[i].length, res.server[i].length);
  }
  const std::size_t per_batch = GetParam() == Activation::square ? 6 : 4;
  EXPECT_EQ(res.server.size(), 2 + 3 * per_batch + 1);
}

INSTANTIATE_TEST_SUITE_P(Activations, SessionByActivation,
                         ::testing::Values(Activation::identity, Activation::square),
                         [](const auto& info) { return to_string(info.param); });

TEST(Session, ServerViewDependsOnlyOnShape) {
  const auto& m = model(Activation::square);
  Rng rng(30);
  const auto a = session(m, random_token_lists(rng, 6), 3, 31);
  const auto b = session(m, random_token_lists(rng, 6), 3, 32);
  EXPECT_EQ(a.server, b.server);
  EXPECT_NE(a.server_bytes, b.server_bytes);
  const auto c = session(m, random_token_lists(rng, 7), 3, 33);
  EXPECT_NE(a.server, c.server);
}

TEST(Session, SameSeedsGiveIdenticalBytes) {
  const auto& m = model(Activation::identity);
  Rng r1(40), r2(40);
  const auto a = session(m, random_token_lists(r1, 4), 2, 41);
  const auto b = session(m, random_token_lists(r2, 4), 2, 41);
  EXPECT_EQ(a.server_bytes, b.server_bytes);
}

TEST(Session, OtherFractionBits) {
  const auto& m = model(Activation::identity);
  Rng rng(50);
  const auto tokens = random_token_lists(rng, 3);
  const auto res = session(m, tokens, 3, 51, 20);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto want = embed_plain(tokens[i], m.w);
    for (std::size_t d = 0; d < want.dim(); ++d) EXPECT_NEAR(res.out[i].values[d], want.values[d], 0x1.0p-8);
  }
}

TEST(Session, EmptyInputRejectedBeforeAnyMessage) {
  const auto& m = model(Activation::identity);
  auto [c0, c1] = MemoryPipe::make();
  RecordingChannel rec(*c0);
  auto [t0, t1] = dealer_generate(1, consumption_plan(m.w.ref(), 2, 2));
  TripleStore store(t0);
  EXPECT_THROW(mpc_embed_client(rec, m.w.ref(), {{"x"}, {}}, store, 2), Error);
  EXPECT_TRUE(rec.transcript().empty());
  EXPECT_EQ(store.remaining(), 1u);
}

TEST(Session, ClientTriplesMustCoverSession) {
  const auto& m = model(Activation::identity);
  auto [c0, c1] = MemoryPipe::make();
  RecordingChannel rec(*c0);
  auto [t0, t1] = dealer_generate(1, consumption_plan(m.w.ref(), 2, 2));
  TripleStore store(t0);
  EXPECT_THROW(mpc_embed_client(rec, m.w.ref(), {{"a"}, {"b"}, {"c"}}, store, 2), ProtocolError);
  EXPECT_TRUE(rec.transcript().empty());
}

// Server side of an aborted session; returns the server's error text.
std::string server_failure(const Model& m, const std::function<void(Channel&)>& client,
                           const TripleProvider& provider, int f = kFracBits) {
  std::string server_error;
  EXPECT_THROW(run_pair(
                   [&](Channel& ch) {
                     client(ch);
                     return true;
                   },
                   [&](Channel& ch) {
                     try {
                       mpc_embed_server(ch, m.w, m.encoded, provider, std::nullopt, f);
                     } catch (const ProtocolError& e) {
                       server_error = e.what();
                       throw;
                     }
                     return true;
                   }),
               ProtocolError);
  return server_error;
}

TEST(SessionAbort, VersionMismatch) {
  const auto& m = model(Activation::identity);
  const auto err = server_failure(
      m,
      [&](Channel& ch) {
        Hello h;
        h.version = 2;
        h.vocab = m.w.vocab();
        h.dim = m.w.dim();
        h.batch_size = 1;
        h.batches = 1;
        ch.send(MsgType::hello, h.serialize());
        ch.expect(MsgType::hello);
      },
      [](const Hello&) -> TripleStore { throw Error("unused"); });
  EXPECT_EQ(err, "protocol version mismatch");
}

TEST(SessionAbort, FractionBitsMismatch) {
  const auto& m = model(Activation::identity);
  auto [t0, t1] = dealer_generate(1, consumption_plan(m.w.ref(), 1, 1));
  const auto err = server_failure(
      m,
      [&](Channel& ch) {
        TripleStore store(t0);
        mpc_embed_client(ch, m.w.ref(), {{"int", "x"}}, store, 1, 12);
      },
      [&](const Hello&) { return TripleStore(t1); });
  EXPECT_EQ(err, "model shape mismatch");
}

TEST(SessionAbort, ServerTriplesExhausted) {
  const auto& m = model(Activation::identity);
  auto [t0, t1] = dealer_generate(1, consumption_plan(m.w.ref(), 4, 2));
  auto [s0, s1] = dealer_generate(1, consumption_plan(m.w.ref(), 2, 2));
  const auto err = server_failure(
      m,
      [&](Channel& ch) {
        TripleStore store(t0);
        mpc_embed_client(ch, m.w.ref(), {{"a"}, {"b"}, {"c"}, {"d"}}, store, 2);
      },
      [&](const Hello&) { return TripleStore(s1); });
  EXPECT_EQ(err, "server triples do not cover this session");
}

TEST(SessionAbort, ConnectionLoss) {
  const auto& m = model(Activation::identity);
  auto [t0, t1] = dealer_generate(1, consumption_plan(m.w.ref(), 2, 1));
  const auto err = server_failure(
      m,
      [&](Channel& ch) {
        Hello h;
        h.vocab = m.w.vocab();
        h.dim = m.w.dim();
        h.batch_size = 1;
        h.batches = 2;
        h.dealer_seed = 1;
        ch.send(MsgType::hello, h.serialize());
        ch.expect(MsgType::hello);
        ch.close();
        throw ProtocolError("client hung up");
      },
      [&](const Hello&) { return TripleStore(t1); });
  EXPECT_EQ(err, "channel closed");
}

TEST(SessionAbort, GarbledHello) {
  const auto& m = model(Activation::identity);
  const auto err = server_failure(
      m,
      [&](Channel& ch) {
        ch.send(MsgType::hello, {1, 2, 3});
        ch.expect(MsgType::hello);
      },
      [](const Hello&) -> TripleStore { throw Error("unused"); });
  EXPECT_FALSE(err.empty());
}

TEST(HelloTest, RoundTrip) {
  Hello h;
  h.vocab = 4096;
  h.dim = 128;
  h.batch_size = 32;
  h.batches = 9;
  h.activation = Activation::square;
  h.dealer_seed = 77;
  EXPECT_EQ(Hello::parse(h.serialize()), h);
  auto bytes = h.serialize();
  bytes.push_back(0);
  EXPECT_THROW(Hello::parse(bytes), ProtocolError);
}

}  // namespace
}  // namespace ppsca::mpc
