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

// Seeded feature-hashing embedding model.
//
// tokens -> signed hashed count vector x (dimension V)
//        -> y = P x with a seeded Gaussian projection P (D x V)
//        -> activation (identity or elementwise square)
//        -> L2 normalization
//
// Everything before normalization is a matmul plus an optional square, so
// the same model can be evaluated under additive secret sharing.

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ppsca/common.hpp"

namespace ppsca {

namespace embedding_detail {

inline bool is_operator_char(char c) {
  switch (c) {
    case '+': case '-': case '*': case '/': case '%': case '=': case '<':
    case '>': case '!': case '&': case '|': case '^': case '~': case '?':
      return true;
    default:
      return false;
  }
}

}  // namespace embedding_detail

// Splits on non-identifier characters and lowercases. Operator characters
// survive as single-character tokens; other punctuation is dropped.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char c : text) {
    const bool ident = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                       (c >= '0' && c <= '9') || c == '_';
    if (ident) {
      cur.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
      continue;
    }
    flush();
    if (embedding_detail::is_operator_char(c)) out.emplace_back(1, c);
  }
  flush();
  return out;
}

enum class Activation : std::uint8_t { identity = 0, square = 1 };

inline std::string to_string(Activation a) {
  return a == Activation::square ? "square" : "identity";
}

inline Activation parse_activation(std::string_view s) {
  if (s == "identity") return Activation::identity;
  if (s == "square") return Activation::square;
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

// Identity of a model without its matrix; safe to hand to clients.
struct ModelRef {
  std::uint64_t seed = 0;
  std::uint32_t dim = 128;
  std::uint32_t vocab = 4096;
  Activation activation = Activation::identity;

  friend bool operator==(const ModelRef&, const ModelRef&) = default;
};

class ModelWeights {
 public:
  static constexpr std::string_view kMagic = "PPSCAMDL";
  static constexpr std::uint32_t kVersion = 1;

  ModelWeights() = default;

  // Entries are standard normal draws from the seed, stored as float32.
  static ModelWeights generate(const ModelRef& ref) {
    if (ref.dim == 0 || ref.vocab == 0) throw ConfigError("model dimensions must be positive");
    ModelWeights w;
    w.ref_ = ref;
    w.projection_.resize(static_cast<std::size_t>(ref.dim) * ref.vocab);
    Rng rng(mix64(ref.seed ^ 0x6d6f64656cull));
    for (auto& v : w.projection_) v = static_cast<float>(rng.normal());
    return w;
  }

  const ModelRef& ref() const { return ref_; }
  std::uint32_t dim() const { return ref_.dim; }
  std::uint32_t vocab() const { return ref_.vocab; }
  Activation activation() const { return ref_.activation; }

  // Row-major D x V.
  float at(std::size_t row, std::size_t col) const { return projection_[row * ref_.vocab + col]; }
  const std::vector<float>& projection() const { return projection_; }

  std::vector<std::uint8_t> serialize() const {
    ByteWriter w;
    w.magic(kMagic);
    w.u32(kVersion);
    w.u64(ref_.seed);
    w.u32(ref_.dim);
    w.u32(ref_.vocab);
    w.u8(static_cast<std::uint8_t>(ref_.activation));
    for (float v : projection_) w.f32(v);
    return w.take();
  }

  static ModelWeights deserialize(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes, "model file");
    r.expect_magic(kMagic);
    if (const auto v = r.u32(); v != kVersion) {
      throw FormatError("model file: unsupported version " + std::to_string(v));
    }
    ModelWeights w;
    w.ref_.seed = r.u64();
    w.ref_.dim = r.u32();
    w.ref_.vocab = r.u32();
    const auto act = r.u8();
    if (act > 1) throw FormatError("model file: unknown activation byte");
    w.ref_.activation = static_cast<Activation>(act);
    const std::size_t n = static_cast<std::size_t>(w.ref_.dim) * w.ref_.vocab;
    if (r.remaining() != n * 4) throw FormatError("model file: matrix size mismatch");
    w.projection_.resize(n);
    for (auto& v : w.projection_) v = r.f32();
    return w;
  }

  friend bool operator==(const ModelWeights&, const ModelWeights&) = default;

 private:
  ModelRef ref_;
  std::vector<float> projection_;
};

// Signed feature hashing: bucket = h mod V, sign from bit 32 of h.
inline std::vector<double> feature_vector(const std::vector<std::string>& tokens,
                                          std::uint32_t vocab) {
  std::vector<double> x(vocab, 0.0);
  for (const auto& t : tokens) {
    const auto h = fnv1a64(t);
    x[h % vocab] += ((h >> 32) & 1) ? -1.0 : 1.0;
  }
  return x;
}

inline bool is_zero_vector(const std::vector<double>& x) {
  for (double v : x) {
    if (v != 0.0) return false;
  }
  return true;
}

// False for token lists whose hashed features cancel out (or are empty).
inline bool embeddable(const std::vector<std::string>& tokens, std::uint32_t vocab) {
  return !tokens.empty() && !is_zero_vector(feature_vector(tokens, vocab));
}

struct EmbeddingVector {
  std::vector<double> values;
  double norm = 0.0;

  EmbeddingVector() = default;
  explicit EmbeddingVector(std::vector<double> v) : values(std::move(v)) {
    double s = 0.0;
    for (double x : values) s += x * x;
    norm = std::sqrt(s);
  }

  std::size_t dim() const { return values.size(); }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

// Scales to unit length; throws on the zero vector.
inline EmbeddingVector l2_normalize(std::vector<double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  if (!(s > 0.0) || !std::isfinite(s)) throw Error("cannot normalize a zero embedding");
  const double inv = 1.0 / std::sqrt(s);
  for (auto& x : v) x *= inv;
  return EmbeddingVector(std::move(v));
}

// Pre-normalization model output for one feature vector.
inline std::vector<double> project(const std::vector<double>& x, const ModelWeights& w) {
  std::vector<double> y(w.dim(), 0.0);
  for (std::size_t col = 0; col < x.size(); ++col) {
    if (x[col] == 0.0) continue;
    for (std::size_t row = 0; row < w.dim(); ++row) {
      y[row] += static_cast<double>(w.at(row, col)) * x[col];
    }
  }
  if (w.activation() == Activation::square) {
    for (auto& v : y) v *= v;
  }
  return y;
}

inline EmbeddingVector embed_plain(const std::vector<std::string>& tokens,
                                   const ModelWeights& w) {
  if (tokens.empty()) throw Error("cannot embed an empty token sequence");
  const auto x = feature_vector(tokens, w.vocab());
  if (is_zero_vector(x)) throw Error("feature vector is zero");
  return l2_normalize(project(x, w));
}

inline double embedding_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw Error("embedding dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                std::to_string(b.dim()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const double d = a.values[i] - b.values[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace ppsca
