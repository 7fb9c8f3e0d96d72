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

#include <algorithm>
#include <cstddef>
#include <queue>
#include <set>
#include <vector>

#include "ppsca/common.hpp"
#include "ppsca/embedding.hpp"
#include "ppsca/tlsh.hpp"

namespace ppsca {

struct TlshMetric {
  using Signature = TlshDigest;
  using Distance = int;
  static Distance distance(const TlshDigest& a, const TlshDigest& b) { return tlsh_distance(a, b); }
  static void check(const TlshDigest&, const TlshDigest&) {}
};

struct EuclideanMetric {
  using Signature = EmbeddingVector;
  using Distance = double;
  static Distance distance(const EmbeddingVector& a, const EmbeddingVector& b) {
    return embedding_distance(a, b);
  }
  static void check(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) throw Error("index query dimension mismatch");
  }
};

enum class SearchMode { exact, approximate };

template <typename D>
struct Neighbor {
  std::size_t ref;  // caller-supplied reference, also the tie-break key
  D distance;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

// Radius and k-NN search over one signature kind. Results are sorted by
// distance, ties by ascending ref; callers assign refs in (project, fid)
// order so ties resolve lexicographically.
//
// Exact mode is brute force. Approximate mode walks a navigable
// small-world graph built at construction time.
template <typename Metric>
class VectorIndex {
 public:
  using Sig = typename Metric::Signature;
  using Dist = typename Metric::Distance;
  using Result = std::vector<Neighbor<Dist>>;

  struct Options {
    SearchMode mode = SearchMode::exact;
    std::size_t max_degree = 16;
    std::size_t ef_construction = 64;
    std::size_t ef_search = 96;
    std::uint64_t seed = 7;
  };

  VectorIndex() = default;

  VectorIndex(std::vector<Sig> sigs, std::vector<std::size_t> refs, Options opts = {})
      : sigs_(std::move(sigs)), refs_(std::move(refs)), opts_(opts) {
    if (sigs_.size() != refs_.size()) throw Error("index: signature/ref count mismatch");
    if (opts_.mode == SearchMode::approximate) build_graph();
  }

  std::size_t size() const { return sigs_.size(); }
  SearchMode mode() const { return opts_.mode; }

  // Entries with distance <= radius (or < radius when !inclusive).
  Result radius(const Sig& q, Dist r, bool inclusive = true) const {
    auto keep = [&](Dist d) { return inclusive ? d <= r : d < r; };
    Result out;
    if (sigs_.empty()) return out;
    Metric::check(q, sigs_.front());
    if (opts_.mode == SearchMode::exact) {
      for (std::size_t i = 0; i < sigs_.size(); ++i) {
        const Dist d = Metric::distance(q, sigs_[i]);
        if (keep(d)) out.push_back({refs_[i], d});
      }
    } else {
      // Expand the beam until it stops producing in-radius hits.
      std::size_t ef = opts_.ef_search;
      while (true) {
        auto cand = beam_search(q, ef);
        out.clear();
        for (const auto& [d, i] : cand) {
          if (keep(d)) out.push_back({refs_[i], d});
        }
        if (out.size() < ef / 2 || ef >= sigs_.size()) break;
        ef *= 2;
      }
    }
    sort_result(out);
    return out;
  }

  Result top_k(const Sig& q, std::size_t k) const {
    Result out;
    if (sigs_.empty() || k == 0) return out;
    Metric::check(q, sigs_.front());
    if (opts_.mode == SearchMode::exact || k >= sigs_.size()) {
      out.reserve(sigs_.size());
      for (std::size_t i = 0; i < sigs_.size(); ++i) {
        out.push_back({refs_[i], Metric::distance(q, sigs_[i])});
      }
      sort_result(out);
      if (out.size() > k) out.resize(k);
      return out;
    }
    for (const auto& [d, i] : beam_search(q, std::max(k, opts_.ef_search))) {
      out.push_back({refs_[i], d});
    }
    sort_result(out);
    if (out.size() > k) out.resize(k);
    return out;
  }

 private:
  static void sort_result(Result& r) {
    std::sort(r.begin(), r.end(), [](const auto& a, const auto& b) {
      return a.distance != b.distance ? a.distance < b.distance : a.ref < b.ref;
    });
  }

  using Scored = std::pair<Dist, std::size_t>;

  // Greedy best-first search from several entry points; returns up to ef
  // closest visited nodes, unsorted.
  std::vector<Scored> beam_search(const Sig& q, std::size_t ef) const {
    std::vector<char> visited(sigs_.size(), 0);
    std::priority_queue<Scored, std::vector<Scored>, std::greater<>> frontier;
    std::priority_queue<Scored> best;
    for (std::size_t e : entries_) {
      if (visited[e]) continue;
      visited[e] = 1;
      const Dist d = Metric::distance(q, sigs_[e]);
      frontier.push({d, e});
      best.push({d, e});
    }
    while (best.size() > ef) best.pop();
    while (!frontier.empty()) {
      const auto [d, node] = frontier.top();
      frontier.pop();
      if (best.size() >= ef && d > best.top().first) break;
      for (std::size_t nb : graph_[node]) {
        if (visited[nb]) continue;
        visited[nb] = 1;
        const Dist dn = Metric::distance(q, sigs_[nb]);
        if (best.size() < ef || dn < best.top().first) {
          frontier.push({dn, nb});
          best.push({dn, nb});
          if (best.size() > ef) best.pop();
        }
      }
    }
    std::vector<Scored> out;
    while (!best.empty()) {
      out.push_back(best.top());
      best.pop();
    }
    return out;
  }

  void build_graph() {
    graph_.assign(sigs_.size(), {});
    Rng rng(opts_.seed);
    for (std::size_t i = 0; i < sigs_.size(); ++i) {
      if (i > 0) {
        entries_ = {0};
        for (int e = 0; e < 3; ++e) entries_.push_back(rng.below(i));
        auto cand = beam_search_prefix(sigs_[i], opts_.ef_construction, i);
        std::sort(cand.begin(), cand.end());
        for (std::size_t nb : select_diverse(i, cand, opts_.max_degree / 2)) {
          link(i, nb);
          link(nb, i);
        }
      }
    }
    entries_.clear();
    for (int e = 0; e < 8 && !sigs_.empty(); ++e) entries_.push_back(rng.below(sigs_.size()));
  }

  // Search restricted to the first `limit` nodes (those already inserted).
  std::vector<Scored> beam_search_prefix(const Sig& q, std::size_t ef, std::size_t limit) const {
    std::vector<char> visited(limit, 0);
    std::priority_queue<Scored, std::vector<Scored>, std::greater<>> frontier;
    std::priority_queue<Scored> best;
    for (std::size_t e : entries_) {
      if (e >= limit || visited[e]) continue;
      visited[e] = 1;
      const Dist d = Metric::distance(q, sigs_[e]);
      frontier.push({d, e});
      best.push({d, e});
    }
    while (!frontier.empty()) {
      const auto [d, node] = frontier.top();
      frontier.pop();
      if (best.size() >= ef && d > best.top().first) break;
      for (std::size_t nb : graph_[node]) {
        if (nb >= limit || visited[nb]) continue;
        visited[nb] = 1;
        const Dist dn = Metric::distance(q, sigs_[nb]);
        if (best.size() < ef || dn < best.top().first) {
          frontier.push({dn, nb});
          best.push({dn, nb});
          if (best.size() > ef) best.pop();
        }
      }
    }
    std::vector<Scored> out;
    while (!best.empty()) {
      out.push_back(best.top());
      best.pop();
    }
    return out;
  }

  // Walks candidates nearest first and keeps one only if it is closer to
  // `base` than to every neighbor kept so far. Links across clusters
  // survive this, where plain nearest-m selection would drop them.
  std::vector<std::size_t> select_diverse(std::size_t base, const std::vector<Scored>& sorted,
                                          std::size_t m) const {
    std::vector<std::size_t> kept;
    for (const auto& [d, c] : sorted) {
      if (kept.size() >= m) break;
      if (c == base) continue;
      const bool diverse = std::all_of(kept.begin(), kept.end(), [&](std::size_t k) {
        return d < Metric::distance(sigs_[c], sigs_[k]);
      });
      if (diverse) kept.push_back(c);
    }
    return kept;
  }

  void link(std::size_t from, std::size_t to) {
    auto& adj = graph_[from];
    if (std::find(adj.begin(), adj.end(), to) != adj.end()) return;
    adj.push_back(to);
    if (adj.size() > opts_.max_degree) {
      std::vector<Scored> sorted;
      for (std::size_t n : adj) sorted.push_back({Metric::distance(sigs_[from], sigs_[n]), n});
      std::sort(sorted.begin(), sorted.end());
      adj = select_diverse(from, sorted, opts_.max_degree);
    }
  }

  std::vector<Sig> sigs_;
  std::vector<std::size_t> refs_;
  Options opts_;
  std::vector<std::vector<std::size_t>> graph_;
  std::vector<std::size_t> entries_;
};

using TlshIndex = VectorIndex<TlshMetric>;
using EmbeddingIndex = VectorIndex<EuclideanMetric>;

}  // namespace ppsca
