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

// Similarity-based bucketization: the client sends a mutated digest, the
// server answers with the theta nearest records, the client refines with
// the true digest. The server keeps every query it sees, which is what the
// leakage attack works from.

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ppsca/common.hpp"
#include "ppsca/eval.hpp"
#include "ppsca/matcher.hpp"
#include "ppsca/ossdb.hpp"
#include "ppsca/tlsh.hpp"

namespace ppsca {

struct SbbConfig {
  int gamma = 50;
  std::size_t theta = 1000;
  std::uint64_t seed = 1;
  int tolerance = 5;

  void validate() const {
    if (gamma < 0) throw ConfigError("gamma must be non-negative");
    if (theta < 1) throw ConfigError("theta must be at least 1");
    if (tolerance < 4) throw ConfigError("tolerance must be at least 4 (largest single-flip step)");
  }
};

// Flips body bucket codes by +1 mod 4 until the distance to p lands in
// [gamma, gamma + tolerance]. Each flip is drawn uniformly among the buckets
// whose next code moves away from p; an unbiased walk stalls near 210 on
// 128 buckets. One flip moves the distance by at most 4, so the window
// cannot be stepped over.
inline TlshDigest mutate_digest(const TlshDigest& p, int gamma, Rng& rng, int tolerance = 5) {
  if (gamma < 0) throw ConfigError("gamma must be non-negative");
  if (gamma == 0) return p;
  auto code_diff = [](int a, int b) {
    const int d = a > b ? a - b : b - a;
    return d == 3 ? 6 : d;
  };
  TlshDigest q = p;
  int d = tlsh_distance(p, q);
  const long cap = 10L * gamma + 100;
  std::vector<std::size_t> up;
  for (long flips = 0;; ++flips) {
    if (d >= gamma && d <= gamma + tolerance) return q;
    if (flips >= cap) throw Error("digest mutation exceeded " + std::to_string(cap) + " flips");
    up.clear();
    for (std::size_t b = 0; b < TlshDigest::kBuckets; ++b) {
      const int pc = p.bucket_code(b), qc = q.bucket_code(b);
      if (code_diff(pc, (qc + 1) % 4) > code_diff(pc, qc)) up.push_back(b);
    }
    if (up.empty()) throw Error("digest cannot be moved to distance " + std::to_string(gamma));
    const auto b = up[rng.below(up.size())];
    const int pc = p.bucket_code(b), qc = q.bucket_code(b);
    d += code_diff(pc, (qc + 1) % 4) - code_diff(pc, qc);
    q.set_bucket_code(b, (qc + 1) % 4);
  }
}

struct BucketEntry {
  std::size_t record = 0;
  std::string project;
  FunctionId fid;
  TlshDigest digest;

  friend bool operator==(const BucketEntry&, const BucketEntry&) = default;
};

// What the client can ask an SBB server.
class BucketService {
 public:
  virtual ~BucketService() = default;
  virtual std::vector<BucketEntry> query(const TlshDigest& mutated, std::size_t theta) = 0;
  virtual ProjectCounts counts() = 0;
};

class SbbServer : public BucketService {
 public:
  explicit SbbServer(const SegmentedDb& db) : db_(&db) {
    std::vector<TlshDigest> sigs;
    std::vector<std::size_t> refs;
    for (std::size_t i = 0; i < db.records.size(); ++i) {
      const auto& r = db.records[i];
      if (r.live() && r.tlsh) {
        sigs.push_back(*r.tlsh);
        refs.push_back(i);
      }
    }
    index_ = TlshIndex(std::move(sigs), std::move(refs));
    begin_session();
  }

  // theta nearest records, ties by (project, fid); the query is logged.
  std::vector<BucketEntry> query(const TlshDigest& mutated, std::size_t theta) override {
    sessions_.back().push_back(mutated);
    ++queries_;
    std::vector<BucketEntry> out;
    for (const auto& nb : index_.top_k(mutated, theta)) {
      const auto& r = db_->records[nb.ref];
      out.push_back({nb.ref, r.project, r.fid, *r.tlsh});
    }
    return out;
  }

  ProjectCounts counts() override { return project_counts(*db_); }

  void begin_session() { sessions_.emplace_back(); }
  const std::vector<TlshDigest>& transcript() const { return sessions_.back(); }
  const std::vector<std::vector<TlshDigest>>& sessions() const { return sessions_; }
  std::size_t query_count() const { return queries_; }

 private:
  const SegmentedDb* db_;
  TlshIndex index_;
  std::vector<std::vector<TlshDigest>> sessions_;
  std::size_t queries_ = 0;
};

struct RefinedMatch {
  BucketEntry entry;
  int distance = 0;
};

inline std::vector<RefinedMatch> client_refine(const TlshDigest& p, const std::vector<BucketEntry>& bucket,
                                               int delta) {
  std::vector<RefinedMatch> out;
  for (const auto& e : bucket) {
    const int d = tlsh_distance(p, e.digest);
    if (d < delta) out.push_back({e, d});
  }
  return out;
}

// Digests of one input codebase; names are the rendered input ids.
struct DigestInput {
  std::string id;
  std::vector<std::string> names;
  std::vector<std::optional<TlshDigest>> digests;
};

inline Rng sbb_rng(const SbbConfig& cfg, std::string_view input_id) {
  return Rng(mix64(cfg.seed ^ fnv1a64(input_id)));
}

struct SbbRun {
  ScaReport report;
  std::vector<TlshDigest> sent;  // the mutated digests, in order
};

inline SbbRun sbb_sca_pipeline(const DigestInput& input, BucketService& server, const SbbConfig& sbb,
                               const MatchConfig& match) {
  sbb.validate();
  auto rng = sbb_rng(sbb, input.id);
  SbbRun run;
  std::vector<RecordEvidence> evidence;
  for (std::size_t i = 0; i < input.digests.size(); ++i) {
    if (!input.digests[i]) continue;
    const auto& p = *input.digests[i];
    const auto q = mutate_digest(p, sbb.gamma, rng, sbb.tolerance);
    run.sent.push_back(q);
    for (const auto& m : client_refine(p, server.query(q, sbb.theta), match.tlsh_threshold)) {
      evidence.push_back({m.entry.record, m.entry.project, 1, 1,
                          {input.names[i], m.entry.fid.str(), EvidenceSource::sbb, static_cast<double>(m.distance)}});
    }
  }
  nlohmann::ordered_json cfg = to_json(match);
  cfg["gamma"] = sbb.gamma;
  cfg["theta"] = sbb.theta;
  cfg["seed"] = sbb.seed;
  run.report = generate_report(input.id, "sbb", DecisionRule::ratio,
                               decide_projects(evidence, server.counts(), DecisionRule::ratio, match),
                               std::move(cfg), {});
  return run;
}

// Plaintext TLSH mode over the same inputs, for comparisons.
inline ScaReport plain_tlsh_report(const DigestInput& input, const SegmentedDb& db, const TlshIndex& index,
                                   const MatchConfig& match) {
  const auto matches = match_tlsh(input.digests, index, match.tlsh_threshold);
  return generate_report(input.id, "plain-tlsh", DecisionRule::ratio,
                         decide_projects(evidence_from(matches, input.names, db, EvidenceSource::tlsh),
                                         project_counts(db), DecisionRule::ratio, match),
                         to_json(match), {});
}

struct AttackResult {
  std::vector<std::pair<std::string, std::size_t>> ranking;  // |S'_k| descending
  std::set<std::string> predicted;
};

// Threshold matching of the logged queries against the DB, then the client's ratio rule.
inline AttackResult attack_infer(const std::vector<TlshDigest>& transcript, const SegmentedDb& db,
                                 int delta_prime, double epsilon) {
  if (delta_prime <= 0) throw ConfigError("delta' must be positive");
  std::vector<std::set<std::size_t>> hits(db.projects.size());
  for (const auto& q : transcript) {
    for (std::size_t r = 0; r < db.records.size(); ++r) {
      const auto& rec = db.records[r];
      if (!rec.live() || !rec.tlsh) continue;
      if (tlsh_distance(q, *rec.tlsh) < delta_prime) hits[db.project_index(rec.project)].insert(r);
    }
  }
  AttackResult out;
  for (std::size_t k = 0; k < db.projects.size(); ++k) {
    out.ranking.emplace_back(db.projects[k], hits[k].size());
    if (decide_reuse_ratio(hits[k].size(), db.counts[k], epsilon)) out.predicted.insert(db.projects[k]);
  }
  std::stable_sort(out.ranking.begin(), out.ranking.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

struct LeakageGrid {
  std::vector<int> gammas;
  std::vector<int> deltas;
  std::vector<std::vector<double>> client_f1;  // [gamma][delta]
  std::vector<std::vector<double>> server_f1;

  std::string to_csv() const {
    std::ostringstream out;
    out << "gamma,delta_prime,client_f1,server_f1\n";
    for (std::size_t g = 0; g < gammas.size(); ++g) {
      for (std::size_t d = 0; d < deltas.size(); ++d) {
        out << gammas[g] << ',' << deltas[d] << ',' << client_f1[g][d] << ',' << server_f1[g][d] << '\n';
      }
    }
    return out.str();
  }
};

// For every gamma: run the SBB client over each target, score its verdicts,
// then run the attack on each target's logged queries for every delta'.
inline LeakageGrid leakage_grid(const SegmentedDb& db, const std::vector<DigestInput>& targets,
                                const std::map<std::string, std::set<std::string>>& truth,
                                const std::vector<int>& gammas, const std::vector<int>& deltas,
                                SbbConfig sbb, const MatchConfig& match) {
  LeakageGrid grid;
  grid.gammas = gammas;
  grid.deltas = deltas;
  SbbServer server(db);
  for (int g : gammas) {
    sbb.gamma = g;
    std::map<std::string, std::set<std::string>> client_pred;
    std::vector<std::vector<TlshDigest>> transcripts;
    for (const auto& t : targets) {
      server.begin_session();
      client_pred[t.id] = sbb_sca_pipeline(t, server, sbb, match).report.reused_projects();
      transcripts.push_back(server.transcript());
    }
    const double cf1 = score_predictions(client_pred, truth).f1();
    std::vector<double> crow, srow;
    for (int d : deltas) {
      std::map<std::string, std::set<std::string>> server_pred;
      for (std::size_t i = 0; i < targets.size(); ++i) {
        server_pred[targets[i].id] = attack_infer(transcripts[i], db, d, match.reuse_ratio).predicted;
      }
      crow.push_back(cf1);
      srow.push_back(score_predictions(server_pred, truth).f1());
    }
    grid.client_f1.push_back(std::move(crow));
    grid.server_f1.push_back(std::move(srow));
  }
  return grid;
}

// Grid spec of the form "gammas=0,10,50;deltas=100,125".
inline std::pair<std::vector<int>, std::vector<int>> parse_grid_spec(std::string_view spec) {
  std::vector<int> gammas, deltas;
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    auto end = spec.find(';', pos);
    if (end == std::string_view::npos) end = spec.size();
    const auto part = spec.substr(pos, end - pos);
    pos = end + 1;
    if (part.empty()) continue;
    const auto eq = part.find('=');
    if (eq == std::string_view::npos) throw ConfigError("grid spec part without '=': " + std::string(part));
    const auto key = part.substr(0, eq);
    std::vector<int>* dst = key == "gammas" ? &gammas : key == "deltas" ? &deltas : nullptr;
    if (!dst) throw ConfigError("unknown grid axis '" + std::string(key) + "'");
    std::string item;
    std::istringstream ss{std::string(part.substr(eq + 1))};
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t used = 0;
        dst->push_back(std::stoi(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw ConfigError("bad grid value '" + item + "'");
      }
    }
  }
  if (gammas.empty() || deltas.empty()) throw ConfigError("grid spec needs gammas and deltas");
  return {gammas, deltas};
}

}  // namespace ppsca
