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
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppsca/common.hpp"
#include "ppsca/ossdb.hpp"

namespace ppsca {

struct MatchConfig {
  int tlsh_threshold = 30;         // delta
  double reuse_ratio = 0.10;       // epsilon
  double embedding_radius = 0.35;  // rho
  double score_threshold = 100.0;  // beta

  void validate() const {
    if (tlsh_threshold <= 0) throw ConfigError("tlsh threshold must be positive");
    if (!(reuse_ratio > 0.0 && reuse_ratio < 1.0)) throw ConfigError("reuse ratio must be in (0,1)");
    if (!(embedding_radius > 0.0)) throw ConfigError("embedding radius must be positive");
    if (!(score_threshold > 0.0)) throw ConfigError("score threshold must be positive");
  }

  SegmentParams segment_params() const { return {tlsh_threshold, embedding_radius}; }
};

// One (input function, DB record) pair under some signature kind.
struct FunctionMatch {
  std::size_t input = 0;
  std::size_t record = 0;
  double distance = 0.0;

  friend bool operator==(const FunctionMatch&, const FunctionMatch&) = default;
  friend auto operator<=>(const FunctionMatch&, const FunctionMatch&) = default;
};

inline void sort_matches(std::vector<FunctionMatch>& m) { std::sort(m.begin(), m.end()); }

// S_k for one project by exhaustive comparison against DB_k.
inline std::vector<FunctionMatch> match_project_tlsh(const std::vector<std::optional<TlshDigest>>& inputs,
                                                     const SegmentedDb& db, std::string_view project,
                                                     int delta) {
  std::vector<FunctionMatch> out;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!inputs[i]) continue;
    for (std::size_t r = 0; r < db.records.size(); ++r) {
      const auto& rec = db.records[r];
      if (!rec.live() || !rec.tlsh || rec.project != project) continue;
      const int d = tlsh_distance(*inputs[i], *rec.tlsh);
      if (d < delta) out.push_back({i, r, static_cast<double>(d)});
    }
  }
  sort_matches(out);
  return out;
}

// All projects at once through the index. Equal to the union of
// match_project_tlsh over every project.
inline std::vector<FunctionMatch> match_tlsh(const std::vector<std::optional<TlshDigest>>& inputs,
                                             const TlshIndex& index, int delta) {
  std::vector<FunctionMatch> out;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!inputs[i]) continue;
    for (const auto& nb : index.radius(*inputs[i], delta, false)) {
      out.push_back({i, nb.ref, static_cast<double>(nb.distance)});
    }
  }
  sort_matches(out);
  return out;
}

inline std::vector<FunctionMatch> match_embedding(const std::vector<EmbeddingVector>& inputs,
                                                  const EmbeddingIndex& index, double rho) {
  std::vector<FunctionMatch> out;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].dim() == 0) continue;
    for (const auto& nb : index.radius(inputs[i], rho, false)) out.push_back({i, nb.ref, nb.distance});
  }
  sort_matches(out);
  return out;
}

inline std::vector<FunctionMatch> match_embedding_bruteforce(const std::vector<EmbeddingVector>& inputs,
                                                             const SegmentedDb& db, double rho,
                                                             bool use_asm = false) {
  std::vector<FunctionMatch> out;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].dim() == 0) continue;
    for (std::size_t r = 0; r < db.records.size(); ++r) {
      const auto& rec = db.records[r];
      const auto& v = use_asm ? rec.asm_embedding : rec.embedding;
      if (!rec.live() || v.dim() == 0) continue;
      const double d = embedding_distance(inputs[i], v);
      if (d < rho) out.push_back({i, r, d});
    }
  }
  sort_matches(out);
  return out;
}

// |S_k| counts distinct DB-side functions.
inline std::size_t distinct_records(const std::vector<FunctionMatch>& matches) {
  std::set<std::size_t> s;
  for (const auto& m : matches) s.insert(m.record);
  return s.size();
}

inline bool decide_reuse_ratio(std::size_t matched, std::uint64_t db_count, double epsilon) {
  if (db_count == 0) return false;
  return static_cast<double>(matched) / static_cast<double>(db_count) > epsilon;
}

inline double function_weight(std::uint32_t loc, std::uint32_t n) {
  if (loc < 1 || n < 1) throw Error("function_weight needs loc >= 1 and n >= 1");
  return static_cast<double>(loc) / std::pow(5.0, static_cast<double>(n) - 1.0);
}

struct WeightedScore {
  double score = 0.0;
  bool reused = false;
};

// `matched` must be deduplicated by DB-side function.
inline WeightedScore score_project_weighted(const std::vector<const SignatureRecord*>& matched, double beta) {
  WeightedScore s;
  for (const auto* r : matched) s.score += function_weight(r->loc, r->similar_project_count);
  s.reused = s.score > beta;
  return s;
}

// ---------------------------------------------------------------------------
// Evidence and reports

enum class EvidenceSource { tlsh, sbb, symbol, embedding, assembly };

inline std::string to_string(EvidenceSource s) {
  switch (s) {
    case EvidenceSource::tlsh: return "tlsh";
    case EvidenceSource::sbb: return "sbb";
    case EvidenceSource::symbol: return "symbol";
    case EvidenceSource::embedding: return "embedding";
    case EvidenceSource::assembly: return "assembly";
  }
  return "?";
}

inline EvidenceSource parse_evidence_source(std::string_view s) {
  for (auto e : {EvidenceSource::tlsh, EvidenceSource::sbb, EvidenceSource::symbol,
                 EvidenceSource::embedding, EvidenceSource::assembly}) {
    if (to_string(e) == s) return e;
  }
  throw ParseError("unknown evidence source '" + std::string(s) + "'");
}

struct Evidence {
  std::string input_function;
  std::string db_function;
  EvidenceSource source = EvidenceSource::tlsh;
  double distance = 0.0;

  friend bool operator==(const Evidence&, const Evidence&) = default;
};

// Evidence tied to a DB record. Project, LoC and N travel with it so the
// SBB client can tally without holding the DB.
struct RecordEvidence {
  std::size_t record = 0;
  std::string project;
  std::uint32_t loc = 1;
  std::uint32_t n = 1;
  Evidence evidence;
};

enum class DecisionRule { ratio, weighted };

inline std::string to_string(DecisionRule r) { return r == DecisionRule::ratio ? "ratio" : "weighted"; }

struct ProjectVerdict {
  std::string project;
  bool reused = false;
  double score = 0.0;  // |S_k|/|DB_k| or the weighted sum
  std::size_t matched_functions = 0;
  std::uint64_t db_functions = 0;
  std::vector<Evidence> evidence;

  friend bool operator==(const ProjectVerdict&, const ProjectVerdict&) = default;
};

struct ScaReport {
  std::string input_id;
  std::string mode;
  std::string rule;
  std::vector<ProjectVerdict> projects;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  nlohmann::ordered_json stats = nlohmann::ordered_json::object();
  std::vector<std::pair<std::string, double>> timings_ms;

  std::set<std::string> reused_projects() const {
    std::set<std::string> out;
    for (const auto& p : projects) {
      if (p.reused) out.insert(p.project);
    }
    return out;
  }

  double timing(std::string_view stage) const {
    for (const auto& [k, v] : timings_ms) {
      if (k == stage) return v;
    }
    return 0.0;
  }

  nlohmann::ordered_json to_json(bool with_timings = true) const {
    nlohmann::ordered_json j;
    j["input"] = input_id;
    j["mode"] = mode;
    j["rule"] = rule;
    j["projects"] = nlohmann::ordered_json::array();
    for (const auto& p : projects) {
      nlohmann::ordered_json pj;
      pj["project"] = p.project;
      pj["reused"] = p.reused;
      pj["score"] = p.score;
      pj["matched_functions"] = p.matched_functions;
      pj["db_functions"] = p.db_functions;
      pj["evidence"] = nlohmann::ordered_json::array();
      for (const auto& e : p.evidence) {
        pj["evidence"].push_back({{"input", e.input_function},
                                  {"db", e.db_function},
                                  {"source", to_string(e.source)},
                                  {"distance", e.distance}});
      }
      j["projects"].push_back(std::move(pj));
    }
    j["config"] = config;
    j["stats"] = stats;
    if (with_timings) {
      j["timings_ms"] = nlohmann::ordered_json::object();
      for (const auto& [k, v] : timings_ms) j["timings_ms"][k] = v;
    }
    return j;
  }

  // Object key order in `config`, `stats` and `timings_ms` is kept as read.
  static ScaReport from_json(const nlohmann::ordered_json& j) {
    ScaReport r;
    try {
      r.input_id = j.at("input").get<std::string>();
      r.mode = j.at("mode").get<std::string>();
      r.rule = j.at("rule").get<std::string>();
      for (const auto& pj : j.at("projects")) {
        ProjectVerdict p;
        p.project = pj.at("project").get<std::string>();
        p.reused = pj.at("reused").get<bool>();
        p.score = pj.at("score").get<double>();
        p.matched_functions = pj.at("matched_functions").get<std::size_t>();
        p.db_functions = pj.at("db_functions").get<std::uint64_t>();
        for (const auto& ej : pj.at("evidence")) {
          p.evidence.push_back({ej.at("input").get<std::string>(), ej.at("db").get<std::string>(),
                                parse_evidence_source(ej.at("source").get<std::string>()),
                                ej.at("distance").get<double>()});
        }
        r.projects.push_back(std::move(p));
      }
      r.config = j.at("config");
      r.stats = j.at("stats");
      if (j.contains("timings_ms")) {
        for (const auto& [k, v] : j.at("timings_ms").items()) r.timings_ms.emplace_back(k, v.get<double>());
      }
    } catch (const nlohmann::ordered_json::exception& e) {
      throw ParseError(std::string("malformed report: ") + e.what());
    }
    return r;
  }
};

using ProjectCounts = std::map<std::string, std::uint64_t, std::less<>>;

inline ProjectCounts project_counts(const SegmentedDb& db) {
  ProjectCounts out;
  for (std::size_t i = 0; i < db.projects.size(); ++i) out[db.projects[i]] = db.counts[i];
  return out;
}

// Builds verdicts from evidence. Evidence is deduplicated by DB record
// (first occurrence wins); only projects with at least one matched record
// are listed. Ranked by verdict, then score, then name.
inline std::vector<ProjectVerdict> decide_projects(const std::vector<RecordEvidence>& evidence,
                                                   const ProjectCounts& counts, DecisionRule rule,
                                                   const MatchConfig& cfg) {
  std::map<std::string, std::vector<const RecordEvidence*>> by_project;
  std::set<std::size_t> seen;
  for (const auto& e : evidence) {
    if (!seen.insert(e.record).second) continue;
    by_project[e.project].push_back(&e);
  }
  std::vector<ProjectVerdict> out;
  for (const auto& [project, evs] : by_project) {
    auto cit = counts.find(project);
    if (cit == counts.end()) throw Error("evidence names unknown project " + project);
    ProjectVerdict v;
    v.project = project;
    v.db_functions = cit->second;
    v.matched_functions = evs.size();
    if (rule == DecisionRule::ratio) {
      v.score = v.db_functions == 0 ? 0.0
                                    : static_cast<double>(v.matched_functions) / static_cast<double>(v.db_functions);
      v.reused = decide_reuse_ratio(v.matched_functions, v.db_functions, cfg.reuse_ratio);
    } else {
      for (const auto* e : evs) v.score += function_weight(e->loc, e->n);
      v.reused = v.score > cfg.score_threshold;
    }
    for (const auto* e : evs) v.evidence.push_back(e->evidence);
    std::sort(v.evidence.begin(), v.evidence.end(), [](const Evidence& a, const Evidence& b) {
      return std::tie(a.db_function, a.input_function) < std::tie(b.db_function, b.input_function);
    });
    out.push_back(std::move(v));
  }
  std::sort(out.begin(), out.end(), [](const ProjectVerdict& a, const ProjectVerdict& b) {
    if (a.reused != b.reused) return a.reused;
    if (a.score != b.score) return a.score > b.score;
    return a.project < b.project;
  });
  return out;
}

inline RecordEvidence record_evidence(const SegmentedDb& db, std::size_t record, std::string input,
                                      EvidenceSource source, double distance) {
  const auto& r = db.records.at(record);
  return {record, r.project, r.loc, r.similar_project_count, {std::move(input), r.fid.str(), source, distance}};
}

inline nlohmann::ordered_json to_json(const MatchConfig& c) {
  return {{"delta", c.tlsh_threshold},
          {"epsilon", c.reuse_ratio},
          {"rho", c.embedding_radius},
          {"beta", c.score_threshold}};
}

inline ScaReport generate_report(std::string input_id, std::string mode, DecisionRule rule,
                                 std::vector<ProjectVerdict> verdicts, nlohmann::ordered_json config,
                                 std::vector<std::pair<std::string, double>> timings) {
  ScaReport r;
  r.input_id = std::move(input_id);
  r.mode = std::move(mode);
  r.rule = to_string(rule);
  r.projects = std::move(verdicts);
  r.config = std::move(config);
  r.timings_ms = std::move(timings);
  return r;
}

// Evidence from plain matches against a DB.
inline std::vector<RecordEvidence> evidence_from(const std::vector<FunctionMatch>& matches,
                                                 const std::vector<std::string>& input_names,
                                                 const SegmentedDb& db, EvidenceSource source) {
  std::vector<RecordEvidence> out;
  out.reserve(matches.size());
  for (const auto& m : matches) {
    out.push_back(record_evidence(db, m.record, input_names.at(m.input), source, m.distance));
  }
  return out;
}

}  // namespace ppsca
