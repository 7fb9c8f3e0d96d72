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

// Client-side selection of the functions worth a private embedding.
//
// Filter 1 claims functions whose symbol is already known to the DB and
// whose call edges agree with the owning project. Filter 2 keeps the least
// maintainable source functions of every file. Filter 3 keeps a few
// assembly functions whose names are rare in the DB and whose bodies are
// short.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "ppsca/ingest.hpp"
#include "ppsca/matcher.hpp"
#include "ppsca/ossdb.hpp"

namespace ppsca {

struct FilterConfig {
  std::size_t complex_name_len = 20;
  double theta1 = 0.02;
  double theta2 = 0.02;
  bool symbol = true;
  bool source = true;
  bool assembly = true;

  void validate() const {
    if (!(theta1 > 0.0 && theta1 <= 1.0)) throw ConfigError("theta1 must be in (0,1]");
    if (!(theta2 > 0.0 && theta2 <= 1.0)) throw ConfigError("theta2 must be in (0,1]");
  }
};

// ceil(ratio * count), robust to ratios like 0.02 that are not exact.
inline std::size_t quota(double ratio, std::size_t count) {
  return static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(count) - 1e-9));
}

// Name-level view of a DB: who defines a name, and which caller/callee
// name pairs each project records.
class SymbolTable {
 public:
  SymbolTable() = default;

  explicit SymbolTable(const SegmentedDb& db) : db_(&db) {
    for (std::size_t i = 0; i < db.records.size(); ++i) {
      const auto& r = db.records[i];
      if (!r.live()) continue;
      by_name_[r.fid.name].push_back(i);
      projects_[r.fid.name].insert(r.project);
      for (const auto& c : r.callees) edges_.emplace(r.project, r.fid.name, c.name);
    }
  }

  std::size_t oss_num(const std::string& name) const {
    auto it = projects_.find(name);
    return it == projects_.end() ? 0 : it->second.size();
  }

  const std::vector<std::size_t>& records_named(const std::string& name) const {
    static const std::vector<std::size_t> none;
    auto it = by_name_.find(name);
    return it == by_name_.end() ? none : it->second;
  }

  // First live record of `project` with this name, if any.
  std::optional<std::size_t> find(const std::string& project, const std::string& name) const {
    for (auto r : records_named(name)) {
      if (db_->records[r].project == project) return r;
    }
    return std::nullopt;
  }

  bool has_edge(const std::string& project, const std::string& caller, const std::string& callee) const {
    return edges_.count({project, caller, callee}) > 0;
  }

  const SegmentedDb& db() const { return *db_; }

 private:
  const SegmentedDb* db_ = nullptr;
  std::map<std::string, std::vector<std::size_t>> by_name_;
  std::map<std::string, std::set<std::string>> projects_;
  std::set<std::tuple<std::string, std::string, std::string>> edges_;
};

struct SymbolMatch {
  std::size_t input = 0;  // index into the input functions
  std::size_t record = 0;
  CallEdge confirming;    // the input-side edge that the project also records
  bool strict = false;
};

struct SymbolEvidence {
  std::vector<SymbolMatch> matches;
};

struct SymbolFilterResult {
  SymbolEvidence evidence;
  std::vector<std::size_t> claimed;    // ascending
  std::vector<std::size_t> remaining;  // ascending
};

inline SymbolFilterResult symbol_filter(const std::vector<SourceFunction>& fns, const CallGraph& graph,
                                        const SymbolTable& table, const FilterConfig& cfg) {
  std::map<std::string, std::vector<const CallEdge*>> incident;
  for (const auto& e : graph.edges) {
    incident[e.caller.str()].push_back(&e);
    if (!e.external) incident[e.callee.str()].push_back(&e);
  }
  const auto& db = table.db();
  SymbolFilterResult out;
  for (std::size_t i = 0; i < fns.size(); ++i) {
    const auto& f = fns[i];
    std::vector<std::size_t> candidates;
    bool strict = false;
    for (auto r : table.records_named(f.id.name)) {
      if (db.records[r].fid == f.id) candidates.push_back(r);
    }
    if (!candidates.empty()) {
      strict = true;
    } else if (f.id.name.size() > cfg.complex_name_len && table.oss_num(f.id.name) == 1) {
      candidates = table.records_named(f.id.name);
    }
    auto it = incident.find(f.id.str());
    bool claimed = false;
    for (auto r : candidates) {
      if (it == incident.end()) break;
      const auto& project = db.records[r].project;
      for (const auto* e : it->second) {
        if (table.has_edge(project, e->caller.name, e->callee.name)) {
          out.evidence.matches.push_back({i, r, *e, strict});
          claimed = true;
          break;
        }
      }
    }
    (claimed ? out.claimed : out.remaining).push_back(i);
  }
  return out;
}

// Per file, the ceil(theta1 * count) functions with the lowest MI.
inline std::vector<std::size_t> informative_source_filter(const std::vector<SourceFunction>& fns,
                                                          const std::vector<std::size_t>& pool, double theta1) {
  std::map<std::string, std::vector<std::size_t>> by_file;
  for (auto i : pool) by_file[fns.at(i).file].push_back(i);
  std::vector<std::size_t> out;
  for (auto& [file, idx] : by_file) {
    std::vector<std::tuple<double, std::string, std::size_t>> keyed;
    for (auto i : idx) {
      const auto& f = fns[i];
      keyed.emplace_back(maintainability_index(f.halstead_volume, static_cast<double>(f.cyclomatic),
                                               static_cast<double>(f.loc)),
                         f.id.str(), i);
    }
    std::sort(keyed.begin(), keyed.end());
    const auto keep = std::min(quota(theta1, idx.size()), keyed.size());
    for (std::size_t k = 0; k < keep; ++k) out.push_back(std::get<2>(keyed[k]));
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline double assembly_score(std::size_t oss_num, std::size_t block_num) {
  return 1.0 / (std::log(static_cast<double>(oss_num) + 2.0) * std::log(static_cast<double>(block_num) + 2.0));
}

// Top ceil(theta2 * |pool|) candidates by score, ties by name.
inline std::vector<std::size_t> assembly_filter(const std::vector<AssemblyFunction>& fns,
                                                const std::vector<std::size_t>& pool, const SymbolTable& table,
                                                double theta2) {
  std::vector<std::tuple<double, std::string, std::size_t>> keyed;
  for (auto i : pool) {
    const auto n = table.oss_num(fns.at(i).name);
    if (n == 0) continue;
    keyed.emplace_back(-assembly_score(n, fns[i].block_num()), fns[i].name, i);
  }
  std::sort(keyed.begin(), keyed.end());
  const auto keep = std::min(quota(theta2, pool.size()), keyed.size());
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < keep; ++k) out.push_back(std::get<2>(keyed[k]));
  std::sort(out.begin(), out.end());
  return out;
}

enum class Disposition { claimed, selected, dropped };

struct FilterOutcome {
  SymbolFilterResult symbol;
  std::vector<std::size_t> source_selected;
  std::vector<std::size_t> asm_selected;
  std::vector<Disposition> source_disposition;
  std::vector<Disposition> asm_disposition;
};

// Runs the enabled filters. Assembly functions named like a claimed source
// function are treated as claimed too.
inline FilterOutcome run_filters(const std::vector<SourceFunction>& fns, const CallGraph& graph,
                                 const std::vector<AssemblyFunction>& asm_fns, const SymbolTable& table,
                                 const FilterConfig& cfg) {
  cfg.validate();
  FilterOutcome out;
  if (cfg.symbol) {
    out.symbol = symbol_filter(fns, graph, table, cfg);
  } else {
    for (std::size_t i = 0; i < fns.size(); ++i) out.symbol.remaining.push_back(i);
  }
  if (cfg.source) out.source_selected = informative_source_filter(fns, out.symbol.remaining, cfg.theta1);

  std::set<std::string> claimed_names;
  for (auto i : out.symbol.claimed) claimed_names.insert(fns[i].id.name);
  std::vector<std::size_t> asm_pool;
  out.asm_disposition.assign(asm_fns.size(), Disposition::dropped);
  for (std::size_t i = 0; i < asm_fns.size(); ++i) {
    if (claimed_names.count(asm_fns[i].name)) {
      out.asm_disposition[i] = Disposition::claimed;
    } else {
      asm_pool.push_back(i);
    }
  }
  if (cfg.assembly) out.asm_selected = assembly_filter(asm_fns, asm_pool, table, cfg.theta2);
  for (auto i : out.asm_selected) out.asm_disposition[i] = Disposition::selected;

  out.source_disposition.assign(fns.size(), Disposition::dropped);
  for (auto i : out.symbol.claimed) out.source_disposition[i] = Disposition::claimed;
  for (auto i : out.source_selected) out.source_disposition[i] = Disposition::selected;
  return out;
}

// Nearest DB assembly embedding for one selected assembly function.
struct AsmMatch {
  std::string name;
  std::size_t nearest = 0;  // DB record
  double distance = 0.0;
};

struct CombinedEvidence {
  std::vector<RecordEvidence> evidence;  // deduplicated by record
  std::size_t asm_accepted = 0;
  std::size_t asm_discarded = 0;
};

// Merges symbol, embedding and assembly evidence. An assembly match counts
// only when its nearest embedding lies within rho and that record's project
// also defines the name; it then stands for the project's record of that
// name.
inline CombinedEvidence combine_evidence(const SymbolTable& table, const std::vector<SourceFunction>& fns,
                                         const SymbolEvidence& symbol,
                                         const std::vector<RecordEvidence>& embedding,
                                         const std::vector<AsmMatch>& asm_matches, double rho) {
  const auto& db = table.db();
  CombinedEvidence out;
  std::set<std::size_t> seen;
  auto add = [&](RecordEvidence e) {
    if (seen.insert(e.record).second) out.evidence.push_back(std::move(e));
  };
  for (const auto& m : symbol.matches) {
    add(record_evidence(db, m.record, fns.at(m.input).id.str(), EvidenceSource::symbol, 0.0));
  }
  for (const auto& e : embedding) add(e);
  for (const auto& m : asm_matches) {
    std::optional<std::size_t> rec;
    if (m.distance < rho) rec = table.find(db.records.at(m.nearest).project, m.name);
    if (!rec) {
      ++out.asm_discarded;
      continue;
    }
    ++out.asm_accepted;
    add(record_evidence(db, *rec, m.name, EvidenceSource::assembly, m.distance));
  }
  return out;
}

}  // namespace ppsca
