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

// OSS signature database: commit-incremental signature generation,
// cross-project segmentation, persistence and the derived search indexes.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ppsca/common.hpp"
#include "ppsca/embedding.hpp"
#include "ppsca/index.hpp"
#include "ppsca/ingest.hpp"
#include "ppsca/tlsh.hpp"

namespace ppsca {

struct CommitSnapshot {
  std::string project;
  std::uint64_t commit_index = 0;
  std::int64_t timestamp = 0;
  std::map<std::string, std::string> files;  // relative path -> contents
};

struct Provenance {
  std::string project;
  std::uint64_t commit_index = 0;
  std::int64_t timestamp = 0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct SignatureRecord {
  FunctionId fid;
  std::string project;
  std::optional<TlshDigest> tlsh;
  EmbeddingVector embedding;      // empty when the body has no tokens
  EmbeddingVector asm_embedding;  // empty when the listing lacks the function
  std::uint32_t asm_blocks = 0;
  Provenance first_seen;
  std::uint32_t loc = 1;
  std::uint32_t similar_project_count = 1;
  bool tombstoned = false;
  std::vector<FunctionId> callees;  // resolved call edges, sorted

  bool live() const { return !tombstoned; }

  friend bool operator==(const SignatureRecord&, const SignatureRecord&) = default;
};

// Everything except first_seen, for incremental-versus-batch comparisons.
inline bool same_signature(const SignatureRecord& a, const SignatureRecord& b) {
  return a.fid == b.fid && a.project == b.project && a.tlsh == b.tlsh &&
         a.embedding == b.embedding && a.asm_embedding == b.asm_embedding &&
         a.asm_blocks == b.asm_blocks && a.loc == b.loc &&
         a.similar_project_count == b.similar_project_count && a.tombstoned == b.tombstoned &&
         a.callees == b.callees;
}

struct BuildStats {
  std::size_t files_analyzed = 0;
  std::size_t functions_hashed = 0;
  std::size_t listings_analyzed = 0;
  std::size_t commits = 0;
};

inline bool is_listing_file(const std::string& path) {
  return path.size() >= 4 && path.compare(path.size() - 4, 4, ".asm") == 0;
}

// Applies commits in order and keeps one record per function id per
// project. Only files whose bytes changed since the previous commit of the
// same project are re-parsed.
class SignatureBuilder {
 public:
  explicit SignatureBuilder(const ModelWeights& weights) : weights_(&weights) {}

  void apply(const CommitSnapshot& snap, std::vector<Diagnostic>* diagnostics = nullptr) {
    auto& ps = projects_[snap.project];
    if (ps.started && snap.commit_index <= ps.last_commit) {
      throw Error("commit indices of project " + snap.project + " must increase");
    }
    ps.started = true;
    ps.last_commit = snap.commit_index;
    ++stats_.commits;

    // Source files: drop deleted, re-extract changed.
    for (auto it = ps.files.begin(); it != ps.files.end();) {
      if (!snap.files.count(it->first)) {
        it = ps.files.erase(it);
      } else {
        ++it;
      }
    }
    bool listing_seen = false;
    for (const auto& [path, text] : snap.files) {
      const auto h = fnv1a64(text);
      if (is_listing_file(path)) {
        listing_seen = true;
        if (ps.listing_hash == h && ps.has_listing) continue;
        ps.listing_hash = h;
        ps.has_listing = true;
        ++stats_.listings_analyzed;
        ps.asm_cache.clear();
        try {
          for (const auto& fn : parse_assembly_listing(text)) {
            const auto toks = tokenize(fn.instruction_text());
            if (!embeddable(toks, weights_->vocab()) || ps.asm_cache.count(fn.name)) continue;
            ps.asm_cache[fn.name] = {embed_plain(toks, *weights_),
                                     static_cast<std::uint32_t>(fn.block_num())};
          }
        } catch (const ParseError& e) {
          if (diagnostics) diagnostics->push_back({path, e.what()});
        }
        continue;
      }
      if (!is_source_file(path)) continue;
      auto fit = ps.files.find(path);
      if (fit != ps.files.end() && fit->second.hash == h) continue;
      ++stats_.files_analyzed;
      FileState fs;
      fs.hash = h;
      fs.functions = extract_source_functions(text, path, diagnostics);
      ps.files[path] = std::move(fs);
    }
    if (!listing_seen) {
      ps.has_listing = false;
      ps.asm_cache.clear();
    }

    // Live function set; within a project the first file in path order
    // wins for duplicate ids.
    std::map<FunctionId, const SourceFunction*> live;
    std::vector<SourceFunction> all;
    for (const auto& [path, fs] : ps.files) {
      for (const auto& fn : fs.functions) {
        if (live.count(fn.id)) continue;
        live[fn.id] = nullptr;
        all.push_back(fn);
      }
    }
    for (const auto& fn : all) live[fn.id] = &fn;
    const auto graph = build_call_graph(all);
    std::map<FunctionId, std::vector<FunctionId>> callees;
    for (const auto& e : graph.edges) {
      if (!e.external) callees[e.caller].push_back(e.callee);
    }

    for (const auto& [id, fn] : live) {
      const auto body = fn->normalized();
      const auto bh = fnv1a64(body);
      auto rit = ps.records.find(id);
      if (rit == ps.records.end()) {
        SignatureRecord rec;
        rec.fid = id;
        rec.project = snap.project;
        rec.first_seen = {snap.project, snap.commit_index, snap.timestamp};
        rit = ps.records.emplace(id, Entry{std::move(rec), 0, false}).first;
      }
      auto& entry = rit->second;
      if (!entry.hashed || entry.body_hash != bh || entry.record.tombstoned) {
        hash_into(entry.record, body);
        entry.body_hash = bh;
        entry.hashed = true;
        ++stats_.functions_hashed;
      }
      entry.record.tombstoned = false;
      entry.record.loc = static_cast<std::uint32_t>(fn->loc);
      auto cit = callees.find(id);
      entry.record.callees = cit == callees.end() ? std::vector<FunctionId>{} : cit->second;
    }
    for (auto& [id, entry] : ps.records) {
      if (!live.count(id)) entry.record.tombstoned = true;
      if (auto a = ps.asm_cache.find(id.name); a != ps.asm_cache.end() && !entry.record.tombstoned) {
        entry.record.asm_embedding = a->second.embedding;
        entry.record.asm_blocks = a->second.blocks;
      } else {
        entry.record.asm_embedding = {};
        entry.record.asm_blocks = 0;
      }
    }
  }

  // All records of all projects, sorted by (project, fid).
  std::vector<SignatureRecord> records() const {
    std::vector<SignatureRecord> out;
    for (const auto& [name, ps] : projects_) {
      for (const auto& [id, entry] : ps.records) out.push_back(entry.record);
    }
    return out;
  }

  const BuildStats& stats() const { return stats_; }

 private:
  void hash_into(SignatureRecord& rec, const std::string& body) const {
    rec.tlsh = tlsh_digest(body);
    const auto toks = tokenize(body);
    rec.embedding = embeddable(toks, weights_->vocab()) ? embed_plain(toks, *weights_) : EmbeddingVector{};
  }

  struct FileState {
    std::uint64_t hash = 0;
    std::vector<SourceFunction> functions;
  };
  struct AsmEntry {
    EmbeddingVector embedding;
    std::uint32_t blocks = 0;
  };
  struct Entry {
    SignatureRecord record;
    std::uint64_t body_hash = 0;
    bool hashed = false;
  };
  struct ProjectState {
    bool started = false;
    std::uint64_t last_commit = 0;
    std::map<std::string, FileState> files;
    bool has_listing = false;
    std::uint64_t listing_hash = 0;
    std::map<std::string, AsmEntry> asm_cache;
    std::map<FunctionId, Entry> records;
  };

  const ModelWeights* weights_;
  std::map<std::string, ProjectState> projects_;
  BuildStats stats_;
};

// Snapshots are applied in (project, commit_index) order.
inline std::vector<SignatureRecord> generate_signatures_incremental(
    std::vector<CommitSnapshot> snapshots, const ModelWeights& weights,
    BuildStats* stats = nullptr, std::vector<Diagnostic>* diagnostics = nullptr) {
  std::stable_sort(snapshots.begin(), snapshots.end(), [](const auto& a, const auto& b) {
    return a.project != b.project ? a.project < b.project : a.commit_index < b.commit_index;
  });
  SignatureBuilder builder(weights);
  for (const auto& s : snapshots) builder.apply(s, diagnostics);
  if (stats) *stats = builder.stats();
  return builder.records();
}

// Reads `<root>/<project>/commits/<index>_<timestamp>/...` trees.
inline std::vector<CommitSnapshot> load_snapshots(const std::filesystem::path& oss_root) {
  namespace fs = std::filesystem;
  std::vector<CommitSnapshot> out;
  if (!fs::is_directory(oss_root)) throw Error("not a directory: " + oss_root.string());
  std::vector<fs::path> projects;
  for (const auto& e : fs::directory_iterator(oss_root)) {
    if (e.is_directory()) projects.push_back(e.path());
  }
  std::sort(projects.begin(), projects.end());
  for (const auto& pdir : projects) {
    const auto cdir = pdir / "commits";
    if (!fs::is_directory(cdir)) continue;
    std::vector<fs::path> commits;
    for (const auto& e : fs::directory_iterator(cdir)) {
      if (e.is_directory()) commits.push_back(e.path());
    }
    for (const auto& c : commits) {
      const auto name = c.filename().string();
      const auto us = name.find('_');
      if (us == std::string::npos) throw Error("bad commit directory name: " + name);
      CommitSnapshot snap;
      snap.project = pdir.filename().string();
      try {
        snap.commit_index = std::stoull(name.substr(0, us));
        snap.timestamp = std::stoll(name.substr(us + 1));
      } catch (const std::exception&) {
        throw Error("bad commit directory name: " + name);
      }
      std::vector<fs::path> files;
      for (const auto& e : fs::recursive_directory_iterator(c)) {
        if (e.is_regular_file()) files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        snap.files[fs::relative(f, c).generic_string()] = read_file_text(f.string());
      }
      out.push_back(std::move(snap));
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.project != b.project ? a.project < b.project : a.commit_index < b.commit_index;
  });
  return out;
}

struct SegmentParams {
  int tlsh_threshold = 30;        // delta
  double embedding_radius = 0.35;  // rho
};

enum class Audience : std::uint8_t { client = 0, server = 1 };

inline std::string to_string(Audience a) { return a == Audience::server ? "server" : "client"; }

inline Audience parse_audience(std::string_view s) {
  if (s == "client") return Audience::client;
  if (s == "server") return Audience::server;
  throw ConfigError("unknown audience '" + std::string(s) + "'");
}

struct SegmentedDb {
  ModelRef model;
  std::optional<ModelWeights> weights;   // present only in server-side copies
  std::vector<std::string> projects;     // sorted
  std::vector<std::uint64_t> counts;     // live records per project
  std::vector<SignatureRecord> records;  // sorted by (project, fid)

  std::size_t project_index(std::string_view name) const {
    auto it = std::lower_bound(projects.begin(), projects.end(), name);
    if (it == projects.end() || *it != name) throw Error("unknown project " + std::string(name));
    return static_cast<std::size_t>(it - projects.begin());
  }

  std::uint64_t count(std::string_view project) const { return counts[project_index(project)]; }

  std::size_t live_records() const {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(),
                                                  [](const auto& r) { return r.live(); }));
  }

  // Call edges and ownership are kept on the records; these views give the
  // symbol-table reading of them.
  std::map<std::string, std::vector<std::size_t>> symbols_by_name() const {
    std::map<std::string, std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (records[i].live()) out[records[i].fid.name].push_back(i);
    }
    return out;
  }

  friend bool operator==(const SegmentedDb&, const SegmentedDb&) = default;
};

inline void recount(SegmentedDb& db) {
  std::set<std::string> names;
  for (const auto& r : db.records) names.insert(r.project);
  db.projects.assign(names.begin(), names.end());
  db.counts.assign(db.projects.size(), 0);
  for (const auto& r : db.records) {
    if (r.live()) ++db.counts[db.project_index(r.project)];
  }
}

namespace ossdb_detail {

inline bool similar(const SignatureRecord& a, const SignatureRecord& b, const SegmentParams& p) {
  if (a.tlsh && b.tlsh && tlsh_distance(*a.tlsh, *b.tlsh) < p.tlsh_threshold) return true;
  if (a.embedding.dim() > 0 && a.embedding.dim() == b.embedding.dim() &&
      embedding_distance(a.embedding, b.embedding) < p.embedding_radius) {
    return true;
  }
  return false;
}

// Seniority order: earlier first_seen wins, ties by project name.
inline bool senior(const SignatureRecord& a, const SignatureRecord& b) {
  if (a.first_seen.timestamp != b.first_seen.timestamp) {
    return a.first_seen.timestamp < b.first_seen.timestamp;
  }
  return a.project < b.project;
}

}  // namespace ossdb_detail

// One combined redundancy-elimination and segmentation pass. A live record
// survives iff it is the most senior among itself and its similar records
// in other projects; N counts the distinct projects of that group.
inline SegmentedDb segment_database(std::vector<SignatureRecord> records, const ModelRef& model,
                                    const SegmentParams& params = {}) {
  using namespace ossdb_detail;
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return a.project != b.project ? a.project < b.project : a.fid < b.fid;
  });
  const std::size_t n = records.size();
  std::vector<char> keep(n, 1);
  std::vector<std::uint32_t> group_projects(n, 1);
  // Group live records by project so same-project pairs are skipped cheaply.
  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < n; ++i) {
    if (records[i].live()) live.push_back(i);
  }
  std::vector<std::set<std::string>> seen(n);
  for (std::size_t a = 0; a < live.size(); ++a) {
    const auto i = live[a];
    for (std::size_t b = a + 1; b < live.size(); ++b) {
      const auto j = live[b];
      if (records[i].project == records[j].project) continue;
      if (!similar(records[i], records[j], params)) continue;
      seen[i].insert(records[j].project);
      seen[j].insert(records[i].project);
      if (senior(records[i], records[j])) {
        keep[j] = 0;
      } else {
        keep[i] = 0;
      }
    }
  }
  SegmentedDb db;
  db.model = model;
  for (std::size_t i = 0; i < n; ++i) {
    if (!keep[i]) continue;
    auto r = std::move(records[i]);
    if (r.live()) {
      r.similar_project_count = std::max<std::uint32_t>(
          r.similar_project_count, static_cast<std::uint32_t>(1 + seen[i].size()));
    }
    db.records.push_back(std::move(r));
  }
  recount(db);
  return db;
}

// ---------------------------------------------------------------------------
// Persistence
//
//   "PPSCADB1" u32 version u8 audience
//   model:    u64 seed u32 dim u32 vocab u8 activation
//   projects: u64 count { str name, u64 live_count }
//   records:  u64 count { fid, u32 project, u8 flags, [35 tlsh],
//                         [u32 dim, dim x f64], [u32 dim, dim x f64, u32 blocks],
//                         u64 commit, i64 timestamp, u32 loc, u32 N }
//   symbols:  u64 count { u64 record, u64 ncallees, ncallees x fid }
//   matrix:   u8 present [dim x vocab f32]
//
// fid = u64 scope count, scope strings, name string. Strings are u32 length
// plus bytes. first_seen.project is always the owning project.

inline constexpr std::string_view kDbMagic = "PPSCADB1";
inline constexpr std::uint32_t kDbVersion = 1;

namespace ossdb_detail {

enum RecordFlags : std::uint8_t {
  kHasTlsh = 1,
  kTombstoned = 2,
  kHasEmbedding = 4,
  kHasAsm = 8,
};

inline void write_fid(ByteWriter& w, const FunctionId& id) {
  w.u64(id.scope.size());
  for (const auto& s : id.scope) w.str(s);
  w.str(id.name);
}

inline FunctionId read_fid(ByteReader& r) {
  FunctionId id;
  const auto n = r.count(4);
  for (std::uint64_t i = 0; i < n; ++i) id.scope.push_back(r.str());
  id.name = r.str();
  return id;
}

inline void write_vec(ByteWriter& w, const EmbeddingVector& v) {
  w.u32(static_cast<std::uint32_t>(v.dim()));
  for (double x : v.values) w.f64(x);
}

inline EmbeddingVector read_vec(ByteReader& r) {
  const auto d = r.u32();
  if (d > r.remaining() / 8) throw FormatError("db file: embedding exceeds remaining bytes");
  std::vector<double> v(d);
  for (auto& x : v) x = r.f64();
  // Stored norm is recomputed from the values, so it is bit-identical.
  return EmbeddingVector(std::move(v));
}

}  // namespace ossdb_detail

inline std::vector<std::uint8_t> export_db_bytes(const SegmentedDb& db, Audience audience) {
  using namespace ossdb_detail;
  ByteWriter w;
  w.magic(kDbMagic);
  w.u32(kDbVersion);
  w.u8(static_cast<std::uint8_t>(audience));
  // The seed regenerates the matrix, so clients get only the shape.
  w.u64(audience == Audience::server ? db.model.seed : 0);
  w.u32(db.model.dim);
  w.u32(db.model.vocab);
  w.u8(static_cast<std::uint8_t>(db.model.activation));

  w.u64(db.projects.size());
  for (std::size_t i = 0; i < db.projects.size(); ++i) {
    w.str(db.projects[i]);
    w.u64(db.counts[i]);
  }

  w.u64(db.records.size());
  for (const auto& r : db.records) {
    write_fid(w, r.fid);
    w.u32(static_cast<std::uint32_t>(db.project_index(r.project)));
    std::uint8_t flags = 0;
    if (r.tlsh) flags |= kHasTlsh;
    if (r.tombstoned) flags |= kTombstoned;
    if (r.embedding.dim() > 0) flags |= kHasEmbedding;
    if (r.asm_embedding.dim() > 0) flags |= kHasAsm;
    w.u8(flags);
    if (r.tlsh) {
      const auto b = r.tlsh->to_bytes();
      w.bytes(b);
    }
    if (r.embedding.dim() > 0) write_vec(w, r.embedding);
    if (r.asm_embedding.dim() > 0) {
      write_vec(w, r.asm_embedding);
      w.u32(r.asm_blocks);
    }
    w.u64(r.first_seen.commit_index);
    w.i64(r.first_seen.timestamp);
    w.u32(r.loc);
    w.u32(r.similar_project_count);
  }

  std::size_t with_edges = 0;
  for (const auto& r : db.records) with_edges += r.callees.empty() ? 0 : 1;
  w.u64(with_edges);
  for (std::size_t i = 0; i < db.records.size(); ++i) {
    const auto& r = db.records[i];
    if (r.callees.empty()) continue;
    w.u64(i);
    w.u64(r.callees.size());
    for (const auto& c : r.callees) write_fid(w, c);
  }

  if (audience == Audience::server) {
    w.u8(1);
    const ModelWeights generated = db.weights ? ModelWeights{} : ModelWeights::generate(db.model);
    const auto& weights = db.weights ? *db.weights : generated;
    if (!(weights.ref() == db.model)) throw Error("db weights do not match the model reference");
    for (float v : weights.projection()) w.f32(v);
  } else {
    w.u8(0);
  }
  return w.take();
}

struct ImportedDb {
  SegmentedDb db;
  Audience audience = Audience::client;
};

inline ImportedDb import_db_bytes(std::span<const std::uint8_t> bytes) {
  using namespace ossdb_detail;
  ByteReader r(bytes, "db file");
  r.expect_magic(kDbMagic);
  if (const auto v = r.u32(); v != kDbVersion) {
    throw FormatError("db file: unsupported version " + std::to_string(v));
  }
  ImportedDb out;
  const auto aud = r.u8();
  if (aud > 1) throw FormatError("db file: unknown audience byte");
  out.audience = static_cast<Audience>(aud);
  auto& db = out.db;
  db.model.seed = r.u64();
  db.model.dim = r.u32();
  db.model.vocab = r.u32();
  const auto act = r.u8();
  if (act > 1) throw FormatError("db file: unknown activation byte");
  db.model.activation = static_cast<Activation>(act);

  const auto np = r.count(12);
  for (std::uint64_t i = 0; i < np; ++i) {
    db.projects.push_back(r.str());
    db.counts.push_back(r.u64());
  }
  if (!std::is_sorted(db.projects.begin(), db.projects.end())) {
    throw FormatError("db file: project table not sorted");
  }
  const auto nr = r.count(16);
  for (std::uint64_t i = 0; i < nr; ++i) {
    SignatureRecord rec;
    rec.fid = read_fid(r);
    const auto pi = r.u32();
    if (pi >= db.projects.size()) throw FormatError("db file: project index out of range");
    rec.project = db.projects[pi];
    const auto flags = r.u8();
    if (flags & ~(kHasTlsh | kTombstoned | kHasEmbedding | kHasAsm)) {
      throw FormatError("db file: unknown record flags");
    }
    if (flags & kHasTlsh) rec.tlsh = TlshDigest::from_bytes(r.bytes(TlshDigest::kSerializedBytes));
    rec.tombstoned = (flags & kTombstoned) != 0;
    if (flags & kHasEmbedding) rec.embedding = read_vec(r);
    if (flags & kHasAsm) {
      rec.asm_embedding = read_vec(r);
      rec.asm_blocks = r.u32();
    }
    rec.first_seen.project = rec.project;
    rec.first_seen.commit_index = r.u64();
    rec.first_seen.timestamp = r.i64();
    rec.loc = r.u32();
    rec.similar_project_count = r.u32();
    db.records.push_back(std::move(rec));
  }
  const auto ns = r.count(16);
  for (std::uint64_t i = 0; i < ns; ++i) {
    const auto idx = r.u64();
    if (idx >= db.records.size()) throw FormatError("db file: symbol record out of range");
    const auto nc = r.count(12);
    auto& callees = db.records[idx].callees;
    for (std::uint64_t c = 0; c < nc; ++c) callees.push_back(read_fid(r));
  }
  const auto has_matrix = r.u8();
  if (has_matrix > 1) throw FormatError("db file: bad matrix marker");
  if (has_matrix) {
    if (out.audience != Audience::server) throw FormatError("db file: client export carries a matrix");
    const std::size_t n = static_cast<std::size_t>(db.model.dim) * db.model.vocab;
    if (r.remaining() != n * 4) throw FormatError("db file: matrix size mismatch");
    ByteWriter mw;
    mw.magic(ModelWeights::kMagic);
    mw.u32(ModelWeights::kVersion);
    mw.u64(db.model.seed);
    mw.u32(db.model.dim);
    mw.u32(db.model.vocab);
    mw.u8(static_cast<std::uint8_t>(db.model.activation));
    mw.bytes(r.bytes(n * 4));
    db.weights = ModelWeights::deserialize(mw.data());
  }
  if (!r.done()) throw FormatError("db file: trailing bytes");
  return out;
}

inline void export_db(const SegmentedDb& db, const std::string& path, Audience audience) {
  write_file_bytes(path, export_db_bytes(db, audience));
}

inline ImportedDb import_db(const std::string& path) { return import_db_bytes(read_file_bytes(path)); }

// Client-side view: drops the matrix and the seed it derives from.
inline SegmentedDb client_view(SegmentedDb db) {
  db.weights.reset();
  db.model.seed = 0;
  return db;
}

// ---------------------------------------------------------------------------
// Indexes over live records; refs are record positions, which are already in
// (project, fid) order.

struct DbIndexes {
  TlshIndex tlsh;
  EmbeddingIndex embedding;
  EmbeddingIndex asm_embedding;
};

inline DbIndexes build_indexes(const SegmentedDb& db, SearchMode mode = SearchMode::exact) {
  std::vector<TlshDigest> t;
  std::vector<std::size_t> tr;
  std::vector<EmbeddingVector> e, a;
  std::vector<std::size_t> er, ar;
  for (std::size_t i = 0; i < db.records.size(); ++i) {
    const auto& r = db.records[i];
    if (!r.live()) continue;
    if (r.tlsh) {
      t.push_back(*r.tlsh);
      tr.push_back(i);
    }
    if (r.embedding.dim() > 0) {
      e.push_back(r.embedding);
      er.push_back(i);
    }
    if (r.asm_embedding.dim() > 0) {
      a.push_back(r.asm_embedding);
      ar.push_back(i);
    }
  }
  // TLSH is not a vector space; its index is always brute force.
  DbIndexes idx;
  idx.tlsh = TlshIndex(std::move(t), std::move(tr));
  EmbeddingIndex::Options opts;
  opts.mode = mode;
  idx.embedding = EmbeddingIndex(std::move(e), std::move(er), opts);
  idx.asm_embedding = EmbeddingIndex(std::move(a), std::move(ar), opts);
  return idx;
}

}  // namespace ppsca
