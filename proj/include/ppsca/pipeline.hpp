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

// Client-side analysis of one codebase in each of the four modes.

#pragma once

#include <chrono>
#include <exception>
#include <filesystem>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "ppsca/corpus.hpp"
#include "ppsca/filters.hpp"
#include "ppsca/ingest.hpp"
#include "ppsca/matcher.hpp"
#include "ppsca/mpc/session.hpp"
#include "ppsca/ossdb.hpp"
#include "ppsca/sbb.hpp"

namespace ppsca {

enum class Mode { plain_tlsh, plain_embed, sbb, mpc };

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::plain_tlsh: return "plain-tlsh";
    case Mode::plain_embed: return "plain-embed";
    case Mode::sbb: return "sbb";
    case Mode::mpc: return "mpc";
  }
  return "?";
}

inline Mode parse_mode(std::string_view s) {
  for (auto m : {Mode::plain_tlsh, Mode::plain_embed, Mode::sbb, Mode::mpc}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown mode '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Inputs

struct TargetInput {
  std::string id;
  std::vector<SourceFunction> functions;
  CallGraph graph;
  std::vector<AssemblyFunction> asm_functions;
  std::size_t files = 0;  // source files with at least one function
};

// `files` maps relative paths to contents; .asm entries are listings.
inline TargetInput make_target(std::string id, const std::map<std::string, std::string>& files,
                               std::vector<Diagnostic>* diagnostics = nullptr) {
  TargetInput t;
  t.id = std::move(id);
  for (const auto& [path, text] : files) {
    if (is_listing_file(path)) {
      auto fns = parse_assembly_listing(text);
      std::move(fns.begin(), fns.end(), std::back_inserter(t.asm_functions));
    } else if (is_source_file(path)) {
      auto fns = extract_source_functions(text, path, diagnostics);
      if (!fns.empty()) ++t.files;
      std::move(fns.begin(), fns.end(), std::back_inserter(t.functions));
    }
  }
  t.graph = build_call_graph(t.functions);
  return t;
}

// Reads a target directory; an explicit listing replaces any .asm inside.
inline TargetInput load_target(const std::filesystem::path& dir,
                               const std::optional<std::filesystem::path>& listing = std::nullopt,
                               std::vector<Diagnostic>* diagnostics = nullptr) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error("input is not a directory: " + dir.string());
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir).generic_string();
    if (listing && is_listing_file(rel)) continue;
    if (is_source_file(e.path()) || is_listing_file(rel)) files[rel] = read_file_text(e.path().string());
  }
  if (listing) files["binary.asm"] = read_file_text(listing->string());
  auto name = fs::absolute(dir).lexically_normal().filename().string();
  if (name.empty()) name = fs::absolute(dir).lexically_normal().parent_path().filename().string();
  return make_target(name, files, diagnostics);
}

inline std::map<std::string, std::string> render_files(const std::vector<GenFile>& files) {
  std::map<std::string, std::string> out;
  for (const auto& f : files) out[f.path] = f.render();
  out["binary.asm"] = assembly_for_files(files);
  return out;
}

// The same snapshots load_snapshots would read back from write_corpus.
inline std::vector<CommitSnapshot> corpus_snapshots(const Corpus& corpus) {
  std::vector<CommitSnapshot> out;
  for (const auto& p : corpus.projects) {
    for (std::size_t c = 0; c < p.commits.size(); ++c) {
      out.push_back({p.name, c, p.commits[c].timestamp, render_files(p.commits[c].files)});
    }
  }
  return out;
}

inline std::vector<TargetInput> corpus_targets(const Corpus& corpus) {
  std::vector<TargetInput> out;
  for (const auto& t : corpus.targets) out.push_back(make_target(t.name, render_files(t.files)));
  return out;
}

inline SegmentedDb build_database(const std::vector<CommitSnapshot>& snapshots, const ModelRef& model,
                                  const SegmentParams& params, BuildStats* stats = nullptr,
                                  std::vector<Diagnostic>* diagnostics = nullptr) {
  auto weights = ModelWeights::generate(model);
  auto db = segment_database(generate_signatures_incremental(snapshots, weights, stats, diagnostics), model, params);
  db.weights = std::move(weights);
  return db;
}

inline DigestInput digest_input(const TargetInput& t) {
  DigestInput d;
  d.id = t.id;
  for (const auto& f : t.functions) {
    d.names.push_back(f.id.str());
    d.digests.push_back(tlsh_digest(f.normalized()));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Embedding engines

using StageTimings = std::vector<std::pair<std::string, double>>;

class Stopwatch {
 public:
  Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
  // Milliseconds since the last lap (or construction).
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(now - t0_).count();
    t0_ = now;
    return ms;
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  // One vector per token list, all in a single session. Stage timings are
  // appended to `timings`.
  virtual std::vector<EmbeddingVector> embed(const std::vector<std::vector<std::string>>& tokens,
                                             StageTimings& timings) = 0;
};

class PlainEmbedder : public Embedder {
 public:
  explicit PlainEmbedder(const ModelWeights& w) : w_(&w) {}

  std::vector<EmbeddingVector> embed(const std::vector<std::vector<std::string>>& tokens,
                                     StageTimings& timings) override {
    Stopwatch sw;
    std::vector<EmbeddingVector> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(embed_plain(t, *w_));
    timings.emplace_back("embed", sw.lap());
    return out;
  }

 private:
  const ModelWeights* w_;
};

// Both parties in one process over an in-memory pipe. A trusted dealer
// produces fresh triples for every session.
class LocalMpcEmbedder : public Embedder {
 public:
  LocalMpcEmbedder(const ModelWeights& w, std::uint64_t dealer_seed, std::size_t batch_size,
                   int frac_bits = mpc::kFracBits)
      : w_(&w), encoded_(mpc::encode_weights(w, frac_bits)), seed_(dealer_seed), batch_(batch_size), f_(frac_bits) {
    mpc::check_frac_bits(frac_bits);
    if (batch_size == 0) throw ConfigError("batch size must be positive");
  }

  std::vector<EmbeddingVector> embed(const std::vector<std::vector<std::string>>& tokens,
                                     StageTimings& timings) override {
    if (tokens.empty()) return {};
    Stopwatch sw;
    auto [t0, t1] = mpc::dealer_generate(seed_++, mpc::consumption_plan(w_->ref(), tokens.size(), batch_));
    timings.emplace_back("triples", sw.lap());

    auto [client_end, server_end] = mpc::MemoryPipe::make();
    mpc::RecordingChannel recorded(*server_end);
    std::exception_ptr server_error;
    std::thread server([&, party1 = std::move(t1)]() mutable {
      try {
        mpc::mpc_embed_server(
            recorded, *w_, encoded_,
            [&](const mpc::Hello&) { return mpc::TripleStore(std::move(party1)); }, std::nullopt, f_);
      } catch (...) {
        server_error = std::current_exception();
        server_end->close();
      }
    });
    std::vector<EmbeddingVector> out;
    try {
      mpc::TripleStore store(std::move(t0));
      out = mpc::mpc_embed_client(*client_end, w_->ref(), tokens, store, batch_, f_);
    } catch (...) {
      client_end->close();
      server.join();
      throw;
    }
    server.join();
    if (server_error) std::rethrow_exception(server_error);
    transcript_ = recorded.transcript();
    ++sessions_;
    timings.emplace_back("embed", sw.lap());
    return out;
  }

  // Server-side view of the last session.
  const mpc::SessionTranscript& last_transcript() const { return transcript_; }
  std::size_t sessions() const { return sessions_; }

 private:
  const ModelWeights* w_;
  mpc::RingVec encoded_;
  std::uint64_t seed_;
  std::size_t batch_;
  int f_;
  mpc::SessionTranscript transcript_;
  std::size_t sessions_ = 0;
};

// ---------------------------------------------------------------------------
// Analysis

struct AnalysisOptions {
  Mode mode = Mode::plain_embed;
  bool filters = true;  // off: embed every source function, no symbol or asm stage
  FilterConfig filter;
  MatchConfig match;
  SbbConfig sbb;
};

// A DB as the client sees it, with lookup structures built once.
class ClientDb {
 public:
  explicit ClientDb(const SegmentedDb& db, SearchMode search = SearchMode::exact)
      : db_(&db), idx_(build_indexes(db, search)), table_(db), counts_(project_counts(db)) {}

  ClientDb(const ClientDb&) = delete;
  ClientDb& operator=(const ClientDb&) = delete;

  const SegmentedDb& db() const { return *db_; }
  const DbIndexes& indexes() const { return idx_; }
  const SymbolTable& symbols() const { return table_; }
  const ProjectCounts& counts() const { return counts_; }

 private:
  const SegmentedDb* db_;
  DbIndexes idx_;
  SymbolTable table_;
  ProjectCounts counts_;
};

inline nlohmann::ordered_json config_echo(const AnalysisOptions& o) {
  auto j = to_json(o.match);
  j["filters"] = {{"enabled", o.filters},
                  {"symbol", o.filter.symbol},
                  {"source", o.filter.source},
                  {"assembly", o.filter.assembly},
                  {"theta1", o.filter.theta1},
                  {"theta2", o.filter.theta2},
                  {"complex_name_len", o.filter.complex_name_len}};
  if (o.mode == Mode::sbb) {
    j["gamma"] = o.sbb.gamma;
    j["theta"] = o.sbb.theta;
    j["seed"] = o.sbb.seed;
  }
  return j;
}

inline ScaReport analyze_tlsh(const TargetInput& t, const ClientDb& db, const AnalysisOptions& o) {
  o.match.validate();
  Stopwatch total, sw;
  StageTimings timings;
  const auto input = digest_input(t);
  timings.emplace_back("signatures", sw.lap());
  const auto matches = match_tlsh(input.digests, db.indexes().tlsh, o.match.tlsh_threshold);
  timings.emplace_back("match", sw.lap());
  auto verdicts = decide_projects(evidence_from(matches, input.names, db.db(), EvidenceSource::tlsh), db.counts(),
                                  DecisionRule::ratio, o.match);
  timings.emplace_back("decide", sw.lap());
  timings.emplace_back("total", total.lap());
  auto r = generate_report(t.id, to_string(Mode::plain_tlsh), DecisionRule::ratio, std::move(verdicts),
                           to_json(o.match), std::move(timings));
  r.stats = {{"functions", t.functions.size()}, {"tlsh_matches", matches.size()}};
  return r;
}

// The SBB client needs no DB: only the bucket service.
inline ScaReport analyze_sbb(const TargetInput& t, BucketService& server, const AnalysisOptions& o) {
  o.match.validate();
  Stopwatch total, sw;
  StageTimings timings;
  const auto input = digest_input(t);
  timings.emplace_back("signatures", sw.lap());
  auto run = sbb_sca_pipeline(input, server, o.sbb, o.match);
  timings.emplace_back("match", sw.lap());
  timings.emplace_back("total", total.lap());
  run.report.timings_ms = std::move(timings);
  run.report.stats = {{"functions", t.functions.size()}, {"queries", run.sent.size()}};
  return std::move(run.report);
}

// plain-embed and mpc: filters, one embedding session, weighted decision.
inline ScaReport analyze_embedding(const TargetInput& t, const ClientDb& db, Embedder& embedder,
                                   const AnalysisOptions& o) {
  o.match.validate();
  const auto vocab = db.db().model.vocab;
  Stopwatch total, sw;
  StageTimings timings;

  FilterOutcome f;
  if (o.filters) {
    f = run_filters(t.functions, t.graph, t.asm_functions, db.symbols(), o.filter);
  } else {
    for (std::size_t i = 0; i < t.functions.size(); ++i) {
      f.symbol.remaining.push_back(i);
      f.source_selected.push_back(i);
    }
    f.source_disposition.assign(t.functions.size(), Disposition::selected);
    f.asm_disposition.assign(t.asm_functions.size(), Disposition::dropped);
  }
  std::vector<std::vector<std::string>> tokens;
  std::vector<std::size_t> src_rows, asm_rows;
  for (auto i : f.source_selected) {
    auto tok = tokenize(t.functions[i].normalized());
    if (!embeddable(tok, vocab)) continue;
    src_rows.push_back(i);
    tokens.push_back(std::move(tok));
  }
  for (auto i : f.asm_selected) {
    auto tok = tokenize(t.asm_functions[i].instruction_text());
    if (!embeddable(tok, vocab)) continue;
    asm_rows.push_back(i);
    tokens.push_back(std::move(tok));
  }
  timings.emplace_back("filters", sw.lap());

  const auto vecs = embedder.embed(tokens, timings);
  if (vecs.size() != tokens.size()) throw Error("embedder returned the wrong number of vectors");
  sw.lap();

  const std::vector<EmbeddingVector> src_vecs(vecs.begin(), vecs.begin() + static_cast<std::ptrdiff_t>(src_rows.size()));
  std::vector<std::string> src_names;
  for (auto i : src_rows) src_names.push_back(t.functions[i].id.str());
  const auto emb = evidence_from(match_embedding(src_vecs, db.indexes().embedding, o.match.embedding_radius),
                                 src_names, db.db(), EvidenceSource::embedding);
  std::vector<AsmMatch> asm_matches;
  for (std::size_t r = 0; r < asm_rows.size(); ++r) {
    const auto nn = db.indexes().asm_embedding.top_k(vecs[src_rows.size() + r], 1);
    if (nn.empty()) continue;
    asm_matches.push_back({t.asm_functions[asm_rows[r]].name, nn[0].ref, nn[0].distance});
  }
  const auto combined = combine_evidence(db.symbols(), t.functions, f.symbol.evidence, emb, asm_matches,
                                         o.match.embedding_radius);
  timings.emplace_back("match", sw.lap());
  auto verdicts = decide_projects(combined.evidence, db.counts(), DecisionRule::weighted, o.match);
  timings.emplace_back("decide", sw.lap());
  timings.emplace_back("total", total.lap());

  auto r = generate_report(t.id, to_string(o.mode), DecisionRule::weighted, std::move(verdicts), config_echo(o),
                           std::move(timings));
  const std::size_t embedded = src_rows.size() + asm_rows.size();
  r.stats = {{"functions", t.functions.size()},
             {"files", t.files},
             {"asm_functions", t.asm_functions.size()},
             {"claimed", f.symbol.claimed.size()},
             {"source_selected", f.source_selected.size()},
             {"asm_selected", f.asm_selected.size()},
             {"embedded", embedded},
             {"embedded_ratio", t.functions.empty() ? 0.0
                                                    : static_cast<double>(embedded) /
                                                          static_cast<double>(t.functions.size())},
             {"asm_accepted", combined.asm_accepted},
             {"asm_discarded", combined.asm_discarded}};
  return r;
}

// Sum of the stage timings, excluding the separately measured total.
inline double stage_sum_ms(const ScaReport& r) {
  double s = 0.0;
  for (const auto& [k, v] : r.timings_ms) {
    if (k != "total") s += v;
  }
  return s;
}

}  // namespace ppsca
