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

// Requests a client can make of the server over any framed channel, and
// the server loop that answers them.
//
//   DB_REQUEST            -> DB_PAYLOAD (client-audience export)
//   COUNTS_REQUEST        -> COUNTS_REPLY
//   BUCKET_QUERY          -> BUCKET_REPLY
//   HELLO                 -> private embedding session
//   BYE                   -> end of connection

#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ppsca/mpc/beaver.hpp"
#include "ppsca/mpc/session.hpp"
#include "ppsca/mpc/wire.hpp"
#include "ppsca/ossdb.hpp"
#include "ppsca/pipeline.hpp"
#include "ppsca/sbb.hpp"

namespace ppsca {

using mpc::Channel;
using mpc::Frame;
using mpc::MsgType;

// ---------------------------------------------------------------------------
// Payloads

inline std::vector<std::uint8_t> encode_bucket_query(const TlshDigest& q, std::uint64_t theta) {
  ByteWriter w;
  w.u64(theta);
  const auto b = q.to_bytes();
  w.bytes(b);
  return w.take();
}

inline std::pair<TlshDigest, std::uint64_t> decode_bucket_query(std::span<const std::uint8_t> p) {
  ByteReader r(p, "bucket query");
  const auto theta = r.u64();
  const auto d = TlshDigest::from_bytes(r.bytes(TlshDigest::kSerializedBytes));
  if (!r.done()) throw ProtocolError("bucket query: trailing bytes");
  return {d, theta};
}

inline std::vector<std::uint8_t> encode_bucket_reply(const std::vector<BucketEntry>& bucket) {
  ByteWriter w;
  w.u64(bucket.size());
  for (const auto& e : bucket) {
    w.u64(e.record);
    w.str(e.project);
    ossdb_detail::write_fid(w, e.fid);
    const auto b = e.digest.to_bytes();
    w.bytes(b);
  }
  return w.take();
}

inline std::vector<BucketEntry> decode_bucket_reply(std::span<const std::uint8_t> p) {
  ByteReader r(p, "bucket reply");
  const auto n = r.count(8 + TlshDigest::kSerializedBytes);
  std::vector<BucketEntry> out;
  for (std::uint64_t i = 0; i < n; ++i) {
    BucketEntry e;
    e.record = r.u64();
    e.project = r.str();
    e.fid = ossdb_detail::read_fid(r);
    e.digest = TlshDigest::from_bytes(r.bytes(TlshDigest::kSerializedBytes));
    out.push_back(std::move(e));
  }
  if (!r.done()) throw ProtocolError("bucket reply: trailing bytes");
  return out;
}

inline std::vector<std::uint8_t> encode_counts(const ProjectCounts& c) {
  ByteWriter w;
  w.u64(c.size());
  for (const auto& [p, n] : c) {
    w.str(p);
    w.u64(n);
  }
  return w.take();
}

inline ProjectCounts decode_counts(std::span<const std::uint8_t> p) {
  ByteReader r(p, "counts reply");
  const auto n = r.count(12);
  ProjectCounts out;
  for (std::uint64_t i = 0; i < n; ++i) {
    auto name = r.str();
    out[name] = r.u64();
  }
  if (!r.done()) throw ProtocolError("counts reply: trailing bytes");
  return out;
}

// ---------------------------------------------------------------------------
// Triple files on disk: <dir>/triples_<seed>_p<party>.bin. A seed is spent
// once; the server leaves <dir>/triples_<seed>.used behind.

inline std::filesystem::path triple_path(const std::filesystem::path& dir, std::uint64_t seed, int party) {
  return dir / ("triples_" + std::to_string(seed) + "_p" + std::to_string(party) + ".bin");
}

inline void write_triple_files(const std::filesystem::path& dir, std::uint64_t seed,
                               const std::vector<mpc::TripleShape>& shapes) {
  std::filesystem::create_directories(dir);
  auto [f0, f1] = mpc::dealer_generate(seed, shapes);
  write_file_bytes(triple_path(dir, seed, 0).string(), f0.serialize());
  write_file_bytes(triple_path(dir, seed, 1).string(), f1.serialize());
}

inline mpc::TripleStore load_triples(const std::filesystem::path& file, int party) {
  auto f = mpc::TripleFile::deserialize(read_file_bytes(file.string()));
  if (f.party != party) throw ProtocolError("triple file belongs to party " + std::to_string(f.party));
  return mpc::TripleStore(std::move(f));
}

inline mpc::TripleProvider directory_triple_provider(std::filesystem::path dir) {
  return [dir = std::move(dir)](const mpc::Hello& h) {
    const auto used = dir / ("triples_" + std::to_string(h.dealer_seed) + ".used");
    if (std::filesystem::exists(used)) throw ProtocolError("dealer seed " + std::to_string(h.dealer_seed) + " already used");
    const auto path = triple_path(dir, h.dealer_seed, 1);
    if (!std::filesystem::exists(path)) throw ProtocolError("no triples for dealer seed " + std::to_string(h.dealer_seed));
    auto store = load_triples(path, 1);
    if (store.seed() != h.dealer_seed) throw ProtocolError("triple file seed mismatch");
    write_file_text(used.string(), "used\n");
    return store;
  };
}

// ---------------------------------------------------------------------------
// Server

// Text transcript of SBB queries: "<session>\t<hex digest>" per line.
inline std::map<std::uint64_t, std::vector<TlshDigest>> read_sbb_transcript(const std::string& path) {
  std::map<std::uint64_t, std::vector<TlshDigest>> out;
  std::istringstream in(read_file_text(path));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("transcript line " + std::to_string(lineno) + ": missing tab");
    try {
      out[std::stoull(line.substr(0, tab))].push_back(TlshDigest::parse(line.substr(tab + 1)));
    } catch (const std::invalid_argument&) {
      throw ParseError("transcript line " + std::to_string(lineno) + ": bad session id");
    }
  }
  return out;
}

class ScaServer {
 public:
  // `db` must carry the model weights.
  ScaServer(const SegmentedDb& db, mpc::TripleProvider triples, int frac_bits = mpc::kFracBits)
      : db_(&db),
        client_bytes_(export_db_bytes(db, Audience::client)),
        sbb_(db),
        triples_(std::move(triples)),
        f_(frac_bits) {
    if (!db.weights) throw ConfigError("server needs a DB with model weights");
    mpc::check_frac_bits(frac_bits);
    encoded_ = mpc::encode_weights(*db.weights, frac_bits);
  }

  // Appends SBB queries to this file as they arrive.
  void set_transcript_file(std::string path) { transcript_path_ = std::move(path); }

  // Serves one connection until BYE or close. Returns false if the
  // connection ended with an error.
  bool serve(Channel& ch, std::ostream* log = nullptr) {
    const auto session = next_session_++;
    sbb_.begin_session();
    try {
      for (;;) {
        Frame f;
        try {
          f = ch.recv();
        } catch (const ProtocolError& e) {
          if (std::string_view(e.what()).find("closed") != std::string_view::npos) return true;
          throw;
        }
        switch (f.type) {
          case MsgType::db_request:
            ch.send(MsgType::db_payload, client_bytes_);
            break;
          case MsgType::counts_request:
            ch.send(MsgType::counts_reply, encode_counts(project_counts(*db_)));
            break;
          case MsgType::bucket_query: {
            const auto [q, theta] = decode_bucket_query(f.payload);
            if (theta == 0) mpc::abort_session(ch, "theta must be positive");
            const auto bucket = sbb_.query(q, theta);
            if (transcript_path_) {
              std::ofstream out(*transcript_path_, std::ios::app);
              out << session << '\t' << q.hex() << '\n';
            }
            ch.send(MsgType::bucket_reply, encode_bucket_reply(bucket));
            break;
          }
          case MsgType::hello:
            mpc::mpc_embed_server(ch, *db_->weights, encoded_, triples_, std::move(f), f_);
            ++mpc_sessions_;
            break;
          case MsgType::bye:
            return true;
          default:
            mpc::abort_session(ch, "unexpected " + mpc::to_string(f.type));
        }
      }
    } catch (const std::exception& e) {
      if (log) *log << "session " << session << ": " << e.what() << '\n';
      ch.close();
      return false;
    }
  }

  const SbbServer& sbb() const { return sbb_; }
  std::size_t mpc_sessions() const { return mpc_sessions_; }
  const std::vector<std::uint8_t>& client_export() const { return client_bytes_; }

 private:
  const SegmentedDb* db_;
  std::vector<std::uint8_t> client_bytes_;
  SbbServer sbb_;
  mpc::TripleProvider triples_;
  int f_;
  mpc::RingVec encoded_;
  std::optional<std::string> transcript_path_;
  std::uint64_t next_session_ = 0;
  std::size_t mpc_sessions_ = 0;
};

// ---------------------------------------------------------------------------
// Client side

inline ImportedDb download_db(Channel& ch) {
  ch.send(MsgType::db_request);
  auto db = import_db_bytes(ch.expect(MsgType::db_payload).payload);
  if (db.audience != Audience::client) throw ProtocolError("server sent a non-client DB");
  return db;
}

class RemoteBucketService : public BucketService {
 public:
  explicit RemoteBucketService(Channel& ch) : ch_(&ch) {}

  std::vector<BucketEntry> query(const TlshDigest& mutated, std::size_t theta) override {
    ch_->send(MsgType::bucket_query, encode_bucket_query(mutated, theta));
    return decode_bucket_reply(ch_->expect(MsgType::bucket_reply).payload);
  }

  ProjectCounts counts() override {
    ch_->send(MsgType::counts_request);
    return decode_counts(ch_->expect(MsgType::counts_reply).payload);
  }

 private:
  Channel* ch_;
};

// Client party of a private embedding session against a remote server.
class RemoteMpcEmbedder : public Embedder {
 public:
  RemoteMpcEmbedder(Channel& ch, ModelRef model, mpc::TripleStore triples, std::size_t batch_size,
                    int frac_bits = mpc::kFracBits)
      : ch_(&ch), model_(model), triples_(std::move(triples)), batch_(batch_size), f_(frac_bits) {}

  std::vector<EmbeddingVector> embed(const std::vector<std::vector<std::string>>& tokens,
                                     StageTimings& timings) override {
    if (tokens.empty()) return {};
    Stopwatch sw;
    auto out = mpc::mpc_embed_client(*ch_, model_, tokens, triples_, batch_, f_);
    timings.emplace_back("embed", sw.lap());
    return out;
  }

 private:
  Channel* ch_;
  ModelRef model_;
  mpc::TripleStore triples_;
  std::size_t batch_;
  int f_;
};

}  // namespace ppsca
