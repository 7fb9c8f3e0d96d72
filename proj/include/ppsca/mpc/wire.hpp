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

// Framing shared by every client/server exchange:
//
//   "PPS1" | u8 type | u64 payload length | payload
//
// and the channel abstraction the protocols run over.

#pragma once

#include <algorithm>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "ppsca/common.hpp"
#include "ppsca/mpc/ring.hpp"

namespace ppsca::mpc {

inline constexpr std::string_view kFrameMagic = "PPS1";
inline constexpr std::size_t kFrameHeader = 13;
inline constexpr std::uint64_t kMaxPayload = 1ull << 32;

enum class MsgType : std::uint8_t {
  hello = 1,
  eps_delta_open = 2,
  batch_header = 3,
  result_share = 4,
  abort = 5,
  db_request = 6,
  db_payload = 7,
  bucket_query = 8,
  bucket_reply = 9,
  counts_request = 10,
  counts_reply = 11,
  bye = 12,
};

inline std::string to_string(MsgType t) {
  switch (t) {
    case MsgType::hello: return "HELLO";
    case MsgType::eps_delta_open: return "EPS_DELTA_OPEN";
    case MsgType::batch_header: return "BATCH_HEADER";
    case MsgType::result_share: return "RESULT_SHARE";
    case MsgType::abort: return "ABORT";
    case MsgType::db_request: return "DB_REQUEST";
    case MsgType::db_payload: return "DB_PAYLOAD";
    case MsgType::bucket_query: return "BUCKET_QUERY";
    case MsgType::bucket_reply: return "BUCKET_REPLY";
    case MsgType::counts_request: return "COUNTS_REQUEST";
    case MsgType::counts_reply: return "COUNTS_REPLY";
    case MsgType::bye: return "BYE";
  }
  return "UNKNOWN";
}

struct Frame {
  MsgType type = MsgType::hello;
  std::vector<std::uint8_t> payload;
};

inline std::vector<std::uint8_t> encode_frame_header(MsgType type, std::uint64_t len) {
  ByteWriter w;
  w.magic(kFrameMagic);
  w.u8(static_cast<std::uint8_t>(type));
  w.u64(len);
  return w.take();
}

// Validates a 13-byte header; returns (type, payload length).
inline std::pair<MsgType, std::uint64_t> decode_frame_header(std::span<const std::uint8_t> h) {
  ByteReader r(h, "frame header");
  r.expect_magic(kFrameMagic);
  const auto t = r.u8();
  if (t < 1 || t > 12) throw ProtocolError("unknown message type " + std::to_string(t));
  const auto len = r.u64();
  if (len > kMaxPayload) throw ProtocolError("frame payload too large");
  return {static_cast<MsgType>(t), len};
}

inline std::vector<std::uint8_t> encode_frame(const Frame& f) {
  auto out = encode_frame_header(f.type, f.payload.size());
  out.insert(out.end(), f.payload.begin(), f.payload.end());
  return out;
}

// Byte-stream duplex endpoint. Implementations move raw bytes; framing is
// layered on top so memory and socket channels behave identically.
class Channel {
 public:
  virtual ~Channel() = default;
  virtual void write_bytes(std::span<const std::uint8_t> bytes) = 0;
  virtual void read_bytes(std::uint8_t* dst, std::size_t n) = 0;
  virtual void close() = 0;

  virtual void send(const Frame& f) {
    const auto bytes = encode_frame(f);
    write_bytes(bytes);
  }

  virtual Frame recv() {
    std::uint8_t h[kFrameHeader];
    read_bytes(h, kFrameHeader);
    const auto [type, len] = decode_frame_header({h, kFrameHeader});
    Frame f;
    f.type = type;
    f.payload.resize(len);
    if (len) read_bytes(f.payload.data(), len);
    return f;
  }

  void send(MsgType t, std::vector<std::uint8_t> payload = {}) { send(Frame{t, std::move(payload)}); }

  // Receives one frame and insists on its type; ABORT becomes an error.
  Frame expect(MsgType t) {
    auto f = recv();
    if (f.type == MsgType::abort) {
      throw ProtocolError("peer aborted: " + std::string(f.payload.begin(), f.payload.end()));
    }
    if (f.type != t) {
      throw ProtocolError("expected " + to_string(t) + ", got " + to_string(f.type));
    }
    return f;
  }
};

// In-process duplex pipe.
class MemoryPipe {
 public:
  class End : public Channel {
   public:
    End(std::shared_ptr<MemoryPipe> pipe, int side) : pipe_(std::move(pipe)), side_(side) {}
    ~End() override { close(); }

    void write_bytes(std::span<const std::uint8_t> bytes) override {
      auto& q = pipe_->queue_[1 - side_];
      std::lock_guard<std::mutex> lock(pipe_->mu_);
      if (pipe_->closed_) throw ProtocolError("channel closed");
      q.data.insert(q.data.end(), bytes.begin(), bytes.end());
      pipe_->cv_.notify_all();
    }

    void read_bytes(std::uint8_t* dst, std::size_t n) override {
      auto& q = pipe_->queue_[side_];
      std::unique_lock<std::mutex> lock(pipe_->mu_);
      pipe_->cv_.wait(lock, [&] { return q.available() >= n || pipe_->closed_; });
      if (q.available() < n) throw ProtocolError("channel closed");
      std::copy_n(q.data.begin() + static_cast<std::ptrdiff_t>(q.head), n, dst);
      q.head += n;
      if (q.head == q.data.size()) {
        q.data.clear();
        q.head = 0;
      }
    }

    void close() override {
      std::lock_guard<std::mutex> lock(pipe_->mu_);
      pipe_->closed_ = true;
      pipe_->cv_.notify_all();
    }

   private:
    std::shared_ptr<MemoryPipe> pipe_;
    int side_;
  };

  static std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make() {
    auto p = std::make_shared<MemoryPipe>();
    return {std::make_unique<End>(p, 0), std::make_unique<End>(p, 1)};
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  struct Buffer {
    std::vector<std::uint8_t> data;
    std::size_t head = 0;
    std::size_t available() const { return data.size() - head; }
  };
  Buffer queue_[2];
  bool closed_ = false;
};

enum class Direction : std::uint8_t { sent, received };

struct TranscriptEntry {
  Direction direction = Direction::sent;
  MsgType type = MsgType::hello;
  std::uint64_t length = 0;  // payload bytes
  std::size_t round = 0;     // increments whenever the direction flips

  friend bool operator==(const TranscriptEntry&, const TranscriptEntry&) = default;
};

using SessionTranscript = std::vector<TranscriptEntry>;

// Records every frame passing through another channel.
class RecordingChannel : public Channel {
 public:
  explicit RecordingChannel(Channel& inner) : inner_(&inner) {}

  using Channel::send;

  void write_bytes(std::span<const std::uint8_t> b) override { inner_->write_bytes(b); }
  void read_bytes(std::uint8_t* dst, std::size_t n) override { inner_->read_bytes(dst, n); }
  void close() override { inner_->close(); }

  void send(const Frame& f) override {
    inner_->send(f);
    log(Direction::sent, f);
  }

  Frame recv() override {
    auto f = inner_->recv();
    log(Direction::received, f);
    return f;
  }

  const SessionTranscript& transcript() const { return transcript_; }

 private:
  void log(Direction d, const Frame& f) {
    if (!transcript_.empty() && transcript_.back().direction != d) ++round_;
    transcript_.push_back({d, f.type, f.payload.size(), round_});
  }

  Channel* inner_;
  SessionTranscript transcript_;
  std::size_t round_ = 0;
};

// Matrices travel as row-major little-endian i64.
inline void put_ring(ByteWriter& w, const RingVec& v) {
  for (Ring x : v) w.u64(x);
}

inline RingVec get_ring(ByteReader& r, std::size_t n) {
  if (r.remaining() / 8 < n) throw ProtocolError("ring payload too short");
  RingVec v(n);
  for (auto& x : v) x = r.u64();
  return v;
}

}  // namespace ppsca::mpc
