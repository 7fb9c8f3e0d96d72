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

// POSIX TCP transport for framed channels.

#pragma once

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <memory>
#include <string>
#include <utility>

#include "ppsca/mpc/wire.hpp"

namespace ppsca::net {

struct Address {
  std::string host;
  std::uint16_t port = 0;

  std::string str() const { return host + ":" + std::to_string(port); }
};

inline Address parse_address(std::string_view s) {
  const auto colon = s.rfind(':');
  if (colon == std::string_view::npos || colon == 0) throw ConfigError("address must be host:port, got '" + std::string(s) + "'");
  Address a;
  a.host = std::string(s.substr(0, colon));
  try {
    std::size_t used = 0;
    const auto p = std::stoul(std::string(s.substr(colon + 1)), &used);
    if (used != s.size() - colon - 1 || p > 65535) throw std::out_of_range("port");
    a.port = static_cast<std::uint16_t>(p);
  } catch (const std::exception&) {
    throw ConfigError("bad port in address '" + std::string(s) + "'");
  }
  return a;
}

class TcpChannel : public mpc::Channel {
 public:
  explicit TcpChannel(int fd) : fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  }
  ~TcpChannel() override { close(); }
  TcpChannel(const TcpChannel&) = delete;
  TcpChannel& operator=(const TcpChannel&) = delete;

  void write_bytes(std::span<const std::uint8_t> bytes) override {
    std::size_t off = 0;
    while (off < bytes.size()) {
      if (fd_ < 0) throw ProtocolError("connection closed");
      const auto n = ::send(fd_, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("send failed, connection closed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  void read_bytes(std::uint8_t* dst, std::size_t n) override {
    std::size_t off = 0;
    while (off < n) {
      if (fd_ < 0) throw ProtocolError("connection closed");
      const auto r = ::recv(fd_, dst + off, n - off, 0);
      if (r == 0) throw ProtocolError("connection closed by peer");
      if (r < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("recv failed, connection closed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(r);
    }
  }

  void close() override {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_;
};

inline std::unique_ptr<TcpChannel> tcp_connect(const Address& a) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (const int rc = ::getaddrinfo(a.host.c_str(), std::to_string(a.port).c_str(), &hints, &res); rc != 0) {
    throw ProtocolError("cannot resolve " + a.str() + ": " + ::gai_strerror(rc));
  }
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, &::freeaddrinfo);
  std::string last = "no addresses";
  for (auto* p = res; p; p = p->ai_next) {
    const int fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
    if (fd < 0) {
      last = std::strerror(errno);
      continue;
    }
    if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) return std::make_unique<TcpChannel>(fd);
    last = std::strerror(errno);
    ::close(fd);
  }
  throw ProtocolError("cannot connect to " + a.str() + ": " + last);
}

class TcpListener {
 public:
  // Port 0 picks a free port; see port().
  explicit TcpListener(const Address& a) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    if (const int rc = ::getaddrinfo(a.host.c_str(), std::to_string(a.port).c_str(), &hints, &res); rc != 0) {
      throw ProtocolError("cannot resolve " + a.str() + ": " + ::gai_strerror(rc));
    }
    std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, &::freeaddrinfo);
    fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd_ < 0) throw ProtocolError(std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd_, res->ai_addr, res->ai_addrlen) != 0 || ::listen(fd_, 16) != 0) {
      const std::string err = std::strerror(errno);
      ::close(fd_);
      throw ProtocolError("cannot listen on " + a.str() + ": " + err);
    }
    sockaddr_storage ss{};
    socklen_t len = sizeof ss;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&ss), &len);
    port_ = ss.ss_family == AF_INET6 ? ntohs(reinterpret_cast<sockaddr_in6*>(&ss)->sin6_port)
                                     : ntohs(reinterpret_cast<sockaddr_in*>(&ss)->sin_port);
  }
  ~TcpListener() {
    if (fd_ >= 0) ::close(fd_);
  }
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }

  std::unique_ptr<TcpChannel> accept() {
    for (;;) {
      const int fd = ::accept(fd_, nullptr, nullptr);
      if (fd >= 0) return std::make_unique<TcpChannel>(fd);
      if (errno != EINTR) throw ProtocolError(std::string("accept: ") + std::strerror(errno));
    }
  }

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

}  // namespace ppsca::net
