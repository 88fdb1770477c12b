// Copyright 2026 kbauthz authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Pluggable byte transports. The in-process loopback has the same semantics
// as the TCP transport (blocking reads with timeout, orderly EOF on close),
// so the whole protocol test suite can run without a network.

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>

namespace kbauthz::net {

struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TimeoutError : TransportError {
  TimeoutError() : TransportError("transport timeout") {}
};

class ByteStream {
 public:
  virtual ~ByteStream() = default;
  // Reads up to n bytes. Returns 0 on orderly close; throws TimeoutError
  // when nothing arrives within the timeout.
  virtual size_t read_some(char* buf, size_t n,
                           std::chrono::milliseconds timeout) = 0;
  virtual void write_all(std::string_view data) = 0;
  virtual void close() = 0;
};

class Listener {
 public:
  virtual ~Listener() = default;
  // Blocks for the next connection; returns nullptr once shut down.
  virtual std::unique_ptr<ByteStream> accept() = 0;
  virtual void shutdown() = 0;
};

// ---------------------------------------------------------------------------
// loopback
// ---------------------------------------------------------------------------

namespace detail {

struct Pipe {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<char> data;
  bool closed = false;
};

}  // namespace detail

class LoopbackStream : public ByteStream {
 public:
  LoopbackStream(std::shared_ptr<detail::Pipe> in, std::shared_ptr<detail::Pipe> out)
      : in_(std::move(in)), out_(std::move(out)) {}

  ~LoopbackStream() override { close(); }

  size_t read_some(char* buf, size_t n,
                   std::chrono::milliseconds timeout) override {
    std::unique_lock lock(in_->mu);
    if (!in_->cv.wait_for(lock, timeout,
                          [&] { return !in_->data.empty() || in_->closed; }))
      throw TimeoutError();
    if (in_->data.empty()) return 0;  // closed
    size_t count = std::min(n, in_->data.size());
    for (size_t i = 0; i < count; ++i) {
      buf[i] = in_->data.front();
      in_->data.pop_front();
    }
    return count;
  }

  void write_all(std::string_view data) override {
    std::lock_guard lock(out_->mu);
    if (out_->closed) throw TransportError("write to closed stream");
    out_->data.insert(out_->data.end(), data.begin(), data.end());
    out_->cv.notify_all();
  }

  void close() override {
    for (auto& pipe : {in_, out_}) {
      std::lock_guard lock(pipe->mu);
      pipe->closed = true;
      pipe->cv.notify_all();
    }
  }

 private:
  std::shared_ptr<detail::Pipe> in_;
  std::shared_ptr<detail::Pipe> out_;
};

// Connection rendezvous: connect() hands the server half to the pending
// queue and returns the client half.
class LoopbackHub {
 public:
  std::unique_ptr<ByteStream> connect() {
    auto a = std::make_shared<detail::Pipe>();  // client -> server
    auto b = std::make_shared<detail::Pipe>();  // server -> client
    auto server_side = std::make_unique<LoopbackStream>(a, b);
    auto client_side = std::make_unique<LoopbackStream>(b, a);
    {
      std::lock_guard lock(mu_);
      if (closed_) throw TransportError("loopback hub is shut down");
      pending_.push_back(std::move(server_side));
      cv_.notify_all();
    }
    return client_side;
  }

  class HubListener : public Listener {
   public:
    explicit HubListener(LoopbackHub& hub) : hub_(hub) {}
    std::unique_ptr<ByteStream> accept() override { return hub_.accept(); }
    void shutdown() override { hub_.shutdown(); }

   private:
    LoopbackHub& hub_;
  };

  std::unique_ptr<Listener> listener() {
    return std::make_unique<HubListener>(*this);
  }

 private:
  std::unique_ptr<ByteStream> accept() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return !pending_.empty() || closed_; });
    if (pending_.empty()) return nullptr;
    auto s = std::move(pending_.front());
    pending_.pop_front();
    return s;
  }

  void shutdown() {
    std::lock_guard lock(mu_);
    closed_ = true;
    cv_.notify_all();
  }

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::unique_ptr<ByteStream>> pending_;
  bool closed_ = false;
};

// ---------------------------------------------------------------------------
// TCP
// ---------------------------------------------------------------------------

class TcpStream : public ByteStream {
 public:
  explicit TcpStream(int fd) : fd_(fd) {}
  ~TcpStream() override { close(); }

  size_t read_some(char* buf, size_t n,
                   std::chrono::milliseconds timeout) override {
    pollfd p{fd_, POLLIN, 0};
    int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (rc == 0) throw TimeoutError();
    if (rc < 0) throw TransportError("poll failed");
    ssize_t got = ::recv(fd_, buf, n, 0);
    if (got < 0) throw TransportError("recv failed");
    return static_cast<size_t>(got);
  }

  void write_all(std::string_view data) override {
    size_t sent = 0;
    while (sent < data.size()) {
      ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent,
                         MSG_NOSIGNAL);
      if (n <= 0) throw TransportError("send failed");
      sent += static_cast<size_t>(n);
    }
  }

  void close() override {
    int fd = fd_;
    fd_ = -1;
    if (fd >= 0) {
      ::shutdown(fd, SHUT_RDWR);
      ::close(fd);
    }
  }

 private:
  int fd_;
};

struct Endpoint {
  std::string host;
  uint16_t port = 0;
};

// "host:port" with a numeric port
inline Endpoint parse_endpoint(std::string_view address) {
  auto pos = address.rfind(':');
  if (pos == std::string_view::npos)
    throw TransportError("endpoint must be host:port, got '" +
                         std::string(address) + "'");
  Endpoint ep;
  ep.host = std::string(address.substr(0, pos));
  std::string port(address.substr(pos + 1));
  try {
    unsigned long v = std::stoul(port);
    if (v == 0 || v > 65535) throw std::out_of_range("port");
    ep.port = static_cast<uint16_t>(v);
  } catch (const std::exception&) {
    throw TransportError("bad port in endpoint '" + std::string(address) + "'");
  }
  return ep;
}

class TcpListener : public Listener {
 public:
  explicit TcpListener(int fd) : fd_(fd) {}
  ~TcpListener() override { shutdown(); }

  std::unique_ptr<ByteStream> accept() override {
    int conn = ::accept(fd_, nullptr, nullptr);
    if (conn < 0) return nullptr;  // listener was shut down
    return std::make_unique<TcpStream>(conn);
  }

  void shutdown() override {
    int fd = fd_;
    fd_ = -1;
    if (fd >= 0) {
      ::shutdown(fd, SHUT_RDWR);
      ::close(fd);
    }
  }

  uint16_t port() const { return port_; }
  void set_port(uint16_t p) { port_ = p; }

 private:
  int fd_;
  uint16_t port_ = 0;
};

inline std::unique_ptr<TcpListener> listen_tcp(const Endpoint& ep,
                                               int backlog = 16) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  std::string port = std::to_string(ep.port);
  if (::getaddrinfo(ep.host.empty() ? nullptr : ep.host.c_str(), port.c_str(),
                    &hints, &res) != 0)
    throw TransportError("cannot resolve " + ep.host);
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 &&
        ::listen(fd, backlog) == 0)
      break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw TransportError("cannot listen on " + ep.host + ":" + port);
  auto listener = std::make_unique<TcpListener>(fd);
  sockaddr_storage addr{};
  socklen_t len = sizeof(addr);
  if (::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) == 0) {
    if (addr.ss_family == AF_INET)
      listener->set_port(ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port));
    else if (addr.ss_family == AF_INET6)
      listener->set_port(ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port));
  }
  return listener;
}

inline std::unique_ptr<ByteStream> connect_tcp(const Endpoint& ep) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  std::string port = std::to_string(ep.port);
  if (::getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &res) != 0)
    throw TransportError("cannot resolve " + ep.host);
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw TransportError("cannot connect to " + ep.host + ":" + port);
  return std::make_unique<TcpStream>(fd);
}

}  // namespace kbauthz::net
