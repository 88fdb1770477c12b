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

// Agent-side protocol client. Correlation ids are strictly increasing per
// connection; responses must echo the request id. A BYE from the server
// marks the session terminated with its reason; transport timeouts surface
// as TimeoutError, which is distinct from an authorization DENY.

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kbauthz/transport.hpp"
#include "kbauthz/wire.hpp"

namespace kbauthz::net {

struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SessionTerminated : std::runtime_error {
  explicit SessionTerminated(std::string reason)
      : std::runtime_error("session terminated: " + reason),
        reason_(std::move(reason)) {}
  const std::string& reason() const { return reason_; }

 private:
  std::string reason_;
};

class Client {
 public:
  explicit Client(std::unique_ptr<ByteStream> stream,
                  std::chrono::milliseconds timeout = std::chrono::milliseconds(5000))
      : stream_(std::move(stream)), timeout_(timeout) {}

  ~Client() {
    if (stream_) stream_->close();
  }

  Client(Client&&) = default;
  Client& operator=(Client&&) = default;

  struct Reply {
    wire::MsgType type = wire::MsgType::Error;
    std::string body;

    bool ok() const { return type == wire::MsgType::Ok; }
    bool denied() const { return type == wire::MsgType::Deny; }
    // first token of a DENY/ERROR body is the reason code
    std::string reason() const {
      auto sp = body.find(' ');
      return sp == std::string::npos ? body : body.substr(0, sp);
    }
  };

  Reply hello(const std::string& credential_text) {
    return call(wire::MsgType::Hello,
                std::string(wire::kVersionToken) + "\n" + credential_text);
  }

  Reply register_agent(const std::string& payload_turtle) {
    return call(wire::MsgType::Register, payload_turtle);
  }

  Reply query(const std::string& pattern_text) {
    return call(wire::MsgType::Query, pattern_text);
  }

  Reply assert_facts(const std::string& body) {
    return call(wire::MsgType::Assert, body);
  }

  Reply retract_facts(const std::string& body) {
    return call(wire::MsgType::Retract, body);
  }

  // Sends BYE and waits for the server to finish terminating the session
  // (it closes the connection once retraction and the audit write are done).
  void bye(std::chrono::milliseconds drain = std::chrono::milliseconds(2000)) {
    if (terminated_) return;
    try {
      wire::write_frame(*stream_, wire::WireMessage{wire::MsgType::Bye,
                                                    next_id_++, ""});
      while (true) {
        auto frame = wire::read_frame(*stream_, drain);
        if (frame.status != wire::FrameResult::Status::Frame) break;
      }
    } catch (const TransportError&) {
    }
    stream_->close();
    terminated_ = true;
    termination_reason_ = "CLIENT_BYE";
  }

  // Sends one request and reads frames until its answer arrives. BYE and
  // connection close mark the session terminated.
  Reply call(wire::MsgType type, std::string body) {
    if (terminated_) throw SessionTerminated(termination_reason_);
    drain_pending();
    if (terminated_) throw SessionTerminated(termination_reason_);
    uint64_t id = next_id_++;
    wire::write_frame(*stream_, wire::WireMessage{type, id, std::move(body)});
    while (true) {
      auto frame = wire::read_frame(*stream_, timeout_);
      if (frame.status == wire::FrameResult::Status::Eof) {
        terminated_ = true;
        if (termination_reason_.empty())
          termination_reason_ = "CONNECTION_CLOSED";
        throw SessionTerminated(termination_reason_);
      }
      if (frame.status == wire::FrameResult::Status::Malformed)
        throw ProtocolError("malformed frame from server: " + frame.error);
      const wire::WireMessage& msg = frame.message;
      if (msg.type == wire::MsgType::Bye) {
        terminated_ = true;
        termination_reason_ = msg.body.empty() ? "BYE" : msg.body;
        continue;  // the answer to our request has already been delivered
                   // or the close will surface as Eof
      }
      if (msg.type == wire::MsgType::Error)
        return Reply{msg.type, msg.body};
      if (msg.correlation_id != id)
        throw ProtocolError("out-of-order correlation id from server");
      if (msg.type == wire::MsgType::Ok || msg.type == wire::MsgType::Deny)
        return Reply{msg.type, msg.body};
      throw ProtocolError("unexpected frame type " + wire::to_string(msg.type));
    }
  }

  // Waits for a pending BYE (e.g. after a denial under strict termination).
  std::optional<std::string> await_termination(std::chrono::milliseconds timeout) {
    if (terminated_) return termination_reason_;
    try {
      while (true) {
        auto frame = wire::read_frame(*stream_, timeout);
        if (frame.status == wire::FrameResult::Status::Eof) {
          terminated_ = true;
          if (termination_reason_.empty())
            termination_reason_ = "CONNECTION_CLOSED";
          return termination_reason_;
        }
        if (frame.status == wire::FrameResult::Status::Malformed) return std::nullopt;
        if (frame.message.type == wire::MsgType::Bye) {
          terminated_ = true;
          termination_reason_ =
              frame.message.body.empty() ? "BYE" : frame.message.body;
          return termination_reason_;
        }
      }
    } catch (const TimeoutError&) {
      return std::nullopt;
    }
  }

  bool terminated() const { return terminated_; }
  const std::string& termination_reason() const { return termination_reason_; }

 private:
  // Absorbs frames the server pushed between calls (a BYE after a DENY).
  void drain_pending() {
    try {
      while (true) {
        auto frame = wire::read_frame(*stream_, std::chrono::milliseconds(1));
        if (frame.status == wire::FrameResult::Status::Eof) {
          terminated_ = true;
          if (termination_reason_.empty())
            termination_reason_ = "CONNECTION_CLOSED";
          return;
        }
        if (frame.status == wire::FrameResult::Status::Malformed) return;
        if (frame.message.type == wire::MsgType::Bye) {
          terminated_ = true;
          termination_reason_ =
              frame.message.body.empty() ? "BYE" : frame.message.body;
          return;
        }
        // any other unsolicited frame is dropped
      }
    } catch (const TimeoutError&) {
      // nothing pending
    }
  }

  std::unique_ptr<ByteStream> stream_;
  std::chrono::milliseconds timeout_;
  uint64_t next_id_ = 1;
  bool terminated_ = false;
  std::string termination_reason_;
};

}  // namespace kbauthz::net
