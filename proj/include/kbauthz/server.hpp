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

// Enforcement point: one session per connection, driven HELLO -> REGISTER ->
// operations. Every QUERY/ASSERT/RETRACT is answered only after a decision;
// a denial under strict termination is followed by BYE and the connection is
// closed. Malformed frames produce ERROR, terminate the session, and close
// the connection. Connection close in any form terminates the session and
// retracts the agent's knowledge.

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "kbauthz/session.hpp"
#include "kbauthz/transport.hpp"
#include "kbauthz/wire.hpp"

namespace kbauthz::net {

struct ServerOptions {
  // ceiling for one client->server frame to arrive once started
  std::chrono::milliseconds frame_timeout{5000};
  // poll interval for idle connections so stop() is honored promptly
  std::chrono::milliseconds idle_poll{100};
};

class Server {
 public:
  Server(ImfService& service, std::unique_ptr<Listener> listener,
         ServerOptions options = {})
      : svc_(service), listener_(std::move(listener)), opts_(options) {}

  ~Server() { stop(); }

  void start() {
    accept_thread_ = std::thread([this] { accept_loop(); });
  }

  void stop() {
    bool expected = false;
    if (!stopping_.compare_exchange_strong(expected, true)) {
      if (accept_thread_.joinable()) accept_thread_.join();
      return;
    }
    if (listener_) listener_->shutdown();
    if (accept_thread_.joinable()) accept_thread_.join();
    std::vector<std::thread> workers;
    {
      std::lock_guard lock(mu_);
      workers.swap(connections_);
    }
    for (auto& t : workers)
      if (t.joinable()) t.join();
  }

 private:
  void accept_loop() {
    while (!stopping_.load()) {
      auto stream = listener_->accept();
      if (!stream) break;
      std::shared_ptr<ByteStream> shared(std::move(stream));
      std::lock_guard lock(mu_);
      connections_.emplace_back([this, shared] { handle(shared); });
    }
  }

  static std::string deny_body(const authz::Decision& d) {
    return authz::to_string(d.reason) + " " + d.fired_rule;
  }

  void handle(std::shared_ptr<ByteStream> stream) {
    Session session = svc_.open_session();
    uint64_t last_id = 0;

    auto send = [&](wire::MsgType type, uint64_t id, std::string body) {
      try {
        wire::write_frame(*stream, wire::WireMessage{type, id, std::move(body)});
      } catch (const TransportError&) {
        // peer vanished; the close path below still runs
      }
    };
    auto farewell = [&](uint64_t id, authz::ReasonCode reason) {
      send(wire::MsgType::Bye, id, authz::to_string(reason));
      stream->close();
    };

    while (true) {
      wire::FrameResult frame;
      try {
        frame = wire::read_frame(*stream, opts_.idle_poll, opts_.frame_timeout);
      } catch (const TimeoutError&) {
        if (stopping_.load()) {
          svc_.terminate(session, authz::ReasonCode::SERVER_SHUTDOWN);
          farewell(last_id, authz::ReasonCode::SERVER_SHUTDOWN);
          return;
        }
        continue;  // idle between frames
      } catch (const TransportError&) {
        svc_.terminate(session, authz::ReasonCode::CONNECTION_CLOSED);
        return;
      }

      if (frame.status == wire::FrameResult::Status::Eof) {
        svc_.terminate(session, authz::ReasonCode::CONNECTION_CLOSED);
        stream->close();
        return;
      }
      if (frame.status == wire::FrameResult::Status::Malformed) {
        send(wire::MsgType::Error, 0,
             authz::to_string(authz::ReasonCode::MALFORMED_FRAME) + " " +
                 frame.error);
        svc_.terminate(session, authz::ReasonCode::MALFORMED_FRAME);
        stream->close();
        return;
      }

      const wire::WireMessage& msg = frame.message;
      if (msg.correlation_id <= last_id) {
        send(wire::MsgType::Error, msg.correlation_id,
             authz::to_string(authz::ReasonCode::PROTOCOL_ERROR) +
                 " correlation ids must be strictly increasing");
        svc_.terminate(session, authz::ReasonCode::PROTOCOL_ERROR);
        stream->close();
        return;
      }
      last_id = msg.correlation_id;

      switch (msg.type) {
        case wire::MsgType::Hello: {
          auto nl = msg.body.find('\n');
          std::string version = msg.body.substr(0, nl);
          if (version != wire::kVersionToken ||
              nl == std::string::npos) {
            send(wire::MsgType::Error, msg.correlation_id,
                 authz::to_string(authz::ReasonCode::PROTOCOL_ERROR) +
                     " HELLO body must start with the version token");
            svc_.terminate(session, authz::ReasonCode::PROTOCOL_ERROR);
            stream->close();
            return;
          }
          auto result = svc_.authenticate(session, msg.body.substr(nl + 1));
          if (result.ok()) {
            send(wire::MsgType::Ok, msg.correlation_id,
                 "agent=" + session.agent.value);
          } else if (result.code == authz::ReasonCode::ILLEGAL_STATE) {
            send(wire::MsgType::Error, msg.correlation_id,
                 authz::to_string(result.code) + " " + result.detail);
            svc_.terminate(session, authz::ReasonCode::PROTOCOL_ERROR);
            stream->close();
            return;
          } else {
            send(wire::MsgType::Deny, msg.correlation_id,
                 authz::to_string(result.code) + " " + result.detail);
            farewell(msg.correlation_id, result.code);
            return;
          }
          break;
        }
        case wire::MsgType::Register: {
          auto result = svc_.register_agent(session, msg.body);
          if (result.ok()) {
            send(wire::MsgType::Ok, msg.correlation_id,
                 "profile=" + (*result).profile_graph.value);
          } else if (result.code == authz::ReasonCode::ILLEGAL_STATE) {
            send(wire::MsgType::Error, msg.correlation_id,
                 authz::to_string(result.code) + " " + result.detail);
            svc_.terminate(session, authz::ReasonCode::PROTOCOL_ERROR);
            stream->close();
            return;
          } else {
            send(wire::MsgType::Deny, msg.correlation_id,
                 authz::to_string(result.code) + " " + result.detail);
            farewell(msg.correlation_id, result.code);
            return;
          }
          break;
        }
        case wire::MsgType::Query: {
          auto parsed = wire::parse_pattern_text(msg.body, svc_.wire_prefixes());
          if (!parsed.ok()) {
            send(wire::MsgType::Error, msg.correlation_id,
                 authz::to_string(authz::ReasonCode::PARSE_ERROR) + " " +
                     parsed.diagnostic->to_string());
            svc_.terminate(session, authz::ReasonCode::PARSE_ERROR);
            stream->close();
            return;
          }
          rdf::Iri graph = parsed.doc->graph.value_or(svc_.config().default_graph);
          auto out = svc_.query(session, graph, parsed.doc->patterns);
          if (out.decision.permitted())
            send(wire::MsgType::Ok, msg.correlation_id,
                 wire::serialize_bindings(out.bindings));
          else
            send(wire::MsgType::Deny, msg.correlation_id, deny_body(out.decision));
          if (out.terminated) {
            farewell(msg.correlation_id, out.decision.reason);
            return;
          }
          break;
        }
        case wire::MsgType::Assert:
        case wire::MsgType::Retract: {
          auto parsed = wire::parse_facts_body(msg.body, svc_.wire_prefixes());
          if (!parsed.ok() || parsed.doc->triples.empty()) {
            send(wire::MsgType::Error, msg.correlation_id,
                 authz::to_string(authz::ReasonCode::PARSE_ERROR) + " " +
                     (parsed.ok() ? "no triples in body" : parsed.error));
            svc_.terminate(session, authz::ReasonCode::PARSE_ERROR);
            stream->close();
            return;
          }
          rdf::Iri graph = parsed.doc->graph.value_or(svc_.config().default_graph);
          std::vector<rdf::Triple> triples(parsed.doc->triples.begin(),
                                           parsed.doc->triples.end());
          auto out = msg.type == wire::MsgType::Assert
                         ? svc_.assert_facts(session, graph, std::move(triples))
                         : svc_.retract_facts(session, graph, std::move(triples));
          if (out.decision.permitted())
            send(wire::MsgType::Ok, msg.correlation_id,
                 "count=" + std::to_string(out.mutated));
          else
            send(wire::MsgType::Deny, msg.correlation_id, deny_body(out.decision));
          if (out.terminated) {
            farewell(msg.correlation_id, out.decision.reason);
            return;
          }
          break;
        }
        case wire::MsgType::Bye: {
          svc_.terminate(session, authz::ReasonCode::CLIENT_BYE);
          stream->close();
          return;
        }
        default: {
          send(wire::MsgType::Error, msg.correlation_id,
               authz::to_string(authz::ReasonCode::PROTOCOL_ERROR) +
                   " unexpected message type " + wire::to_string(msg.type));
          svc_.terminate(session, authz::ReasonCode::PROTOCOL_ERROR);
          stream->close();
          return;
        }
      }
    }
  }

  ImfService& svc_;
  std::unique_ptr<Listener> listener_;
  ServerOptions opts_;
  std::atomic<bool> stopping_{false};
  std::thread accept_thread_;
  std::mutex mu_;
  std::vector<std::thread> connections_;
};

}  // namespace kbauthz::net
