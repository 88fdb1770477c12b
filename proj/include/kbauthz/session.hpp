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

// Agent session lifecycle and the service tying it together: credential
// verification, registration (role derivation, role cross-check, least
// privilege, profile build), per-request decisions, and termination with
// full retraction of the agent's knowledge. Legal state transitions are
// Connected -> Authenticated -> Registered -> Operating -> Terminated, plus
// any-state -> Terminated; Terminated is absorbing. Calls from an illegal
// state return a state error and never touch the KB.

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kbauthz/audit.hpp"
#include "kbauthz/clock.hpp"
#include "kbauthz/credential.hpp"
#include "kbauthz/engine.hpp"
#include "kbauthz/turtle.hpp"

namespace kbauthz {

enum class SessionState { Connected, Authenticated, Registered, Operating, Terminated };

inline std::string to_string(SessionState s) {
  switch (s) {
    case SessionState::Connected: return "Connected";
    case SessionState::Authenticated: return "Authenticated";
    case SessionState::Registered: return "Registered";
    case SessionState::Operating: return "Operating";
    case SessionState::Terminated: return "Terminated";
  }
  return {};
}

struct Session {
  uint64_t id = 0;
  SessionState state = SessionState::Connected;
  rdf::Iri agent;  // assigned at authentication from the subject CN
  std::string credential_subject;
  std::string cn;
  std::string declared_role;  // the role annotation from the credential
  std::string established_at;
};

struct ServiceConfig {
  // namespace under which subject CNs become agent IRIs
  std::string agent_base = "http://kbauthz.dev/agent/";
  // graph used when a request names none
  rdf::Iri default_graph = rdf::Iri("http://kbauthz.dev/graph/kb");
  // a single denial terminates the session when set
  bool strict_termination = true;
};

class ImfService {
 public:
  ImfService(authz::Engine& engine, std::vector<authn::TrustAnchor> anchors,
             audit::AuditLog& log, Clock& clock, ServiceConfig config = {})
      : engine_(engine), anchors_(std::move(anchors)), audit_(log),
        clock_(clock), cfg_(std::move(config)) {
    wire_prefixes_ = engine_.ontology().prefixes;
    if (!wire_prefixes_.entries.count("authz"))
      wire_prefixes_.declare("authz", std::string(authz::vocab::kNamespace));
  }

  const ServiceConfig& config() const { return cfg_; }
  authz::Engine& engine() { return engine_; }
  // prefixes usable in wire pattern text: the ontology's plus authz:
  const turtle::PrefixMap& wire_prefixes() const { return wire_prefixes_; }

  Session open_session() {
    Session s;
    s.id = next_session_.fetch_add(1);
    s.established_at = clock_.now_rfc3339();
    return s;
  }

  // Credential check. On success the session is Authenticated and the agent
  // identity is fixed to <agent_base><CN>. On a bad credential the session
  // is terminated and anything known about the claimed agent is retracted.
  authz::Result<authn::SubjectFields> authenticate(Session& session,
                                                   const authn::Credential& cred) {
    using R = authz::Result<authn::SubjectFields>;
    if (session.state != SessionState::Connected)
      return R::failure(authz::ReasonCode::ILLEGAL_STATE,
                        "authenticate from " + to_string(session.state));
    auto outcome = authn::verify(cred, anchors_, clock_.now());
    if (!outcome.ok) {
      record(session, "hello", "-", "-", "deny", outcome.code, "authn.credential");
      terminate(session, outcome.code);
      return R::failure(outcome.code, outcome.detail);
    }
    rdf::Iri agent;
    try {
      agent = rdf::Iri(cfg_.agent_base + outcome.fields.cn);
    } catch (const std::invalid_argument&) {
      record(session, "hello", "-", "-", "deny", authz::ReasonCode::BAD_CREDENTIAL,
             "authn.credential");
      terminate(session, authz::ReasonCode::BAD_CREDENTIAL);
      return R::failure(authz::ReasonCode::BAD_CREDENTIAL,
                        "subject CN is not usable as an identity");
    }
    session.agent = agent;
    session.credential_subject = cred.subject;
    session.cn = outcome.fields.cn;
    session.declared_role = outcome.fields.role;
    session.state = SessionState::Authenticated;
    record(session, "hello", "-", "-", "permit", authz::ReasonCode::OK,
           "authn.credential");
    return R::success(outcome.fields);
  }

  authz::Result<authn::SubjectFields> authenticate(Session& session,
                                                   std::string_view credential_text) {
    using R = authz::Result<authn::SubjectFields>;
    if (session.state != SessionState::Connected)
      return R::failure(authz::ReasonCode::ILLEGAL_STATE,
                        "authenticate from " + to_string(session.state));
    auto cred = authn::Credential::parse(credential_text);
    if (!cred) {
      record(session, "hello", "-", "-", "deny", authz::ReasonCode::BAD_CREDENTIAL,
             "authn.credential");
      terminate(session, authz::ReasonCode::BAD_CREDENTIAL);
      return R::failure(authz::ReasonCode::BAD_CREDENTIAL,
                        "unparseable credential");
    }
    return authenticate(session, *cred);
  }

  // Registration pipeline: parse the payload, validate the claims, derive
  // the role, cross-check it against the credential annotation, enforce
  // least privilege, derive permissions, and build the profile graph. Any
  // failure terminates the session and retracts everything asserted so far.
  authz::Result<authz::AuthorizationProfile> register_agent(
      Session& session, std::string_view payload) {
    using R = authz::Result<authz::AuthorizationProfile>;
    if (session.state != SessionState::Authenticated)
      return R::failure(authz::ReasonCode::ILLEGAL_STATE,
                        "register from " + to_string(session.state));

    auto fail = [&](authz::ReasonCode code, std::string detail) {
      record(session, "register", "-", "-", "deny", code, "registration.pipeline");
      terminate(session, code);
      return R::failure(code, std::move(detail));
    };

    auto parsed = turtle::parse(payload);
    if (!parsed.ok())
      return fail(authz::ReasonCode::PARSE_ERROR, parsed.diagnostic->to_string());

    const rdf::Iri& agent = session.agent;
    size_t identity = 0, function = 0, predicates = 0;
    for (const auto& t : parsed.triples) {
      if (t.subject != agent)
        return fail(authz::ReasonCode::INVALID_CLAIM,
                    "claim subject " + t.subject.value + " is not the agent");
      if (t.predicate == authz::vocab::hasIdentity) ++identity;
      else if (t.predicate == authz::vocab::hasFunction) ++function;
      else if (t.predicate == authz::vocab::authorizedPredicates) ++predicates;
    }
    if (identity == 0)
      return fail(authz::ReasonCode::MISSING_CLAIM, "no hasIdentity claim");
    if (function == 0)
      return fail(authz::ReasonCode::MISSING_CLAIM, "no hasFunction claim");
    if (function > 1)
      return fail(authz::ReasonCode::INVALID_CLAIM, "multiple hasFunction claims");
    if (predicates == 0)
      return fail(authz::ReasonCode::MISSING_CLAIM, "no authorizedPredicates claim");

    // re-registration requires prior termination; terminating this session
    // must not retract the live agent, so the conflict path skips retraction
    if (engine_.kb().has_graph(authz::profile_graph_name(agent))) {
      record(session, "register", "-", "-", "deny", authz::ReasonCode::CONFLICT,
             "registration.pipeline");
      terminate_without_retraction(session);
      return R::failure(authz::ReasonCode::CONFLICT,
                        "a live profile exists for " + agent.value);
    }

    engine_.kb().insert_graph(agent, parsed.triples);

    auto role = engine_.derive_role(agent);
    if (!role.ok()) return fail(role.code, role.detail);

    const authz::RoleRecord* rec = engine_.ontology().catalog.find(*role);
    if (!rec || rec->annotation.empty() ||
        rec->annotation != session.declared_role)
      return fail(authz::ReasonCode::ROLE_MISMATCH,
                  "credential role '" + session.declared_role +
                      "' does not match derived role " + (*role).value);

    std::vector<rdf::Triple> claimed(parsed.triples.begin(), parsed.triples.end());
    if (auto violation = engine_.check_least_privilege(claimed)) {
      std::string detail = violation->offending
                               ? rdf::triple_text(*violation->offending)
                               : "no accessTo claims";
      return fail(violation->code, std::move(detail));
    }

    auto permissions = engine_.derive_permissions(agent, *role);
    auto profile = engine_.build_profile(agent, parsed.triples, *role, permissions);
    if (!profile.ok()) return fail(profile.code, profile.detail);

    session.state = SessionState::Registered;
    session.state = SessionState::Operating;
    record(session, "register", "-", "-", "permit", authz::ReasonCode::OK,
           "registration.pipeline");
    return profile;
  }

  struct OpOutcome {
    authz::Decision decision;
    std::vector<rdf::Binding> bindings;
    size_t mutated = 0;
    bool terminated = false;
  };

  OpOutcome query(Session& session, rdf::Iri graph,
                  std::vector<rdf::TriplePattern> patterns) {
    return operate(session,
                   authz::Request::query(session.agent, std::move(graph),
                                         std::move(patterns)),
                   "query");
  }

  OpOutcome assert_facts(Session& session, rdf::Iri graph,
                         std::vector<rdf::Triple> triples) {
    return operate(session,
                   authz::Request::assertion(session.agent, std::move(graph),
                                             std::move(triples)),
                   "assert");
  }

  OpOutcome retract_facts(Session& session, rdf::Iri graph,
                          std::vector<rdf::Triple> triples) {
    return operate(session,
                   authz::Request::retraction(session.agent, std::move(graph),
                                              std::move(triples)),
                   "retract");
  }

  // Terminates the session, retracts the agent's graphs and every triple
  // with the agent as subject, and writes an audit line. Idempotent.
  void terminate(Session& session, authz::ReasonCode reason) {
    if (session.state == SessionState::Terminated) return;
    session.state = SessionState::Terminated;
    if (!session.agent.value.empty()) engine_.retract_agent(session.agent);
    record(session, "terminate", "-", "-", "deny", reason, "session.terminate");
  }

 private:
  void terminate_without_retraction(Session& session) {
    if (session.state == SessionState::Terminated) return;
    session.state = SessionState::Terminated;
    record(session, "terminate", "-", "-", "deny", authz::ReasonCode::CONFLICT,
           "session.terminate");
  }

  OpOutcome operate(Session& session, authz::Request request,
                    const std::string& action_name) {
    OpOutcome out;
    std::string first_pattern = "-";
    if (!request.patterns.empty())
      first_pattern = rdf::pattern_text(request.patterns.front());
    else if (!request.triples.empty())
      first_pattern = rdf::triple_text(request.triples.front());

    if (session.state != SessionState::Operating) {
      out.decision = authz::Decision::deny(authz::ReasonCode::NOT_AUTHENTICATED,
                                           "session.state");
      record(session, action_name, request.target_graph.value, first_pattern,
             "deny", out.decision.reason, out.decision.fired_rule);
      return out;
    }

    auto result = engine_.execute(request);
    out.decision = result.decision;
    out.bindings = std::move(result.bindings);
    out.mutated = result.mutated;
    record(session, action_name, request.target_graph.value, first_pattern,
           out.decision.permitted() ? "permit" : "deny", out.decision.reason,
           out.decision.fired_rule);
    if (!out.decision.permitted() && cfg_.strict_termination) {
      terminate(session, out.decision.reason);
      out.terminated = true;
    }
    return out;
  }

  void record(const Session& session, const std::string& action,
              std::string target_graph, std::string pattern,
              std::string outcome, authz::ReasonCode reason,
              std::string fired_rule) {
    audit::AuditRecord r;
    r.timestamp = clock_.now_rfc3339();
    r.agent = session.agent.value.empty() ? "-" : session.agent.value;
    r.session_id = session.id;
    r.action = action;
    r.target_graph = std::move(target_graph);
    r.pattern = std::move(pattern);
    r.outcome = std::move(outcome);
    r.reason = authz::to_string(reason);
    r.fired_rule = std::move(fired_rule);
    audit_.append(r);
  }

  authz::Engine& engine_;
  std::vector<authn::TrustAnchor> anchors_;
  audit::AuditLog& audit_;
  Clock& clock_;
  ServiceConfig cfg_;
  turtle::PrefixMap wire_prefixes_;
  std::atomic<uint64_t> next_session_{1};
};

}  // namespace kbauthz
