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

// Policy decision point. Derives an agent's role from its declared function,
// derives permissions from role defaults and exception rules, enforces least
// privilege at registration (no wildcards, no empty scope), materializes the
// per-agent authorization profile graph, and decides every request against
// the live profile. Decisions are re-evaluated from the stored profile on
// every call; a Permit is never cached.

#include <cstdint>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kbauthz/ontology.hpp"
#include "kbauthz/rdf.hpp"
#include "kbauthz/turtle.hpp"
#include "kbauthz/util.hpp"

namespace kbauthz::authz {

// Exact strings used in DENY responses and audit lines.
enum class ReasonCode {
  OK,
  NO_PROFILE,
  NOT_AUTHENTICATED,
  ACTION_NOT_ALLOWED,
  GRAPH_NOT_CONFINED,
  PREDICATE_NOT_AUTHORIZED,
  RESOURCE_NOT_IN_SCOPE,
  WILDCARD_REJECTED,
  // registration / session lifecycle codes
  EMPTY_SCOPE,
  ROLE_MISMATCH,
  MISSING_CLAIM,
  INVALID_CLAIM,
  UNKNOWN_FUNCTION,
  PARSE_ERROR,
  CONFLICT,
  BAD_CREDENTIAL,
  EXPIRED,
  NO_ROLE_ANNOTATION,
  ILLEGAL_STATE,
  // transport codes
  MALFORMED_FRAME,
  PROTOCOL_ERROR,
  CLIENT_BYE,
  CONNECTION_CLOSED,
  SERVER_SHUTDOWN,
};

inline std::string to_string(ReasonCode c) {
  switch (c) {
    case ReasonCode::OK: return "OK";
    case ReasonCode::NO_PROFILE: return "NO_PROFILE";
    case ReasonCode::NOT_AUTHENTICATED: return "NOT_AUTHENTICATED";
    case ReasonCode::ACTION_NOT_ALLOWED: return "ACTION_NOT_ALLOWED";
    case ReasonCode::GRAPH_NOT_CONFINED: return "GRAPH_NOT_CONFINED";
    case ReasonCode::PREDICATE_NOT_AUTHORIZED: return "PREDICATE_NOT_AUTHORIZED";
    case ReasonCode::RESOURCE_NOT_IN_SCOPE: return "RESOURCE_NOT_IN_SCOPE";
    case ReasonCode::WILDCARD_REJECTED: return "WILDCARD_REJECTED";
    case ReasonCode::EMPTY_SCOPE: return "EMPTY_SCOPE";
    case ReasonCode::ROLE_MISMATCH: return "ROLE_MISMATCH";
    case ReasonCode::MISSING_CLAIM: return "MISSING_CLAIM";
    case ReasonCode::INVALID_CLAIM: return "INVALID_CLAIM";
    case ReasonCode::UNKNOWN_FUNCTION: return "UNKNOWN_FUNCTION";
    case ReasonCode::PARSE_ERROR: return "PARSE_ERROR";
    case ReasonCode::CONFLICT: return "CONFLICT";
    case ReasonCode::BAD_CREDENTIAL: return "BAD_CREDENTIAL";
    case ReasonCode::EXPIRED: return "EXPIRED";
    case ReasonCode::NO_ROLE_ANNOTATION: return "NO_ROLE_ANNOTATION";
    case ReasonCode::ILLEGAL_STATE: return "ILLEGAL_STATE";
    case ReasonCode::MALFORMED_FRAME: return "MALFORMED_FRAME";
    case ReasonCode::PROTOCOL_ERROR: return "PROTOCOL_ERROR";
    case ReasonCode::CLIENT_BYE: return "CLIENT_BYE";
    case ReasonCode::CONNECTION_CLOSED: return "CONNECTION_CLOSED";
    case ReasonCode::SERVER_SHUTDOWN: return "SERVER_SHUTDOWN";
  }
  return "UNKNOWN";
}

enum class Outcome { Permit, Deny };

// Permit iff reason == OK; fired_rule names the check that settled it.
struct Decision {
  Outcome outcome = Outcome::Deny;
  ReasonCode reason = ReasonCode::NO_PROFILE;
  std::string fired_rule;

  static Decision permit(std::string rule) {
    return Decision{Outcome::Permit, ReasonCode::OK, std::move(rule)};
  }
  static Decision deny(ReasonCode reason, std::string rule) {
    return Decision{Outcome::Deny, reason, std::move(rule)};
  }
  bool permitted() const { return outcome == Outcome::Permit; }
};

template <class T>
struct Result {
  std::optional<T> value;
  ReasonCode code = ReasonCode::OK;
  std::string detail;

  bool ok() const { return value.has_value(); }
  const T& operator*() const { return *value; }
  static Result success(T v) { return Result{std::move(v), ReasonCode::OK, {}}; }
  static Result failure(ReasonCode c, std::string d = {}) {
    return Result{std::nullopt, c, std::move(d)};
  }
};

// The per-agent policy. Stored 1:1 as triples in the agent's profile graph;
// record and graph convert losslessly in both directions.
struct AuthorizationProfile {
  rdf::Iri profile_graph;  // graph name; also the profile node IRI
  rdf::Iri agent;
  rdf::Iri member_of;  // parent profile for the role
  rdf::Iri role;
  std::set<rdf::Iri> confined_graphs;
  std::set<rdf::Iri> authorized_predicates;
  std::set<rdf::Iri> access_to;
  std::set<PermissionAction> allowed_permissions;
  std::set<rdf::Literal> allowed_permission_values;
  std::set<std::pair<rdf::Iri, rdf::Term>> attributes;  // e.g. scopedToIntent

  bool operator==(const AuthorizationProfile&) const = default;
};

inline rdf::Iri profile_graph_name(const rdf::Iri& agent) {
  return rdf::Iri(agent.value + "#profile");
}

inline rdf::Iri role_profile_name(const rdf::Iri& role) {
  return rdf::Iri(role.value + "-profile");
}

inline rdf::NamedGraph profile_to_graph(const AuthorizationProfile& p) {
  rdf::NamedGraph g;
  g.name = p.profile_graph;
  const rdf::Iri& prof = p.profile_graph;
  g.triples.insert(rdf::Triple(prof, vocab::rdfType,
                               rdf::Term::iri(vocab::AuthorizationProfile)));
  if (!p.member_of.value.empty())
    g.triples.insert(rdf::Triple(prof, vocab::memberOf, rdf::Term::iri(p.member_of)));
  g.triples.insert(rdf::Triple(p.agent, vocab::hasAuthorizationProfile,
                               rdf::Term::iri(prof)));
  if (!p.role.value.empty())
    g.triples.insert(rdf::Triple(p.agent, vocab::hasRole, rdf::Term::iri(p.role)));
  for (const auto& c : p.confined_graphs)
    g.triples.insert(rdf::Triple(prof, vocab::confinedToGraph, rdf::Term::iri(c)));
  for (const auto& pr : p.authorized_predicates)
    g.triples.insert(rdf::Triple(prof, vocab::authorizedPredicates, rdf::Term::iri(pr)));
  for (const auto& r : p.access_to)
    g.triples.insert(rdf::Triple(prof, vocab::accessTo, rdf::Term::iri(r)));
  for (const auto& a : p.allowed_permissions)
    g.triples.insert(rdf::Triple(prof, vocab::allowedPermission,
                                 rdf::Term::iri(action_iri(a))));
  for (const auto& v : p.allowed_permission_values)
    g.triples.insert(rdf::Triple(prof, vocab::allowedPermissionValues,
                                 rdf::Term::literal(v)));
  for (const auto& [pred, obj] : p.attributes)
    g.triples.insert(rdf::Triple(p.agent, pred, obj));
  return g;
}

// Rebuilds the record view from a stored profile graph. Returns nullopt when
// the graph lacks the structural agent link, which downstream treats as
// "no profile" (fail closed).
inline std::optional<AuthorizationProfile> profile_from_graph(
    const rdf::NamedGraph& g) {
  AuthorizationProfile p;
  p.profile_graph = g.name;
  const rdf::Iri& prof = g.name;
  for (const auto& t : g.triples) {
    if (t.predicate == vocab::hasAuthorizationProfile && t.object.is_iri() &&
        t.object.as_iri() == prof) {
      p.agent = t.subject;
      break;
    }
  }
  if (p.agent.value.empty()) return std::nullopt;
  for (const auto& t : g.triples) {
    if (t.subject == prof) {
      if (t.predicate == vocab::memberOf && t.object.is_iri())
        p.member_of = t.object.as_iri();
      else if (t.predicate == vocab::confinedToGraph && t.object.is_iri())
        p.confined_graphs.insert(t.object.as_iri());
      else if (t.predicate == vocab::authorizedPredicates && t.object.is_iri())
        p.authorized_predicates.insert(t.object.as_iri());
      else if (t.predicate == vocab::accessTo && t.object.is_iri())
        p.access_to.insert(t.object.as_iri());
      else if (t.predicate == vocab::allowedPermission && t.object.is_iri()) {
        if (auto a = action_from_iri(t.object.as_iri())) p.allowed_permissions.insert(*a);
      } else if (t.predicate == vocab::allowedPermissionValues &&
                 t.object.is_literal()) {
        p.allowed_permission_values.insert(t.object.as_literal());
      }
    } else if (t.subject == p.agent) {
      if (t.predicate == vocab::hasRole && t.object.is_iri())
        p.role = t.object.as_iri();
      else if (t.predicate != vocab::hasAuthorizationProfile)
        p.attributes.insert({t.predicate, t.object});
    }
  }
  return p;
}

// Permission adjustment targeting a sub-functionality of a role: applies when
// the agent's graph carries all of the match attributes.
struct ExceptionRule {
  rdf::Iri id;
  rdf::Iri role;
  std::set<std::pair<rdf::Iri, rdf::Term>> match_attributes;
  std::set<PermissionAction> remove_permissions;
  std::set<PermissionAction> add_permissions;
};

// An agent operation: a query carries patterns, assert/retract carry ground
// triples. Exactly one of the two lists is populated.
struct Request {
  rdf::Iri agent;
  PermissionAction action = PermissionAction::Query;
  rdf::Iri target_graph;
  std::vector<rdf::TriplePattern> patterns;
  std::vector<rdf::Triple> triples;

  static Request query(rdf::Iri agent, rdf::Iri graph,
                       std::vector<rdf::TriplePattern> patterns) {
    Request r;
    r.agent = std::move(agent);
    r.action = PermissionAction::Query;
    r.target_graph = std::move(graph);
    r.patterns = std::move(patterns);
    return r;
  }
  static Request assertion(rdf::Iri agent, rdf::Iri graph,
                           std::vector<rdf::Triple> triples) {
    Request r;
    r.agent = std::move(agent);
    r.action = PermissionAction::Assert;
    r.target_graph = std::move(graph);
    r.triples = std::move(triples);
    return r;
  }
  static Request retraction(rdf::Iri agent, rdf::Iri graph,
                            std::vector<rdf::Triple> triples) {
    Request r;
    r.agent = std::move(agent);
    r.action = PermissionAction::Retract;
    r.target_graph = std::move(graph);
    r.triples = std::move(triples);
    return r;
  }
};

// Declarative forward-chaining rule; conclusion variables must be bound by
// the condition.
struct RuleDocument {
  rdf::Iri id;
  std::vector<rdf::TriplePattern> condition;
  std::vector<rdf::TriplePattern> conclusion;
};

struct EngineConfig {
  rdf::Iri wildcard_sentinel = vocab::ANY;
  rdf::Iri derivations_graph = rdf::Iri("http://kbauthz.dev/graph/derivations");
  bool rbac_only = false;
};

struct LeastPrivilegeViolation {
  ReasonCode code = ReasonCode::WILDCARD_REJECTED;
  std::optional<rdf::Triple> offending;
};

// The request side of a decision: query patterns verbatim, assert/retract
// triples lifted to concrete patterns.
inline std::vector<rdf::TriplePattern> extract_request_pattern(const Request& r) {
  if (r.action == PermissionAction::Query) {
    if (r.patterns.empty())
      throw std::invalid_argument("request: query carries no patterns");
    if (!r.triples.empty())
      throw std::invalid_argument("request: query must not carry triples");
    return r.patterns;
  }
  if (r.triples.empty())
    throw std::invalid_argument("request: assert/retract carries no triples");
  if (!r.patterns.empty())
    throw std::invalid_argument("request: assert/retract must not carry patterns");
  std::vector<rdf::TriplePattern> out;
  out.reserve(r.triples.size());
  for (const auto& t : r.triples) out.push_back(rdf::pattern_of(t));
  return out;
}

struct ExecutionResult {
  Decision decision;
  std::vector<rdf::Binding> bindings;  // query results, post-filtered
  size_t mutated = 0;                  // triples inserted/removed
};

class Engine {
 public:
  Engine(rdf::Dataset& kb, Ontology ontology,
         std::vector<ExceptionRule> exceptions, EngineConfig config = {})
      : kb_(kb), ontology_(std::move(ontology)),
        exceptions_(std::move(exceptions)), cfg_(std::move(config)) {
    std::sort(exceptions_.begin(), exceptions_.end(),
              [](const ExceptionRule& a, const ExceptionRule& b) {
                return a.id < b.id;
              });
  }

  const Ontology& ontology() const { return ontology_; }
  const EngineConfig& config() const { return cfg_; }
  rdf::Dataset& kb() { return kb_; }

  // Number of authorization decisions taken on the live path; lets
  // integration tests assert that no request bypasses the decision point.
  uint64_t decision_count() const {
    std::lock_guard lock(mu_);
    return decisions_;
  }

  bool is_wildcard(const rdf::Term& t) const {
    return t.is_variable() ||
           (t.is_iri() && t.as_iri() == cfg_.wildcard_sentinel);
  }

  // An IRI in subject or object position denotes a managed resource unless
  // it belongs to the vocabulary or the loaded static knowledge. Literals
  // (metric values) are never scope-checked.
  bool is_managed_resource(const rdf::Iri& iri) const {
    return !ontology_.is_vocabulary_term(iri);
  }

  // Role derivation from the registered function fact. On success the
  // derived role is asserted into the agent's graph.
  Result<rdf::Iri> derive_role(const rdf::Iri& agent) {
    auto g = kb_.graph(agent);
    std::vector<rdf::Term> functions;
    if (g) {
      for (const auto& t : g->triples)
        if (t.subject == agent && t.predicate == vocab::hasFunction)
          functions.push_back(t.object);
    }
    if (functions.empty())
      return Result<rdf::Iri>::failure(ReasonCode::MISSING_CLAIM,
                                       "no hasFunction claim");
    if (functions.size() > 1)
      return Result<rdf::Iri>::failure(ReasonCode::INVALID_CLAIM,
                                       "multiple hasFunction claims");
    if (!functions[0].is_iri())
      return Result<rdf::Iri>::failure(ReasonCode::INVALID_CLAIM,
                                       "hasFunction object must be an IRI");
    const rdf::Iri fn = functions[0].as_iri();
    auto role = ontology_.functions.role_of(fn);
    if (!role)
      return Result<rdf::Iri>::failure(ReasonCode::UNKNOWN_FUNCTION, fn.value);
    kb_.insert(agent, rdf::Triple(agent, vocab::hasRole, rdf::Term::iri(*role)));
    return Result<rdf::Iri>::success(*role);
  }

  // Role defaults transformed by every exception rule whose match attributes
  // all hold of the agent's graph. The result is asserted into the agent's
  // graph as allowedPermission facts.
  std::set<PermissionAction> derive_permissions(const rdf::Iri& agent,
                                                const rdf::Iri& role) {
    std::set<PermissionAction> perms = default_permissions(role, ontology_.catalog);
    auto g = kb_.graph(agent);
    auto holds = [&](const std::pair<rdf::Iri, rdf::Term>& attr) {
      if (!g) return false;
      return g->triples.count(rdf::Triple(agent, attr.first, attr.second)) > 0;
    };
    for (const auto& rule : exceptions_) {
      if (rule.role != role) continue;
      bool all = true;
      for (const auto& attr : rule.match_attributes)
        if (!holds(attr)) { all = false; break; }
      if (!all) continue;
      for (auto a : rule.remove_permissions) perms.erase(a);
      for (auto a : rule.add_permissions) perms.insert(a);
    }
    for (auto a : perms)
      kb_.insert(agent, rdf::Triple(agent, vocab::allowedPermission,
                                    rdf::Term::iri(action_iri(a))));
    return perms;
  }

  // Least privilege over registration claims: every object must be a
  // concrete value (no wildcard sentinel, no variable marker) and the
  // resource scope must not be empty.
  std::optional<LeastPrivilegeViolation> check_least_privilege(
      const std::vector<rdf::Triple>& claimed) const {
    size_t scope_claims = 0;
    for (const auto& t : claimed) {
      if (is_wildcard(t.object) || t.predicate == cfg_.wildcard_sentinel)
        return LeastPrivilegeViolation{ReasonCode::WILDCARD_REJECTED, t};
      if (t.predicate == vocab::accessTo) ++scope_claims;
    }
    if (scope_claims == 0)
      return LeastPrivilegeViolation{ReasonCode::EMPTY_SCOPE, std::nullopt};
    return std::nullopt;
  }

  // Materializes the profile graph <agent>#profile from validated
  // registration claims. Fails with CONFLICT when a live profile exists;
  // re-registration requires prior termination.
  Result<AuthorizationProfile> build_profile(
      const rdf::Iri& agent, const std::set<rdf::Triple>& registration,
      const rdf::Iri& role, const std::set<PermissionAction>& permissions) {
    std::lock_guard lock(mu_);  // conflict check and install are one step
    rdf::Iri pg = profile_graph_name(agent);
    if (kb_.has_graph(pg))
      return Result<AuthorizationProfile>::failure(
          ReasonCode::CONFLICT, "profile already exists for " + agent.value);

    AuthorizationProfile p;
    p.profile_graph = pg;
    p.agent = agent;
    p.role = role;
    p.member_of = role_profile_name(role);
    p.allowed_permissions = permissions;
    for (const auto& t : registration) {
      if (t.subject != agent)
        return Result<AuthorizationProfile>::failure(
            ReasonCode::INVALID_CLAIM, "claim subject is not the agent");
      if (t.predicate == vocab::accessTo) {
        if (!t.object.is_iri())
          return Result<AuthorizationProfile>::failure(
              ReasonCode::INVALID_CLAIM, "accessTo object must be an IRI");
        p.access_to.insert(t.object.as_iri());
      } else if (t.predicate == vocab::authorizedPredicates) {
        if (!t.object.is_iri())
          return Result<AuthorizationProfile>::failure(
              ReasonCode::INVALID_CLAIM, "authorizedPredicates object must be an IRI");
        p.authorized_predicates.insert(t.object.as_iri());
      } else if (t.predicate == vocab::confinedToGraph) {
        if (!t.object.is_iri())
          return Result<AuthorizationProfile>::failure(
              ReasonCode::INVALID_CLAIM, "confinedToGraph object must be an IRI");
        p.confined_graphs.insert(t.object.as_iri());
      } else if (t.predicate == vocab::allowedPermissionValues) {
        if (!t.object.is_literal())
          return Result<AuthorizationProfile>::failure(
              ReasonCode::INVALID_CLAIM,
              "allowedPermissionValues object must be a literal");
        p.allowed_permission_values.insert(t.object.as_literal());
      } else if (t.predicate == vocab::hasFunction ||
                 t.predicate == vocab::hasRole ||
                 t.predicate == vocab::allowedPermission) {
        // registration facts that stay in the agent graph only
      } else {
        p.attributes.insert({t.predicate, t.object});
      }
    }
    if (p.access_to.empty())
      return Result<AuthorizationProfile>::failure(ReasonCode::EMPTY_SCOPE);

    kb_.insert_graph(pg, profile_to_graph(p).triples);
    return Result<AuthorizationProfile>::success(std::move(p));
  }

  std::optional<AuthorizationProfile> profile_of(const rdf::Iri& agent) const {
    auto g = kb_.graph(profile_graph_name(agent));
    if (!g) return std::nullopt;
    return profile_from_graph(*g);
  }

  // Pure decision core against an explicit profile (null = no live profile).
  // Denials are ordinary outcomes, never exceptions. Check order is fixed:
  // profile, wildcard, action, graph, predicate, resource, value whitelist.
  Decision authorize(const AuthorizationProfile* profile,
                     const Request& request) const {
    if (cfg_.rbac_only) return rbac_only_authorize(profile, request);
    return hybrid_authorize(profile, request);
  }

  // Live decision: loads the agent's profile from the KB so that any profile
  // mutation is visible on the very next request.
  Decision authorize(const Request& request) {
    std::lock_guard lock(mu_);
    return authorize_locked(request);
  }

  // Decide, then apply: queries return bindings restricted to the confined
  // graph with out-of-scope resource bindings removed; asserts insert;
  // retracts remove. A denied request never mutates the dataset.
  ExecutionResult execute(const Request& request) {
    std::lock_guard lock(mu_);
    ExecutionResult result;
    result.decision = authorize_locked(request);
    if (!result.decision.permitted()) return result;
    switch (request.action) {
      case PermissionAction::Query: {
        auto bindings = kb_.match({request.target_graph}, request.patterns);
        auto profile = profile_of(request.agent);
        for (auto& b : bindings) {
          bool in_scope = true;
          for (const auto& [name, term] : b) {
            if (term.is_iri() && is_managed_resource(term.as_iri()) &&
                (!profile || profile->access_to.count(term.as_iri()) == 0)) {
              in_scope = false;
              break;
            }
          }
          if (in_scope) result.bindings.push_back(std::move(b));
        }
        break;
      }
      case PermissionAction::Assert:
        for (const auto& t : request.triples)
          if (kb_.insert(request.target_graph, t)) ++result.mutated;
        break;
      case PermissionAction::Retract:
        for (const auto& t : request.triples)
          if (kb_.remove(request.target_graph, t)) ++result.mutated;
        break;
    }
    return result;
  }

  // Baseline decision mode: role-derived actions plus graph confinement
  // only. Resource, predicate, and attribute checks are skipped; deny by
  // default is retained.
  Decision rbac_only_authorize(const AuthorizationProfile* profile,
                               const Request& request) const {
    if (!profile) return Decision::deny(ReasonCode::NO_PROFILE, "rbac.no-profile");
    if (profile->allowed_permissions.count(request.action) == 0)
      return Decision::deny(ReasonCode::ACTION_NOT_ALLOWED, "rbac.action");
    if (profile->confined_graphs.count(request.target_graph) == 0)
      return Decision::deny(ReasonCode::GRAPH_NOT_CONFINED, "rbac.graph");
    return Decision::permit("rbac.ok");
  }

  // Forward-chains the rules to fixpoint over the whole dataset, asserting
  // instantiated conclusions into the derivations graph. Terminates because
  // rules cannot invent new terms. Returns the number of newly derived
  // triples. Profiles are re-checked for least privilege afterwards.
  size_t apply_rules(const std::vector<RuleDocument>& rules) {
    std::lock_guard lock(mu_);
    size_t derived = 0;
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto& rule : rules) {
        if (rule.condition.empty()) continue;
        auto names = kb_.graph_names();
        std::set<rdf::Iri> scope(names.begin(), names.end());
        if (scope.empty()) continue;
        auto bindings = kb_.match(scope, rule.condition);
        for (const auto& b : bindings) {
          for (const auto& tmpl : rule.conclusion) {
            auto t = instantiate(tmpl, b);
            if (!t) continue;
            if (kb_.insert(cfg_.derivations_graph, *t)) {
              ++derived;
              changed = true;
            }
          }
        }
      }
    }
    recheck_profiles_least_privilege();
    return derived;
  }

  // Removes the agent's profile graph, agent graph, and every remaining
  // triple with the agent as subject anywhere in the dataset. Idempotent.
  size_t retract_agent(const rdf::Iri& agent) {
    std::lock_guard lock(mu_);
    size_t n = kb_.retract_graph(profile_graph_name(agent));
    n += kb_.retract_graph(agent);
    n += kb_.remove_by_subject(agent);
    return n;
  }

 private:
  Decision authorize_locked(const Request& request) {
    ++decisions_;
    auto profile = profile_of(request.agent);
    return authorize(profile ? &*profile : nullptr, request);
  }

  Decision hybrid_authorize(const AuthorizationProfile* profile,
                            const Request& request) const {
    if (!profile)
      return Decision::deny(ReasonCode::NO_PROFILE, "authz.no-profile");
    auto patterns = extract_request_pattern(request);

    // the wildcard sentinel never passes, in any position
    for (const auto& p : patterns) {
      for (const rdf::Term* t : {&p.subject, &p.predicate, &p.object}) {
        if (t->is_iri() && t->as_iri() == cfg_.wildcard_sentinel)
          return Decision::deny(ReasonCode::WILDCARD_REJECTED, "authz.wildcard");
      }
    }
    if (profile->allowed_permissions.count(request.action) == 0)
      return Decision::deny(ReasonCode::ACTION_NOT_ALLOWED, "authz.action");
    if (profile->confined_graphs.count(request.target_graph) == 0)
      return Decision::deny(ReasonCode::GRAPH_NOT_CONFINED, "authz.graph");
    for (const auto& p : patterns) {
      // predicate position must be concrete and authorized
      if (!p.predicate.is_iri() ||
          profile->authorized_predicates.count(p.predicate.as_iri()) == 0)
        return Decision::deny(ReasonCode::PREDICATE_NOT_AUTHORIZED,
                              "authz.predicate");
    }
    for (const auto& p : patterns) {
      // concrete subject/object resources must be enumerated in accessTo;
      // variables are allowed here because query results are post-filtered
      // to the accessTo closure
      for (const rdf::Term* t : {&p.subject, &p.object}) {
        if (t->is_iri() && is_managed_resource(t->as_iri()) &&
            profile->access_to.count(t->as_iri()) == 0)
          return Decision::deny(ReasonCode::RESOURCE_NOT_IN_SCOPE,
                                "authz.resource");
      }
    }
    if (request.action == PermissionAction::Assert &&
        !profile->allowed_permission_values.empty()) {
      for (const auto& t : request.triples) {
        if (t.object.is_literal() &&
            profile->allowed_permission_values.count(t.object.as_literal()) == 0)
          return Decision::deny(ReasonCode::ACTION_NOT_ALLOWED,
                                "authz.permission-values");
      }
    }
    return Decision::permit("authz.ok");
  }

  static std::optional<rdf::Triple> instantiate(const rdf::TriplePattern& tmpl,
                                                const rdf::Binding& binding) {
    auto subst = [&](const rdf::Term& t) -> std::optional<rdf::Term> {
      if (!t.is_variable()) return t;
      auto it = binding.find(t.as_variable().name);
      if (it == binding.end()) return std::nullopt;
      return it->second;
    };
    auto s = subst(tmpl.subject);
    auto p = subst(tmpl.predicate);
    auto o = subst(tmpl.object);
    if (!s || !p || !o) return std::nullopt;
    if (!s->is_iri() || !p->is_iri() || o->is_variable()) return std::nullopt;
    return rdf::Triple(s->as_iri(), p->as_iri(), *o);
  }

  void recheck_profiles_least_privilege() const {
    for (const auto& name : kb_.graph_names()) {
      if (!name.value.ends_with("#profile")) continue;
      auto g = kb_.graph(name);
      if (!g) continue;
      size_t scope = 0;
      for (const auto& t : g->triples) {
        if (is_wildcard(t.object))
          throw std::logic_error("stored profile " + name.value +
                                 " violates least privilege (wildcard)");
        if (t.predicate == vocab::accessTo) ++scope;
      }
      if (scope == 0)
        throw std::logic_error("stored profile " + name.value +
                               " violates least privilege (empty scope)");
    }
  }

  rdf::Dataset& kb_;
  Ontology ontology_;
  std::vector<ExceptionRule> exceptions_;
  EngineConfig cfg_;
  mutable std::mutex mu_;
  uint64_t decisions_ = 0;
};

namespace detail {

inline rdf::Term decode_rule_term(const rdf::Term& t) {
  if (t.is_literal() && t.as_literal().datatype.empty() &&
      t.as_literal().lang.empty() && t.as_literal().lexical.size() > 1 &&
      t.as_literal().lexical[0] == '?')
    return rdf::Term::variable(t.as_literal().lexical.substr(1));
  return t;
}

inline void collect_vars(const rdf::TriplePattern& p, std::set<std::string>& out) {
  for (const rdf::Term* t : {&p.subject, &p.predicate, &p.object})
    if (t->is_variable()) out.insert(t->as_variable().name);
}

}  // namespace detail

// Loads exception rule documents. Match attributes are encoded through
// dedicated match nodes carrying one matchPredicate and one matchObject.
inline std::vector<ExceptionRule> load_exceptions(std::string_view document) {
  auto parsed = turtle::parse(document);
  if (!parsed.ok())
    throw ConfigError("exceptions: " + parsed.diagnostic->to_string());

  std::map<rdf::Iri, ExceptionRule> rules;
  for (const auto& t : parsed.triples)
    if (t.predicate == vocab::rdfType && t.object.is_iri() &&
        t.object.as_iri() == vocab::ExceptionRuleClass)
      rules[t.subject].id = t.subject;

  auto object_iri = [](const rdf::Triple& t, const char* what) {
    if (!t.object.is_iri())
      throw ConfigError(std::string("exceptions: ") + what + " must be an IRI");
    return t.object.as_iri();
  };

  for (const auto& t : parsed.triples) {
    auto it = rules.find(t.subject);
    if (it == rules.end()) continue;
    ExceptionRule& rule = it->second;
    if (t.predicate == vocab::forRole) {
      rule.role = object_iri(t, "forRole object");
    } else if (t.predicate == vocab::removePermission) {
      auto a = action_from_iri(object_iri(t, "removePermission object"));
      if (!a) throw ConfigError("exceptions: unknown permission action");
      rule.remove_permissions.insert(*a);
    } else if (t.predicate == vocab::addPermission) {
      auto a = action_from_iri(object_iri(t, "addPermission object"));
      if (!a) throw ConfigError("exceptions: unknown permission action");
      rule.add_permissions.insert(*a);
    } else if (t.predicate == vocab::matchAttribute) {
      rdf::Iri node = object_iri(t, "matchAttribute object");
      std::optional<rdf::Iri> pred;
      std::optional<rdf::Term> obj;
      for (const auto& m : parsed.triples) {
        if (m.subject != node) continue;
        if (m.predicate == vocab::matchPredicate) {
          if (pred) throw ConfigError("exceptions: duplicate matchPredicate");
          pred = object_iri(m, "matchPredicate object");
        } else if (m.predicate == vocab::matchObject) {
          if (obj) throw ConfigError("exceptions: duplicate matchObject");
          obj = m.object;
        }
      }
      if (!pred || !obj)
        throw ConfigError("exceptions: match node " + node.value +
                          " needs matchPredicate and matchObject");
      rule.match_attributes.insert({*pred, *obj});
    }
  }

  std::vector<ExceptionRule> out;
  for (auto& [id, rule] : rules) {
    if (rule.role.value.empty())
      throw ConfigError("exceptions: rule " + id.value + " lacks forRole");
    for (auto a : rule.remove_permissions)
      if (rule.add_permissions.count(a))
        throw ConfigError("exceptions: rule " + id.value +
                          " adds and removes the same permission");
    out.push_back(std::move(rule));
  }
  return out;
}

// Loads forward-chaining rule documents. Patterns are encoded as step nodes
// linked with conditionOf/conclusionOf; a plain literal starting with '?'
// denotes a variable.
inline std::vector<RuleDocument> load_rules(std::string_view document) {
  auto parsed = turtle::parse(document);
  if (!parsed.ok()) throw ConfigError("rules: " + parsed.diagnostic->to_string());

  std::map<rdf::Iri, RuleDocument> rules;
  for (const auto& t : parsed.triples)
    if (t.predicate == vocab::rdfType && t.object.is_iri() &&
        t.object.as_iri() == vocab::RuleClass)
      rules[t.subject].id = t.subject;

  struct Step {
    rdf::Iri rule;
    bool conclusion = false;
    std::optional<rdf::Term> s, p, o;
  };
  std::map<rdf::Iri, Step> steps;
  for (const auto& t : parsed.triples) {
    if (t.predicate == vocab::conditionOf || t.predicate == vocab::conclusionOf) {
      if (!t.object.is_iri() || rules.find(t.object.as_iri()) == rules.end())
        throw ConfigError("rules: step " + t.subject.value +
                          " references unknown rule");
      steps[t.subject].rule = t.object.as_iri();
      steps[t.subject].conclusion = (t.predicate == vocab::conclusionOf);
    }
  }
  for (const auto& t : parsed.triples) {
    auto it = steps.find(t.subject);
    if (it == steps.end()) continue;
    if (t.predicate == vocab::subjectTerm)
      it->second.s = detail::decode_rule_term(t.object);
    else if (t.predicate == vocab::predicateTerm)
      it->second.p = detail::decode_rule_term(t.object);
    else if (t.predicate == vocab::objectTerm)
      it->second.o = detail::decode_rule_term(t.object);
  }

  for (const auto& [id, step] : steps) {
    if (!step.s || !step.p || !step.o)
      throw ConfigError("rules: step " + id.value +
                        " needs subject, predicate, and object");
    rdf::TriplePattern pattern(*step.s, *step.p, *step.o, /*full=*/true);
    auto& rule = rules[step.rule];
    if (step.conclusion) rule.conclusion.push_back(pattern);
    else rule.condition.push_back(pattern);
  }

  std::vector<RuleDocument> out;
  for (auto& [id, rule] : rules) {
    std::sort(rule.condition.begin(), rule.condition.end());
    std::sort(rule.conclusion.begin(), rule.conclusion.end());
    std::set<std::string> cond_vars, concl_vars;
    for (const auto& p : rule.condition) detail::collect_vars(p, cond_vars);
    for (const auto& p : rule.conclusion) detail::collect_vars(p, concl_vars);
    for (const auto& v : concl_vars)
      if (!cond_vars.count(v))
        throw ConfigError("rules: rule " + id.value + " conclusion variable ?" +
                          v + " is not bound by the condition");
    if (rule.conclusion.empty())
      throw ConfigError("rules: rule " + id.value + " has no conclusion");
    out.push_back(std::move(rule));
  }
  return out;
}

}  // namespace kbauthz::authz
