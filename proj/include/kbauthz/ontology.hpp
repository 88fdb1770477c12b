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

// Authorization vocabulary and the static knowledge loaded at startup:
// classes, predicates, the role catalog with initial permissions per role,
// and the function -> role map used to derive an agent's role from its
// declared function. Loaded once, immutable thereafter.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "kbauthz/rdf.hpp"
#include "kbauthz/turtle.hpp"
#include "kbauthz/util.hpp"

namespace kbauthz::authz {

enum class PermissionAction { Query, Assert, Retract };

inline std::string to_string(PermissionAction a) {
  switch (a) {
    case PermissionAction::Query: return "query";
    case PermissionAction::Assert: return "assert";
    case PermissionAction::Retract: return "retract";
  }
  return {};
}

inline std::optional<PermissionAction> action_from_string(std::string_view s) {
  if (s == "query") return PermissionAction::Query;
  if (s == "assert") return PermissionAction::Assert;
  if (s == "retract") return PermissionAction::Retract;
  return std::nullopt;
}

// Well-known IRIs. Everything the engine writes into a profile graph uses a
// predicate from this namespace.
namespace vocab {

inline constexpr std::string_view kNamespace = "http://kbauthz.dev/vocab#";

inline rdf::Iri make(std::string_view local) {
  return rdf::Iri(std::string(kNamespace) + std::string(local));
}

// classes
inline const rdf::Iri Agent = make("Agent");
inline const rdf::Iri Role = make("Role");
inline const rdf::Iri AuthorizationProfile = make("AuthorizationProfile");
inline const rdf::Iri Permission = make("Permission");
inline const rdf::Iri Resource = make("Resource");
inline const rdf::Iri Attribute = make("Attribute");
inline const rdf::Iri Decision = make("Decision");

// profile predicates
inline const rdf::Iri hasRole = make("hasRole");
inline const rdf::Iri hasAuthorizationProfile = make("hasAuthorizationProfile");
inline const rdf::Iri authorizedPredicates = make("authorizedPredicates");
inline const rdf::Iri accessTo = make("accessTo");
inline const rdf::Iri allowedPermission = make("allowedPermission");
inline const rdf::Iri allowedPermissionValues = make("allowedPermissionValues");
inline const rdf::Iri accessGranted = make("accessGranted");
inline const rdf::Iri hasFunction = make("hasFunction");
inline const rdf::Iri memberOf = make("memberOf");
inline const rdf::Iri hasIdentity = make("hasIdentity");
inline const rdf::Iri scopedToIntent = make("scopedToIntent");
inline const rdf::Iri confinedToGraph = make("confinedToGraph");

// permission action instances
inline const rdf::Iri Query = make("Query");
inline const rdf::Iri Assert = make("Assert");
inline const rdf::Iri Retract = make("Retract");

// extension point: predicates used by ontology, exception, and rule
// documents themselves (never emitted into profile graphs)
inline const rdf::Iri mapsToRole = make("mapsToRole");
inline const rdf::Iri defaultPermission = make("defaultPermission");
inline const rdf::Iri roleAnnotation = make("roleAnnotation");
inline const rdf::Iri description = make("description");
inline const rdf::Iri ExceptionRuleClass = make("ExceptionRule");
inline const rdf::Iri forRole = make("forRole");
inline const rdf::Iri matchAttribute = make("matchAttribute");
inline const rdf::Iri matchPredicate = make("matchPredicate");
inline const rdf::Iri matchObject = make("matchObject");
inline const rdf::Iri removePermission = make("removePermission");
inline const rdf::Iri addPermission = make("addPermission");
inline const rdf::Iri RuleClass = make("Rule");
inline const rdf::Iri conditionOf = make("conditionOf");
inline const rdf::Iri conclusionOf = make("conclusionOf");
inline const rdf::Iri subjectTerm = make("subject");
inline const rdf::Iri predicateTerm = make("predicate");
inline const rdf::Iri objectTerm = make("object");

// default wildcard sentinel; rejecting it at registration is what keeps
// profiles enumerable
inline const rdf::Iri ANY = make("ANY");

inline const rdf::Iri rdfType = rdf::Iri(std::string(turtle::kRdfType));

inline bool in_namespace(const rdf::Iri& iri) {
  return starts_with(iri.value, kNamespace);
}

}  // namespace vocab

inline rdf::Iri action_iri(PermissionAction a) {
  switch (a) {
    case PermissionAction::Query: return vocab::Query;
    case PermissionAction::Assert: return vocab::Assert;
    case PermissionAction::Retract: return vocab::Retract;
  }
  return vocab::Query;
}

inline std::optional<PermissionAction> action_from_iri(const rdf::Iri& iri) {
  if (iri == vocab::Query) return PermissionAction::Query;
  if (iri == vocab::Assert) return PermissionAction::Assert;
  if (iri == vocab::Retract) return PermissionAction::Retract;
  return std::nullopt;
}

struct RoleRecord {
  rdf::Iri name;
  std::set<PermissionAction> default_permissions;
  std::string description;
  // the `role=` value carried in credential subjects for this role
  std::string annotation;
};

struct RoleCatalog {
  std::map<rdf::Iri, RoleRecord> roles;

  bool contains(const rdf::Iri& role) const { return roles.count(role) > 0; }

  const RoleRecord* find(const rdf::Iri& role) const {
    auto it = roles.find(role);
    return it == roles.end() ? nullptr : &it->second;
  }

  // Resolves a credential role annotation (e.g. "grounder") to the catalog
  // role it names, if any.
  std::optional<rdf::Iri> by_annotation(std::string_view annotation) const {
    if (annotation.empty()) return std::nullopt;
    for (const auto& [iri, rec] : roles)
      if (rec.annotation == annotation) return iri;
    return std::nullopt;
  }
};

// Function -> role. Functional by construction: loading rejects a function
// mapped to two roles.
struct FunctionRoleMap {
  std::map<rdf::Iri, rdf::Iri> entries;

  std::optional<rdf::Iri> role_of(const rdf::Iri& function) const {
    auto it = entries.find(function);
    if (it == entries.end()) return std::nullopt;
    return it->second;
  }
};

struct Ontology {
  RoleCatalog catalog;
  FunctionRoleMap functions;
  turtle::PrefixMap prefixes;
  std::set<rdf::Triple> triples;  // the raw document, for the static graph
  // every IRI mentioned by the document plus the vocabulary itself; terms in
  // this set are never treated as managed resources
  std::set<rdf::Iri> known_terms;

  bool is_vocabulary_term(const rdf::Iri& iri) const {
    return vocab::in_namespace(iri) || iri == vocab::rdfType ||
           known_terms.count(iri) > 0;
  }
};

// Loads the static authorization knowledge from a Turtle document.
// Validation failures (parse errors, a function mapped to an undeclared or
// duplicate role, a bad permission object) raise ConfigError.
inline Ontology load_ontology(std::string_view document) {
  auto parsed = turtle::parse(document);
  if (!parsed.ok())
    throw ConfigError("ontology: " + parsed.diagnostic->to_string());

  Ontology onto;
  onto.prefixes = parsed.prefixes;
  onto.triples = parsed.triples;

  for (const auto& t : parsed.triples) {
    onto.known_terms.insert(t.subject);
    onto.known_terms.insert(t.predicate);
    if (t.object.is_iri()) onto.known_terms.insert(t.object.as_iri());
  }

  // roles
  for (const auto& t : parsed.triples) {
    if (t.predicate == vocab::rdfType && t.object.is_iri() &&
        t.object.as_iri() == vocab::Role) {
      onto.catalog.roles[t.subject] = RoleRecord{t.subject, {}, "", ""};
    }
  }
  for (const auto& t : parsed.triples) {
    auto it = onto.catalog.roles.find(t.subject);
    if (it == onto.catalog.roles.end()) continue;
    RoleRecord& rec = it->second;
    if (t.predicate == vocab::defaultPermission) {
      if (!t.object.is_iri())
        throw ConfigError("ontology: defaultPermission object must be one of " +
                          vocab::Query.value + "/" + vocab::Assert.value + "/" +
                          vocab::Retract.value);
      auto action = action_from_iri(t.object.as_iri());
      if (!action)
        throw ConfigError("ontology: unknown permission action " +
                          t.object.as_iri().value);
      rec.default_permissions.insert(*action);
    } else if (t.predicate == vocab::description && t.object.is_literal()) {
      rec.description = t.object.as_literal().lexical;
    } else if (t.predicate == vocab::roleAnnotation) {
      if (!t.object.is_literal())
        throw ConfigError("ontology: roleAnnotation must be a literal");
      rec.annotation = t.object.as_literal().lexical;
    }
  }

  // function -> role map; must be functional and must land on declared roles
  for (const auto& t : parsed.triples) {
    if (t.predicate != vocab::mapsToRole) continue;
    if (!t.object.is_iri())
      throw ConfigError("ontology: mapsToRole object must be an IRI");
    const rdf::Iri& role = t.object.as_iri();
    if (!onto.catalog.contains(role))
      throw ConfigError("ontology: function " + t.subject.value +
                        " mapped to undeclared role " + role.value);
    auto [it, inserted] = onto.functions.entries.emplace(t.subject, role);
    if (!inserted && it->second != role)
      throw ConfigError("ontology: duplicate function mapping for " +
                        t.subject.value);
  }

  return onto;
}

// Initial permission set for a role. Unknown roles fail closed with a
// LookupError rather than an empty grant.
inline std::set<PermissionAction> default_permissions(const rdf::Iri& role,
                                                      const RoleCatalog& catalog) {
  const RoleRecord* rec = catalog.find(role);
  if (!rec) throw LookupError("unknown role: " + role.value);
  return rec->default_permissions;
}

}  // namespace kbauthz::authz
