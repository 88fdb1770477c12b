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

// Scenario documents: the same Turtle subset as everything else, plus a
// small scenario vocabulary. A scenario declares the ontology to load,
// initial world facts, the agents (credential subject, function, scope), and
// a globally ordered script of steps with expected outcomes. In pattern
// positions a plain literal starting with '?' denotes a variable.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "kbauthz/engine.hpp"
#include "kbauthz/rdf.hpp"
#include "kbauthz/turtle.hpp"
#include "kbauthz/util.hpp"

namespace kbauthz::sim {

namespace vocab {

inline constexpr std::string_view kNamespace = "http://kbauthz.dev/sim#";

inline rdf::Iri make(std::string_view local) {
  return rdf::Iri(std::string(kNamespace) + std::string(local));
}

inline const rdf::Iri Scenario = make("Scenario");
inline const rdf::Iri Agent = make("Agent");
inline const rdf::Iri Fact = make("Fact");
inline const rdf::Iri Step = make("Step");

inline const rdf::Iri name = make("name");
inline const rdf::Iri mode = make("mode");
inline const rdf::Iri seed = make("seed");
inline const rdf::Iri strictTermination = make("strictTermination");
inline const rdf::Iri ontology = make("ontology");
inline const rdf::Iri exceptions = make("exceptions");

inline const rdf::Iri cn = make("cn");
inline const rdf::Iri credentialRole = make("credentialRole");
inline const rdf::Iri function = make("function");
inline const rdf::Iri accessTo = make("accessTo");
inline const rdf::Iri authorizedPredicate = make("authorizedPredicate");
inline const rdf::Iri confinedToGraph = make("confinedToGraph");
inline const rdf::Iri attributeOf = make("attributeOf");
inline const rdf::Iri attrPredicate = make("attrPredicate");
inline const rdf::Iri attrObject = make("attrObject");

inline const rdf::Iri inGraph = make("inGraph");
inline const rdf::Iri subject = make("subject");
inline const rdf::Iri predicate = make("predicate");
inline const rdf::Iri object = make("object");

inline const rdf::Iri agent = make("agent");
inline const rdf::Iri order = make("order");
inline const rdf::Iri action = make("action");
inline const rdf::Iri graph = make("graph");
inline const rdf::Iri expect = make("expect");
inline const rdf::Iri expectReason = make("expectReason");

}  // namespace vocab

struct AgentSpec {
  rdf::Iri node;
  std::string cn;
  std::string credential_role;
  rdf::Iri function;
  std::set<rdf::Iri> access_to;
  std::set<rdf::Iri> predicates;
  std::set<rdf::Iri> confined_graphs;
  std::set<std::pair<rdf::Iri, rdf::Term>> attributes;
  uint64_t order = 0;
};

struct InitialFact {
  rdf::Iri graph;
  rdf::Triple triple;
};

struct ScriptStep {
  rdf::Iri node;
  uint64_t order = 0;
  rdf::Iri agent_node;
  authz::PermissionAction action = authz::PermissionAction::Query;
  rdf::Iri graph;
  rdf::TriplePattern pattern;
  std::string expect = "any";  // permit | deny | any
  std::string expect_reason;   // optional exact reason code
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::string mode = "hybrid";  // hybrid | rbac-only
  uint64_t seed = 0;
  bool strict_termination = true;
  std::string ontology_path;
  std::string exceptions_path;
  std::string base_dir = ".";  // directory scenario-relative paths resolve against
  std::vector<AgentSpec> agents;  // in execution (registration) order
  std::vector<InitialFact> facts;
  std::vector<ScriptStep> steps;  // in execution order
  turtle::PrefixMap prefixes;

  std::string resolve(const std::string& path) const {
    std::filesystem::path p(path);
    if (p.is_absolute()) return path;
    return (std::filesystem::path(base_dir) / p).string();
  }
};

namespace detail {

// literals beginning with '?' are variables in scenario pattern positions
inline rdf::Term decode_step_term(const rdf::Term& t) {
  if (t.is_literal() && t.as_literal().datatype.empty() &&
      t.as_literal().lang.empty() && t.as_literal().lexical.size() > 1 &&
      t.as_literal().lexical[0] == '?')
    return rdf::Term::variable(t.as_literal().lexical.substr(1));
  return t;
}

struct NodeIndex {
  std::map<rdf::Iri, std::vector<const rdf::Triple*>> by_subject;

  explicit NodeIndex(const std::set<rdf::Triple>& triples) {
    for (const auto& t : triples) by_subject[t.subject].push_back(&t);
  }

  std::vector<const rdf::Triple*> props(const rdf::Iri& node,
                                        const rdf::Iri& pred) const {
    std::vector<const rdf::Triple*> out;
    auto it = by_subject.find(node);
    if (it == by_subject.end()) return out;
    for (const auto* t : it->second)
      if (t->predicate == pred) out.push_back(t);
    return out;
  }

  std::optional<rdf::Term> one(const rdf::Iri& node, const rdf::Iri& pred) const {
    auto v = props(node, pred);
    if (v.size() != 1) return std::nullopt;
    return v[0]->object;
  }

  std::optional<std::string> literal(const rdf::Iri& node,
                                     const rdf::Iri& pred) const {
    auto t = one(node, pred);
    if (!t || !t->is_literal()) return std::nullopt;
    return t->as_literal().lexical;
  }

  std::optional<rdf::Iri> iri(const rdf::Iri& node, const rdf::Iri& pred) const {
    auto t = one(node, pred);
    if (!t || !t->is_iri()) return std::nullopt;
    return t->as_iri();
  }
};

inline uint64_t parse_order(const std::optional<std::string>& s,
                            const rdf::Iri& node) {
  if (!s) return 0;
  try {
    return std::stoull(*s);
  } catch (const std::exception&) {
    throw ConfigError("scenario: bad order on " + node.value);
  }
}

}  // namespace detail

inline ScenarioConfig parse_scenario(std::string_view document,
                                     const std::string& base_dir = ".") {
  auto parsed = turtle::parse(document);
  if (!parsed.ok())
    throw ConfigError("scenario: " + parsed.diagnostic->to_string());

  ScenarioConfig cfg;
  cfg.base_dir = base_dir;
  cfg.prefixes = parsed.prefixes;
  detail::NodeIndex index(parsed.triples);

  std::vector<rdf::Iri> scenario_nodes, agent_nodes, fact_nodes, step_nodes;
  for (const auto& t : parsed.triples) {
    if (t.predicate != authz::vocab::rdfType || !t.object.is_iri()) continue;
    const rdf::Iri& type = t.object.as_iri();
    if (type == vocab::Scenario) scenario_nodes.push_back(t.subject);
    else if (type == vocab::Agent) agent_nodes.push_back(t.subject);
    else if (type == vocab::Fact) fact_nodes.push_back(t.subject);
    else if (type == vocab::Step) step_nodes.push_back(t.subject);
  }
  if (scenario_nodes.size() != 1)
    throw ConfigError("scenario: exactly one sim:Scenario node is required");
  const rdf::Iri& sc = scenario_nodes.front();

  if (auto v = index.literal(sc, vocab::name)) cfg.name = *v;
  if (auto v = index.literal(sc, vocab::mode)) cfg.mode = *v;
  if (cfg.mode != "hybrid" && cfg.mode != "rbac-only")
    throw ConfigError("scenario: mode must be hybrid or rbac-only");
  if (auto v = index.literal(sc, vocab::seed))
    cfg.seed = detail::parse_order(v, sc);
  if (auto v = index.literal(sc, vocab::strictTermination)) {
    if (*v != "true" && *v != "false")
      throw ConfigError("scenario: strictTermination must be true or false");
    cfg.strict_termination = (*v == "true");
  }
  if (auto v = index.literal(sc, vocab::ontology)) cfg.ontology_path = *v;
  if (cfg.ontology_path.empty())
    throw ConfigError("scenario: sim:ontology path is required");
  if (auto v = index.literal(sc, vocab::exceptions)) cfg.exceptions_path = *v;

  // agents
  std::set<std::string> cns;
  for (const auto& node : agent_nodes) {
    AgentSpec a;
    a.node = node;
    auto cn = index.literal(node, vocab::cn);
    auto role = index.literal(node, vocab::credentialRole);
    auto fn = index.iri(node, vocab::function);
    if (!cn || !role || !fn)
      throw ConfigError("scenario: agent " + node.value +
                        " needs cn, credentialRole, and function");
    a.cn = *cn;
    a.credential_role = *role;
    a.function = *fn;
    if (!cns.insert(a.cn).second)
      throw ConfigError("scenario: duplicate agent cn '" + a.cn + "'");
    for (const auto* t : index.props(node, vocab::accessTo)) {
      if (!t->object.is_iri())
        throw ConfigError("scenario: accessTo must be an IRI on " + node.value);
      a.access_to.insert(t->object.as_iri());
    }
    for (const auto* t : index.props(node, vocab::authorizedPredicate)) {
      if (!t->object.is_iri())
        throw ConfigError("scenario: authorizedPredicate must be an IRI on " +
                          node.value);
      a.predicates.insert(t->object.as_iri());
    }
    for (const auto* t : index.props(node, vocab::confinedToGraph)) {
      if (!t->object.is_iri())
        throw ConfigError("scenario: confinedToGraph must be an IRI on " +
                          node.value);
      a.confined_graphs.insert(t->object.as_iri());
    }
    a.order = detail::parse_order(index.literal(node, vocab::order), node);
    cfg.agents.push_back(std::move(a));
  }
  // attribute nodes
  for (const auto& [subject, triples] : index.by_subject) {
    auto of = index.iri(subject, vocab::attributeOf);
    if (!of) continue;
    auto pred = index.iri(subject, vocab::attrPredicate);
    auto obj = index.one(subject, vocab::attrObject);
    if (!pred || !obj)
      throw ConfigError("scenario: attribute node " + subject.value +
                        " needs attrPredicate and attrObject");
    bool found = false;
    for (auto& a : cfg.agents) {
      if (a.node == *of) {
        a.attributes.insert({*pred, *obj});
        found = true;
      }
    }
    if (!found)
      throw ConfigError("scenario: attribute node " + subject.value +
                        " references unknown agent");
    (void)triples;
  }
  std::sort(cfg.agents.begin(), cfg.agents.end(),
            [](const AgentSpec& a, const AgentSpec& b) {
              return std::tie(a.order, a.node) < std::tie(b.order, b.node);
            });

  // initial facts
  for (const auto& node : fact_nodes) {
    auto graph = index.iri(node, vocab::inGraph);
    auto s = index.iri(node, vocab::subject);
    auto p = index.iri(node, vocab::predicate);
    auto o = index.one(node, vocab::object);
    if (!graph || !s || !p || !o)
      throw ConfigError("scenario: fact " + node.value +
                        " needs inGraph, subject, predicate, object");
    cfg.facts.push_back(InitialFact{*graph, rdf::Triple(*s, *p, *o)});
  }

  // steps
  std::map<rdf::Iri, const AgentSpec*> agents_by_node;
  for (const auto& a : cfg.agents) agents_by_node[a.node] = &a;
  std::set<uint64_t> orders;
  for (const auto& node : step_nodes) {
    ScriptStep step;
    step.node = node;
    auto agent = index.iri(node, vocab::agent);
    if (!agent || !agents_by_node.count(*agent))
      throw ConfigError("scenario: step " + node.value +
                        " references unknown agent");
    step.agent_node = *agent;
    auto action = index.literal(node, vocab::action);
    auto parsed_action = action ? authz::action_from_string(*action) : std::nullopt;
    if (!parsed_action)
      throw ConfigError("scenario: step " + node.value +
                        " action must be query, assert, or retract");
    step.action = *parsed_action;
    auto graph = index.iri(node, vocab::graph);
    if (!graph)
      throw ConfigError("scenario: step " + node.value + " needs a graph");
    step.graph = *graph;
    auto s = index.one(node, vocab::subject);
    auto p = index.one(node, vocab::predicate);
    auto o = index.one(node, vocab::object);
    if (!s || !p || !o)
      throw ConfigError("scenario: step " + node.value +
                        " needs subject, predicate, object");
    step.pattern = rdf::TriplePattern(detail::decode_step_term(*s),
                                      detail::decode_step_term(*p),
                                      detail::decode_step_term(*o));
    if (step.action != authz::PermissionAction::Query && !step.pattern.concrete())
      throw ConfigError("scenario: step " + node.value +
                        " assert/retract needs a concrete triple");
    if (!step.pattern.has_concrete_position())
      throw ConfigError("scenario: step " + node.value +
                        " pattern has no concrete position");
    step.order = detail::parse_order(index.literal(node, vocab::order), node);
    if (!orders.insert(step.order).second)
      throw ConfigError("scenario: duplicate step order " +
                        std::to_string(step.order));
    if (auto v = index.literal(node, vocab::expect)) {
      if (*v != "permit" && *v != "deny" && *v != "any")
        throw ConfigError("scenario: step " + node.value +
                          " expect must be permit, deny, or any");
      step.expect = *v;
    }
    if (auto v = index.literal(node, vocab::expectReason)) step.expect_reason = *v;
    cfg.steps.push_back(std::move(step));
  }
  std::sort(cfg.steps.begin(), cfg.steps.end(),
            [](const ScriptStep& a, const ScriptStep& b) {
              return std::tie(a.order, a.node) < std::tie(b.order, b.node);
            });

  return cfg;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open scenario file " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  std::string dir = std::filesystem::path(path).parent_path().string();
  if (dir.empty()) dir = ".";
  auto cfg = parse_scenario(text, dir);
  if (cfg.name == "scenario")
    cfg.name = std::filesystem::path(path).stem().string();
  return cfg;
}

}  // namespace kbauthz::sim
