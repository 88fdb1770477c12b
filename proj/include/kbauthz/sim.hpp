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

// Closed-loop runner: spins up the enforcement point on a loopback
// transport, registers the scenario's agents, drives the scripted steps in
// global order, and writes the audit log and a KB snapshot. A fixed seed
// plus a virtual clock make two runs of the same scenario byte-identical.

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "kbauthz/audit.hpp"
#include "kbauthz/client.hpp"
#include "kbauthz/clock.hpp"
#include "kbauthz/credential.hpp"
#include "kbauthz/scenario.hpp"
#include "kbauthz/server.hpp"
#include "kbauthz/session.hpp"

namespace kbauthz::sim {

struct RunOptions {
  std::optional<std::string> mode_override;
  std::optional<uint64_t> seed_override;
  std::string out_dir = "out";
  // preloaded documents take precedence over scenario paths (used by tests)
  std::optional<std::string> ontology_text;
  std::optional<std::string> exceptions_text;
};

struct ScenarioReport {
  std::string name;
  std::string mode;
  uint64_t seed = 0;
  std::string status;  // COMPLETED | SCENARIO_STALLED
  size_t steps_total = 0;
  size_t permitted = 0;
  size_t denied = 0;
  size_t skipped = 0;
  size_t expectation_mismatches = 0;
  std::map<std::string, size_t> denial_reasons;

  struct AgentStats {
    std::string agent;
    size_t permitted = 0;
    size_t denied = 0;
    bool terminated = false;
    bool registered = false;
  };
  std::vector<AgentStats> agents;  // sorted by agent IRI

  std::set<uint64_t> permitted_steps;
  std::vector<std::string> mismatches;
  std::string audit_path;
  std::string snapshot_path;

  std::string to_text() const {
    std::ostringstream out;
    out << "scenario: " << name << "\n";
    out << "mode: " << mode << "\n";
    out << "seed: " << seed << "\n";
    out << "status: " << status << "\n";
    out << "steps: " << steps_total << "\n";
    out << "permitted: " << permitted << "\n";
    out << "denied: " << denied << "\n";
    out << "skipped: " << skipped << "\n";
    out << "expectation_mismatches: " << expectation_mismatches << "\n";
    out << "denial_reasons:\n";
    for (const auto& [reason, n] : denial_reasons)
      out << "  " << reason << ": " << n << "\n";
    out << "agents:\n";
    for (const auto& a : agents)
      out << "  " << a.agent << " permitted=" << a.permitted
          << " denied=" << a.denied
          << " terminated=" << (a.terminated ? "yes" : "no") << "\n";
    out << "mismatches:\n";
    for (const auto& m : mismatches) out << "  " << m << "\n";
    out << "audit: " << audit_path << "\n";
    out << "snapshot: " << snapshot_path << "\n";
    return out.str();
  }
};

namespace detail {

inline std::vector<unsigned char> seed_bytes(uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x6b626175746873ULL);
  std::vector<unsigned char> out(32);
  for (auto& b : out) b = static_cast<unsigned char>(rng() & 0xff);
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

inline std::string registration_payload(const AgentSpec& spec,
                                        const rdf::Iri& agent) {
  std::set<rdf::Triple> triples;
  triples.insert(rdf::Triple(agent, authz::vocab::hasIdentity,
                             rdf::Term::iri(agent.value + "/handler")));
  triples.insert(rdf::Triple(agent, authz::vocab::hasFunction,
                             rdf::Term::iri(spec.function)));
  for (const auto& r : spec.access_to)
    triples.insert(rdf::Triple(agent, authz::vocab::accessTo, rdf::Term::iri(r)));
  for (const auto& p : spec.predicates)
    triples.insert(
        rdf::Triple(agent, authz::vocab::authorizedPredicates, rdf::Term::iri(p)));
  for (const auto& g : spec.confined_graphs)
    triples.insert(
        rdf::Triple(agent, authz::vocab::confinedToGraph, rdf::Term::iri(g)));
  for (const auto& [pred, obj] : spec.attributes)
    triples.insert(rdf::Triple(agent, pred, obj));
  turtle::PrefixMap prefixes;
  prefixes.declare("authz", std::string(authz::vocab::kNamespace));
  return turtle::serialize(triples, prefixes);
}

inline std::string step_body(const ScriptStep& step) {
  std::string graph_line =
      "GRAPH " + rdf::term_text(rdf::Term::iri(step.graph)) + "\n";
  if (step.action == authz::PermissionAction::Query) {
    wire::PatternDoc doc;
    doc.graph = step.graph;
    doc.patterns.push_back(step.pattern);
    return wire::serialize_pattern_text(doc);
  }
  rdf::Triple t(step.pattern.subject.as_iri(), step.pattern.predicate.as_iri(),
                step.pattern.object);
  return graph_line + turtle::serialize({t}, {});
}

}  // namespace detail

// Writes all graphs into one Turtle file with `# graph <iri>` section
// markers (Turtle itself has no named-graph syntax in this subset).
inline void write_snapshot(const std::string& path,
                           const std::map<rdf::Iri, std::set<rdf::Triple>>& graphs,
                           const turtle::PrefixMap& prefixes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write snapshot " + path);
  for (const auto& [name, triples] : graphs) {
    out << "# graph <" << name.value << ">\n";
    out << turtle::serialize(triples, prefixes) << "\n";
  }
}

inline std::map<rdf::Iri, std::set<rdf::Triple>> read_snapshot(
    const std::string& path) {
  std::map<rdf::Iri, std::set<rdf::Triple>> out;
  std::string text = detail::read_file(path);
  std::optional<rdf::Iri> current;
  std::string chunk;
  auto flush = [&] {
    if (!current) return;
    auto parsed = turtle::parse(chunk);
    if (!parsed.ok())
      throw ConfigError("snapshot " + path + ": " +
                        parsed.diagnostic->to_string());
    out[*current] = std::move(parsed.triples);
    chunk.clear();
  };
  for (const auto& line : split(text, '\n')) {
    if (starts_with(line, "# graph <") && line.ends_with(">")) {
      flush();
      current = rdf::Iri(line.substr(9, line.size() - 10));
      continue;
    }
    if (current) chunk += line + "\n";
  }
  flush();
  return out;
}

inline ScenarioReport run_scenario(const ScenarioConfig& scenario,
                                   const RunOptions& options = {}) {
  ScenarioReport report;
  report.name = scenario.name;
  report.mode = options.mode_override.value_or(scenario.mode);
  report.seed = options.seed_override.value_or(scenario.seed);
  if (report.mode != "hybrid" && report.mode != "rbac-only")
    throw ConfigError("mode must be hybrid or rbac-only");

  std::string ontology_text =
      options.ontology_text
          ? *options.ontology_text
          : detail::read_file(scenario.resolve(scenario.ontology_path));
  auto ontology = authz::load_ontology(ontology_text);

  std::vector<authz::ExceptionRule> exceptions;
  if (options.exceptions_text)
    exceptions = authz::load_exceptions(*options.exceptions_text);
  else if (!scenario.exceptions_path.empty())
    exceptions = authz::load_exceptions(
        detail::read_file(scenario.resolve(scenario.exceptions_path)));

  // every IRI a step touches must be declared somewhere in the scenario or
  // the static knowledge; this is checked before any connection is made
  std::set<rdf::Iri> declared;
  authz::EngineConfig engine_cfg;
  declared.insert(engine_cfg.wildcard_sentinel);
  for (const auto& t : ontology.known_terms) declared.insert(t);
  for (const auto& a : scenario.agents) {
    declared.insert(a.function);
    for (const auto& r : a.access_to) declared.insert(r);
    for (const auto& p : a.predicates) declared.insert(p);
    for (const auto& g : a.confined_graphs) declared.insert(g);
    for (const auto& [pred, obj] : a.attributes) {
      declared.insert(pred);
      if (obj.is_iri()) declared.insert(obj.as_iri());
    }
  }
  for (const auto& f : scenario.facts) {
    declared.insert(f.graph);
    declared.insert(f.triple.subject);
    declared.insert(f.triple.predicate);
    if (f.triple.object.is_iri()) declared.insert(f.triple.object.as_iri());
  }
  auto check_declared = [&](const rdf::Term& t, const ScriptStep& step) {
    if (!t.is_iri()) return;
    const rdf::Iri& iri = t.as_iri();
    if (authz::vocab::in_namespace(iri) || declared.count(iri)) return;
    throw ConfigError("scenario: step " + step.node.value +
                      " references undeclared IRI " + iri.value);
  };
  for (const auto& step : scenario.steps) {
    check_declared(rdf::Term::iri(step.graph), step);
    check_declared(step.pattern.subject, step);
    check_declared(step.pattern.predicate, step);
    check_declared(step.pattern.object, step);
  }

  std::filesystem::create_directories(options.out_dir);
  std::string suffix = report.mode == "rbac-only" ? ".rbac" : "";
  report.audit_path = (std::filesystem::path(options.out_dir) /
                       (report.name + suffix + ".audit.tsv"))
                          .string();
  report.snapshot_path = (std::filesystem::path(options.out_dir) /
                          (report.name + suffix + ".kb.ttl"))
                             .string();

  rdf::Dataset kb;
  engine_cfg.rbac_only = (report.mode == "rbac-only");
  authz::Engine engine(kb, ontology, exceptions, engine_cfg);
  VirtualClock clock;
  audit::AuditLog log(report.audit_path);
  ServiceConfig service_cfg;
  service_cfg.strict_termination = scenario.strict_termination;

  auto ca = authn::Authority::from_seed("scenario-ca",
                                        detail::seed_bytes(report.seed));
  ImfService service(engine, {ca.anchor()}, log, clock, service_cfg);

  for (const auto& f : scenario.facts) kb.insert(f.graph, f.triple);

  net::LoopbackHub hub;
  net::Server server(service, hub.listener());
  server.start();

  const std::string not_before = "2025-01-01T00:00:00Z";
  const std::string not_after = "2036-01-01T00:00:00Z";

  struct Runtime {
    std::unique_ptr<net::Client> client;
    std::string agent_iri;
    bool terminated = false;
    bool registered = false;
  };
  std::map<rdf::Iri, Runtime> agents;  // by scenario node

  for (const auto& spec : scenario.agents) {
    Runtime rt;
    rt.agent_iri = service.config().agent_base + spec.cn;
    rt.client = std::make_unique<net::Client>(hub.connect(),
                                              std::chrono::milliseconds(5000));
    auto cred = ca.issue(spec.cn, spec.credential_role, not_before, not_after);
    auto hello = rt.client->hello(cred.serialize());
    if (hello.ok()) {
      auto reg = rt.client->register_agent(
          detail::registration_payload(spec, rdf::Iri(rt.agent_iri)));
      rt.registered = reg.ok();
      if (!reg.ok()) {
        rt.client->await_termination(std::chrono::milliseconds(500));
        rt.terminated = true;
      }
    } else {
      rt.client->await_termination(std::chrono::milliseconds(500));
      rt.terminated = true;
    }
    agents.emplace(spec.node, std::move(rt));
  }

  std::map<std::string, ScenarioReport::AgentStats> stats;
  for (const auto& spec : scenario.agents) {
    auto& rt = agents.at(spec.node);
    auto& s = stats[rt.agent_iri];
    s.agent = rt.agent_iri;
    s.terminated = rt.terminated;
    s.registered = rt.registered;
  }

  report.steps_total = scenario.steps.size();
  for (const auto& step : scenario.steps) {
    auto& rt = agents.at(step.agent_node);
    auto& agent_stats = stats[rt.agent_iri];
    if (rt.terminated || !rt.registered) {
      ++report.skipped;
      continue;
    }
    std::string body = detail::step_body(step);
    net::Client::Reply reply;
    try {
      switch (step.action) {
        case authz::PermissionAction::Query:
          reply = rt.client->query(body);
          break;
        case authz::PermissionAction::Assert:
          reply = rt.client->assert_facts(body);
          break;
        case authz::PermissionAction::Retract:
          reply = rt.client->retract_facts(body);
          break;
      }
    } catch (const net::SessionTerminated&) {
      rt.terminated = true;
      agent_stats.terminated = true;
      ++report.skipped;
      continue;
    }

    std::string outcome, reason;
    if (reply.ok()) {
      outcome = "permit";
      ++report.permitted;
      ++agent_stats.permitted;
      report.permitted_steps.insert(step.order);
    } else {
      outcome = "deny";
      reason = reply.reason();
      ++report.denied;
      ++agent_stats.denied;
      ++report.denial_reasons[reason];
      if (scenario.strict_termination) {
        rt.client->await_termination(std::chrono::milliseconds(500));
        rt.terminated = true;
        agent_stats.terminated = true;
      }
    }

    bool mismatch = (step.expect == "permit" && outcome != "permit") ||
                    (step.expect == "deny" && outcome != "deny");
    if (!mismatch && !step.expect_reason.empty() && outcome == "deny" &&
        reason != step.expect_reason)
      mismatch = true;
    if (mismatch) {
      ++report.expectation_mismatches;
      report.mismatches.push_back(
          "step " + std::to_string(step.order) + ": expected " + step.expect +
          (step.expect_reason.empty() ? "" : "(" + step.expect_reason + ")") +
          ", got " + outcome + (reason.empty() ? "" : "(" + reason + ")"));
    }
  }

  // snapshot before the farewells so live profiles are part of the export
  auto final_state = kb.snapshot();

  for (auto& [node, rt] : agents) {
    if (!rt.terminated) rt.client->bye();
  }
  server.stop();
  log.flush();

  write_snapshot(report.snapshot_path, final_state, scenario.prefixes);

  for (auto& [iri, s] : stats) report.agents.push_back(s);
  std::sort(report.agents.begin(), report.agents.end(),
            [](const auto& a, const auto& b) { return a.agent < b.agent; });

  bool all_registered = true;
  for (const auto& a : report.agents) all_registered &= a.registered;
  report.status =
      (report.skipped == 0 && all_registered) ? "COMPLETED" : "SCENARIO_STALLED";
  return report;
}

}  // namespace kbauthz::sim
