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

#include <catch2/catch_amalgamated.hpp>

#include "kbauthz/engine.hpp"
#include "oracles.hpp"

using namespace kbauthz;
using authz::PermissionAction;
using authz::ReasonCode;
using kbauthz::testing::Rng;

namespace {

const char* kOntology = R"(
@prefix authz: <http://kbauthz.dev/vocab#> .
@prefix role: <http://kbauthz.dev/role#> .
@prefix fn: <http://kbauthz.dev/function#> .
role:Grounding a authz:Role ;
    authz:roleAnnotation "grounder" ;
    authz:defaultPermission authz:Query, authz:Assert .
role:Actuation a authz:Role ;
    authz:roleAnnotation "actuator" ;
    authz:defaultPermission authz:Query, authz:Assert .
fn:UserPlaneGrounding authz:mapsToRole role:Grounding .
fn:TopologyGrounding authz:mapsToRole role:Grounding .
fn:ActuationDispatch authz:mapsToRole role:Actuation .
)";

const rdf::Iri kKb("http://kbauthz.dev/graph/kb");
const rdf::Iri kGnb1("http://net.example.org/gnb1");
const rdf::Iri kGnb2("http://net.example.org/gnb2");
const rdf::Iri kLatency("http://net.example.org/latencyMs");
const rdf::Iri kGrounding("http://kbauthz.dev/role#Grounding");

struct Fixture {
  rdf::Dataset kb;
  authz::Engine engine;

  explicit Fixture(std::vector<authz::ExceptionRule> exceptions = {},
                   authz::EngineConfig cfg = {})
      : engine(kb, authz::load_ontology(kOntology), std::move(exceptions), cfg) {}

  rdf::Iri agent(const std::string& cn) {
    return rdf::Iri("http://kbauthz.dev/agent/" + cn);
  }

  // registers an agent directly through the engine pipeline
  authz::AuthorizationProfile registered(const std::string& cn,
                                         std::set<rdf::Iri> access,
                                         std::set<rdf::Iri> preds,
                                         std::set<rdf::Iri> graphs) {
    rdf::Iri a = agent(cn);
    std::set<rdf::Triple> reg;
    reg.insert(rdf::Triple(a, authz::vocab::hasIdentity,
                           rdf::Term::iri(a.value + "/handler")));
    reg.insert(rdf::Triple(
        a, authz::vocab::hasFunction,
        rdf::Term::iri("http://kbauthz.dev/function#UserPlaneGrounding")));
    for (const auto& r : access)
      reg.insert(rdf::Triple(a, authz::vocab::accessTo, rdf::Term::iri(r)));
    for (const auto& p : preds)
      reg.insert(
          rdf::Triple(a, authz::vocab::authorizedPredicates, rdf::Term::iri(p)));
    for (const auto& g : graphs)
      reg.insert(
          rdf::Triple(a, authz::vocab::confinedToGraph, rdf::Term::iri(g)));
    kb.insert_graph(a, reg);
    auto role = engine.derive_role(a);
    REQUIRE(role.ok());
    auto perms = engine.derive_permissions(a, *role);
    auto profile = engine.build_profile(a, reg, *role, perms);
    REQUIRE(profile.ok());
    return *profile;
  }
};

rdf::Triple latency_triple(const rdf::Iri& node, const std::string& value) {
  return rdf::Triple(node, kLatency, rdf::Term::literal(value));
}

}  // namespace

TEST_CASE("derive_role follows the function map and asserts hasRole") {
  Fixture fx;
  rdf::Iri a = fx.agent("g1");
  fx.kb.insert(a, rdf::Triple(a, authz::vocab::hasFunction,
                              rdf::Term::iri("http://kbauthz.dev/function#UserPlaneGrounding")));
  auto role = fx.engine.derive_role(a);
  REQUIRE(role.ok());
  CHECK(*role == kGrounding);
  CHECK(fx.kb.contains(a, rdf::Triple(a, authz::vocab::hasRole,
                                      rdf::Term::iri(kGrounding))));

  SECTION("missing function fact fails the derivation") {
    rdf::Iri b = fx.agent("nofunc");
    auto r = fx.engine.derive_role(b);
    CHECK_FALSE(r.ok());
    CHECK(r.code == ReasonCode::MISSING_CLAIM);
  }

  SECTION("unmapped function fails closed") {
    rdf::Iri b = fx.agent("odd");
    fx.kb.insert(b, rdf::Triple(b, authz::vocab::hasFunction,
                                rdf::Term::iri("http://kbauthz.dev/function#Unknown")));
    auto r = fx.engine.derive_role(b);
    CHECK_FALSE(r.ok());
    CHECK(r.code == ReasonCode::UNKNOWN_FUNCTION);
  }

  SECTION("two agents with the same function get distinct profiles") {
    auto p1 = fx.registered("g1a", {kGnb1}, {kLatency}, {kKb});
    auto p2 = fx.registered("g1b", {kGnb2}, {kLatency}, {kKb});
    CHECK(p1.role == p2.role);
    CHECK(p1.profile_graph != p2.profile_graph);
  }
}

TEST_CASE("derive_permissions applies exception rules by attribute") {
  authz::ExceptionRule rule;
  rule.id = rdf::Iri("http://kbauthz.dev/exception#readonly");
  rule.role = kGrounding;
  rule.match_attributes.insert(
      {authz::vocab::scopedToIntent, rdf::Term::iri("http://net.example.org/intentX")});
  rule.remove_permissions.insert(PermissionAction::Assert);
  Fixture fx({rule});

  rdf::Iri a = fx.agent("g1");
  fx.kb.insert(a, rdf::Triple(a, authz::vocab::hasFunction,
                              rdf::Term::iri("http://kbauthz.dev/function#UserPlaneGrounding")));

  SECTION("no matching attributes leaves the defaults") {
    auto perms = fx.engine.derive_permissions(a, kGrounding);
    CHECK(perms == std::set<PermissionAction>{PermissionAction::Query,
                                              PermissionAction::Assert});
  }

  SECTION("matching attributes remove the permission") {
    fx.kb.insert(a, rdf::Triple(a, authz::vocab::scopedToIntent,
                                rdf::Term::iri("http://net.example.org/intentX")));
    auto perms = fx.engine.derive_permissions(a, kGrounding);
    CHECK(perms == std::set<PermissionAction>{PermissionAction::Query});
    // asserted into the agent graph
    CHECK(fx.kb.contains(a, rdf::Triple(a, authz::vocab::allowedPermission,
                                        rdf::Term::iri(authz::vocab::Query))));
  }
}

TEST_CASE("check_least_privilege rejects wildcards and empty scopes") {
  Fixture fx;
  rdf::Iri a = fx.agent("g1");
  std::vector<rdf::Triple> ok{
      rdf::Triple(a, authz::vocab::accessTo, rdf::Term::iri(kGnb1))};
  CHECK_FALSE(fx.engine.check_least_privilege(ok).has_value());

  std::vector<rdf::Triple> wild{
      rdf::Triple(a, authz::vocab::accessTo, rdf::Term::iri(authz::vocab::ANY))};
  auto v = fx.engine.check_least_privilege(wild);
  REQUIRE(v.has_value());
  CHECK(v->code == ReasonCode::WILDCARD_REJECTED);
  REQUIRE(v->offending.has_value());
  CHECK(v->offending->object.as_iri() == authz::vocab::ANY);

  auto empty = fx.engine.check_least_privilege({});
  REQUIRE(empty.has_value());
  CHECK(empty->code == ReasonCode::EMPTY_SCOPE);
}

TEST_CASE("build_profile materializes the profile graph") {
  Fixture fx;
  auto profile = fx.registered("g1", {kGnb1, kGnb2}, {kLatency}, {kKb});
  CHECK(profile.profile_graph.value == "http://kbauthz.dev/agent/g1#profile");

  auto graph = fx.kb.graph(profile.profile_graph);
  REQUIRE(graph.has_value());
  size_t access_count = 0, pred_count = 0;
  for (const auto& t : graph->triples) {
    if (t.predicate == authz::vocab::accessTo) ++access_count;
    if (t.predicate == authz::vocab::authorizedPredicates) ++pred_count;
  }
  CHECK(access_count == 2);
  CHECK(pred_count == 1);

  SECTION("the record and the graph are interconvertible losslessly") {
    auto roundtrip = authz::profile_from_graph(*graph);
    REQUIRE(roundtrip.has_value());
    CHECK(*roundtrip == profile);
    CHECK(rdf::graphs_equal(authz::profile_to_graph(*roundtrip), *graph));
  }

  SECTION("the profile graph round-trips through Turtle") {
    turtle::PrefixMap prefixes;
    prefixes.declare("authz", std::string(authz::vocab::kNamespace));
    auto text = turtle::serialize(graph->triples, prefixes);
    auto parsed = turtle::parse(text);
    REQUIRE(parsed.ok());
    CHECK(parsed.triples == graph->triples);
  }

  SECTION("a second registration without termination conflicts") {
    rdf::Iri a = fx.agent("g1");
    std::set<rdf::Triple> reg{
        rdf::Triple(a, authz::vocab::accessTo, rdf::Term::iri(kGnb1))};
    auto again = fx.engine.build_profile(a, reg, kGrounding,
                                         {PermissionAction::Query});
    CHECK_FALSE(again.ok());
    CHECK(again.code == ReasonCode::CONFLICT);
  }
}

TEST_CASE("extract_request_pattern lifts and validates") {
  rdf::Iri a("http://kbauthz.dev/agent/g1");
  auto assertion = authz::Request::assertion(a, kKb, {latency_triple(kGnb1, "12")});
  auto lifted = authz::extract_request_pattern(assertion);
  REQUIRE(lifted.size() == 1);
  CHECK(lifted[0].concrete());

  auto query = authz::Request::query(
      a, kKb,
      {rdf::TriplePattern(rdf::Term::variable("n"), rdf::Term::iri(kLatency),
                          rdf::Term::variable("v"))});
  CHECK(authz::extract_request_pattern(query) == query.patterns);

  auto empty = authz::Request::query(a, kKb, {});
  CHECK_THROWS_AS(authz::extract_request_pattern(empty), std::invalid_argument);
  auto empty2 = authz::Request::assertion(a, kKb, {});
  CHECK_THROWS_AS(authz::extract_request_pattern(empty2), std::invalid_argument);
}

TEST_CASE("authorize applies the fixed check order") {
  Fixture fx;
  auto profile = fx.registered("g1", {kGnb1}, {kLatency}, {kKb});
  rdf::Iri a = fx.agent("g1");

  SECTION("in-scope assert is permitted") {
    auto d = fx.engine.authorize(
        authz::Request::assertion(a, kKb, {latency_triple(kGnb1, "9")}));
    CHECK(d.permitted());
    CHECK(d.reason == ReasonCode::OK);
    CHECK(d.fired_rule == "authz.ok");
  }

  SECTION("out-of-scope resource is denied") {
    auto d = fx.engine.authorize(
        authz::Request::assertion(a, kKb, {latency_triple(kGnb2, "9")}));
    CHECK_FALSE(d.permitted());
    CHECK(d.reason == ReasonCode::RESOURCE_NOT_IN_SCOPE);
  }

  SECTION("no profile denies by default") {
    auto d = fx.engine.authorize(authz::Request::assertion(
        fx.agent("ghost"), kKb, {latency_triple(kGnb1, "9")}));
    CHECK(d.reason == ReasonCode::NO_PROFILE);
  }

  SECTION("a same-role agent cannot reach the first agent's resource") {
    fx.registered("g2", {kGnb2}, {kLatency}, {kKb});
    auto d = fx.engine.authorize(authz::Request::assertion(
        fx.agent("g2"), kKb, {latency_triple(kGnb1, "9")}));
    CHECK(d.reason == ReasonCode::RESOURCE_NOT_IN_SCOPE);
  }

  SECTION("action check precedes graph and predicate checks") {
    auto d = fx.engine.authorize(authz::Request::retraction(
        a, rdf::Iri("http://kbauthz.dev/graph/other"),
        {rdf::Triple(kGnb2, rdf::Iri("http://net.example.org/other"),
                     rdf::Term::literal("1"))}));
    CHECK(d.reason == ReasonCode::ACTION_NOT_ALLOWED);
  }

  SECTION("graph check precedes predicate and resource checks") {
    auto d = fx.engine.authorize(authz::Request::assertion(
        a, rdf::Iri("http://kbauthz.dev/graph/other"),
        {rdf::Triple(kGnb2, rdf::Iri("http://net.example.org/other"),
                     rdf::Term::literal("1"))}));
    CHECK(d.reason == ReasonCode::GRAPH_NOT_CONFINED);
  }

  SECTION("variable predicates are never authorized") {
    auto d = fx.engine.authorize(authz::Request::query(
        a, kKb,
        {rdf::TriplePattern(rdf::Term::iri(kGnb1), rdf::Term::variable("p"),
                            rdf::Term::variable("v"))}));
    CHECK(d.reason == ReasonCode::PREDICATE_NOT_AUTHORIZED);
  }

  SECTION("the wildcard sentinel is rejected in any request position") {
    auto d = fx.engine.authorize(authz::Request::assertion(
        a, kKb,
        {rdf::Triple(kGnb1, kLatency, rdf::Term::iri(authz::vocab::ANY))}));
    CHECK(d.reason == ReasonCode::WILDCARD_REJECTED);
  }

  (void)profile;
}

TEST_CASE("allowedPermissionValues whitelists assert values") {
  Fixture fx;
  rdf::Iri a = fx.agent("g1");
  std::set<rdf::Triple> reg{
      rdf::Triple(a, authz::vocab::hasIdentity, rdf::Term::iri(a.value + "/h")),
      rdf::Triple(a, authz::vocab::hasFunction,
                  rdf::Term::iri("http://kbauthz.dev/function#UserPlaneGrounding")),
      rdf::Triple(a, authz::vocab::accessTo, rdf::Term::iri(kGnb1)),
      rdf::Triple(a, authz::vocab::authorizedPredicates, rdf::Term::iri(kLatency)),
      rdf::Triple(a, authz::vocab::confinedToGraph, rdf::Term::iri(kKb)),
      rdf::Triple(a, authz::vocab::allowedPermissionValues,
                  rdf::Term::literal("up")),
      rdf::Triple(a, authz::vocab::allowedPermissionValues,
                  rdf::Term::literal("down"))};
  fx.kb.insert_graph(a, reg);
  auto role = fx.engine.derive_role(a);
  REQUIRE(role.ok());
  auto profile = fx.engine.build_profile(
      a, reg, *role, fx.engine.derive_permissions(a, *role));
  REQUIRE(profile.ok());

  auto ok = fx.engine.authorize(authz::Request::assertion(
      a, kKb, {rdf::Triple(kGnb1, kLatency, rdf::Term::literal("up"))}));
  CHECK(ok.permitted());
  auto bad = fx.engine.authorize(authz::Request::assertion(
      a, kKb, {rdf::Triple(kGnb1, kLatency, rdf::Term::literal("sideways"))}));
  CHECK(bad.reason == ReasonCode::ACTION_NOT_ALLOWED);
  CHECK(bad.fired_rule == "authz.permission-values");
}

TEST_CASE("execute applies effects only on permit") {
  Fixture fx;
  fx.registered("g1", {kGnb1}, {kLatency}, {kKb});
  rdf::Iri a = fx.agent("g1");

  SECTION("permitted query post-filters out-of-scope bindings") {
    fx.kb.insert(kKb, latency_triple(kGnb1, "12"));
    fx.kb.insert(kKb, latency_triple(kGnb2, "9"));
    auto result = fx.engine.execute(authz::Request::query(
        a, kKb,
        {rdf::TriplePattern(rdf::Term::variable("n"), rdf::Term::iri(kLatency),
                            rdf::Term::variable("v"))}));
    REQUIRE(result.decision.permitted());
    REQUIRE(result.bindings.size() == 1);
    CHECK(result.bindings[0].at("n") == rdf::Term::iri(kGnb1));
  }

  SECTION("a denied request leaves the dataset untouched") {
    auto before = fx.kb.snapshot();
    auto result = fx.engine.execute(authz::Request::assertion(
        a, kKb, {latency_triple(kGnb2, "9")}));
    CHECK_FALSE(result.decision.permitted());
    CHECK(result.mutated == 0);
    CHECK(fx.kb.snapshot() == before);
  }

  SECTION("read-your-writes under the serialized engine") {
    auto w = fx.engine.execute(authz::Request::assertion(
        a, kKb, {latency_triple(kGnb1, "33")}));
    REQUIRE(w.decision.permitted());
    CHECK(w.mutated == 1);
    auto r = fx.engine.execute(authz::Request::query(
        a, kKb,
        {rdf::TriplePattern(rdf::Term::iri(kGnb1), rdf::Term::iri(kLatency),
                            rdf::Term::literal("33"))}));
    REQUIRE(r.decision.permitted());
    CHECK(r.bindings.size() == 1);
  }

  SECTION("permitted retract removes the triple") {
    fx.registered("g9", {kGnb1}, {kLatency}, {kKb});
    // grant retract by hand: extend the stored profile graph
    rdf::Iri g9 = fx.agent("g9");
    rdf::Iri pg = authz::profile_graph_name(g9);
    fx.kb.insert(pg, rdf::Triple(pg, authz::vocab::allowedPermission,
                                 rdf::Term::iri(authz::vocab::Retract)));
    fx.kb.insert(kKb, latency_triple(kGnb1, "44"));
    auto result = fx.engine.execute(authz::Request::retraction(
        g9, kKb, {latency_triple(kGnb1, "44")}));
    REQUIRE(result.decision.permitted());
    CHECK(result.mutated == 1);
    CHECK_FALSE(fx.kb.contains(kKb, latency_triple(kGnb1, "44")));
  }
}

TEST_CASE("authorize agrees with the tuple-membership oracle") {
  auto u = kbauthz::testing::small_universe();
  Rng rng(99);
  Fixture fx;
  for (int round = 0; round < 150; ++round) {
    rdf::Iri a = fx.agent("rnd" + std::to_string(round));
    auto profile = kbauthz::testing::random_profile(rng, a, u);
    fx.kb.insert_graph(profile.profile_graph, authz::profile_to_graph(profile).triples);
    auto request = kbauthz::testing::random_request(
        rng, a, u, fx.engine.config().wildcard_sentinel);
    bool expected = kbauthz::testing::oracle_permits(
        profile, request, fx.engine.ontology(), fx.engine.config().wildcard_sentinel);
    auto got = fx.engine.authorize(request);
    INFO("round " << round << " reason " << authz::to_string(got.reason));
    CHECK(got.permitted() == expected);
  }
}

TEST_CASE("decisions are a function of the requesting agent's profile only") {
  auto u = kbauthz::testing::small_universe();
  Rng rng(123);
  for (int round = 0; round < 40; ++round) {
    Fixture fx;
    rdf::Iri a = fx.agent("a");
    rdf::Iri b = fx.agent("b");
    auto pa = kbauthz::testing::random_profile(rng, a, u);
    auto pb = kbauthz::testing::random_profile(rng, b, u);
    fx.kb.insert_graph(pa.profile_graph, authz::profile_to_graph(pa).triples);
    fx.kb.insert_graph(pb.profile_graph, authz::profile_to_graph(pb).triples);
    auto request = kbauthz::testing::random_request(
        rng, a, u, fx.engine.config().wildcard_sentinel);
    auto before = fx.engine.authorize(request);
    // mutate b's profile arbitrarily: a's decision must not move
    auto pb2 = kbauthz::testing::random_profile(rng, b, u);
    fx.kb.insert_graph(pb.profile_graph, authz::profile_to_graph(pb2).triples);
    auto after = fx.engine.authorize(request);
    CHECK(before.reason == after.reason);
    CHECK(before.permitted() == after.permitted());
  }
}

TEST_CASE("continuous authorization: profile edits bite on the next call") {
  Fixture fx;
  fx.registered("g1", {kGnb1, kGnb2}, {kLatency}, {kKb});
  rdf::Iri a = fx.agent("g1");
  auto request = authz::Request::assertion(a, kKb, {latency_triple(kGnb1, "5")});
  CHECK(fx.engine.authorize(request).permitted());

  rdf::Iri pg = authz::profile_graph_name(a);
  CHECK(fx.kb.remove(pg, rdf::Triple(pg, authz::vocab::accessTo,
                                     rdf::Term::iri(kGnb1))));
  auto after = fx.engine.authorize(request);
  CHECK_FALSE(after.permitted());
  CHECK(after.reason == ReasonCode::RESOURCE_NOT_IN_SCOPE);
}

TEST_CASE("apply_rules forward-chains to fixpoint") {
  Fixture fx;
  rdf::Iri a = fx.agent("g1");
  fx.kb.insert(a, rdf::Triple(a, authz::vocab::hasFunction,
                              rdf::Term::iri("http://kbauthz.dev/function#UserPlaneGrounding")));
  // the static knowledge carries the function map as triples
  for (const auto& t : fx.engine.ontology().triples)
    fx.kb.insert(rdf::Iri("http://kbauthz.dev/graph/static"), t);

  authz::RuleDocument rule;
  rule.id = rdf::Iri("http://kbauthz.dev/rule#roleFromFunction");
  rule.condition.push_back(rdf::TriplePattern(
      rdf::Term::variable("a"), rdf::Term::iri(authz::vocab::hasFunction),
      rdf::Term::variable("f"), true));
  rule.condition.push_back(rdf::TriplePattern(
      rdf::Term::variable("f"), rdf::Term::iri(authz::vocab::mapsToRole),
      rdf::Term::variable("r"), true));
  rule.conclusion.push_back(rdf::TriplePattern(
      rdf::Term::variable("a"), rdf::Term::iri(authz::vocab::hasRole),
      rdf::Term::variable("r"), true));

  size_t derived = fx.engine.apply_rules({rule});
  CHECK(derived == 1);
  CHECK(fx.kb.contains(fx.engine.config().derivations_graph,
                       rdf::Triple(a, authz::vocab::hasRole,
                                   rdf::Term::iri(kGrounding))));
  // same conclusion as the built-in derivation
  auto direct = fx.engine.derive_role(a);
  REQUIRE(direct.ok());
  CHECK(*direct == kGrounding);

  SECTION("a second application derives nothing new") {
    CHECK(fx.engine.apply_rules({rule}) == 0);
  }
  SECTION("empty and non-matching rule sets derive nothing") {
    CHECK(fx.engine.apply_rules({}) == 0);
    authz::RuleDocument never;
    never.id = rdf::Iri("http://kbauthz.dev/rule#never");
    never.condition.push_back(rdf::TriplePattern(
        rdf::Term::variable("x"),
        rdf::Term::iri("http://net.example.org/noSuchPredicate"),
        rdf::Term::variable("y"), true));
    never.conclusion.push_back(rdf::TriplePattern(
        rdf::Term::variable("x"), rdf::Term::iri(authz::vocab::hasRole),
        rdf::Term::variable("y"), true));
    CHECK(fx.engine.apply_rules({never}) == 0);
  }
}

TEST_CASE("apply_rules re-checks stored profiles for least privilege") {
  Fixture fx;
  fx.registered("g1", {kGnb1}, {kLatency}, {kKb});
  CHECK_NOTHROW(fx.engine.apply_rules({}));
  // tamper: smuggle a wildcard into the stored profile
  rdf::Iri pg = authz::profile_graph_name(fx.agent("g1"));
  fx.kb.insert(pg, rdf::Triple(pg, authz::vocab::accessTo,
                               rdf::Term::iri(authz::vocab::ANY)));
  CHECK_THROWS_AS(fx.engine.apply_rules({}), std::logic_error);
}

TEST_CASE("retract_agent removes every trace of the agent") {
  Fixture fx;
  fx.registered("g1", {kGnb1}, {kLatency}, {kKb});
  rdf::Iri a = fx.agent("g1");
  fx.kb.insert(kKb, rdf::Triple(a, rdf::Iri("http://net.example.org/note"),
                                rdf::Term::literal("stray")));
  size_t removed = fx.engine.retract_agent(a);
  CHECK(removed > 0);
  CHECK(fx.engine.authorize(authz::Request::assertion(
                                a, kKb, {latency_triple(kGnb1, "1")}))
            .reason == ReasonCode::NO_PROFILE);
  for (const auto& [name, triples] : fx.kb.snapshot())
    for (const auto& t : triples) CHECK_FALSE(t.subject == a);

  SECTION("idempotent on unknown agents") {
    CHECK(fx.engine.retract_agent(fx.agent("never-registered")) == 0);
    CHECK(fx.engine.retract_agent(a) == 0);
  }
}

TEST_CASE("rbac-only baseline skips resource and predicate checks") {
  Fixture fx;
  auto profile = fx.registered("g1", {kGnb1}, {kLatency}, {kKb});
  rdf::Iri a = fx.agent("g1");

  // hybrid denies this; the baseline cannot see resource scope
  auto cross = authz::Request::assertion(a, kKb, {latency_triple(kGnb2, "1")});
  CHECK(fx.engine.authorize(&profile, cross).reason ==
        ReasonCode::RESOURCE_NOT_IN_SCOPE);
  CHECK(fx.engine.rbac_only_authorize(&profile, cross).permitted());

  // any predicate on any resource in a confined graph is allowed
  auto anypred = authz::Request::assertion(
      a, kKb,
      {rdf::Triple(kGnb2, rdf::Iri("http://net.example.org/adminState"),
                   rdf::Term::literal("down"))});
  CHECK(fx.engine.rbac_only_authorize(&profile, anypred).permitted());

  // deny-by-default is retained
  CHECK(fx.engine.rbac_only_authorize(nullptr, cross).reason ==
        ReasonCode::NO_PROFILE);
  // graph confinement is retained
  auto offgraph = authz::Request::assertion(
      a, rdf::Iri("http://kbauthz.dev/graph/other"),
      {latency_triple(kGnb1, "1")});
  CHECK(fx.engine.rbac_only_authorize(&profile, offgraph).reason ==
        ReasonCode::GRAPH_NOT_CONFINED);
}

TEST_CASE("hybrid permits are a subset of rbac-only permits") {
  auto u = kbauthz::testing::small_universe();
  Rng rng(2024);
  Fixture fx;
  for (int round = 0; round < 200; ++round) {
    rdf::Iri a = fx.agent("dom" + std::to_string(round));
    auto profile = kbauthz::testing::random_profile(rng, a, u);
    auto request = kbauthz::testing::random_request(
        rng, a, u, fx.engine.config().wildcard_sentinel);
    bool hybrid = fx.engine.authorize(&profile, request).permitted();
    bool baseline = fx.engine.rbac_only_authorize(&profile, request).permitted();
    if (hybrid) CHECK(baseline);
  }
}

TEST_CASE("exception and rule documents load from Turtle") {
  const char* exceptions_doc = R"(
@prefix authz: <http://kbauthz.dev/vocab#> .
@prefix role: <http://kbauthz.dev/role#> .
@prefix xr: <http://kbauthz.dev/exception#> .
xr:ueReadonly a authz:ExceptionRule ;
    authz:forRole role:Grounding ;
    authz:matchAttribute xr:ueReadonly-m1 ;
    authz:removePermission authz:Assert .
xr:ueReadonly-m1 authz:matchPredicate authz:scopedToIntent ;
    authz:matchObject <http://net.example.org/intentX> .
)";
  auto rules = authz::load_exceptions(exceptions_doc);
  REQUIRE(rules.size() == 1);
  CHECK(rules[0].role == kGrounding);
  CHECK(rules[0].remove_permissions == std::set<PermissionAction>{PermissionAction::Assert});
  REQUIRE(rules[0].match_attributes.size() == 1);

  SECTION("add/remove overlap is rejected") {
    const char* bad = R"(
@prefix authz: <http://kbauthz.dev/vocab#> .
@prefix role: <http://kbauthz.dev/role#> .
@prefix xr: <http://kbauthz.dev/exception#> .
xr:broken a authz:ExceptionRule ;
    authz:forRole role:Grounding ;
    authz:removePermission authz:Assert ;
    authz:addPermission authz:Assert .
)";
    CHECK_THROWS_AS(authz::load_exceptions(bad), ConfigError);
  }

  SECTION("rule documents reject unbound conclusion variables") {
    const char* bad = R"(
@prefix authz: <http://kbauthz.dev/vocab#> .
@prefix r: <http://kbauthz.dev/rule#> .
r:broken a authz:Rule .
r:broken-c1 authz:conditionOf r:broken ;
    authz:subject "?a" ; authz:predicate authz:hasFunction ; authz:object "?f" .
r:broken-h1 authz:conclusionOf r:broken ;
    authz:subject "?a" ; authz:predicate authz:hasRole ; authz:object "?ghost" .
)";
    CHECK_THROWS_AS(authz::load_rules(bad), ConfigError);
  }

  SECTION("well-formed rule documents load and run") {
    const char* doc = R"(
@prefix authz: <http://kbauthz.dev/vocab#> .
@prefix r: <http://kbauthz.dev/rule#> .
r:roleFromFunction a authz:Rule .
r:roleFromFunction-c1 authz:conditionOf r:roleFromFunction ;
    authz:subject "?a" ; authz:predicate authz:hasFunction ; authz:object "?f" .
r:roleFromFunction-c2 authz:conditionOf r:roleFromFunction ;
    authz:subject "?f" ; authz:predicate authz:mapsToRole ; authz:object "?r" .
r:roleFromFunction-h1 authz:conclusionOf r:roleFromFunction ;
    authz:subject "?a" ; authz:predicate authz:hasRole ; authz:object "?r" .
)";
    auto loaded = authz::load_rules(doc);
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0].condition.size() == 2);
    CHECK(loaded[0].conclusion.size() == 1);
  }
}
