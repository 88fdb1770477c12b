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

#include "kbauthz/wire.hpp"
#include "oracles.hpp"

using namespace kbauthz;
using kbauthz::testing::Rng;

namespace {

wire::WireMessage random_message(Rng& rng) {
  static const std::vector<wire::MsgType> types = {
      wire::MsgType::Hello, wire::MsgType::Register, wire::MsgType::Query,
      wire::MsgType::Assert, wire::MsgType::Retract, wire::MsgType::Bye,
      wire::MsgType::Ok,    wire::MsgType::Deny,     wire::MsgType::Error};
  wire::WireMessage m;
  m.type = rng.pick(types);
  m.correlation_id = rng.below(1000000);
  size_t n = rng.below(200);
  for (size_t i = 0; i < n; ++i)
    m.body.push_back(static_cast<char>(rng.below(256)));
  return m;
}

}  // namespace

TEST_CASE("frame codec round-trips arbitrary bodies") {
  Rng rng(555);
  for (int i = 0; i < 300; ++i) {
    auto m = random_message(rng);
    auto encoded = wire::encode(m);
    auto decoded = wire::decode(encoded);
    REQUIRE(decoded.ok());
    CHECK(*decoded.message == m);
    CHECK(decoded.consumed == encoded.size());
  }
}

TEST_CASE("decode rejects malformed frames with reasons") {
  CHECK_FALSE(wire::decode("").ok());
  CHECK_FALSE(wire::decode("HELLO 1").ok());             // no terminator
  CHECK_FALSE(wire::decode("NOPE 1 0\n\n").ok());        // unknown type
  CHECK_FALSE(wire::decode("HELLO x 0\n\n").ok());       // bad id
  CHECK_FALSE(wire::decode("HELLO 1 abc\n\n").ok());     // bad length
  CHECK_FALSE(wire::decode("HELLO 1 5\nab\n").ok());     // truncated body
  CHECK_FALSE(wire::decode("HELLO 1 1\nab\n").ok());     // wrong length
  CHECK_FALSE(wire::decode("HELLO 1 99999999999999\nx\n").ok());
  CHECK(wire::decode("HELLO 1 2\nab\n").ok());
}

TEST_CASE("decode never crashes on fuzzed bytes") {
  Rng rng(777);
  for (int i = 0; i < 2000; ++i) {
    std::string junk;
    size_t n = rng.below(64);
    for (size_t j = 0; j < n; ++j)
      junk.push_back(static_cast<char>(rng.below(256)));
    auto r = wire::decode(junk);
    if (r.ok()) CHECK(r.consumed <= junk.size());
    else CHECK_FALSE(r.error.empty());
  }
}

TEST_CASE("pattern text parses and round-trips") {
  turtle::PrefixMap prefixes;
  prefixes.declare("net", "http://net.example.org/");

  auto parsed = wire::parse_pattern_text(
      "GRAPH <http://kbauthz.dev/graph/kb>\n?n net:latencyMs ?v\n", prefixes);
  REQUIRE(parsed.ok());
  CHECK(parsed.doc->graph->value == "http://kbauthz.dev/graph/kb");
  REQUIRE(parsed.doc->patterns.size() == 1);
  CHECK(parsed.doc->patterns[0].subject.is_variable());
  CHECK(parsed.doc->patterns[0].predicate.as_iri().value ==
        "http://net.example.org/latencyMs");

  SECTION("canonical serialization round-trips") {
    auto text = wire::serialize_pattern_text(*parsed.doc);
    auto again = wire::parse_pattern_text(text, prefixes);
    REQUIRE(again.ok());
    CHECK(again.doc->graph == parsed.doc->graph);
    CHECK(again.doc->patterns == parsed.doc->patterns);
  }

  SECTION("literals with datatype and language") {
    auto p = wire::parse_pattern_text(
        "net:gnb1 net:latencyMs \"12\"^^<http://www.w3.org/2001/XMLSchema#int>\n"
        "net:gnb1 net:label \"cell\"@en\n",
        prefixes);
    REQUIRE(p.ok());
    CHECK(p.doc->patterns[0].object.as_literal().datatype ==
          "http://www.w3.org/2001/XMLSchema#int");
    CHECK(p.doc->patterns[1].object.as_literal().lang == "en");
  }

  SECTION("unknown prefixes are diagnosed with the line") {
    auto p = wire::parse_pattern_text("?n zz:latencyMs ?v\n", prefixes);
    REQUIRE_FALSE(p.ok());
    CHECK(p.diagnostic->line == 1);
    CHECK(p.diagnostic->message.find("unknown prefix") != std::string::npos);
  }

  SECTION("full-scan patterns are not accepted from agents") {
    auto p = wire::parse_pattern_text("?s ?p ?o\n", prefixes);
    REQUIRE_FALSE(p.ok());
    CHECK(p.diagnostic->message.find("full-scan") != std::string::npos);
  }

  SECTION("empty documents are rejected") {
    auto p = wire::parse_pattern_text("\n# nothing\n", prefixes);
    REQUIRE_FALSE(p.ok());
  }
}

TEST_CASE("facts bodies parse the GRAPH directive plus Turtle") {
  turtle::PrefixMap prefixes;
  auto parsed = wire::parse_facts_body(
      "GRAPH <http://kbauthz.dev/graph/kb>\n"
      "@prefix net: <http://net.example.org/> .\n"
      "net:gnb1 net:latencyMs \"12\" .\n",
      prefixes);
  REQUIRE(parsed.ok());
  CHECK(parsed.doc->graph->value == "http://kbauthz.dev/graph/kb");
  CHECK(parsed.doc->triples.size() == 1);

  SECTION("without GRAPH the graph is absent") {
    auto p = wire::parse_facts_body(
        "@prefix net: <http://net.example.org/> .\nnet:a net:b net:c .\n",
        prefixes);
    REQUIRE(p.ok());
    CHECK_FALSE(p.doc->graph.has_value());
  }

  SECTION("Turtle diagnostics propagate") {
    auto p = wire::parse_facts_body("zz:a zz:b zz:c .", prefixes);
    REQUIRE_FALSE(p.ok());
    CHECK(p.error.find("unknown prefix") != std::string::npos);
  }
}

TEST_CASE("binding serialization round-trips") {
  Rng rng(888);
  auto pool = kbauthz::testing::iri_pool("http://t.example.org/", 5);
  for (int round = 0; round < 50; ++round) {
    std::vector<rdf::Binding> bindings;
    size_t n = rng.below(4);
    for (size_t i = 0; i < n; ++i) {
      rdf::Binding b;
      b["n" + std::to_string(rng.below(3))] = rdf::Term::iri(rng.pick(pool));
      b["v"] = kbauthz::testing::random_literal(rng);
      bindings.push_back(b);
    }
    auto text = wire::serialize_bindings(bindings);
    auto parsed = wire::parse_bindings(text);
    REQUIRE(parsed.has_value());
    CHECK(*parsed == bindings);
  }
}
