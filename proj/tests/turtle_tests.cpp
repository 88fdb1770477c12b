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

#include "kbauthz/turtle.hpp"
#include "oracles.hpp"

using namespace kbauthz;
using kbauthz::testing::Rng;

TEST_CASE("parse handles the subset grammar") {
  auto r = turtle::parse(
      "@prefix ex: <http://ex/> . ex:a ex:hasRole ex:Grounding .");
  REQUIRE(r.ok());
  REQUIRE(r.triples.size() == 1);
  const auto& t = *r.triples.begin();
  CHECK(t.subject.value == "http://ex/a");
  CHECK(t.predicate.value == "http://ex/hasRole");
  CHECK(t.object.as_iri().value == "http://ex/Grounding");

  SECTION("empty document") {
    auto e = turtle::parse("");
    REQUIRE(e.ok());
    CHECK(e.triples.empty());
    CHECK(e.prefixes.empty());
  }

  SECTION("predicate and object lists, the a keyword, comments") {
    auto m = turtle::parse(R"(# header comment
@prefix ex: <http://ex/> .
ex:s a ex:Type ;
     ex:p ex:o1 , ex:o2 ;
     ex:q "plain" , "tagged"@en , "typed"^^ex:dt .
)");
    REQUIRE(m.ok());
    CHECK(m.triples.size() == 6);
    CHECK(m.triples.count(rdf::Triple(
        rdf::Iri("http://ex/s"), rdf::Iri(std::string(turtle::kRdfType)),
        rdf::Term::iri("http://ex/Type"))) == 1);
    CHECK(m.triples.count(rdf::Triple(rdf::Iri("http://ex/s"),
                                      rdf::Iri("http://ex/q"),
                                      rdf::Term::literal("tagged", "", "en"))) == 1);
  }

  SECTION("string escapes") {
    auto m = turtle::parse(
        "@prefix ex: <http://ex/> . ex:s ex:p \"a\\tb\\nc\\\"d\\\\e\" .");
    REQUIRE(m.ok());
    CHECK(m.triples.begin()->object.as_literal().lexical == "a\tb\nc\"d\\e");
  }

  SECTION("dangling semicolon before the terminator") {
    auto m = turtle::parse("@prefix ex: <http://ex/> . ex:s ex:p ex:o ; .");
    REQUIRE(m.ok());
    CHECK(m.triples.size() == 1);
  }
}

TEST_CASE("parse rejects constructs outside the subset with positions") {
  SECTION("unknown prefix") {
    auto r = turtle::parse("ex:a ex:p ex:b .");
    REQUIRE_FALSE(r.ok());
    CHECK(r.diagnostic->line == 1);
    CHECK(r.diagnostic->message.find("unknown prefix") != std::string::npos);
  }
  SECTION("unterminated IRI") {
    auto r = turtle::parse("@prefix ex: <http://ex/ .\nex:a ex:p ex:b .");
    REQUIRE_FALSE(r.ok());
    CHECK(r.diagnostic->message.find("IRI") != std::string::npos);
  }
  SECTION("unterminated literal") {
    auto r = turtle::parse("@prefix ex: <http://ex/> .\nex:a ex:p \"oops .");
    REQUIRE_FALSE(r.ok());
    CHECK(r.diagnostic->line == 2);
    CHECK(r.diagnostic->message.find("unterminated string") != std::string::npos);
  }
  SECTION("blank nodes") {
    auto r = turtle::parse("@prefix ex: <http://ex/> . ex:a ex:p [ ] .");
    REQUIRE_FALSE(r.ok());
    CHECK(r.diagnostic->message.find("blank node") != std::string::npos);
    auto r2 = turtle::parse("@prefix ex: <http://ex/> . _:b ex:p ex:o .");
    REQUIRE_FALSE(r2.ok());
    CHECK(r2.diagnostic->message.find("blank node") != std::string::npos);
  }
  SECTION("collections") {
    auto r = turtle::parse("@prefix ex: <http://ex/> . ex:a ex:p ( ex:b ) .");
    REQUIRE_FALSE(r.ok());
    CHECK(r.diagnostic->message.find("collection") != std::string::npos);
  }
  SECTION("numeric and boolean shorthand") {
    auto r = turtle::parse("@prefix ex: <http://ex/> . ex:a ex:p 123 .");
    REQUIRE_FALSE(r.ok());
    CHECK(r.diagnostic->message.find("numeric literal") != std::string::npos);
    auto r2 = turtle::parse("@prefix ex: <http://ex/> . ex:a ex:p true .");
    REQUIRE_FALSE(r2.ok());
    CHECK(r2.diagnostic->message.find("boolean literal") != std::string::npos);
  }
  SECTION("base directive") {
    auto r = turtle::parse("@base <http://ex/> .");
    REQUIRE_FALSE(r.ok());
    CHECK(r.diagnostic->message.find("base directive") != std::string::npos);
  }
  SECTION("long strings") {
    auto r = turtle::parse("@prefix ex: <http://ex/> . ex:a ex:p \"\"\"x\"\"\" .");
    REQUIRE_FALSE(r.ok());
    CHECK(r.diagnostic->message.find("long string") != std::string::npos);
  }
  SECTION("column positions point into the source") {
    auto r = turtle::parse("@prefix ex: <http://ex/> .\n  zz:a ex:p ex:b .");
    REQUIRE_FALSE(r.ok());
    CHECK(r.diagnostic->line == 2);
    CHECK(r.diagnostic->column == 3);
  }
}

TEST_CASE("serialize emits a canonical document") {
  turtle::PrefixMap prefixes;
  prefixes.declare("ex", "http://ex/");
  std::set<rdf::Triple> g{rdf::Triple(rdf::Iri("http://ex/a"),
                                      rdf::Iri("http://ex/p"),
                                      rdf::Term::iri("http://ex/b"))};
  std::string text = turtle::serialize(g, prefixes);
  CHECK(text == "@prefix ex: <http://ex/> .\n\nex:a ex:p ex:b .\n");

  SECTION("two namespaces, both declared, sorted") {
    turtle::PrefixMap two;
    two.declare("b", "http://bbb/");
    two.declare("a", "http://aaa/");
    std::set<rdf::Triple> h{rdf::Triple(rdf::Iri("http://aaa/x"),
                                        rdf::Iri("http://bbb/y"),
                                        rdf::Term::literal("1"))};
    std::string out = turtle::serialize(h, two);
    CHECK(out.find("@prefix a: <http://aaa/> .\n@prefix b: <http://bbb/> .") == 0);
  }

  SECTION("IRIs without a matching prefix fall back to angle brackets") {
    std::set<rdf::Triple> h{rdf::Triple(rdf::Iri("http://other/x"),
                                        rdf::Iri("http://ex/p"),
                                        rdf::Term::literal("v"))};
    std::string out = turtle::serialize(h, prefixes);
    CHECK(out.find("<http://other/x>") != std::string::npos);
  }
}

TEST_CASE("round-trip: parse after serialize is the identity on triple sets") {
  Rng rng(42);
  std::vector<rdf::Iri> pool;
  for (auto& i : kbauthz::testing::iri_pool("http://alpha.example.org/ns#", 6))
    pool.push_back(i);
  for (auto& i : kbauthz::testing::iri_pool("http://beta.example.org/", 6))
    pool.push_back(i);
  turtle::PrefixMap prefixes;
  prefixes.declare("al", "http://alpha.example.org/ns#");
  prefixes.declare("be", "http://beta.example.org/");

  for (int round = 0; round < 80; ++round) {
    auto g = kbauthz::testing::random_graph(rng, pool, 50);
    std::string text = turtle::serialize(g, prefixes);
    auto parsed = turtle::parse(text);
    REQUIRE(parsed.ok());
    CHECK(parsed.triples == g);
    // canonical: serializing the parse result reproduces the text
    CHECK(turtle::serialize(parsed.triples, prefixes) == text);
  }
}

TEST_CASE("parse is total on fuzzed inputs") {
  Rng rng(1234);
  const std::string alphabet =
      "@prefix<>:.;,\"\\#ex \t\n_()[]^?0123456789abcdefghijklmnop\xc3\xa4\x01\xff";
  for (int round = 0; round < 1500; ++round) {
    std::string junk;
    size_t n = rng.below(120);
    for (size_t i = 0; i < n; ++i) junk.push_back(alphabet[rng.below(alphabet.size())]);
    auto r = turtle::parse(junk);  // must not crash
    if (!r.ok()) {
      CHECK(r.diagnostic->line >= 1);
      CHECK(r.diagnostic->column >= 1);
    }
  }
}

TEST_CASE("prefix re-declaration replaces the mapping") {
  auto r = turtle::parse(
      "@prefix ex: <http://one/> .\n@prefix ex: <http://two/> .\nex:a ex:p ex:b .");
  REQUIRE(r.ok());
  CHECK(r.triples.begin()->subject.value == "http://two/a");
}
