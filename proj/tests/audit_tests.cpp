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
#include <filesystem>

#include "kbauthz/audit.hpp"
#include "oracles.hpp"

using namespace kbauthz;
using kbauthz::testing::Rng;

namespace {

audit::AuditRecord sample() {
  audit::AuditRecord r;
  r.timestamp = "2026-01-01T00:00:05Z";
  r.agent = "http://kbauthz.dev/agent/g1";
  r.session_id = 3;
  r.action = "assert";
  r.target_graph = "http://kbauthz.dev/graph/kb";
  r.pattern = "<http://net.example.org/gnb1> <http://net.example.org/latencyMs> \"12\"";
  r.outcome = "deny";
  r.reason = "RESOURCE_NOT_IN_SCOPE";
  r.fired_rule = "authz.resource";
  return r;
}

audit::AuditRecord random_record(Rng& rng) {
  static const std::vector<std::string> actions = {"query", "assert", "retract",
                                                   "hello", "register"};
  static const std::vector<std::string> tricky = {
      "plain", "with\ttab", "with\nnewline", "back\\slash", "-", ""};
  audit::AuditRecord r;
  r.timestamp = format_rfc3339(1767225600 + static_cast<long>(rng.below(100000)));
  r.agent = "http://kbauthz.dev/agent/a" + std::to_string(rng.below(10));
  r.session_id = rng.below(1000);
  r.action = rng.pick(actions);
  r.target_graph = rng.pick(tricky);
  r.pattern = rng.pick(tricky);
  r.outcome = rng.chance(0.5) ? "permit" : "deny";
  r.reason = rng.chance(0.5) ? "OK" : "GRAPH_NOT_CONFINED";
  r.fired_rule = rng.pick(tricky);
  return r;
}

}  // namespace

TEST_CASE("one decision is one line with nine tab-separated fields") {
  auto line = audit::format_record(sample());
  CHECK(std::count(line.begin(), line.end(), '\t') == 8);
  CHECK(line.find('\n') == std::string::npos);
  CHECK(line.find("RESOURCE_NOT_IN_SCOPE") != std::string::npos);

  auto parsed = audit::parse_record(line);
  REQUIRE(parsed.has_value());
  CHECK(*parsed == sample());
}

TEST_CASE("records with embedded tabs and newlines still round-trip") {
  Rng rng(31337);
  for (int i = 0; i < 100; ++i) {
    auto r = random_record(rng);
    auto line = audit::format_record(r);
    CHECK(line.find('\n') == std::string::npos);
    auto parsed = audit::parse_record(line);
    REQUIRE(parsed.has_value());
    CHECK(*parsed == r);
  }
}

TEST_CASE("malformed lines are positioned errors") {
  auto result = audit::read_audit_text(
      audit::format_record(sample()) + "\n" + "only\tthree\tfields\n");
  REQUIRE_FALSE(result.ok());
  CHECK(result.error->line == 2);
  CHECK(result.error->message.find("9") != std::string::npos);

  SECTION("bad session id") {
    auto bad = audit::read_audit_text("t\ta\tnotanumber\tq\tg\tp\tpermit\tOK\tr\n");
    REQUIRE_FALSE(bad.ok());
    CHECK(bad.error->message.find("session id") != std::string::npos);
  }

  SECTION("bad escape") {
    auto bad = audit::read_audit_text("t\ta\t1\tq\tg\tp\\x\tpermit\tOK\tr\n");
    REQUIRE_FALSE(bad.ok());
    CHECK(bad.error->message.find("escape") != std::string::npos);
  }
}

TEST_CASE("the file-backed log appends and reads back identically") {
  auto path = (std::filesystem::temp_directory_path() / "kbauthz_audit_test.tsv")
                  .string();
  Rng rng(2);
  std::vector<audit::AuditRecord> written;
  {
    audit::AuditLog log(path);
    for (int i = 0; i < 25; ++i) {
      auto r = random_record(rng);
      log.append(r);
      written.push_back(r);
    }
    log.flush();
  }
  auto result = audit::read_audit(path);
  REQUIRE(result.ok());
  CHECK(result.records == written);
  std::filesystem::remove(path);
}
