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

// Server configuration, itself a Turtle document so there is exactly one
// format to parse everywhere. Unknown configuration keys are rejected.
// Precedence: command-line flags > environment (KBAUTHZ_LISTEN) > file.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "kbauthz/engine.hpp"
#include "kbauthz/turtle.hpp"
#include "kbauthz/util.hpp"

namespace kbauthz::cfg {

namespace vocab {

inline constexpr std::string_view kNamespace = "http://kbauthz.dev/config#";

inline rdf::Iri make(std::string_view local) {
  return rdf::Iri(std::string(kNamespace) + std::string(local));
}

inline const rdf::Iri config = make("config");
inline const rdf::Iri ontologyPath = make("ontologyPath");
inline const rdf::Iri exceptionsPath = make("exceptionsPath");
inline const rdf::Iri wildcardSentinel = make("wildcardSentinel");
inline const rdf::Iri listen = make("listen");
inline const rdf::Iri strictTermination = make("strictTermination");
inline const rdf::Iri mode = make("mode");
inline const rdf::Iri defaultGraph = make("defaultGraph");
inline const rdf::Iri auditPath = make("auditPath");
inline const rdf::Iri agentBase = make("agentBase");
inline const rdf::Iri anchorPath = make("anchorPath");

}  // namespace vocab

struct Config {
  std::string ontology_path;
  std::string exceptions_path;  // optional
  rdf::Iri wildcard_sentinel = authz::vocab::ANY;
  std::string listen = "127.0.0.1:7643";
  bool strict_termination = true;
  std::string mode = "hybrid";
  rdf::Iri default_graph = rdf::Iri("http://kbauthz.dev/graph/kb");
  std::string audit_path = "kbauthz.audit.tsv";
  std::string agent_base = "http://kbauthz.dev/agent/";
  std::string anchor_path;  // trust anchor file for serve
};

inline Config parse_config(std::string_view document,
                           const std::string& base_dir = ".") {
  auto parsed = turtle::parse(document);
  if (!parsed.ok())
    throw ConfigError("config: " + parsed.diagnostic->to_string());

  Config out;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_absolute()) return p;
    return (std::filesystem::path(base_dir) / path).string();
  };
  auto literal = [](const rdf::Triple& t, const char* what) {
    if (!t.object.is_literal())
      throw ConfigError(std::string("config: ") + what + " must be a literal");
    return t.object.as_literal().lexical;
  };
  auto iri = [](const rdf::Triple& t, const char* what) {
    if (!t.object.is_iri())
      throw ConfigError(std::string("config: ") + what + " must be an IRI");
    return t.object.as_iri();
  };

  for (const auto& t : parsed.triples) {
    if (!starts_with(t.predicate.value, vocab::kNamespace)) {
      if (t.subject == vocab::config)
        throw ConfigError("config: unknown key " + t.predicate.value);
      continue;
    }
    if (t.predicate == vocab::ontologyPath)
      out.ontology_path = resolve(literal(t, "ontologyPath"));
    else if (t.predicate == vocab::exceptionsPath)
      out.exceptions_path = resolve(literal(t, "exceptionsPath"));
    else if (t.predicate == vocab::wildcardSentinel)
      out.wildcard_sentinel = iri(t, "wildcardSentinel");
    else if (t.predicate == vocab::listen)
      out.listen = literal(t, "listen");
    else if (t.predicate == vocab::strictTermination) {
      std::string v = literal(t, "strictTermination");
      if (v != "true" && v != "false")
        throw ConfigError("config: strictTermination must be true or false");
      out.strict_termination = (v == "true");
    } else if (t.predicate == vocab::mode) {
      out.mode = literal(t, "mode");
      if (out.mode != "hybrid" && out.mode != "rbac-only")
        throw ConfigError("config: mode must be hybrid or rbac-only");
    } else if (t.predicate == vocab::defaultGraph)
      out.default_graph = iri(t, "defaultGraph");
    else if (t.predicate == vocab::auditPath)
      out.audit_path = resolve(literal(t, "auditPath"));
    else if (t.predicate == vocab::agentBase)
      out.agent_base = literal(t, "agentBase");
    else if (t.predicate == vocab::anchorPath)
      out.anchor_path = resolve(literal(t, "anchorPath"));
    else
      throw ConfigError("config: unknown key " + t.predicate.value);
  }

  if (out.ontology_path.empty())
    throw ConfigError("config: ontologyPath is required");
  if (!std::filesystem::exists(out.ontology_path))
    throw ConfigError("config: ontology file not found: " + out.ontology_path);
  if (!out.exceptions_path.empty() &&
      !std::filesystem::exists(out.exceptions_path))
    throw ConfigError("config: exceptions file not found: " + out.exceptions_path);
  if (!out.anchor_path.empty() && !std::filesystem::exists(out.anchor_path))
    throw ConfigError("config: anchor file not found: " + out.anchor_path);
  return out;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  std::string dir = std::filesystem::path(path).parent_path().string();
  return parse_config(text, dir.empty() ? "." : dir);
}

// Environment overrides sit between the file and command-line flags.
inline void apply_env(Config& config) {
  if (const char* listen = std::getenv("KBAUTHZ_LISTEN"))
    if (*listen) config.listen = listen;
}

}  // namespace kbauthz::cfg
