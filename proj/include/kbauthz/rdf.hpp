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

// In-memory RDF dataset with named graphs and basic-graph-pattern matching.
// Terms are IRIs, literals, and (in patterns only) variables; blank nodes are
// not part of the model, so graph equality is plain triple-set equality.

#include <algorithm>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "kbauthz/util.hpp"

namespace kbauthz::rdf {

// Absolute IRI. Construction validates the characters Turtle cannot carry
// inside <...>: whitespace, control bytes, and <>"{}|^`\.
struct Iri {
  std::string value;

  Iri() = default;
  explicit Iri(std::string v) : value(std::move(v)) {
    if (value.empty()) throw std::invalid_argument("IRI must be non-empty");
    for (unsigned char c : value) {
      if (c <= 0x20 || c == '<' || c == '>' || c == '"' || c == '{' ||
          c == '}' || c == '|' || c == '^' || c == '`' || c == '\\')
        throw std::invalid_argument("malformed IRI: " + value);
    }
  }
  auto operator<=>(const Iri&) const = default;
};

// Literal identity is (lexical form, datatype, language); no value-space
// normalization, so "1" and "01" are distinct.
struct Literal {
  std::string lexical;
  std::string datatype;  // empty = plain literal
  std::string lang;      // empty = no language tag

  auto operator<=>(const Literal&) const = default;
};

struct Variable {
  std::string name;
  auto operator<=>(const Variable&) const = default;
};

enum class TermKind { Iri, Literal, Variable };

class Term {
 public:
  Term() : v_(Iri{}) {}

  static Term iri(Iri i) { return Term(std::move(i)); }
  static Term iri(std::string s) { return Term(Iri(std::move(s))); }
  static Term literal(std::string lexical, std::string datatype = "",
                      std::string lang = "") {
    if (!datatype.empty() && !lang.empty())
      throw std::invalid_argument("literal cannot have both datatype and language");
    return Term(Literal{std::move(lexical), std::move(datatype), std::move(lang)});
  }
  static Term literal(Literal l) { return Term(std::move(l)); }
  static Term variable(std::string name) {
    if (name.empty()) throw std::invalid_argument("variable name must be non-empty");
    return Term(Variable{std::move(name)});
  }

  TermKind kind() const { return static_cast<TermKind>(v_.index()); }
  bool is_iri() const { return kind() == TermKind::Iri; }
  bool is_literal() const { return kind() == TermKind::Literal; }
  bool is_variable() const { return kind() == TermKind::Variable; }

  const Iri& as_iri() const { return std::get<Iri>(v_); }
  const Literal& as_literal() const { return std::get<Literal>(v_); }
  const Variable& as_variable() const { return std::get<Variable>(v_); }

  auto operator<=>(const Term&) const = default;

 private:
  explicit Term(Iri i) : v_(std::move(i)) {}
  explicit Term(Literal l) : v_(std::move(l)) {}
  explicit Term(Variable v) : v_(std::move(v)) {}

  std::variant<Iri, Literal, Variable> v_;
};

inline std::string escape_string(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

// Canonical single-line text for a term: <iri>, "lex", "lex"@lang,
// "lex"^^<dt>, or ?name. Used for deterministic ordering, audit lines, and
// the wire pattern grammar.
inline std::string term_text(const Term& t) {
  switch (t.kind()) {
    case TermKind::Iri:
      return "<" + t.as_iri().value + ">";
    case TermKind::Literal: {
      const Literal& l = t.as_literal();
      std::string out = "\"" + escape_string(l.lexical) + "\"";
      if (!l.lang.empty()) out += "@" + l.lang;
      else if (!l.datatype.empty()) out += "^^<" + l.datatype + ">";
      return out;
    }
    case TermKind::Variable:
      return "?" + t.as_variable().name;
  }
  return {};
}

// Ground triple: no variables in any position. Subject and predicate are
// IRIs by construction; a literal object is allowed.
struct Triple {
  Iri subject;
  Iri predicate;
  Term object;

  Triple() = default;
  Triple(Iri s, Iri p, Term o)
      : subject(std::move(s)), predicate(std::move(p)), object(std::move(o)) {
    if (object.is_variable())
      throw std::invalid_argument("triple object cannot be a variable");
  }
  auto operator<=>(const Triple&) const = default;
};

inline std::string triple_text(const Triple& t) {
  return term_text(Term::iri(t.subject)) + " " +
         term_text(Term::iri(t.predicate)) + " " + term_text(t.object);
}

// Pattern over triples; variables may appear in any position. A pattern with
// no concrete position must be explicitly flagged as a full scan — that form
// is reserved for internal oracles and rule conditions, never accepted from
// agents.
struct TriplePattern {
  Term subject;
  Term predicate;
  Term object;
  bool full_scan = false;

  TriplePattern() = default;
  TriplePattern(Term s, Term p, Term o, bool full = false)
      : subject(std::move(s)), predicate(std::move(p)), object(std::move(o)),
        full_scan(full) {}

  bool has_concrete_position() const {
    return !subject.is_variable() || !predicate.is_variable() ||
           !object.is_variable();
  }
  bool concrete() const {
    return !subject.is_variable() && !predicate.is_variable() &&
           !object.is_variable();
  }
  auto operator<=>(const TriplePattern&) const = default;
};

inline std::string pattern_text(const TriplePattern& p) {
  return term_text(p.subject) + " " + term_text(p.predicate) + " " +
         term_text(p.object);
}

// Lifts a ground triple into a concrete pattern.
inline TriplePattern pattern_of(const Triple& t) {
  return TriplePattern(Term::iri(t.subject), Term::iri(t.predicate), t.object);
}

struct NamedGraph {
  Iri name;
  std::set<Triple> triples;
};

// Blank nodes are excluded from the model, so set equality is graph equality.
inline bool graphs_equal(const NamedGraph& a, const NamedGraph& b) {
  return a.triples == b.triples;
}

// Solution mapping: variable name -> concrete term. Every variable of the
// matched pattern set is bound; there are no extraneous keys.
using Binding = std::map<std::string, Term>;

inline std::string binding_text(const Binding& b) {
  std::string out;
  for (const auto& [name, term] : b) {
    if (!out.empty()) out += " ";
    out += "?" + name + "=" + term_text(term);
  }
  return out;
}

namespace detail {

inline bool unify(const Term& pattern, const Term& value, Binding& b) {
  if (pattern.is_variable()) {
    auto it = b.find(pattern.as_variable().name);
    if (it != b.end()) return it->second == value;
    b.emplace(pattern.as_variable().name, value);
    return true;
  }
  return pattern == value;
}

inline bool unify_triple(const TriplePattern& p, const Triple& t, Binding& b) {
  return unify(p.subject, Term::iri(t.subject), b) &&
         unify(p.predicate, Term::iri(t.predicate), b) &&
         unify(p.object, t.object, b);
}

}  // namespace detail

// Named-graph dataset. Reads take a shared lock, mutations an exclusive one;
// multi-triple installs are atomic so no reader observes a half-written
// graph.
class Dataset {
 public:
  Dataset() = default;
  Dataset(const Dataset&) = delete;
  Dataset& operator=(const Dataset&) = delete;

  // Returns true when the triple was new (set semantics). The graph is
  // created if absent.
  bool insert(const Iri& graph, Triple t) {
    std::unique_lock lock(mu_);
    return graphs_[graph].insert(std::move(t)).second;
  }

  // Installs a whole graph in one step, replacing any existing content.
  // Returns the number of triples now in the graph.
  size_t insert_graph(const Iri& graph, std::set<Triple> triples) {
    std::unique_lock lock(mu_);
    auto& g = graphs_[graph];
    g = std::move(triples);
    return g.size();
  }

  bool remove(const Iri& graph, const Triple& t) {
    std::unique_lock lock(mu_);
    auto it = graphs_.find(graph);
    if (it == graphs_.end()) return false;
    bool removed = it->second.erase(t) > 0;
    return removed;
  }

  // Removes the graph and all its triples atomically; returns the number of
  // triples removed (0 if the graph was absent).
  size_t retract_graph(const Iri& graph) {
    std::unique_lock lock(mu_);
    auto it = graphs_.find(graph);
    if (it == graphs_.end()) return 0;
    size_t n = it->second.size();
    graphs_.erase(it);
    return n;
  }

  // Removes every triple with the given subject from every graph; empty
  // graphs are kept (only retract_graph removes a graph entry).
  size_t remove_by_subject(const Iri& subject) {
    std::unique_lock lock(mu_);
    size_t n = 0;
    for (auto& [name, triples] : graphs_) {
      for (auto it = triples.begin(); it != triples.end();) {
        if (it->subject == subject) {
          it = triples.erase(it);
          ++n;
        } else {
          ++it;
        }
      }
    }
    return n;
  }

  bool has_graph(const Iri& graph) const {
    std::shared_lock lock(mu_);
    return graphs_.count(graph) > 0;
  }

  std::optional<NamedGraph> graph(const Iri& name) const {
    std::shared_lock lock(mu_);
    auto it = graphs_.find(name);
    if (it == graphs_.end()) return std::nullopt;
    return NamedGraph{name, it->second};
  }

  bool contains(const Iri& graph, const Triple& t) const {
    std::shared_lock lock(mu_);
    auto it = graphs_.find(graph);
    return it != graphs_.end() && it->second.count(t) > 0;
  }

  std::vector<Iri> graph_names() const {
    std::shared_lock lock(mu_);
    std::vector<Iri> out;
    out.reserve(graphs_.size());
    for (const auto& [name, _] : graphs_) out.push_back(name);
    return out;
  }

  std::map<Iri, std::set<Triple>> snapshot() const {
    std::shared_lock lock(mu_);
    return graphs_;
  }

  size_t size() const {
    std::shared_lock lock(mu_);
    size_t n = 0;
    for (const auto& [_, triples] : graphs_) n += triples.size();
    return n;
  }

  // Basic graph pattern matching over the union of the scoped graphs.
  // Patterns join on shared variable names. Results are deduplicated and
  // sorted by the lexical form of the bound terms, so output order is
  // canonical.
  std::vector<Binding> match(const std::set<Iri>& scope,
                             const std::vector<TriplePattern>& patterns) const {
    if (patterns.empty())
      throw std::invalid_argument("match: pattern list must be non-empty");
    for (const auto& p : patterns) {
      if (!p.has_concrete_position() && !p.full_scan)
        throw std::invalid_argument(
            "match: unflagged pattern with no concrete position");
    }
    std::shared_lock lock(mu_);
    std::vector<Binding> current{Binding{}};
    for (const auto& p : patterns) {
      std::vector<Binding> next;
      for (const auto& b : current) {
        for (const auto& gname : scope) {
          auto git = graphs_.find(gname);
          if (git == graphs_.end()) continue;
          for (const auto& t : git->second) {
            Binding extended = b;
            if (detail::unify_triple(p, t, extended))
              next.push_back(std::move(extended));
          }
        }
      }
      current = std::move(next);
      if (current.empty()) break;
    }
    std::sort(current.begin(), current.end(),
              [](const Binding& a, const Binding& b) {
                return binding_text(a) < binding_text(b);
              });
    current.erase(std::unique(current.begin(), current.end()), current.end());
    return current;
  }

 private:
  mutable std::shared_mutex mu_;
  std::map<Iri, std::set<Triple>> graphs_;
};

}  // namespace kbauthz::rdf
