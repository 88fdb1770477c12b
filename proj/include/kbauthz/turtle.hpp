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

// Parser and serializer for the Turtle subset used by profile graphs,
// registration payloads, ontology files, and rule documents:
//
//   @prefix declarations, <absolute IRIs>, prefixed names, the `a` keyword,
//   plain/typed/language-tagged string literals, `;` predicate lists,
//   `,` object lists, `.` terminators, `#` comments.
//
// Blank nodes, collections, numeric/boolean shorthand, and multi-line
// strings are outside the subset and produce a positioned diagnostic.
// Serialization is canonical: prefixes sorted by label, subjects and
// predicates sorted lexicographically, so output is independent of
// insertion order and stable across runs.

#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "kbauthz/rdf.hpp"
#include "kbauthz/util.hpp"

namespace kbauthz::turtle {

inline constexpr std::string_view kRdfType =
    "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";

// Prefix label -> namespace IRI. Re-declaring a label replaces its mapping.
struct PrefixMap {
  std::map<std::string, std::string> entries;

  static bool valid_label(std::string_view label) {
    for (size_t i = 0; i < label.size(); ++i) {
      unsigned char c = label[i];
      bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                (c >= '0' && c <= '9') || c == '_' || c >= 0x80 ||
                (i > 0 && c == '-');
      if (!ok) return false;
    }
    return true;
  }

  void declare(const std::string& label, const std::string& ns) {
    if (!valid_label(label))
      throw std::invalid_argument("invalid prefix label: " + label);
    rdf::Iri check(ns);  // validates namespace characters
    entries[label] = check.value;
  }

  std::optional<std::string> expand(const std::string& label,
                                    const std::string& local) const {
    auto it = entries.find(label);
    if (it == entries.end()) return std::nullopt;
    return it->second + local;
  }

  bool empty() const { return entries.empty(); }
};

struct ParseDiagnostic {
  size_t line = 1;    // 1-based
  size_t column = 1;  // 1-based, counted in bytes
  std::string message;

  std::string to_string() const {
    return std::to_string(line) + ":" + std::to_string(column) + ": " + message;
  }
};

struct ParseResult {
  std::set<rdf::Triple> triples;
  PrefixMap prefixes;
  std::optional<ParseDiagnostic> diagnostic;

  bool ok() const { return !diagnostic.has_value(); }
};

namespace detail {

struct Abort {};  // unwinds to parse() after a diagnostic is recorded

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  ParseResult run() {
    ParseResult result;
    try {
      skip_trivia();
      while (!at_end()) {
        if (peek() == '@') {
          directive(result);
        } else {
          statement(result);
        }
        skip_trivia();
      }
      result.prefixes = prefixes_;
    } catch (const Abort&) {
      result.diagnostic = diagnostic_;
      result.triples.clear();
    }
    return result;
  }

 private:
  bool at_end() const { return pos_ >= text_.size(); }
  char peek(size_t ahead = 0) const {
    return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
  }
  char advance() {
    char c = text_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  [[noreturn]] void fail(std::string message) { fail_at(line_, col_, std::move(message)); }
  [[noreturn]] void fail_at(size_t line, size_t col, std::string message) {
    diagnostic_ = ParseDiagnostic{line, col, std::move(message)};
    throw Abort{};
  }

  void skip_trivia() {
    while (!at_end()) {
      char c = peek();
      if (c == '#') {
        while (!at_end() && peek() != '\n') advance();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else {
        break;
      }
    }
  }

  void expect(char c, std::string_view what) {
    if (at_end() || peek() != c)
      fail("expected '" + std::string(1, c) + "' " + std::string(what));
    advance();
  }

  static bool name_start(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
           (c >= '0' && c <= '9') || c == '_' || c >= 0x80;
  }
  static bool name_char(unsigned char c) { return name_start(c) || c == '-'; }

  void reject_unsupported() {
    char c = peek();
    if (c == '[' || c == ']') fail("blank node syntax not supported");
    if (c == '(' || c == ')') fail("collection syntax not supported");
    if (c == '_' && peek(1) == ':') fail("blank node label not supported");
  }

  void directive(ParseResult& result) {
    size_t dline = line_, dcol = col_;
    advance();  // '@'
    std::string word;
    while (!at_end() && name_char(peek())) word.push_back(advance());
    if (word == "base") fail_at(dline, dcol, "base directive not supported");
    if (word != "prefix") fail_at(dline, dcol, "unknown directive '@" + word + "'");
    skip_trivia();
    std::string label;
    while (!at_end() && peek() != ':' && name_char(peek()))
      label.push_back(advance());
    expect(':', "after prefix label");
    skip_trivia();
    std::string ns = iriref();
    skip_trivia();
    expect('.', "after @prefix directive");
    try {
      prefixes_.declare(label, ns);
    } catch (const std::invalid_argument& e) {
      fail_at(dline, dcol, e.what());
    }
    (void)result;
  }

  std::string iriref() {
    size_t sline = line_, scol = col_;
    expect('<', "to open IRI");
    std::string value;
    while (true) {
      if (at_end()) fail_at(sline, scol, "unterminated IRI");
      char c = peek();
      if (c == '>') {
        advance();
        break;
      }
      if (c == '\n' || c == '\r') fail_at(sline, scol, "unterminated IRI");
      if (c == ' ' || c == '\t') fail_at(sline, scol, "whitespace in IRI");
      value.push_back(advance());
    }
    try {
      return rdf::Iri(value).value;
    } catch (const std::invalid_argument&) {
      fail_at(sline, scol, "malformed IRI <" + value + ">");
    }
  }

  // Prefixed name. The leading label (possibly empty) has been determined to
  // be followed by ':'.
  rdf::Iri pname() {
    size_t sline = line_, scol = col_;
    std::string label;
    while (!at_end() && peek() != ':') {
      if (!name_char(peek())) fail("invalid character in prefix label");
      label.push_back(advance());
    }
    expect(':', "in prefixed name");
    std::string local;
    while (!at_end()) {
      unsigned char c = peek();
      if (name_char(c) || c == '%') {
        local.push_back(advance());
      } else if (c == '.' && name_char(peek(1))) {
        // dots are allowed inside a local name but a trailing dot is the
        // statement terminator
        local.push_back(advance());
      } else {
        break;
      }
    }
    auto expanded = prefixes_.expand(label, local);
    if (!expanded) fail_at(sline, scol, "unknown prefix '" + label + ":'");
    try {
      return rdf::Iri(*expanded);
    } catch (const std::invalid_argument&) {
      fail_at(sline, scol, "prefixed name expands to malformed IRI");
    }
  }

  rdf::Iri iri_term(std::string_view position) {
    reject_unsupported();
    char c = peek();
    if (c == '<') return rdf::Iri(iriref());
    if (name_start(c) || c == ':') {
      // distinguish pname from bare words
      size_t look = 0;
      while (name_char(peek(look)) || (peek(look) == '.' && name_char(peek(look + 1))))
        ++look;
      if (peek(look) == ':') return pname();
      bareword_error(look, position);
    }
    if (c == '"') fail("literal not allowed as " + std::string(position));
    fail("expected IRI as " + std::string(position));
  }

  [[noreturn]] void bareword_error(size_t length, std::string_view position) {
    std::string word;
    for (size_t i = 0; i < length; ++i) word.push_back(peek(i));
    if (word == "true" || word == "false")
      fail("boolean literal not supported");
    if (!word.empty() && (std::isdigit(static_cast<unsigned char>(word[0]))))
      fail("numeric literal not supported");
    fail("expected IRI as " + std::string(position) + ", got '" + word + "'");
  }

  rdf::Term object_term() {
    reject_unsupported();
    char c = peek();
    if (c == '"') return literal();
    if (c == '+' || c == '-' || std::isdigit(static_cast<unsigned char>(c)))
      fail("numeric literal not supported");
    if (c == '<') return rdf::Term::iri(rdf::Iri(iriref()));
    if (name_start(c) || c == ':') {
      size_t look = 0;
      while (name_char(peek(look)) || (peek(look) == '.' && name_char(peek(look + 1))))
        ++look;
      if (peek(look) == ':') return rdf::Term::iri(pname());
      bareword_error(look, "object");
    }
    fail("expected object");
  }

  rdf::Term literal() {
    size_t sline = line_, scol = col_;
    expect('"', "to open literal");
    if (peek() == '"' && peek(1) == '"')
      fail_at(sline, scol, "long string literal not supported");
    std::string lexical;
    while (true) {
      if (at_end()) fail_at(sline, scol, "unterminated string literal");
      char c = peek();
      if (c == '"') {
        advance();
        break;
      }
      if (c == '\n' || c == '\r')
        fail_at(sline, scol, "unterminated string literal");
      if (c == '\\') {
        advance();
        if (at_end()) fail_at(sline, scol, "unterminated string literal");
        char e = advance();
        switch (e) {
          case 't': lexical.push_back('\t'); break;
          case 'b': lexical.push_back('\b'); break;
          case 'n': lexical.push_back('\n'); break;
          case 'r': lexical.push_back('\r'); break;
          case 'f': lexical.push_back('\f'); break;
          case '"': lexical.push_back('"'); break;
          case '\'': lexical.push_back('\''); break;
          case '\\': lexical.push_back('\\'); break;
          default:
            fail("invalid escape sequence '\\" + std::string(1, e) + "'");
        }
        continue;
      }
      lexical.push_back(advance());
    }
    // optional language tag or datatype
    if (peek() == '@') {
      advance();
      std::string lang;
      while (!at_end() &&
             (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '-'))
        lang.push_back(advance());
      if (lang.empty()) fail("empty language tag");
      return rdf::Term::literal(lexical, "", lang);
    }
    if (peek() == '^' && peek(1) == '^') {
      advance();
      advance();
      rdf::Iri dt = iri_term("datatype");
      return rdf::Term::literal(lexical, dt.value);
    }
    return rdf::Term::literal(lexical);
  }

  rdf::Iri verb() {
    // `a` abbreviates rdf:type when it stands alone
    if (peek() == 'a' && !name_char(peek(1)) && peek(1) != ':' && peek(1) != '.')
      { advance(); return rdf::Iri(std::string(kRdfType)); }
    return iri_term("predicate");
  }

  void statement(ParseResult& result) {
    rdf::Iri subject = iri_term("subject");
    while (true) {
      skip_trivia();
      rdf::Iri predicate = verb();
      while (true) {
        skip_trivia();
        rdf::Term object = object_term();
        result.triples.insert(rdf::Triple(subject, predicate, object));
        skip_trivia();
        if (peek() == ',') {
          advance();
          continue;
        }
        break;
      }
      if (peek() == ';') {
        while (peek() == ';') {  // tolerate stray extra ';'
          advance();
          skip_trivia();
        }
        if (peek() == '.') break;  // dangling ';' before terminator
        continue;
      }
      break;
    }
    skip_trivia();
    expect('.', "after statement");
  }

  std::string_view text_;
  size_t pos_ = 0;
  size_t line_ = 1;
  size_t col_ = 1;
  PrefixMap prefixes_;
  ParseDiagnostic diagnostic_;
};

}  // namespace detail

// Total parse: any input yields triples + prefixes or a positioned
// diagnostic; never throws on document content.
inline ParseResult parse(std::string_view text) {
  return detail::Parser(text).run();
}

namespace detail {

inline bool serializer_name_start(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         (c >= '0' && c <= '9') || c == '_' || c >= 0x80;
}
inline bool serializer_name_char(unsigned char c) {
  return serializer_name_start(c) || c == '-';
}

inline bool valid_local(std::string_view local) {
  if (local.empty()) return true;
  if (!serializer_name_start(local[0])) return false;
  for (size_t i = 0; i < local.size(); ++i) {
    unsigned char c = local[i];
    if (serializer_name_char(c)) continue;
    if (c == '.' && i + 1 < local.size() && serializer_name_char(local[i + 1]))
      continue;
    return false;
  }
  return true;
}

// Longest-namespace prefix compression; falls back to <...>.
inline std::string compress(const std::string& iri, const PrefixMap& prefixes,
                            std::set<std::string>& used) {
  const std::string* best_label = nullptr;
  const std::string* best_ns = nullptr;
  for (const auto& [label, ns] : prefixes.entries) {
    if (!starts_with(iri, ns)) continue;
    std::string_view local(iri);
    local.remove_prefix(ns.size());
    if (!valid_local(local)) continue;
    if (!best_ns || ns.size() > best_ns->size()) {
      best_label = &label;
      best_ns = &ns;
    }
  }
  if (!best_label) return "<" + iri + ">";
  used.insert(*best_label);
  return *best_label + ":" + iri.substr(best_ns->size());
}

inline std::string literal_text(const rdf::Literal& l, const PrefixMap& prefixes,
                                std::set<std::string>& used) {
  std::string out = "\"" + rdf::escape_string(l.lexical) + "\"";
  if (!l.lang.empty()) {
    out += "@" + l.lang;
  } else if (!l.datatype.empty()) {
    out += "^^" + compress(l.datatype, prefixes, used);
  }
  return out;
}

}  // namespace detail

// Canonical serialization: prefix block (used prefixes only, sorted by
// label), then one statement group per subject in lexicographic order,
// predicates joined with ';' and objects with ','. parse(serialize(G))
// yields a triple set equal to G.
inline std::string serialize(const std::set<rdf::Triple>& triples,
                             const PrefixMap& prefixes) {
  std::map<rdf::Iri, std::map<rdf::Iri, std::set<rdf::Term>>> grouped;
  for (const auto& t : triples) grouped[t.subject][t.predicate].insert(t.object);

  std::set<std::string> used;
  std::ostringstream body;
  for (const auto& [subject, preds] : grouped) {
    std::string subj_text = detail::compress(subject.value, prefixes, used);
    body << subj_text;
    bool first_pred = true;
    for (const auto& [pred, objects] : preds) {
      if (!first_pred) body << " ;\n    ";
      else body << " ";
      first_pred = false;
      if (pred.value == kRdfType) {
        body << "a";
      } else {
        body << detail::compress(pred.value, prefixes, used);
      }
      // objects sorted by canonical text for a stable order
      std::vector<std::string> texts;
      for (const auto& o : objects) {
        if (o.is_iri())
          texts.push_back(detail::compress(o.as_iri().value, prefixes, used));
        else
          texts.push_back(detail::literal_text(o.as_literal(), prefixes, used));
      }
      std::sort(texts.begin(), texts.end());
      for (size_t i = 0; i < texts.size(); ++i)
        body << (i == 0 ? " " : ", ") << texts[i];
    }
    body << " .\n";
  }

  std::ostringstream out;
  for (const auto& label : used) {
    auto it = prefixes.entries.find(label);
    out << "@prefix " << label << ": <" << it->second << "> .\n";
  }
  if (!used.empty() && !grouped.empty()) out << "\n";
  out << body.str();
  return out.str();
}

}  // namespace kbauthz::turtle
