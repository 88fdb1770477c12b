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

// Line-framed wire protocol and the request body grammars.
//
// Frame:  <TYPE> <correlationId> <byte-length>\n<body bytes>\n
// where byte-length counts the body bytes exactly and \n is 0x0A. Bodies are
// UTF-8: a credential document for HELLO (preceded by the protocol version
// token), Turtle for REGISTER/ASSERT/RETRACT, pattern text for QUERY, reason
// code plus detail for DENY/ERROR, and result bindings for OK.
//
// Pattern text: an optional first line `GRAPH <iri>`, then one triple
// pattern per line as three whitespace-separated terms (?name, <iri>,
// prefix:name, or a quoted literal with optional @lang / ^^datatype).

#include <cctype>
#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kbauthz/rdf.hpp"
#include "kbauthz/transport.hpp"
#include "kbauthz/turtle.hpp"
#include "kbauthz/util.hpp"

namespace kbauthz::wire {

inline constexpr std::string_view kVersionToken = "v1";
inline constexpr size_t kMaxBodyBytes = 16 * 1024 * 1024;
inline constexpr size_t kMaxHeaderBytes = 256;

enum class MsgType { Hello, Register, Query, Assert, Retract, Bye, Ok, Deny, Error };

inline std::string to_string(MsgType t) {
  switch (t) {
    case MsgType::Hello: return "HELLO";
    case MsgType::Register: return "REGISTER";
    case MsgType::Query: return "QUERY";
    case MsgType::Assert: return "ASSERT";
    case MsgType::Retract: return "RETRACT";
    case MsgType::Bye: return "BYE";
    case MsgType::Ok: return "OK";
    case MsgType::Deny: return "DENY";
    case MsgType::Error: return "ERROR";
  }
  return {};
}

inline std::optional<MsgType> type_from_string(std::string_view s) {
  if (s == "HELLO") return MsgType::Hello;
  if (s == "REGISTER") return MsgType::Register;
  if (s == "QUERY") return MsgType::Query;
  if (s == "ASSERT") return MsgType::Assert;
  if (s == "RETRACT") return MsgType::Retract;
  if (s == "BYE") return MsgType::Bye;
  if (s == "OK") return MsgType::Ok;
  if (s == "DENY") return MsgType::Deny;
  if (s == "ERROR") return MsgType::Error;
  return std::nullopt;
}

struct WireMessage {
  MsgType type = MsgType::Error;
  uint64_t correlation_id = 0;
  std::string body;

  bool operator==(const WireMessage&) const = default;
};

inline std::string encode(const WireMessage& m) {
  return to_string(m.type) + " " + std::to_string(m.correlation_id) + " " +
         std::to_string(m.body.size()) + "\n" + m.body + "\n";
}

struct DecodeResult {
  std::optional<WireMessage> message;
  size_t consumed = 0;
  std::string error;  // non-empty when message is absent

  bool ok() const { return message.has_value(); }
};

// Total decoder: any byte string yields either a frame or an error, never a
// crash. `consumed` covers the full frame on success.
inline DecodeResult decode(std::string_view buffer) {
  DecodeResult out;
  size_t header_end = buffer.find('\n');
  if (header_end == std::string_view::npos) {
    out.error = buffer.size() > kMaxHeaderBytes ? "header too long"
                                                : "missing header terminator";
    return out;
  }
  if (header_end > kMaxHeaderBytes) {
    out.error = "header too long";
    return out;
  }
  std::string_view header = buffer.substr(0, header_end);
  auto parts = split(header, ' ');
  if (parts.size() != 3) {
    out.error = "header must be '<type> <correlationId> <byte-length>'";
    return out;
  }
  auto type = type_from_string(parts[0]);
  if (!type) {
    out.error = "unknown message type '" + parts[0] + "'";
    return out;
  }
  uint64_t id = 0, len = 0;
  auto parse_u64 = [](const std::string& s, uint64_t& v) {
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc() && p == s.data() + s.size();
  };
  if (!parse_u64(parts[1], id)) {
    out.error = "bad correlation id '" + parts[1] + "'";
    return out;
  }
  if (!parse_u64(parts[2], len) || len > kMaxBodyBytes) {
    out.error = "bad byte-length '" + parts[2] + "'";
    return out;
  }
  size_t body_begin = header_end + 1;
  if (buffer.size() < body_begin + len + 1) {
    out.error = "truncated body";
    return out;
  }
  if (buffer[body_begin + len] != '\n') {
    out.error = "byte-length does not match body";
    return out;
  }
  out.message = WireMessage{*type, id, std::string(buffer.substr(body_begin, len))};
  out.consumed = body_begin + len + 1;
  return out;
}

// ---------------------------------------------------------------------------
// frame I/O over a ByteStream
// ---------------------------------------------------------------------------

struct FrameResult {
  enum class Status { Frame, Eof, Malformed };
  Status status = Status::Eof;
  WireMessage message;
  std::string error;
};

inline void write_frame(net::ByteStream& stream, const WireMessage& m) {
  stream.write_all(encode(m));
}

// Reads one frame. TimeoutError escapes only while waiting for the first
// byte (an idle connection); once a frame has started, a stall or close
// inside it is a framing violation. An orderly close between frames yields
// Eof; other violations yield Malformed.
inline FrameResult read_frame(net::ByteStream& stream,
                              std::chrono::milliseconds idle_timeout,
                              std::chrono::milliseconds frame_timeout) {
  FrameResult out;
  std::string header;
  char c;
  bool started = false;
  while (true) {
    size_t n;
    try {
      n = stream.read_some(&c, 1, started ? frame_timeout : idle_timeout);
    } catch (const net::TimeoutError&) {
      if (!started) throw;
      out.status = FrameResult::Status::Malformed;
      out.error = "timed out inside frame header";
      return out;
    }
    if (n == 0) {
      if (header.empty() && !started) return out;  // Eof
      out.status = FrameResult::Status::Malformed;
      out.error = "connection closed inside frame header";
      return out;
    }
    started = true;
    if (c == '\n') break;
    header.push_back(c);
    if (header.size() > kMaxHeaderBytes) {
      out.status = FrameResult::Status::Malformed;
      out.error = "header too long";
      return out;
    }
  }
  std::string framed = header + "\n";
  auto parts = split(header, ' ');
  uint64_t len = 0;
  bool header_ok = parts.size() == 3 && type_from_string(parts[0]).has_value();
  if (header_ok) {
    auto [p, ec] = std::from_chars(parts[2].data(),
                                   parts[2].data() + parts[2].size(), len);
    header_ok = ec == std::errc() && p == parts[2].data() + parts[2].size() &&
                len <= kMaxBodyBytes && !parts[2].empty();
  }
  if (!header_ok) {
    out.status = FrameResult::Status::Malformed;
    out.error = "bad frame header '" + header + "'";
    return out;
  }
  std::string body(len + 1, '\0');
  size_t got = 0;
  while (got < body.size()) {
    size_t n;
    try {
      n = stream.read_some(body.data() + got, body.size() - got, frame_timeout);
    } catch (const net::TimeoutError&) {
      out.status = FrameResult::Status::Malformed;
      out.error = "timed out inside frame body";
      return out;
    }
    if (n == 0) {
      out.status = FrameResult::Status::Malformed;
      out.error = "connection closed inside frame body";
      return out;
    }
    got += n;
  }
  auto decoded = decode(framed + body);
  if (!decoded.ok()) {
    out.status = FrameResult::Status::Malformed;
    out.error = decoded.error;
    return out;
  }
  out.status = FrameResult::Status::Frame;
  out.message = std::move(*decoded.message);
  return out;
}

inline FrameResult read_frame(net::ByteStream& stream,
                              std::chrono::milliseconds timeout) {
  return read_frame(stream, timeout, timeout);
}

// ---------------------------------------------------------------------------
// pattern text
// ---------------------------------------------------------------------------

struct PatternDoc {
  std::optional<rdf::Iri> graph;
  std::vector<rdf::TriplePattern> patterns;
};

struct TextDiagnostic {
  size_t line = 1;
  std::string message;

  std::string to_string() const {
    return "line " + std::to_string(line) + ": " + message;
  }
};

namespace detail {

// Parses one term in the pattern/binding grammar starting at `pos`.
inline std::optional<rdf::Term> parse_term(std::string_view text, size_t& pos,
                                           const turtle::PrefixMap& prefixes,
                                           std::string& error) {
  auto fail = [&](std::string m) {
    error = std::move(m);
    return std::nullopt;
  };
  if (pos >= text.size()) return fail("expected term");
  char c = text[pos];
  if (c == '?') {
    ++pos;
    std::string name;
    while (pos < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[pos])) ||
            text[pos] == '_'))
      name.push_back(text[pos++]);
    if (name.empty()) return fail("empty variable name");
    return rdf::Term::variable(name);
  }
  if (c == '<') {
    auto end = text.find('>', pos);
    if (end == std::string_view::npos) return fail("unterminated IRI");
    std::string value(text.substr(pos + 1, end - pos - 1));
    pos = end + 1;
    try {
      return rdf::Term::iri(rdf::Iri(value));
    } catch (const std::invalid_argument&) {
      return fail("malformed IRI <" + value + ">");
    }
  }
  if (c == '"') {
    ++pos;
    std::string lexical;
    while (true) {
      if (pos >= text.size()) return fail("unterminated literal");
      char ch = text[pos++];
      if (ch == '"') break;
      if (ch == '\\') {
        if (pos >= text.size()) return fail("unterminated literal");
        char e = text[pos++];
        switch (e) {
          case 't': lexical.push_back('\t'); break;
          case 'n': lexical.push_back('\n'); break;
          case 'r': lexical.push_back('\r'); break;
          case '"': lexical.push_back('"'); break;
          case '\\': lexical.push_back('\\'); break;
          default: return fail("invalid escape in literal");
        }
        continue;
      }
      lexical.push_back(ch);
    }
    if (pos < text.size() && text[pos] == '@') {
      ++pos;
      std::string lang;
      while (pos < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[pos])) ||
              text[pos] == '-'))
        lang.push_back(text[pos++]);
      if (lang.empty()) return fail("empty language tag");
      return rdf::Term::literal(lexical, "", lang);
    }
    if (pos + 1 < text.size() && text[pos] == '^' && text[pos + 1] == '^') {
      pos += 2;
      auto dt = parse_term(text, pos, prefixes, error);
      if (!dt) return std::nullopt;
      if (!dt->is_iri()) return fail("datatype must be an IRI");
      return rdf::Term::literal(lexical, dt->as_iri().value);
    }
    return rdf::Term::literal(lexical);
  }
  // prefixed name
  std::string label;
  while (pos < text.size() && text[pos] != ':' &&
         !std::isspace(static_cast<unsigned char>(text[pos])))
    label.push_back(text[pos++]);
  if (pos >= text.size() || text[pos] != ':')
    return fail("expected '?var', '<iri>', literal, or prefix:name");
  ++pos;
  std::string local;
  while (pos < text.size() &&
         !std::isspace(static_cast<unsigned char>(text[pos])))
    local.push_back(text[pos++]);
  auto expanded = prefixes.expand(label, local);
  if (!expanded) return fail("unknown prefix '" + label + ":'");
  try {
    return rdf::Term::iri(rdf::Iri(*expanded));
  } catch (const std::invalid_argument&) {
    return fail("prefixed name expands to malformed IRI");
  }
}

inline void skip_spaces(std::string_view text, size_t& pos) {
  while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
}

}  // namespace detail

struct PatternParse {
  std::optional<PatternDoc> doc;
  std::optional<TextDiagnostic> diagnostic;
  bool ok() const { return doc.has_value(); }
};

// Agent-facing grammar: full-scan patterns (three variables) are rejected
// here, before any decision is taken.
inline PatternParse parse_pattern_text(std::string_view text,
                                       const turtle::PrefixMap& prefixes) {
  PatternParse out;
  PatternDoc doc;
  size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (starts_with(line, "GRAPH ") || starts_with(line, "GRAPH\t")) {
      if (doc.graph || !doc.patterns.empty()) {
        out.diagnostic = TextDiagnostic{line_no, "GRAPH must be the first line"};
        return out;
      }
      size_t pos = 5;
      detail::skip_spaces(line, pos);
      std::string error;
      auto term = detail::parse_term(line, pos, prefixes, error);
      if (!term || !term->is_iri()) {
        out.diagnostic = TextDiagnostic{
            line_no, error.empty() ? "GRAPH needs an IRI" : error};
        return out;
      }
      detail::skip_spaces(line, pos);
      if (pos != line.size()) {
        out.diagnostic = TextDiagnostic{line_no, "trailing text after GRAPH"};
        return out;
      }
      doc.graph = term->as_iri();
      continue;
    }
    size_t pos = 0;
    std::string error;
    rdf::Term terms[3];
    for (int i = 0; i < 3; ++i) {
      detail::skip_spaces(line, pos);
      auto term = detail::parse_term(line, pos, prefixes, error);
      if (!term) {
        out.diagnostic = TextDiagnostic{line_no, error};
        return out;
      }
      terms[i] = *term;
    }
    detail::skip_spaces(line, pos);
    if (pos != line.size()) {
      out.diagnostic = TextDiagnostic{line_no, "trailing text after pattern"};
      return out;
    }
    rdf::TriplePattern p(terms[0], terms[1], terms[2]);
    if (!p.has_concrete_position()) {
      out.diagnostic = TextDiagnostic{
          line_no, "full-scan pattern (no concrete position) not accepted"};
      return out;
    }
    doc.patterns.push_back(std::move(p));
  }
  if (doc.patterns.empty()) {
    out.diagnostic = TextDiagnostic{line_no == 0 ? 1 : line_no, "no patterns"};
    return out;
  }
  out.doc = std::move(doc);
  return out;
}

// Canonical form (absolute IRIs); parse_pattern_text round-trips it.
inline std::string serialize_pattern_text(const PatternDoc& doc) {
  std::string out;
  if (doc.graph) out += "GRAPH " + rdf::term_text(rdf::Term::iri(*doc.graph)) + "\n";
  for (const auto& p : doc.patterns) out += rdf::pattern_text(p) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// assert/retract bodies: optional GRAPH line, then a Turtle document
// ---------------------------------------------------------------------------

struct FactsDoc {
  std::optional<rdf::Iri> graph;
  std::set<rdf::Triple> triples;
};

struct FactsParse {
  std::optional<FactsDoc> doc;
  std::string error;
  bool ok() const { return doc.has_value(); }
};

inline FactsParse parse_facts_body(std::string_view body,
                                   const turtle::PrefixMap& prefixes) {
  FactsParse out;
  FactsDoc doc;
  std::string_view rest = body;
  std::string_view first = body.substr(0, body.find('\n'));
  if (starts_with(trim(first), "GRAPH ")) {
    std::string_view line = trim(first);
    size_t pos = 5;
    detail::skip_spaces(line, pos);
    std::string error;
    auto term = detail::parse_term(line, pos, prefixes, error);
    if (!term || !term->is_iri()) {
      out.error = "GRAPH line: " + (error.empty() ? "needs an IRI" : error);
      return out;
    }
    doc.graph = term->as_iri();
    auto nl = body.find('\n');
    rest = nl == std::string_view::npos ? std::string_view{} : body.substr(nl + 1);
  }
  auto parsed = turtle::parse(rest);
  if (!parsed.ok()) {
    out.error = parsed.diagnostic->to_string();
    return out;
  }
  doc.triples = std::move(parsed.triples);
  out.doc = std::move(doc);
  return out;
}

// ---------------------------------------------------------------------------
// binding results (OK bodies for queries)
// ---------------------------------------------------------------------------

inline std::string serialize_bindings(const std::vector<rdf::Binding>& bindings) {
  std::string out;
  for (const auto& b : bindings) out += rdf::binding_text(b) + "\n";
  return out;
}

inline std::optional<std::vector<rdf::Binding>> parse_bindings(
    std::string_view text) {
  std::vector<rdf::Binding> out;
  turtle::PrefixMap no_prefixes;
  for (const auto& raw : split(text, '\n')) {
    std::string_view line = trim(raw);
    if (line.empty()) continue;
    rdf::Binding b;
    size_t pos = 0;
    while (pos < line.size()) {
      detail::skip_spaces(line, pos);
      if (pos >= line.size()) break;
      if (line[pos] != '?') return std::nullopt;
      ++pos;
      std::string name;
      while (pos < line.size() && line[pos] != '=') name.push_back(line[pos++]);
      if (pos >= line.size() || name.empty()) return std::nullopt;
      ++pos;  // '='
      std::string error;
      auto term = detail::parse_term(line, pos, no_prefixes, error);
      if (!term) return std::nullopt;
      b[name] = *term;
    }
    if (!b.empty()) out.push_back(std::move(b));
  }
  return out;
}

}  // namespace kbauthz::wire
