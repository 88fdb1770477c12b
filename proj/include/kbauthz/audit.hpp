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

// Append-only audit trail: one tab-separated line per decision or lifecycle
// event, nine fields in fixed order. Field values are escaped so a record is
// always exactly one line; read(write(r)) is the identity.

#include <cstdint>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kbauthz/util.hpp"

namespace kbauthz::audit {

struct AuditRecord {
  std::string timestamp;     // RFC 3339 UTC
  std::string agent;         // agent IRI or "-" before identification
  uint64_t session_id = 0;
  std::string action;        // query | assert | retract | hello | register | terminate
  std::string target_graph;  // graph IRI or "-"
  std::string pattern;       // first pattern, canonical text, or "-"
  std::string outcome;       // permit | deny
  std::string reason;        // exact ReasonCode string
  std::string fired_rule;

  bool operator==(const AuditRecord&) const = default;
};

namespace detail {

inline std::string escape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline std::optional<std::string> unescape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out.push_back(s[i]);
      continue;
    }
    if (++i >= s.size()) return std::nullopt;
    switch (s[i]) {
      case '\\': out.push_back('\\'); break;
      case 't': out.push_back('\t'); break;
      case 'n': out.push_back('\n'); break;
      case 'r': out.push_back('\r'); break;
      default: return std::nullopt;
    }
  }
  return out;
}

}  // namespace detail

inline std::string format_record(const AuditRecord& r) {
  using detail::escape_field;
  return escape_field(r.timestamp) + "\t" + escape_field(r.agent) + "\t" +
         std::to_string(r.session_id) + "\t" + escape_field(r.action) + "\t" +
         escape_field(r.target_graph) + "\t" + escape_field(r.pattern) + "\t" +
         escape_field(r.outcome) + "\t" + escape_field(r.reason) + "\t" +
         escape_field(r.fired_rule);
}

struct AuditReadError {
  size_t line = 0;  // 1-based
  std::string message;
};

inline std::optional<AuditRecord> parse_record(std::string_view line,
                                               std::string* error = nullptr) {
  auto fields = split(line, '\t');
  if (fields.size() != 9) {
    if (error) *error = "expected 9 tab-separated fields, got " +
                        std::to_string(fields.size());
    return std::nullopt;
  }
  AuditRecord r;
  std::optional<std::string> parts[9];
  for (size_t i = 0; i < 9; ++i) {
    parts[i] = detail::unescape_field(fields[i]);
    if (!parts[i]) {
      if (error) *error = "bad escape sequence in field " + std::to_string(i + 1);
      return std::nullopt;
    }
  }
  r.timestamp = *parts[0];
  r.agent = *parts[1];
  try {
    size_t used = 0;
    r.session_id = std::stoull(*parts[2], &used);
    if (used != parts[2]->size()) throw std::invalid_argument("trailing junk");
  } catch (const std::exception&) {
    if (error) *error = "bad session id '" + *parts[2] + "'";
    return std::nullopt;
  }
  r.action = *parts[3];
  r.target_graph = *parts[4];
  r.pattern = *parts[5];
  r.outcome = *parts[6];
  r.reason = *parts[7];
  r.fired_rule = *parts[8];
  return r;
}

struct ReadResult {
  std::vector<AuditRecord> records;
  std::optional<AuditReadError> error;
  bool ok() const { return !error.has_value(); }
};

inline ReadResult read_audit_text(std::string_view text) {
  ReadResult out;
  size_t line_no = 0;
  for (const auto& line : split(text, '\n')) {
    ++line_no;
    if (line.empty()) continue;
    std::string message;
    auto rec = parse_record(line, &message);
    if (!rec) {
      out.error = AuditReadError{line_no, message};
      return out;
    }
    out.records.push_back(std::move(*rec));
  }
  return out;
}

inline ReadResult read_audit(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    ReadResult out;
    out.error = AuditReadError{0, "cannot open " + path};
    return out;
  }
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return read_audit_text(text);
}

// Append-only sink. Records are kept in memory and, when a path is given,
// streamed to the file with a flush per line so a crash loses at most the
// line being written.
class AuditLog {
 public:
  AuditLog() = default;

  explicit AuditLog(const std::string& path) : path_(path) {
    file_.open(path, std::ios::binary | std::ios::trunc);
    if (!file_) throw ConfigError("cannot open audit log " + path);
  }

  void append(const AuditRecord& r) {
    std::lock_guard lock(mu_);
    records_.push_back(r);
    if (file_.is_open()) {
      file_ << format_record(r) << "\n";
      file_.flush();
    }
  }

  std::vector<AuditRecord> records() const {
    std::lock_guard lock(mu_);
    return records_;
  }

  size_t size() const {
    std::lock_guard lock(mu_);
    return records_.size();
  }

  const std::string& path() const { return path_; }

  void flush() {
    std::lock_guard lock(mu_);
    if (file_.is_open()) file_.flush();
  }

 private:
  mutable std::mutex mu_;
  std::string path_;
  std::ofstream file_;
  std::vector<AuditRecord> records_;
};

}  // namespace kbauthz::audit
