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

// Signed credential documents standing in for client certificates. A
// credential binds a subject string ("CN=g1, role=grounder") to a validity
// window under an issuer's Ed25519 key; verification checks the signature
// against a configured trust anchor, the validity window, and the presence
// of the role annotation in the subject.

#include <sodium.h>

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kbauthz/engine.hpp"
#include "kbauthz/util.hpp"

namespace kbauthz::authn {

inline void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw std::runtime_error("libsodium initialization failed");
}

struct Credential {
  std::string subject;     // key=value pairs, must include CN and role
  std::string issuer;
  std::string not_before;  // RFC 3339 UTC
  std::string not_after;
  std::string public_key_id;  // hex of the issuer's Ed25519 public key
  std::vector<unsigned char> signature;

  // The byte string the signature covers: the five field values joined by
  // newlines, in serialization order.
  std::string canonical_bytes() const {
    return subject + "\n" + issuer + "\n" + not_before + "\n" + not_after +
           "\n" + public_key_id + "\n";
  }

  // Canonical text form: one field per line in fixed order, then the base64
  // signature line.
  std::string serialize() const {
    ensure_sodium();
    std::string b64(sodium_base64_encoded_len(signature.size(),
                                              sodium_base64_VARIANT_ORIGINAL),
                    '\0');
    sodium_bin2base64(b64.data(), b64.size(), signature.data(), signature.size(),
                      sodium_base64_VARIANT_ORIGINAL);
    b64.resize(std::char_traits<char>::length(b64.c_str()));
    return "subject=" + subject + "\nissuer=" + issuer + "\nnotBefore=" +
           not_before + "\nnotAfter=" + not_after + "\npublicKeyId=" +
           public_key_id + "\n" + b64 + "\n";
  }

  static std::optional<Credential> parse(std::string_view text) {
    ensure_sodium();
    auto lines = split(text, '\n');
    // allow a trailing empty line
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.size() != 6) return std::nullopt;
    auto field = [&](size_t i, std::string_view name) -> std::optional<std::string> {
      std::string prefix = std::string(name) + "=";
      if (!starts_with(lines[i], prefix)) return std::nullopt;
      return lines[i].substr(prefix.size());
    };
    Credential c;
    auto subject = field(0, "subject");
    auto issuer = field(1, "issuer");
    auto nb = field(2, "notBefore");
    auto na = field(3, "notAfter");
    auto pkid = field(4, "publicKeyId");
    if (!subject || !issuer || !nb || !na || !pkid) return std::nullopt;
    c.subject = *subject;
    c.issuer = *issuer;
    c.not_before = *nb;
    c.not_after = *na;
    c.public_key_id = *pkid;
    std::vector<unsigned char> sig(lines[5].size());
    size_t sig_len = 0;
    if (sodium_base642bin(sig.data(), sig.size(), lines[5].data(),
                          lines[5].size(), nullptr, &sig_len, nullptr,
                          sodium_base64_VARIANT_ORIGINAL) != 0)
      return std::nullopt;
    sig.resize(sig_len);
    c.signature = std::move(sig);
    return c;
  }
};

struct TrustAnchor {
  std::string issuer;
  std::vector<unsigned char> public_key;  // Ed25519, 32 bytes
};

struct SubjectFields {
  std::string cn;
  std::string role;
};

// Parses "CN=g1, role=grounder" style subjects. Returns nullopt when no CN
// field is present; the role field may be empty.
inline std::optional<SubjectFields> parse_subject(std::string_view subject) {
  SubjectFields out;
  bool has_cn = false;
  for (const auto& part : split(subject, ',')) {
    auto kv = trim(part);
    auto eq = kv.find('=');
    if (eq == std::string_view::npos) continue;
    auto key = trim(kv.substr(0, eq));
    auto value = trim(kv.substr(eq + 1));
    if (key == "CN") {
      out.cn = std::string(value);
      has_cn = true;
    } else if (key == "role") {
      out.role = std::string(value);
    }
  }
  if (!has_cn || out.cn.empty()) return std::nullopt;
  return out;
}

struct VerifyOutcome {
  bool ok = false;
  authz::ReasonCode code = authz::ReasonCode::BAD_CREDENTIAL;
  std::string detail;
  SubjectFields fields;
};

// Full credential verification: known issuer, matching key id, valid
// signature, current time inside the validity window, subject carrying a
// role annotation. Every failure is a distinct reason code for the audit
// trail.
inline VerifyOutcome verify(const Credential& cred,
                            const std::vector<TrustAnchor>& anchors,
                            std::time_t now) {
  ensure_sodium();
  VerifyOutcome out;
  const TrustAnchor* anchor = nullptr;
  for (const auto& a : anchors)
    if (a.issuer == cred.issuer) { anchor = &a; break; }
  if (!anchor) {
    out.detail = "unknown issuer " + cred.issuer;
    return out;
  }
  if (anchor->public_key.size() != crypto_sign_PUBLICKEYBYTES ||
      to_hex(anchor->public_key.data(), anchor->public_key.size()) !=
          cred.public_key_id) {
    out.detail = "public key id does not match the issuer anchor";
    return out;
  }
  if (cred.signature.size() != crypto_sign_BYTES) {
    out.detail = "bad signature length";
    return out;
  }
  std::string payload = cred.canonical_bytes();
  if (crypto_sign_verify_detached(
          cred.signature.data(),
          reinterpret_cast<const unsigned char*>(payload.data()), payload.size(),
          anchor->public_key.data()) != 0) {
    out.detail = "signature verification failed";
    return out;
  }
  auto nb = parse_rfc3339(cred.not_before);
  auto na = parse_rfc3339(cred.not_after);
  if (!nb || !na) {
    out.detail = "unparseable validity timestamps";
    return out;
  }
  if (now < *nb || now > *na) {
    out.code = authz::ReasonCode::EXPIRED;
    out.detail = "credential not valid at " + format_rfc3339(now);
    return out;
  }
  auto fields = parse_subject(cred.subject);
  if (!fields) {
    out.detail = "subject lacks CN field";
    return out;
  }
  if (fields->role.empty()) {
    out.code = authz::ReasonCode::NO_ROLE_ANNOTATION;
    out.detail = "subject lacks role annotation";
    return out;
  }
  out.ok = true;
  out.code = authz::ReasonCode::OK;
  out.fields = *fields;
  return out;
}

// Test/operator CA with a deterministic Ed25519 keypair: the same seed
// always yields the same anchor, which keeps credential fixtures stable.
class Authority {
 public:
  static Authority from_seed(std::string issuer,
                             const std::vector<unsigned char>& seed32) {
    ensure_sodium();
    if (seed32.size() != crypto_sign_SEEDBYTES)
      throw std::invalid_argument("authority seed must be 32 bytes");
    Authority a;
    a.issuer_ = std::move(issuer);
    a.pk_.resize(crypto_sign_PUBLICKEYBYTES);
    a.sk_.resize(crypto_sign_SECRETKEYBYTES);
    crypto_sign_seed_keypair(a.pk_.data(), a.sk_.data(), seed32.data());
    return a;
  }

  static Authority from_seed_hex(std::string issuer, std::string_view seed_hex) {
    auto bytes = from_hex(seed_hex);
    if (!bytes || bytes->size() != crypto_sign_SEEDBYTES)
      throw std::invalid_argument("authority seed must be 64 hex characters");
    return from_seed(std::move(issuer), *bytes);
  }

  static Authority random(std::string issuer) {
    ensure_sodium();
    std::vector<unsigned char> seed(crypto_sign_SEEDBYTES);
    randombytes_buf(seed.data(), seed.size());
    return from_seed(std::move(issuer), seed);
  }

  static Authority from_secret_key_hex(std::string issuer,
                                       std::string_view sk_hex) {
    ensure_sodium();
    auto sk = from_hex(sk_hex);
    if (!sk || sk->size() != crypto_sign_SECRETKEYBYTES)
      throw std::invalid_argument("bad secret key");
    Authority a;
    a.issuer_ = std::move(issuer);
    a.sk_ = *sk;
    a.pk_.resize(crypto_sign_PUBLICKEYBYTES);
    crypto_sign_ed25519_sk_to_pk(a.pk_.data(), a.sk_.data());
    return a;
  }

  const std::string& issuer() const { return issuer_; }
  TrustAnchor anchor() const { return TrustAnchor{issuer_, pk_}; }
  std::string public_key_hex() const { return to_hex(pk_.data(), pk_.size()); }
  std::string secret_key_hex() const { return to_hex(sk_.data(), sk_.size()); }

  Credential issue(std::string_view cn, std::string_view role,
                   std::string not_before, std::string not_after) const {
    Credential c;
    c.subject = "CN=" + std::string(cn);
    if (!role.empty()) c.subject += ", role=" + std::string(role);
    c.issuer = issuer_;
    c.not_before = std::move(not_before);
    c.not_after = std::move(not_after);
    c.public_key_id = public_key_hex();
    std::string payload = c.canonical_bytes();
    c.signature.resize(crypto_sign_BYTES);
    crypto_sign_detached(c.signature.data(), nullptr,
                         reinterpret_cast<const unsigned char*>(payload.data()),
                         payload.size(), sk_.data());
    return c;
  }

 private:
  std::string issuer_;
  std::vector<unsigned char> pk_;
  std::vector<unsigned char> sk_;
};

}  // namespace kbauthz::authn
