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

// kbauthz — operator entry point.
//
//   kbauthz ca init --out DIR            mint a trust anchor + signing key
//   kbauthz ca issue --cn N --role R     issue an agent credential
//   kbauthz serve --config FILE          run the enforcement point
//   kbauthz scenario run FILE            run a scripted scenario on loopback
//   kbauthz profile show IRI --kb FILE   print a profile graph as Turtle
//   kbauthz audit grep --reason C FILE   filter an audit log by reason code
//
// Exit codes: 0 success, 1 usage, 2 configuration, 3 runtime failure.
// stdout is machine-parseable; diagnostics go to stderr.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "kbauthz/audit.hpp"
#include "kbauthz/config.hpp"
#include "kbauthz/credential.hpp"
#include "kbauthz/engine.hpp"
#include "kbauthz/server.hpp"
#include "kbauthz/session.hpp"
#include "kbauthz/sim.hpp"

namespace {

using namespace kbauthz;

volatile std::sig_atomic_t g_interrupted = 0;

void on_sigint(int) { g_interrupted = 1; }

std::string read_file_or_die(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

std::map<std::string, std::string> read_kv_file(const std::string& path) {
  std::map<std::string, std::string> out;
  for (const auto& line : split(read_file_or_die(path), '\n')) {
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

authn::TrustAnchor load_anchor(const std::string& path) {
  auto kv = read_kv_file(path);
  if (!kv.count("issuer") || !kv.count("publicKey"))
    throw ConfigError("anchor file " + path + " needs issuer= and publicKey=");
  auto pk = from_hex(kv["publicKey"]);
  if (!pk) throw ConfigError("anchor file " + path + " has a bad publicKey");
  return authn::TrustAnchor{kv["issuer"], *pk};
}

int cmd_ca_init(const std::string& out_dir, const std::string& issuer,
                const std::string& seed_hex) {
  std::filesystem::create_directories(out_dir);
  authn::Authority ca = seed_hex.empty()
                            ? authn::Authority::random(issuer)
                            : authn::Authority::from_seed_hex(issuer, seed_hex);
  auto dir = std::filesystem::path(out_dir);
  write_file((dir / "anchor.txt").string(),
             "issuer=" + ca.issuer() + "\npublicKey=" + ca.public_key_hex() + "\n");
  write_file((dir / "ca.key").string(),
             "issuer=" + ca.issuer() + "\nsecretKey=" + ca.secret_key_hex() + "\n");
  std::cout << "anchor=" << (dir / "anchor.txt").string() << "\n";
  std::cout << "key=" << (dir / "ca.key").string() << "\n";
  return 0;
}

int cmd_ca_issue(const std::string& ca_dir, const std::string& cn,
                 const std::string& role, const std::string& not_before,
                 const std::string& not_after, std::string out_file) {
  auto kv = read_kv_file((std::filesystem::path(ca_dir) / "ca.key").string());
  if (!kv.count("issuer") || !kv.count("secretKey"))
    throw ConfigError("ca key file needs issuer= and secretKey=");
  auto ca = authn::Authority::from_secret_key_hex(kv["issuer"], kv["secretKey"]);
  auto cred = ca.issue(cn, role, not_before, not_after);
  if (out_file.empty()) out_file = cn + ".cred";
  write_file(out_file, cred.serialize());
  std::cout << "credential=" << out_file << "\n";
  std::cout << "subject=" << cred.subject << "\n";
  return 0;
}

int cmd_serve(cfg::Config config) {
  auto ontology = authz::load_ontology(read_file_or_die(config.ontology_path));
  std::vector<authz::ExceptionRule> exceptions;
  if (!config.exceptions_path.empty())
    exceptions = authz::load_exceptions(read_file_or_die(config.exceptions_path));
  std::vector<authn::TrustAnchor> anchors;
  if (!config.anchor_path.empty()) anchors.push_back(load_anchor(config.anchor_path));

  rdf::Dataset kb;
  authz::EngineConfig engine_cfg;
  engine_cfg.wildcard_sentinel = config.wildcard_sentinel;
  engine_cfg.rbac_only = (config.mode == "rbac-only");
  authz::Engine engine(kb, ontology, exceptions, engine_cfg);
  WallClock clock;
  audit::AuditLog log(config.audit_path);
  ServiceConfig service_cfg;
  service_cfg.strict_termination = config.strict_termination;
  service_cfg.default_graph = config.default_graph;
  service_cfg.agent_base = config.agent_base;
  ImfService service(engine, anchors, log, clock, service_cfg);

  auto listener = net::listen_tcp(net::parse_endpoint(config.listen));
  std::cerr << "kbauthz: listening on " << config.listen << " (mode "
            << config.mode << ")\n";
  net::Server server(service, std::move(listener));
  server.start();

  std::signal(SIGINT, on_sigint);
  std::signal(SIGTERM, on_sigint);
  while (!g_interrupted)
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  std::cerr << "kbauthz: shutting down\n";
  server.stop();
  log.flush();
  return 0;
}

int cmd_scenario_run(const std::string& file, const std::string& mode,
                     int64_t seed, const std::string& out_dir) {
  auto scenario = sim::load_scenario(file);
  sim::RunOptions options;
  options.out_dir = out_dir;
  if (!mode.empty()) options.mode_override = mode;
  if (seed >= 0) options.seed_override = static_cast<uint64_t>(seed);
  auto report = sim::run_scenario(scenario, options);
  std::cout << report.to_text();
  return 0;
}

int cmd_profile_show(const std::string& agent_iri, const std::string& kb_path) {
  auto graphs = sim::read_snapshot(kb_path);
  rdf::Iri profile_graph;
  try {
    profile_graph = authz::profile_graph_name(rdf::Iri(agent_iri));
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("bad agent IRI: ") + e.what());
  }
  auto it = graphs.find(profile_graph);
  if (it == graphs.end()) {
    std::cerr << "no profile\n";
    return 3;
  }
  turtle::PrefixMap prefixes;
  prefixes.declare("authz", std::string(authz::vocab::kNamespace));
  std::cout << turtle::serialize(it->second, prefixes);
  return 0;
}

int cmd_audit_grep(const std::string& reason, const std::string& file) {
  auto result = audit::read_audit(file);
  if (!result.ok())
    throw std::runtime_error("audit file " + file + " line " +
                             std::to_string(result.error->line) + ": " +
                             result.error->message);
  for (const auto& r : result.records)
    if (r.reason == reason) std::cout << audit::format_record(r) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"least-privilege authorization for knowledge-base agents"};
  app.require_subcommand(1);

  // ca
  auto* ca = app.add_subcommand("ca", "trust anchor and credential tooling");
  ca->require_subcommand(1);
  auto* ca_init = ca->add_subcommand("init", "create a trust anchor and key");
  std::string init_out = "ca", init_issuer = "kbauthz-test-ca", init_seed;
  ca_init->add_option("--out", init_out, "output directory");
  ca_init->add_option("--issuer", init_issuer, "issuer name");
  ca_init->add_option("--seed", init_seed, "32-byte hex seed (deterministic keys)");
  auto* ca_issue = ca->add_subcommand("issue", "issue an agent credential");
  std::string issue_cn, issue_role, issue_ca = "ca", issue_out;
  std::string issue_nb = "2025-01-01T00:00:00Z", issue_na = "2036-01-01T00:00:00Z";
  ca_issue->add_option("--cn", issue_cn, "subject common name")->required();
  ca_issue->add_option("--role", issue_role, "subject role annotation")->required();
  ca_issue->add_option("--ca", issue_ca, "directory from ca init");
  ca_issue->add_option("--out", issue_out, "credential output file");
  ca_issue->add_option("--not-before", issue_nb, "validity start (RFC 3339 UTC)");
  ca_issue->add_option("--not-after", issue_na, "validity end (RFC 3339 UTC)");

  // serve
  auto* serve = app.add_subcommand("serve", "run the enforcement point");
  std::string serve_config, serve_listen, serve_audit;
  serve->add_option("--config", serve_config, "config file (or KBAUTHZ_CONFIG)");
  serve->add_option("--listen", serve_listen, "host:port override");
  serve->add_option("--audit", serve_audit, "audit log path override");

  // scenario
  auto* scenario = app.add_subcommand("scenario", "scenario tooling");
  scenario->require_subcommand(1);
  auto* scenario_run = scenario->add_subcommand("run", "run a scenario file");
  std::string run_file, run_mode, run_out = "out";
  int64_t run_seed = -1;
  scenario_run->add_option("file", run_file, "scenario .ttl file")->required();
  scenario_run->add_option("--mode", run_mode, "hybrid or rbac-only")
      ->check(CLI::IsMember({"hybrid", "rbac-only"}));
  scenario_run->add_option("--seed", run_seed, "seed override");
  scenario_run->add_option("--out", run_out, "artifact output directory");

  // profile
  auto* profile = app.add_subcommand("profile", "profile inspection");
  profile->require_subcommand(1);
  auto* profile_show = profile->add_subcommand("show", "print a profile graph");
  std::string show_agent, show_kb;
  profile_show->add_option("agent", show_agent, "agent IRI")->required();
  profile_show->add_option("--kb", show_kb, "KB snapshot file")->required();

  // audit
  auto* audit_cmd = app.add_subcommand("audit", "audit log tooling");
  audit_cmd->require_subcommand(1);
  auto* audit_grep = audit_cmd->add_subcommand("grep", "filter by reason code");
  std::string grep_reason, grep_file;
  audit_grep->add_option("--reason", grep_reason, "reason code")->required();
  audit_grep->add_option("file", grep_file, "audit .tsv file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (ca_init->parsed()) return cmd_ca_init(init_out, init_issuer, init_seed);
    if (ca_issue->parsed())
      return cmd_ca_issue(issue_ca, issue_cn, issue_role, issue_nb, issue_na,
                          issue_out);
    if (serve->parsed()) {
      if (serve_config.empty()) {
        if (const char* env = std::getenv("KBAUTHZ_CONFIG")) serve_config = env;
      }
      if (serve_config.empty())
        throw UsageError("serve needs --config or KBAUTHZ_CONFIG");
      auto config = cfg::load_config(serve_config);
      cfg::apply_env(config);
      if (!serve_listen.empty()) config.listen = serve_listen;
      if (!serve_audit.empty()) config.audit_path = serve_audit;
      return cmd_serve(std::move(config));
    }
    if (scenario_run->parsed())
      return cmd_scenario_run(run_file, run_mode, run_seed, run_out);
    if (profile_show->parsed()) return cmd_profile_show(show_agent, show_kb);
    if (audit_grep->parsed()) return cmd_audit_grep(grep_reason, grep_file);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
