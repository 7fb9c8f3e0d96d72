// Copyright 2026 The ppsca Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// scad: the vendor-side server. Connections are served one at a time;
// later ones wait in the listen backlog.

#include <CLI11.hpp>

#include <iostream>

#include "ppsca/net.hpp"
#include "ppsca/service.hpp"

int main(int argc, char** argv) {
  using namespace ppsca;
  CLI::App app{"privacy-preserving SCA server"};
  app.require_subcommand(1);

  std::string db_path, listen = "127.0.0.1:7070", triples_dir, transcript;
  int frac_bits = mpc::kFracBits;
  std::size_t max_connections = 0;
  auto* serve = app.add_subcommand("serve", "serve DB downloads, SBB buckets and MPC sessions");
  serve->add_option("--db", db_path, "server-audience DB file")->required()->check(CLI::ExistingFile);
  serve->add_option("--listen", listen, "host:port (port 0 picks one)");
  serve->add_option("--triples", triples_dir, "directory of party-1 triple files");
  serve->add_option("--transcript", transcript, "append SBB queries to this file");
  serve->add_option("--frac-bits", frac_bits, "fixed-point fraction bits");
  serve->add_option("--max-connections", max_connections, "exit after this many connections (0: never)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    auto imported = import_db(db_path);
    if (imported.audience != Audience::server || !imported.db.weights) {
      std::cerr << "error: scad needs a server-audience DB\n";
      return 1;
    }
    const auto& db = imported.db;
    mpc::TripleProvider provider = [](const mpc::Hello&) -> mpc::TripleStore {
      throw ProtocolError("server has no triple directory");
    };
    if (!triples_dir.empty()) provider = directory_triple_provider(triples_dir);
    ScaServer server(db, provider, frac_bits);
    if (!transcript.empty()) server.set_transcript_file(transcript);

    net::TcpListener listener(net::parse_address(listen));
    std::cout << "listening on " << net::parse_address(listen).host << ':' << listener.port() << std::endl;
    for (std::size_t n = 0; max_connections == 0 || n < max_connections; ++n) {
      auto ch = listener.accept();
      const bool ok = server.serve(*ch, &std::cerr);
      std::cerr << "connection " << n << (ok ? " done" : " failed") << '\n';
    }
  } catch (const ProtocolError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
