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

// sca: corpus generation, DB build and export, analysis, attack simulation,
// benchmarks and triple dealing.
//
// Exit codes: 0 success, 1 analysis or usage error, 2 connectivity or
// protocol error.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "ppsca/config.hpp"
#include "ppsca/corpus.hpp"
#include "ppsca/eval.hpp"
#include "ppsca/net.hpp"
#include "ppsca/pipeline.hpp"
#include "ppsca/service.hpp"

namespace {

using namespace ppsca;
namespace fs = std::filesystem;

// Config file first, then flags in the order given.
struct ConfigFlags {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;

  void attach(CLI::App* app, const std::vector<std::pair<std::string, std::string>>& flags) {
    app->add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
    for (const auto& [flag, key] : flags) {
      app->add_option_function<std::string>(flag, [this, key = key](const std::string& v) { overrides.emplace_back(key, v); },
                                            "config key " + key);
    }
    app->add_option_function<std::vector<std::string>>(
        "--set",
        [this](const std::vector<std::string>& kvs) {
          for (const auto& kv : kvs) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
            overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
          }
        },
        "override any config key (key=value)");
  }

  RunConfig resolve() const {
    RunConfig c;
    if (!config_path.empty()) c.apply(read_file_text(config_path));
    for (const auto& [k, v] : overrides) c.set(k, v);
    c.validate();
    return c;
  }
};

const std::vector<std::pair<std::string, std::string>> kCommonFlags = {
    {"--seed", "seed"},        {"--mode", "mode"},       {"--db", "db"},
    {"--input", "input"},      {"--listing", "listing"}, {"--report", "report"},
    {"--server", "server"},    {"--triples", "triples"}, {"--delta", "delta"},
    {"--epsilon", "epsilon"},  {"--rho", "rho"},         {"--beta", "beta"},
    {"--gamma", "gamma"},      {"--theta", "theta"},     {"--delta-prime", "delta_prime"},
    {"--theta1", "theta1"},    {"--theta2", "theta2"},   {"--batch-size", "batch_size"},
    {"--dealer-seed", "dealer_seed"}, {"--model-seed", "model_seed"}, {"--frac-bits", "frac_bits"},
};

void print_timings(const std::string& what, const StageTimings& t) {
  std::cerr << what << ":";
  for (const auto& [k, v] : t) std::cerr << ' ' << k << '=' << v << "ms";
  std::cerr << '\n';
}

SegmentedDb load_db(const std::string& path, bool need_weights) {
  if (path.empty()) throw ConfigError("--db is required");
  auto imported = import_db(path);
  if (need_weights && !imported.db.weights) {
    throw ConfigError("this needs a server-audience DB (with the model matrix): " + path);
  }
  return std::move(imported.db);
}

void write_or_print(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_file_text(path, text);
  }
}

// ---------------------------------------------------------------------------

int cmd_gen_corpus(const fs::path& out, const CorpusConfig& cc) {
  Stopwatch sw;
  const auto corpus = generate_corpus(cc);
  write_corpus(corpus, out);
  std::size_t functions = 0;
  for (const auto& p : corpus.manifest.projects) functions += p.functions;
  std::cerr << "wrote " << corpus.projects.size() << " projects (" << functions << " functions), "
            << corpus.targets.size() << " targets, " << corpus.manifest.reuse.size() << " reuse edges to "
            << out.string() << " in " << sw.lap() << "ms\n";
  return 0;
}

int cmd_db_build(const RunConfig& cfg, const fs::path& corpus_dir, const std::string& out) {
  if (out.empty()) throw ConfigError("--out is required");
  const auto oss = fs::is_directory(corpus_dir / "oss") ? corpus_dir / "oss" : corpus_dir;
  StageTimings t;
  Stopwatch sw;
  const auto snaps = load_snapshots(oss);
  t.emplace_back("load", sw.lap());
  auto weights = ModelWeights::generate(cfg.model());
  t.emplace_back("model", sw.lap());
  BuildStats stats;
  std::vector<Diagnostic> diags;
  auto records = generate_signatures_incremental(snaps, weights, &stats, &diags);
  t.emplace_back("signatures", sw.lap());
  auto db = segment_database(std::move(records), cfg.model(), cfg.analysis.match.segment_params());
  db.weights = std::move(weights);
  t.emplace_back("segment", sw.lap());
  export_db(db, out, Audience::server);
  t.emplace_back("write", sw.lap());
  for (const auto& d : diags) std::cerr << "warning: " << d.file << ": " << d.message << '\n';
  std::cerr << "commits=" << stats.commits << " files_analyzed=" << stats.files_analyzed
            << " functions_hashed=" << stats.functions_hashed << " listings=" << stats.listings_analyzed
            << " projects=" << db.projects.size() << " live_records=" << db.live_records() << '\n';
  print_timings("db-build", t);
  return 0;
}

int cmd_db_export(const std::string& in, const std::string& audience, const std::string& out) {
  if (out.empty()) throw ConfigError("--out is required");
  const auto db = load_db(in, parse_audience(audience) == Audience::server);
  export_db(db, out, parse_audience(audience));
  std::cerr << "exported " << audience << " DB to " << out << '\n';
  return 0;
}

int cmd_analyze(const RunConfig& cfg) {
  if (cfg.input.empty()) throw ConfigError("--input is required");
  std::vector<Diagnostic> diags;
  Stopwatch sw;
  const auto target = load_target(cfg.input, cfg.listing.empty() ? std::nullopt : std::optional<fs::path>(cfg.listing),
                                  &diags);
  const double ingest_ms = sw.lap();
  for (const auto& d : diags) std::cerr << "warning: " << d.file << ": " << d.message << '\n';

  ScaReport report;
  const auto search = cfg.approximate_index ? SearchMode::approximate : SearchMode::exact;
  switch (cfg.analysis.mode) {
    case Mode::plain_tlsh: {
      const auto db = load_db(cfg.db, false);
      ClientDb cdb(db, search);
      report = analyze_tlsh(target, cdb, cfg.analysis);
      break;
    }
    case Mode::plain_embed: {
      const auto db = load_db(cfg.db, true);
      ClientDb cdb(db, search);
      PlainEmbedder emb(*db.weights);
      report = analyze_embedding(target, cdb, emb, cfg.analysis);
      break;
    }
    case Mode::sbb: {
      if (cfg.server.empty()) throw ConfigError("--mode sbb requires --server");
      auto ch = net::tcp_connect(net::parse_address(cfg.server));
      RemoteBucketService svc(*ch);
      report = analyze_sbb(target, svc, cfg.analysis);
      ch->send(MsgType::bye);
      break;
    }
    case Mode::mpc: {
      if (cfg.server.empty()) throw ConfigError("--mode mpc requires --server");
      if (cfg.triples.empty()) throw ConfigError("--mode mpc requires --triples (party 0 file)");
      auto store = load_triples(cfg.triples, 0);
      auto ch = net::tcp_connect(net::parse_address(cfg.server));
      const auto db = download_db(*ch).db;
      ClientDb cdb(db, search);
      RemoteMpcEmbedder emb(*ch, db.model, std::move(store), cfg.batch_size, cfg.frac_bits);
      report = analyze_embedding(target, cdb, emb, cfg.analysis);
      ch->send(MsgType::bye);
      break;
    }
  }
  report.config = cfg.to_json();
  report.timings_ms.insert(report.timings_ms.begin(), {"ingest", ingest_ms});
  for (auto& [k, v] : report.timings_ms) {
    if (k == "total") v += ingest_ms;
  }
  write_or_print(cfg.report, report.to_json().dump(2) + "\n");
  std::cerr << target.id << ": reused";
  for (const auto& p : report.reused_projects()) std::cerr << ' ' << p;
  std::cerr << '\n';
  return 0;
}

int cmd_attack_sim(const RunConfig& cfg, const fs::path& corpus_dir, const std::string& grid_spec,
                   const std::string& out, const std::string& transcript) {
  const auto db = load_db(cfg.db, false);
  if (!transcript.empty()) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& [session, queries] : read_sbb_transcript(transcript)) {
      const auto res = attack_infer(queries, db, cfg.delta_prime, cfg.analysis.match.reuse_ratio);
      nlohmann::ordered_json s;
      s["session"] = session;
      s["queries"] = queries.size();
      s["predicted"] = res.predicted;
      s["ranking"] = nlohmann::ordered_json::array();
      for (const auto& [p, n] : res.ranking) {
        if (n > 0) s["ranking"].push_back({{"project", p}, {"hits", n}});
      }
      j.push_back(std::move(s));
    }
    std::cout << j.dump(2) << '\n';
  }
  if (corpus_dir.empty()) return 0;
  const auto [gammas, deltas] = parse_grid_spec(grid_spec);
  std::vector<DigestInput> inputs;
  const auto manifest = read_manifest(corpus_dir);
  for (const auto& t : manifest.targets) inputs.push_back(digest_input(load_target(corpus_dir / "targets" / t)));
  Stopwatch sw;
  const auto grid = leakage_grid(db, inputs, manifest.truth, gammas, deltas, cfg.analysis.sbb, cfg.analysis.match);
  write_or_print(out, grid.to_csv());
  std::cerr << "leakage grid " << gammas.size() << "x" << deltas.size() << " in " << sw.lap() << "ms\n";
  return 0;
}

int cmd_bench(const RunConfig& cfg, const fs::path& corpus_dir, const std::string& out) {
  const auto db = load_db(cfg.db, true);
  ClientDb cdb(db, cfg.approximate_index ? SearchMode::approximate : SearchMode::exact);
  const auto manifest = read_manifest(corpus_dir);
  std::ostringstream csv;
  csv << "target,mode,stage,ms\n";
  PlainEmbedder plain(*db.weights);
  LocalMpcEmbedder mpc_emb(*db.weights, cfg.dealer_seed, cfg.batch_size, cfg.frac_bits);
  SbbServer sbb(db);
  double mpc_filtered = 0, mpc_unfiltered = 0, plain_total = 0;
  for (const auto& name : manifest.targets) {
    const auto t = load_target(corpus_dir / "targets" / name);
    auto emit = [&](const std::string& mode, const ScaReport& r) {
      for (const auto& [k, v] : r.timings_ms) csv << t.id << ',' << mode << ',' << k << ',' << v << '\n';
      return r.timing("total");
    };
    auto o = cfg.analysis;
    o.mode = Mode::plain_tlsh;
    emit("plain-tlsh", analyze_tlsh(t, cdb, o));
    o.mode = Mode::sbb;
    sbb.begin_session();
    emit("sbb", analyze_sbb(t, sbb, o));
    o.mode = Mode::plain_embed;
    plain_total += emit("plain-embed", analyze_embedding(t, cdb, plain, o));
    o.mode = Mode::mpc;
    mpc_filtered += emit("mpc", analyze_embedding(t, cdb, mpc_emb, o));
    o.filters = false;
    mpc_unfiltered += emit("mpc-unfiltered", analyze_embedding(t, cdb, mpc_emb, o));
  }
  const double ratio = mpc_filtered / mpc_unfiltered;
  csv << "all,mpc/mpc-unfiltered,ratio," << ratio << '\n';
  csv << "all,mpc/plain-embed,ratio," << mpc_filtered / plain_total << '\n';
  write_or_print(out, csv.str());
  std::cerr << "filtered/unfiltered mpc time ratio " << ratio << ", mpc/plain-embed " << mpc_filtered / plain_total
            << '\n';
  return 0;
}

int cmd_dealer(const RunConfig& cfg, const fs::path& out, std::size_t functions, const std::string& db_path) {
  auto model = cfg.model();
  if (!db_path.empty()) model = import_db(db_path).db.model;
  if (functions == 0) throw ConfigError("--functions must be positive");
  Stopwatch sw;
  write_triple_files(out, cfg.dealer_seed, mpc::consumption_plan(model, functions, cfg.batch_size));
  std::cerr << "wrote " << triple_path(out, cfg.dealer_seed, 0).string() << " and "
            << triple_path(out, cfg.dealer_seed, 1).string() << " in " << sw.lap() << "ms\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"privacy-preserving software composition analysis client"};
  app.require_subcommand(1);

  CorpusConfig cc;
  std::string corpus_out;
  auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic OSS corpus with planted reuse");
  gen->add_option("--out", corpus_out, "output directory")->required();
  gen->add_option("--seed", cc.seed, "corpus seed");
  gen->add_option("--projects", cc.n_projects, "number of OSS projects");
  gen->add_option("--functions", cc.fns_per_project, "functions per project");
  gen->add_option("--targets", cc.n_targets, "number of target codebases");
  gen->add_option("--reuse-scale", cc.reuse_scale, "0 disables planted reuse");

  ConfigFlags build_flags;
  std::string corpus_dir, out;
  auto* build = app.add_subcommand("db-build", "build the signature DB from project commit snapshots");
  build_flags.attach(build, kCommonFlags);
  build->add_option("--corpus", corpus_dir, "corpus directory (or an oss/ tree)")->required();
  build->add_option("--out", out, "DB file (server audience)")->required();

  std::string export_in, audience = "client";
  auto* exp = app.add_subcommand("db-export", "re-export a DB for the client or server");
  exp->add_option("--db", export_in, "server DB file")->required();
  exp->add_option("--audience", audience, "client|server")->check(CLI::IsMember({"client", "server"}));
  exp->add_option("--out", out, "output file")->required();

  ConfigFlags analyze_flags;
  auto* analyze = app.add_subcommand("analyze", "analyze a codebase and write a report");
  analyze_flags.attach(analyze, kCommonFlags);
  analyze->add_flag_callback("--no-filters", [&] { analyze_flags.overrides.emplace_back("filters", "false"); },
                             "embed every source function");

  ConfigFlags attack_flags;
  std::string grid = "gammas=0,10,50,150,300;deltas=50,100,125,150", transcript;
  auto* attack = app.add_subcommand("attack-sim", "server-side leakage attack on SBB queries");
  attack_flags.attach(attack, kCommonFlags);
  attack->add_option("--corpus", corpus_dir, "corpus directory for the leakage grid");
  attack->add_option("--grid", grid, "gammas=..;deltas=..");
  attack->add_option("--out", out, "CSV output (default stdout)");
  attack->add_option("--transcript", transcript, "server transcript to attack")->check(CLI::ExistingFile);

  ConfigFlags bench_flags;
  auto* bench = app.add_subcommand("bench", "per-stage wall time of every mode");
  bench_flags.attach(bench, kCommonFlags);
  bench->add_option("--corpus", corpus_dir, "corpus directory")->required();
  bench->add_option("--out", out, "CSV output (default stdout)");
  bench->add_flag_callback("--no-filters", [&] { bench_flags.overrides.emplace_back("filters", "false"); });

  ConfigFlags dealer_flags;
  std::size_t functions = 0;
  std::string dealer_db;
  auto* dealer = app.add_subcommand("dealer", "generate Beaver triples for one MPC session");
  dealer_flags.attach(dealer, {{"--dealer-seed", "dealer_seed"}, {"--batch-size", "batch_size"},
                               {"--model-dim", "model_dim"}, {"--model-vocab", "model_vocab"},
                               {"--activation", "activation"}});
  dealer->add_option("--out", out, "triple directory")->required();
  dealer->add_option("--functions", functions, "largest number of functions the session may embed")->required();
  dealer->add_option("--db", dealer_db, "take the model shape from this DB");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (*gen) return cmd_gen_corpus(corpus_out, cc);
    if (*build) return cmd_db_build(build_flags.resolve(), corpus_dir, out);
    if (*exp) return cmd_db_export(export_in, audience, out);
    if (*analyze) return cmd_analyze(analyze_flags.resolve());
    if (*attack) return cmd_attack_sim(attack_flags.resolve(), corpus_dir, grid, out, transcript);
    if (*bench) return cmd_bench(bench_flags.resolve(), corpus_dir, out);
    if (*dealer) return cmd_dealer(dealer_flags.resolve(), out, functions, dealer_db);
  } catch (const ProtocolError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
