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

#include <gtest/gtest.h>

#include <cstdlib>

#include "ppsca/eval.hpp"
#include "ppsca/matcher.hpp"
#include "ppsca/pipeline.hpp"
#include "support.hpp"

namespace ppsca {
namespace {

using Pair = std::pair<std::size_t, std::size_t>;

// (input, record) pairs with distance < delta, by direct enumeration.
std::set<Pair> brute_tlsh(const std::vector<std::optional<TlshDigest>>& in, const SegmentedDb& db, int delta,
                          const std::string& project = "") {
  std::set<Pair> out;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (!in[i]) continue;
    for (std::size_t r = 0; r < db.records.size(); ++r) {
      const auto& rec = db.records[r];
      if (!rec.live() || !rec.tlsh || (!project.empty() && rec.project != project)) continue;
      if (tlsh_distance(*in[i], *rec.tlsh) < delta) out.insert({i, r});
    }
  }
  return out;
}

std::set<Pair> pairs_of(const std::vector<FunctionMatch>& m) {
  std::set<Pair> out;
  for (const auto& x : m) out.insert({x.input, x.record});
  return out;
}

// Inputs drawn from a target plus mutated DB bodies, so both hits and
// misses occur.
std::vector<std::optional<TlshDigest>> fixture_inputs(const test::Fixture& fx, std::size_t n, Rng& rng) {
  std::vector<std::optional<TlshDigest>> out;
  for (const auto& t : fx.targets) {
    for (const auto& f : t.functions) {
      if (out.size() >= n / 2) break;
      out.push_back(tlsh_digest(f.normalized()));
    }
  }
  while (out.size() < n) {
    const auto& r = fx.db.records[rng.below(fx.db.records.size())];
    if (!r.tlsh) continue;
    auto d = *r.tlsh;
    const auto flips = rng.range(0, 20);
    for (int f = 0; f < flips; ++f) d.set_bucket_code(rng.below(TlshDigest::kBuckets), static_cast<int>(rng.below(4)));
    out.push_back(d);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Threshold matching

TEST(MatchTlsh, EmptyInput) {
  const auto& db = test::corpus_fixture().db;
  EXPECT_TRUE(match_project_tlsh({}, db, db.projects[0], 30).empty());
  EXPECT_TRUE(match_tlsh({}, build_indexes(db).tlsh, 30).empty());
}

TEST(MatchTlsh, DbAgainstItself) {
  const auto& db = test::corpus_fixture().db;
  for (const auto& project : db.projects) {
    std::vector<std::optional<TlshDigest>> in;
    std::set<std::size_t> hashed;
    for (std::size_t r = 0; r < db.records.size(); ++r) {
      const auto& rec = db.records[r];
      if (rec.project == project && rec.live() && rec.tlsh) {
        in.push_back(rec.tlsh);
        hashed.insert(r);
      }
    }
    const auto s = match_project_tlsh(in, db, project, 30);
    EXPECT_GE(s.size(), hashed.size());
    EXPECT_EQ(distinct_records(s), hashed.size());
  }
}

// 200 inputs against three projects, index path against enumeration.
TEST(MatchTlsh, TwoHundredInputsThreeProjects) {
  const auto& fx = test::corpus_fixture();
  Rng rng(200);
  const auto in = fixture_inputs(fx, 200, rng);
  ASSERT_EQ(in.size(), 200u);
  const auto idx = build_indexes(fx.db);
  const auto all = match_tlsh(in, idx.tlsh, 30);
  std::size_t hits = 0;
  for (std::size_t p = 0; p < 3; ++p) {
    const auto& project = fx.db.projects[p * 5];
    const auto want = brute_tlsh(in, fx.db, 30, project);
    EXPECT_EQ(pairs_of(match_project_tlsh(in, fx.db, project, 30)), want);
    std::set<Pair> via_index;
    for (const auto& m : all) {
      if (fx.db.records[m.record].project == project) via_index.insert({m.input, m.record});
    }
    EXPECT_EQ(via_index, want);
    hits += want.size();
  }
  EXPECT_GT(hits, 0u);
  EXPECT_EQ(pairs_of(all), brute_tlsh(in, fx.db, 30));
}

TEST(MatchEmbedding, IndexEqualsBruteForce) {
  const auto& fx = test::corpus_fixture();
  const auto idx = build_indexes(fx.db);
  std::vector<EmbeddingVector> in;
  for (const auto& t : fx.targets) {
    for (const auto& f : t.functions) in.push_back(embed_plain(tokenize(f.normalized()), *fx.db.weights));
  }
  const auto got = match_embedding(in, idx.embedding, 0.35);
  EXPECT_EQ(got, match_embedding_bruteforce(in, fx.db, 0.35));
  EXPECT_FALSE(got.empty());
  for (const auto& m : got) {
    EXPECT_LT(m.distance, 0.35);
    EXPECT_EQ(m.distance, embedding_distance(in[m.input], fx.db.records[m.record].embedding));
  }
}

// ---------------------------------------------------------------------------
// Decision rules

TEST(Ratio, Examples) {
  EXPECT_TRUE(decide_reuse_ratio(12, 100, 0.10));
  EXPECT_FALSE(decide_reuse_ratio(10, 100, 0.10));
  EXPECT_TRUE(decide_reuse_ratio(11, 100, 0.10));
  EXPECT_FALSE(decide_reuse_ratio(0, 100, 0.10));
  EXPECT_FALSE(decide_reuse_ratio(5, 0, 0.10));
}

// Hand check: project "alpha" has 20 live records and 3 distinct matched
// records (one of them matched twice): 3/20 = 0.15 > 0.10, reused. Project
// "beta" has 40 records and 4 matches: 4/40 = 0.10, not reused.
TEST(Ratio, HandFixture) {
  std::vector<RecordEvidence> ev;
  auto add = [&](std::size_t record, const std::string& project) {
    ev.push_back({record, project, 10, 1, {"in" + std::to_string(ev.size()), "f" + std::to_string(record),
                                           EvidenceSource::tlsh, 3.0}});
  };
  add(0, "alpha");
  add(1, "alpha");
  add(1, "alpha");
  add(2, "alpha");
  for (std::size_t r = 10; r < 14; ++r) add(r, "beta");
  const ProjectCounts counts = {{"alpha", 20}, {"beta", 40}, {"gamma", 7}};
  const auto v = decide_projects(ev, counts, DecisionRule::ratio, {});
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0].project, "alpha");
  EXPECT_TRUE(v[0].reused);
  EXPECT_DOUBLE_EQ(v[0].score, 0.15);
  EXPECT_EQ(v[0].matched_functions, 3u);
  EXPECT_EQ(v[0].evidence.size(), 3u);
  EXPECT_EQ(v[1].project, "beta");
  EXPECT_FALSE(v[1].reused);
  EXPECT_DOUBLE_EQ(v[1].score, 0.10);
  EXPECT_THROW(decide_projects({{0, "nowhere", 1, 1, {}}}, counts, DecisionRule::ratio, {}), Error);
}

TEST(Weight, Examples) {
  EXPECT_EQ(function_weight(50, 1), 50.0);
  EXPECT_EQ(function_weight(100, 3), 4.0);
  EXPECT_EQ(function_weight(10, 2), 2.0);
  EXPECT_THROW(function_weight(0, 1), Error);
  EXPECT_THROW(function_weight(1, 0), Error);
}

TEST(Weight, Monotone) {
  Rng rng(5);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto loc = static_cast<std::uint32_t>(rng.range(1, 5000));
    const auto n = static_cast<std::uint32_t>(rng.range(1, 12));
    EXPECT_LT(function_weight(loc, n), function_weight(loc + 1, n));
    EXPECT_GT(function_weight(loc, n), function_weight(loc, n + 1));
    EXPECT_GT(function_weight(loc, n), 0.0);
  }
}

TEST(Weighted, Examples) {
  EXPECT_EQ(score_project_weighted({}, 100).score, 0.0);
  EXPECT_FALSE(score_project_weighted({}, 100).reused);
  SignatureRecord r;
  r.loc = 150;
  r.similar_project_count = 1;
  const auto s = score_project_weighted({&r}, 100);
  EXPECT_EQ(s.score, 150.0);
  EXPECT_TRUE(s.reused);
  r.loc = 100;
  EXPECT_FALSE(score_project_weighted({&r}, 100).reused);  // strict
}

std::vector<RecordEvidence> random_evidence(Rng& rng, std::size_t n) {
  std::vector<RecordEvidence> ev;
  for (std::size_t i = 0; i < n; ++i) {
    const auto rec = rng.below(60);
    ev.push_back({rec, "p" + std::to_string(rec % 4), static_cast<std::uint32_t>(rng.range(1, 120)),
                  static_cast<std::uint32_t>(rng.range(1, 4)), {"i" + std::to_string(i), "r" + std::to_string(rec),
                                                                EvidenceSource::embedding, rng.uniform()}});
  }
  return ev;
}

TEST(RuleProperties, AddingAMatchNeverUnreuses) {
  Rng rng(6);
  const ProjectCounts counts = {{"p0", 15}, {"p1", 15}, {"p2", 15}, {"p3", 15}};
  MatchConfig cfg;
  cfg.score_threshold = 60;
  for (int trial = 0; trial < 1500; ++trial) {
    auto ev = random_evidence(rng, static_cast<std::size_t>(rng.range(0, 12)));
    for (auto rule : {DecisionRule::ratio, DecisionRule::weighted}) {
      const auto before = generate_report("x", "m", rule, decide_projects(ev, counts, rule, cfg), {}, {});
      auto more = ev;
      const auto extra = random_evidence(rng, 1);
      more.push_back(extra[0]);
      const auto after = generate_report("x", "m", rule, decide_projects(more, counts, rule, cfg), {}, {});
      for (const auto& p : before.reused_projects()) EXPECT_TRUE(after.reused_projects().count(p));
    }
  }
}

TEST(RuleProperties, BetaSweepIsNonIncreasing) {
  Rng rng(7);
  const ProjectCounts counts = {{"p0", 15}, {"p1", 15}, {"p2", 15}, {"p3", 15}};
  for (int trial = 0; trial < 1000; ++trial) {
    const auto ev = random_evidence(rng, static_cast<std::size_t>(rng.range(0, 30)));
    std::set<std::string> prev;
    bool first = true;
    for (double beta : {10.0, 40.0, 60.0, 100.0, 150.0, 300.0}) {
      MatchConfig cfg;
      cfg.score_threshold = beta;
      const auto r = generate_report("x", "m", DecisionRule::weighted,
                                     decide_projects(ev, counts, DecisionRule::weighted, cfg), {}, {});
      const auto now = r.reused_projects();
      if (!first) { EXPECT_TRUE(std::includes(prev.begin(), prev.end(), now.begin(), now.end())); }
      prev = now;
      first = false;
    }
  }
}

TEST(Config, Validation) {
  MatchConfig c;
  EXPECT_NO_THROW(c.validate());
  c.tlsh_threshold = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.reuse_ratio = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.embedding_radius = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.score_threshold = -1;
  EXPECT_THROW(c.validate(), ConfigError);
}

// ---------------------------------------------------------------------------
// End-to-end verdicts against a recomputation from raw distances

TEST(EndToEnd, WeightedVerdictsEqualRawRecomputation) {
  const auto& fx = test::corpus_fixture();
  const ClientDb cdb(fx.db);
  AnalysisOptions o;
  o.filters = false;
  PlainEmbedder embedder(*fx.db.weights);
  for (const auto& t : fx.targets) {
    const auto report = analyze_embedding(t, cdb, embedder, o);
    std::map<std::string, double> score;
    std::set<std::size_t> used;
    for (const auto& f : t.functions) {
      const auto tok = tokenize(f.normalized());
      if (!embeddable(tok, fx.db.model.vocab)) continue;
      const auto q = embed_plain(tok, *fx.db.weights);
      for (std::size_t r = 0; r < fx.db.records.size(); ++r) {
        const auto& rec = fx.db.records[r];
        if (!rec.live() || rec.embedding.dim() == 0 || used.count(r)) continue;
        if (embedding_distance(q, rec.embedding) < 0.35) {
          used.insert(r);
          score[rec.project] += static_cast<double>(rec.loc) / std::pow(5.0, rec.similar_project_count - 1.0);
        }
      }
    }
    std::set<std::string> want;
    for (const auto& [p, s] : score) {
      if (s > 100.0) want.insert(p);
    }
    EXPECT_EQ(report.reused_projects(), want) << t.id;
    for (const auto& p : report.projects) {
      EXPECT_NEAR(p.score, score.at(p.project), 1e-9);
      EXPECT_EQ(p.matched_functions, p.evidence.size());
    }
    EXPECT_EQ(report.projects.size(), score.size());
  }
}

TEST(EndToEnd, RatioVerdictsEqualRawRecomputation) {
  const auto& fx = test::corpus_fixture();
  const ClientDb cdb(fx.db);
  for (const auto& t : fx.targets) {
    const auto report = analyze_tlsh(t, cdb, {});
    std::vector<std::optional<TlshDigest>> in;
    for (const auto& f : t.functions) in.push_back(tlsh_digest(f.normalized()));
    std::map<std::string, std::set<std::size_t>> matched;
    for (const auto& [i, r] : brute_tlsh(in, fx.db, 30)) matched[fx.db.records[r].project].insert(r);
    std::set<std::string> want;
    for (const auto& [p, recs] : matched) {
      if (static_cast<double>(recs.size()) / static_cast<double>(fx.db.count(p)) > 0.10) want.insert(p);
    }
    EXPECT_EQ(report.reused_projects(), want) << t.id;
    for (const auto& p : report.projects) {
      EXPECT_EQ(p.matched_functions, matched.at(p.project).size());
      EXPECT_TRUE(std::binary_search(fx.db.projects.begin(), fx.db.projects.end(), p.project));
    }
  }
}

// ---------------------------------------------------------------------------
// Reports

TEST(Report, EmptyVerdicts) {
  const auto r = generate_report("empty", "plain-tlsh", DecisionRule::ratio, {}, to_json(MatchConfig{}), {});
  const auto j = nlohmann::json::parse(r.to_json().dump());
  EXPECT_TRUE(j.at("projects").is_array());
  EXPECT_TRUE(j.at("projects").empty());
  EXPECT_TRUE(r.reused_projects().empty());
}

TEST(Report, KeyOrderIsStable) {
  const auto& fx = test::corpus_fixture();
  const ClientDb cdb(fx.db);
  const auto j = analyze_tlsh(fx.targets[0], cdb, {}).to_json();
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"input", "mode", "rule", "projects", "config", "stats", "timings_ms"}));
  ASSERT_FALSE(j["projects"].empty());
  keys.clear();
  for (const auto& [k, v] : j["projects"][0].items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"project", "reused", "score", "matched_functions", "db_functions",
                                            "evidence"}));
  EXPECT_TRUE(j["timings_ms"].contains("total"));
}

TEST(Report, RoundTrips) {
  const auto& fx = test::corpus_fixture();
  const ClientDb cdb(fx.db);
  AnalysisOptions o;
  PlainEmbedder embedder(*fx.db.weights);
  for (const auto& t : fx.targets) {
    for (const auto& r : {analyze_tlsh(t, cdb, {}), analyze_embedding(t, cdb, embedder, o)}) {
      const auto text = r.to_json().dump(2);
      const auto back = ScaReport::from_json(nlohmann::ordered_json::parse(text));
      EXPECT_EQ(back.to_json().dump(2), text);
      EXPECT_EQ(back.projects, r.projects);
      EXPECT_EQ(back.reused_projects(), r.reused_projects());
    }
  }
  EXPECT_THROW(ScaReport::from_json(nlohmann::ordered_json::parse(R"({"input":"x"})")), ParseError);
  EXPECT_THROW(ScaReport::from_json(nlohmann::ordered_json::parse(
                   R"({"input":"x","mode":"m","rule":"r","projects":[{"project":"p","reused":true,"score":1,
                   "matched_functions":1,"db_functions":1,"evidence":[{"input":"a","db":"b","source":"smell",
                   "distance":0}]}],"config":{},"stats":{}})")),
               ParseError);
}

// Reports for the default corpus, timings excluded. Set
// PPSCA_UPDATE_GOLDEN=1 to rewrite the files after a verified change.
TEST(Report, GoldenFiles) {
  const auto& fx = test::corpus_fixture();
  const ClientDb cdb(fx.db);
  AnalysisOptions o;
  PlainEmbedder embedder(*fx.db.weights);
  const std::vector<std::pair<std::string, ScaReport>> cases = {
      {"golden_plain_tlsh.json", analyze_tlsh(fx.targets[0], cdb, {})},
      {"golden_plain_embed.json", analyze_embedding(fx.targets[0], cdb, embedder, o)},
  };
  for (const auto& [file, report] : cases) {
    const auto text = report.to_json(false).dump(2) + "\n";
    if (std::getenv("PPSCA_UPDATE_GOLDEN")) write_file_text(test::data_path(file), text);
    EXPECT_EQ(text, read_file_text(test::data_path(file))) << file;
  }
}

// ---------------------------------------------------------------------------
// Accuracy

TEST(Accuracy, MicroAveraged) {
  const std::map<std::string, std::set<std::string>> truth = {{"t0", {"a", "b"}}, {"t1", {"c"}}, {"t2", {}}};
  const std::map<std::string, std::set<std::string>> pred = {{"t0", {"a", "x"}}, {"t2", {"y"}}};
  const auto acc = score_predictions(pred, truth);
  EXPECT_EQ(acc.tp, 1u);
  EXPECT_EQ(acc.fp, 2u);
  EXPECT_EQ(acc.fn, 2u);
  EXPECT_DOUBLE_EQ(acc.precision(), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(acc.recall(), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(acc.f1(), 2.0 / 6.0);
  EXPECT_EQ(score_predictions({}, {}).f1(), 1.0);
}

}  // namespace
}  // namespace ppsca
